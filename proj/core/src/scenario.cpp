#include "magtube/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace magtube {

namespace {

// ============================================================
// Text helpers
// ============================================================

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_items(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

// Shortest decimal form that parses back to the same double.
std::string fmt(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += fmt(v[i]);
  }
  return out;
}

std::string fmt_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(v[i]);
  }
  return out;
}

double parse_double(const std::string& v, const std::string& where) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() ||
      !std::isfinite(out))
    throw std::invalid_argument(where + ": not a finite number: '" + v + "'");
  return out;
}

long long parse_int(const std::string& v, const std::string& where) {
  long long out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw std::invalid_argument(where + ": not an integer: '" + v + "'");
  return out;
}

// ============================================================
// Raw key-value tree with strict bookkeeping
// ============================================================

struct RawConfig {
  std::string origin;
  std::map<std::string, std::map<std::string, std::string>> kv;
};

RawConfig lex(const std::string& text, const std::string& origin) {
  RawConfig raw;
  raw.origin = origin;
  std::istringstream in(text);
  std::string line, section;
  std::vector<std::string> dups;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string where = origin + ":" + std::to_string(lineno);
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw std::invalid_argument(where + ": empty section name");
      raw.kv[section];
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(where + ": expected 'key = value'");
    if (section.empty())
      throw std::invalid_argument(where + ": key outside any [section]");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument(where + ": empty key name");
    auto ins = raw.kv[section].emplace(key, val);
    if (!ins.second) dups.push_back(section + "." + key);
  }
  if (!dups.empty())
    throw std::invalid_argument(origin + ": duplicate keys: " +
                                join(dups, ", "));
  return raw;
}

// Tracks which keys the schema asked for; anything present but never asked
// for is unknown and reported all at once.
class Reader {
 public:
  explicit Reader(const RawConfig& raw) : raw_(raw) {}

  bool has(const std::string& sec, const std::string& key) {
    asked_[sec].insert(key);
    auto s = raw_.kv.find(sec);
    return s != raw_.kv.end() && s->second.count(key) > 0;
  }

  std::string str(const std::string& sec, const std::string& key,
                  const std::string& def) {
    asked_[sec].insert(key);
    auto s = raw_.kv.find(sec);
    if (s == raw_.kv.end()) return def;
    auto k = s->second.find(key);
    return k == s->second.end() ? def : k->second;
  }

  double num(const std::string& sec, const std::string& key, double def) {
    if (!has(sec, key)) return def;
    return parse_double(raw_.kv.at(sec).at(key), where(sec, key));
  }

  int integer(const std::string& sec, const std::string& key, int def) {
    if (!has(sec, key)) return def;
    long long v = parse_int(raw_.kv.at(sec).at(key), where(sec, key));
    if (v < -(1LL << 31) || v > (1LL << 31) - 1)
      throw std::invalid_argument(where(sec, key) + ": out of int range");
    return static_cast<int>(v);
  }

  std::uint64_t u64(const std::string& sec, const std::string& key,
                    std::uint64_t def) {
    if (!has(sec, key)) return def;
    const std::string& v = raw_.kv.at(sec).at(key);
    std::uint64_t out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw std::invalid_argument(where(sec, key) +
                                  ": not an unsigned integer: '" + v + "'");
    return out;
  }

  std::vector<double> list(const std::string& sec, const std::string& key,
                           std::vector<double> def) {
    if (!has(sec, key)) return def;
    std::vector<double> out;
    for (const std::string& item : split_items(raw_.kv.at(sec).at(key)))
      out.push_back(parse_double(item, where(sec, key)));
    return out;
  }

  std::vector<int> ilist(const std::string& sec, const std::string& key,
                         std::vector<int> def) {
    if (!has(sec, key)) return def;
    std::vector<int> out;
    for (const std::string& item : split_items(raw_.kv.at(sec).at(key)))
      out.push_back(static_cast<int>(parse_int(item, where(sec, key))));
    return out;
  }

  Vec3 vec3(const std::string& sec, const std::string& key, Vec3 def) {
    if (!has(sec, key)) return def;
    auto items = split_items(raw_.kv.at(sec).at(key));
    if (items.size() != 3)
      throw std::invalid_argument(where(sec, key) +
                                  ": expected three components");
    return Vec3{parse_double(items[0], where(sec, key)),
                parse_double(items[1], where(sec, key)),
                parse_double(items[2], where(sec, key))};
  }

  std::string where(const std::string& sec, const std::string& key) const {
    return raw_.origin + ": [" + sec + "] " + key;
  }

  // Everything present in the file but never consumed by the schema.
  void reject_unknown() const {
    std::vector<std::string> unknown;
    for (const auto& [sec, keys] : raw_.kv) {
      auto asked = asked_.find(sec);
      if (asked == asked_.end()) {
        unknown.push_back("[" + sec + "]");
        continue;
      }
      for (const auto& [key, val] : keys)
        if (!asked->second.count(key)) unknown.push_back(sec + "." + key);
    }
    if (!unknown.empty())
      throw std::invalid_argument(raw_.origin + ": unknown keys: " +
                                  join(unknown, ", "));
  }

 private:
  const RawConfig& raw_;
  std::map<std::string, std::set<std::string>> asked_;
};

const char* kind_name(DeformationKind k) {
  switch (k) {
    case DeformationKind::None: return "none";
    case DeformationKind::Bump: return "bump";
    case DeformationKind::Wiggle: return "wiggle";
  }
  return "none";
}

DeformationKind kind_from(const std::string& s, const std::string& where) {
  if (s == "none") return DeformationKind::None;
  if (s == "bump") return DeformationKind::Bump;
  if (s == "wiggle") return DeformationKind::Wiggle;
  throw std::invalid_argument(where + ": unknown curve kind '" + s +
                              "' (none | bump | wiggle)");
}

bool wants(const Scenario& sc, const char* name) {
  return std::find(sc.experiments.begin(), sc.experiments.end(), name) !=
         sc.experiments.end();
}

bool uses_tube(const Scenario& sc) {
  return wants(sc, "theorem1") || wants(sc, "bracketing") ||
         wants(sc, "theorem2");
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

// ============================================================
// Sub-config builders
// ============================================================

CrossSection SectionConfig::build() const {
  if (shape == "disk") return CrossSection::disk(radius);
  if (shape == "square") return CrossSection::square(half_side);
  throw std::invalid_argument("unknown cross-section shape '" + shape + "'");
}

Grid2 Grid2Config::build() const {
  Grid2 g;
  int n = static_cast<int>(std::llround(2.0 * extent / h));
  g.lo = {-extent, -extent};
  g.hi = {extent, extent};
  g.n = {n, n};
  g.validate();
  return g;
}

Grid3 Grid3Config::build() const {
  Grid3 g;
  int n = static_cast<int>(std::llround(2.0 * extent / h));
  int nz = static_cast<int>(std::llround(2.0 * height / h));
  g.lo = {-extent, -extent, -height};
  g.hi = {extent, extent, height};
  g.n = {n, n, nz};
  g.validate();
  return g;
}

// ============================================================
// Canonical dump and digest
// ============================================================

const std::vector<std::string>& known_experiments() {
  static const std::vector<std::string> names = {
      "gauge", "edge", "lemma", "theorem1", "bracketing", "theorem2"};
  return names;
}

std::string Scenario::canonical_dump() const {
  std::ostringstream os;
  os << "[curve]\n";
  os << "kind = " << kind_name(curve.kind) << "\n";
  os << "amplitude = " << fmt(curve.amplitude) << "\n";
  os << "half_width = " << fmt(curve.half_width) << "\n";
  os << "direction = " << fmt(curve.direction) << "\n";
  os << "arches = " << curve.arches << "\n";
  os << "harmonic3 = " << fmt(curve.harmonic3) << "\n";
  os << "samples_per_unit = " << curve.samples_per_unit << "\n";
  os << "half_length = " << fmt(curve.half_length) << "\n";
  os << "tail_margin = " << fmt(curve.tail_margin) << "\n";
  os << "\n[section]\n";
  os << "shape = " << section.shape << "\n";
  if (section.shape == "square")
    os << "half_side = " << fmt(section.half_side) << "\n";
  else
    os << "radius = " << fmt(section.radius) << "\n";
  os << "\n[potential]\n";
  if (potential.from_epsilon)
    os << "epsilon = " << fmt(potential.epsilon()) << "\n";
  else
    os << "depth = " << fmt(potential.depth) << "\n";
  os << "\n[field]\n";
  os << "b0 = " << fmt(field.B0.x()) << " " << fmt(field.B0.y()) << " "
     << fmt(field.B0.z()) << "\n";
  os << "s0 = " << fmt(field.s0) << "\n";
  os << "rho1 = " << fmt(field.rho1) << "\n";
  os << "rho2 = " << fmt(field.rho2) << "\n";
  os << "\n[grid2]\n";
  os << "extent = " << fmt(grid2.extent) << "\n";
  os << "h = " << fmt(grid2.h) << "\n";
  os << "\n[grid3]\n";
  os << "extent = " << fmt(grid3.extent) << "\n";
  os << "height = " << fmt(grid3.height) << "\n";
  os << "h = " << fmt(grid3.h) << "\n";
  os << "\n[experiments]\n";
  os << "run = " << join(experiments, " ") << "\n";
  os << "tol = " << fmt(solver_tol) << "\n";
  os << "max_iter = " << solver_max_iter << "\n";
  os << "\n[gauge]\n";
  os << "sizes = " << fmt_list(gauge.sizes) << "\n";
  os << "extent_factor = " << fmt(gauge.extent_factor) << "\n";
  os << "\n[lemma]\n";
  os << "btilde = " << fmt_list(lemma.btilde) << "\n";
  os << "radii = " << fmt_list(lemma.radii) << "\n";
  os << "nr = " << lemma.nr << "\n";
  os << "\n[theorem1]\n";
  os << "lengths = " << fmt_list(theorem1.lengths) << "\n";
  os << "weyl_k = " << fmt_list(theorem1.weyl_k) << "\n";
  os << "\n[bracketing]\n";
  os << "alpha = " << fmt(bracketing.alpha) << "\n";
  os << "\n[sweep]\n";
  os << "b3 = " << fmt_list(sweep.b3) << "\n";
  os << "mode = " << sweep.mode << "\n";
  os << "\n[output]\n";
  os << "dir = " << out_dir << "\n";
  os << "seed = " << seed << "\n";
  os << "threads = " << threads << "\n";
  return os.str();
}

std::uint64_t Scenario::hash() const {
  // FNV-1a over the canonical dump, skipping keys that cannot change any
  // computed number: the output location and the thread count (every
  // reduction in the solver stack is order-deterministic).
  std::uint64_t h = 1469598103934665603ULL;
  std::istringstream in(canonical_dump());
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("dir = ", 0) == 0 || line.rfind("threads = ", 0) == 0)
      continue;
    for (unsigned char c : line) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= static_cast<unsigned char>('\n');
    h *= 1099511628211ULL;
  }
  return h;
}

std::string Scenario::hash_hex() const {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = hash();
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

// ============================================================
// Validation
// ============================================================

void validate_scenario(const Scenario& sc) {
  // --- single-field ranges -----------------------------------------
  require(sc.curve.amplitude >= 0.0, "[curve] amplitude must be nonnegative");
  require(sc.curve.half_width > 0.0, "[curve] half_width must be positive");
  require(sc.curve.arches >= 1, "[curve] arches must be at least 1");
  if (sc.curve.kind != DeformationKind::Wiggle)
    require(sc.curve.harmonic3 == 0.0,
            "[curve] harmonic3 requires kind = wiggle");
  require(std::abs(sc.curve.s0 - sc.field.s0) <= 1e-15 * sc.field.s0,
          "curve.s0 must mirror field.s0 (set only [field] s0)");

  require(sc.section.shape == "disk" || sc.section.shape == "square",
          "[section] shape must be disk or square");
  if (sc.section.shape == "disk")
    require(sc.section.radius > 0.0, "[section] radius must be positive");
  else
    require(sc.section.half_side > 0.0,
            "[section] half_side must be positive");

  require(sc.potential.depth > 0.0,
          sc.potential.from_epsilon ? "[potential] epsilon must be positive"
                                    : "[potential] depth must be positive");

  require(sc.field.s0 > 0.0, "[field] s0 must be positive");
  require(sc.field.rho1 > sc.field.s0 && sc.field.rho2 > sc.field.rho1 &&
              sc.field.rho2 < 2.0 * sc.field.s0,
          "[field] cutoff radii must satisfy s0 < rho1 < rho2 < 2 s0");

  auto check_grid = [](double extent, double h, const char* who) {
    require(extent > 0.0 && h > 0.0,
            std::string(who) + ": extent and h must be positive");
    double cells = 2.0 * extent / h;
    require(std::abs(cells - std::llround(cells)) < 1e-9 &&
                std::llround(cells) >= 3,
            std::string(who) +
                ": box must be a whole number (>= 3) of cells: 2*extent/h = " +
                fmt(cells));
  };
  check_grid(sc.grid2.extent, sc.grid2.h, "[grid2]");
  check_grid(sc.grid3.extent, sc.grid3.h, "[grid3] (transverse)");
  check_grid(sc.grid3.height, sc.grid3.h, "[grid3] (axial)");

  for (const std::string& name : sc.experiments)
    require(std::find(known_experiments().begin(), known_experiments().end(),
                      name) != known_experiments().end(),
            "unknown experiment '" + name + "'");

  require(sc.solver_tol > 0.0, "[experiments] tol must be positive");
  require(sc.solver_max_iter >= 10, "[experiments] max_iter must be >= 10");

  require(!sc.gauge.sizes.empty(), "[gauge] sizes must not be empty");
  for (int n : sc.gauge.sizes)
    require(n >= 8, "[gauge] sizes entries must be >= 8");
  require(sc.gauge.extent_factor > 2.0,
          "[gauge] extent_factor must exceed 2 (the vector potentials must "
          "vanish identically beyond |x3| = 2 s0 inside the box)");

  require(!sc.lemma.btilde.empty(), "[lemma] btilde must not be empty");
  for (std::size_t i = 0; i < sc.lemma.btilde.size(); ++i) {
    require(sc.lemma.btilde[i] > 0.0, "[lemma] btilde must be positive");
    if (i) require(sc.lemma.btilde[i] > sc.lemma.btilde[i - 1],
                   "[lemma] btilde must be strictly increasing");
  }
  require(!sc.lemma.radii.empty(), "[lemma] radii must not be empty");
  for (double r : sc.lemma.radii)
    require(r > 0.0, "[lemma] radii must be positive");
  require(sc.lemma.nr >= 50, "[lemma] nr must be >= 50");

  require(!sc.theorem1.lengths.empty(),
          "[theorem1] lengths must not be empty");
  for (std::size_t i = 0; i < sc.theorem1.lengths.size(); ++i) {
    require(sc.theorem1.lengths[i] > 0.0,
            "[theorem1] lengths must be positive");
    if (i) require(sc.theorem1.lengths[i] > sc.theorem1.lengths[i - 1],
                   "[theorem1] lengths must be strictly increasing");
  }
  require(!sc.theorem1.weyl_k.empty(), "[theorem1] weyl_k must not be empty");
  for (std::size_t i = 0; i < sc.theorem1.weyl_k.size(); ++i) {
    require(sc.theorem1.weyl_k[i] >= 1, "[theorem1] weyl_k must be >= 1");
    if (i) require(sc.theorem1.weyl_k[i] > sc.theorem1.weyl_k[i - 1],
                   "[theorem1] weyl_k must be strictly increasing");
  }

  require(sc.bracketing.alpha > 0.0, "[bracketing] alpha must be positive");

  require(sc.sweep.mode == "warm" || sc.sweep.mode == "cold" ||
              sc.sweep.mode == "both",
          "[sweep] mode must be warm, cold, or both");

  require(!sc.out_dir.empty(), "[output] dir must not be empty");
  require(sc.threads >= 1, "[output] threads must be >= 1");

  // --- cross-section / experiment consistency ----------------------
  if (wants(sc, "theorem2")) {
    require(!sc.sweep.b3.empty() && sc.sweep.b3.front() == 0.0,
            "[sweep] b3 must start at 0");
    for (std::size_t i = 1; i < sc.sweep.b3.size(); ++i)
      require(sc.sweep.b3[i] > sc.sweep.b3[i - 1],
              "[sweep] b3 must be strictly increasing");
  }

  if (uses_tube(sc)) {
    require(sc.grid2.extent == sc.grid3.extent && sc.grid2.h == sc.grid3.h,
            "[grid2] must equal the transverse part of [grid3]: the planar "
            "threshold e and the tube operator must be discretized on the "
            "same transverse grid for their comparison to carry meaning");
    require(sc.field.rho2 <= sc.grid3.extent &&
                sc.field.rho2 <= sc.grid3.height,
            "[grid3] box must contain the closed field support ball: need "
            "extent and height >= rho2 = " +
                fmt(sc.field.rho2));

    // Geometric gates, probed on the actual sampled tube.
    FrameField frame = build_curve(sc.curve);
    CrossSection cs = sc.section.build();
    TubeReport rep = validate_tube(frame, cs);
    require(rep.injective,
            "tube self-intersects: r_max * sup curvature = " +
                fmt(rep.sup_r_gamma) + " (needs < 1)");
    if (wants(sc, "theorem2"))
      require(rep.confined,
              "deformed tube leaves the uniform-field ball: the absorption "
              "experiment requires Ω ∩ (ℝ²×{|x₃| ≤ s₀/√2}) ⊂ B(0, s₀); "
              "sampled violation radius " +
                  fmt(rep.confinement_radius) + " > s0 = " + fmt(sc.field.s0));
  }
}

// ============================================================
// Parsing
// ============================================================

Scenario parse_scenario_text(const std::string& text,
                             const std::string& origin) {
  RawConfig raw = lex(text, origin);
  Reader rd(raw);
  Scenario sc;

  // [field] first: s0 is shared with the curve.
  sc.field.B0 = rd.vec3("field", "b0", Vec3{0.3, -0.2, 1.0});
  sc.field.s0 = rd.num("field", "s0", 1.0);
  sc.field.rho1 = rd.num("field", "rho1", 1.05 * sc.field.s0);
  sc.field.rho2 = rd.num("field", "rho2", 1.95 * sc.field.s0);

  sc.curve.kind =
      kind_from(rd.str("curve", "kind", "none"), rd.where("curve", "kind"));
  sc.curve.amplitude = rd.num("curve", "amplitude", 0.15);
  sc.curve.half_width = rd.num("curve", "half_width", 0.7);
  sc.curve.direction = rd.num("curve", "direction", 0.0);
  sc.curve.arches = rd.integer("curve", "arches", 2);
  sc.curve.harmonic3 = rd.num("curve", "harmonic3", 0.0);
  sc.curve.samples_per_unit = rd.integer("curve", "samples_per_unit", 400);
  sc.curve.half_length = rd.num("curve", "half_length", 60.0);
  sc.curve.tail_margin = rd.num("curve", "tail_margin", 0.5);
  sc.curve.s0 = sc.field.s0;
  if (sc.curve.kind != DeformationKind::Wiggle) {
    if (rd.has("curve", "arches"))
      throw std::invalid_argument(rd.where("curve", "arches") +
                                  ": requires kind = wiggle");
    if (rd.has("curve", "harmonic3"))
      throw std::invalid_argument(rd.where("curve", "harmonic3") +
                                  ": requires kind = wiggle");
  }

  sc.section.shape = rd.str("section", "shape", "disk");
  if (sc.section.shape == "disk" && rd.has("section", "half_side"))
    throw std::invalid_argument(rd.where("section", "half_side") +
                                ": requires shape = square");
  if (sc.section.shape == "square" && rd.has("section", "radius"))
    throw std::invalid_argument(rd.where("section", "radius") +
                                ": requires shape = disk");
  sc.section.radius = rd.num("section", "radius", 1.0);
  sc.section.half_side = rd.num("section", "half_side", 1.0);

  bool has_depth = rd.has("potential", "depth");
  bool has_eps = rd.has("potential", "epsilon");
  if (has_depth && has_eps)
    throw std::invalid_argument(
        raw.origin + ": [potential] give either depth or epsilon, not both");
  if (has_eps) {
    double eps = rd.num("potential", "epsilon", 0.1);
    require(eps > 0.0, "[potential] epsilon must be positive");
    sc.potential.depth = 1.0 / eps;
    sc.potential.from_epsilon = true;
  } else {
    sc.potential.depth = rd.num("potential", "depth", 10.0);
    sc.potential.from_epsilon = false;
  }

  sc.grid2.extent = rd.num("grid2", "extent", 6.0);
  sc.grid2.h = rd.num("grid2", "h", 0.1);
  sc.grid3.extent = rd.num("grid3", "extent", sc.grid2.extent);
  sc.grid3.height = rd.num("grid3", "height", 6.5);
  sc.grid3.h = rd.num("grid3", "h", sc.grid2.h);

  std::vector<std::string> run =
      split_items(rd.str("experiments", "run", ""));
  std::set<std::string> seen;
  for (const std::string& name : run) {
    if (std::find(known_experiments().begin(), known_experiments().end(),
                  name) == known_experiments().end())
      throw std::invalid_argument(
          rd.where("experiments", "run") + ": unknown experiment '" + name +
          "' (known: " + join(known_experiments(), ", ") + ")");
    seen.insert(name);
  }
  for (const std::string& name : known_experiments())
    if (seen.count(name)) sc.experiments.push_back(name);

  sc.solver_tol = rd.num("experiments", "tol", 1e-8);
  sc.solver_max_iter = rd.integer("experiments", "max_iter", 600);

  sc.gauge.sizes = rd.ilist("gauge", "sizes", {64, 128});
  sc.gauge.extent_factor = rd.num("gauge", "extent_factor", 2.5);

  sc.lemma.btilde =
      rd.list("lemma", "btilde", {10.0, 20.0, 40.0, 80.0, 160.0});
  sc.lemma.radii = rd.list("lemma", "radii", {0.8, 1.0, 1.4});
  sc.lemma.nr = rd.integer("lemma", "nr", 1600);

  sc.theorem1.lengths = rd.list("theorem1", "lengths", {20.0, 40.0, 80.0});
  sc.theorem1.weyl_k = rd.ilist("theorem1", "weyl_k", {8, 16, 32, 64});

  sc.bracketing.alpha = rd.num("bracketing", "alpha", 1.4);

  sc.sweep.b3 = rd.list("sweep", "b3", {0.0});
  sc.sweep.mode = rd.str("sweep", "mode", "warm");

  sc.out_dir = rd.str("output", "dir", "out");
  sc.seed = rd.u64("output", "seed", 1);
  sc.threads = rd.integer("output", "threads", 1);

  rd.reject_unknown();
  validate_scenario(sc);
  return sc;
}

Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::invalid_argument("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), path);
}

std::uint64_t derive_seed(std::uint64_t base, const std::string& label) {
  std::uint64_t h = 1469598103934665603ULL ^ base;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  // One scramble round decorrelates nearby bases and labels.
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

}  // namespace magtube
