#include "magtube/cache.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "magtube/report.hpp"

namespace fs = std::filesystem;

namespace magtube {

namespace {

void check_name(const std::string& name) {
  if (name.empty()) throw std::invalid_argument("cache: empty artifact name");
  for (char c : name) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
              (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
    if (!ok)
      throw std::invalid_argument("cache: artifact name must match "
                                  "[A-Za-z0-9._-]: '" + name + "'");
  }
}

std::vector<std::int64_t> grid_header(const Grid3& g) {
  return {g.n[0], g.n[1], g.n[2]};
}

bool header_matches(const BlobSection& s, const Grid3& g) {
  return s.kind == BlobSection::I64 && s.i64.size() == 3 &&
         s.i64[0] == g.n[0] && s.i64[1] == g.n[1] && s.i64[2] == g.n[2];
}

std::int64_t link_count(const Grid3& g, int axis) {
  std::int64_t m[3] = {g.n[0], g.n[1], g.n[2]};
  m[axis] -= 1;
  return m[0] * m[1] * m[2];
}

}  // namespace

Cache::Cache(std::string root) : root_(std::move(root)) {
  if (root_.empty()) throw std::invalid_argument("cache: empty root path");
}

std::string Cache::entry_dir(const std::string& hash16) const {
  check_name(hash16);
  return root_ + "/" + hash16;
}

std::string Cache::file_for(const std::string& hash16,
                            const std::string& name, const char* ext) const {
  check_name(name);
  return entry_dir(hash16) + "/" + name + ext;
}

bool Cache::has(const std::string& hash16, const std::string& name) const {
  return fs::exists(file_for(hash16, name, ".bin")) ||
         fs::exists(file_for(hash16, name, ".txt"));
}

void Cache::note(const std::string& hash16, const std::string& name,
                 const char* kind, std::uint64_t bytes) const {
  JsonWriter w;
  w.kv("name", name);
  w.kv("kind", kind);
  w.kv("bytes", bytes);
  w.kv("created", iso8601_utc_now());
  std::string line = w.finish();
  // The manifest is append-only: one compact JSON object per line.
  for (char& c : line)
    if (c == '\n') c = ' ';
  while (!line.empty() && line.back() == ' ') line.pop_back();
  line.push_back('\n');
  fs::create_directories(entry_dir(hash16));
  std::ofstream out(entry_dir(hash16) + "/manifest.jsonl",
                    std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cache: cannot append manifest");
  out << line;
}

void Cache::put_values(const std::string& hash16, const std::string& name,
                       const std::vector<double>& v) {
  Blob b;
  b.add(v);
  write_blob(file_for(hash16, name, ".bin"), b);
  note(hash16, name, "values", 8 * v.size());
}

bool Cache::get_values(const std::string& hash16, const std::string& name,
                       std::vector<double>* out) const {
  std::string path = file_for(hash16, name, ".bin");
  if (!fs::exists(path)) return false;
  Blob b = read_blob(path);
  if (b.sections.size() != 1 || b.sections[0].kind != BlobSection::F64)
    throw std::runtime_error(path + ": not a value array");
  *out = std::move(b.sections[0].f64);
  return true;
}

void Cache::put_phases(const std::string& hash16, const std::string& name,
                       const LinkPhases& lp) {
  Blob b;
  b.add(grid_header(lp.grid));
  for (int a = 0; a < 3; ++a) b.add(lp.theta[a]);
  write_blob(file_for(hash16, name, ".bin"), b);
  std::uint64_t bytes = 0;
  for (int a = 0; a < 3; ++a) bytes += 8 * lp.theta[a].size();
  note(hash16, name, "phases", bytes);
}

bool Cache::get_phases(const std::string& hash16, const std::string& name,
                       const Grid3& grid, LinkPhases* out) const {
  std::string path = file_for(hash16, name, ".bin");
  if (!fs::exists(path)) return false;
  Blob b = read_blob(path);
  if (b.sections.size() != 4)
    throw std::runtime_error(path + ": not a phase table");
  if (!header_matches(b.sections[0], grid)) return false;
  for (int a = 0; a < 3; ++a) {
    const BlobSection& s = b.sections[1 + a];
    if (s.kind != BlobSection::F64 ||
        static_cast<std::int64_t>(s.f64.size()) != link_count(grid, a))
      throw std::runtime_error(path + ": phase table layout mismatch");
  }
  out->grid = grid;
  for (int a = 0; a < 3; ++a) out->theta[a] = std::move(b.sections[1 + a].f64);
  return true;
}

void Cache::put_operator(const std::string& hash16, const std::string& name,
                         const StencilOp3& op) {
  Blob b;
  b.add(grid_header(op.grid));
  b.add(op.diag);
  for (int a = 0; a < 3; ++a) b.add(op.hop[a]);
  b.add(op.cells);
  b.add(op.dof_of);
  write_blob(file_for(hash16, name, ".bin"), b);
  std::uint64_t bytes = 8 * op.diag.size();
  for (int a = 0; a < 3; ++a) bytes += 16 * op.hop[a].size();
  note(hash16, name, "operator", bytes);
}

bool Cache::get_operator(const std::string& hash16, const std::string& name,
                         const Grid3& grid, StencilOp3* out) const {
  std::string path = file_for(hash16, name, ".bin");
  if (!fs::exists(path)) return false;
  Blob b = read_blob(path);
  if (b.sections.size() != 7)
    throw std::runtime_error(path + ": not an operator image");
  if (!header_matches(b.sections[0], grid)) return false;
  const BlobSection& diag = b.sections[1];
  const BlobSection& cells = b.sections[5];
  const BlobSection& dof_of = b.sections[6];
  if (diag.kind != BlobSection::F64 || cells.kind != BlobSection::I64 ||
      dof_of.kind != BlobSection::I64)
    throw std::runtime_error(path + ": operator image layout mismatch");
  std::int64_t ncells = grid.n[0] * grid.n[1] * grid.n[2];
  std::int64_t dofs =
      cells.i64.empty() ? ncells : static_cast<std::int64_t>(cells.i64.size());
  if (static_cast<std::int64_t>(diag.f64.size()) != dofs ||
      (!dof_of.i64.empty() &&
       static_cast<std::int64_t>(dof_of.i64.size()) != ncells))
    throw std::runtime_error(path + ": operator image size mismatch");
  for (int a = 0; a < 3; ++a) {
    const BlobSection& s = b.sections[2 + a];
    if (s.kind != BlobSection::C128 ||
        static_cast<std::int64_t>(s.c128.size()) != link_count(grid, a))
      throw std::runtime_error(path + ": operator image hop mismatch");
  }
  StencilOp3 op(grid);
  op.diag = std::move(b.sections[1].f64);
  for (int a = 0; a < 3; ++a) op.hop[a] = std::move(b.sections[2 + a].c128);
  op.cells = std::move(b.sections[5].i64);
  op.dof_of = std::move(b.sections[6].i64);
  *out = std::move(op);
  return true;
}

void Cache::put_text(const std::string& hash16, const std::string& name,
                     const std::string& text) {
  write_file_atomic(file_for(hash16, name, ".txt"), text);
  note(hash16, name, "text", text.size());
}

bool Cache::get_text(const std::string& hash16, const std::string& name,
                     std::string* out) const {
  std::string path = file_for(hash16, name, ".txt");
  if (!fs::exists(path)) return false;
  *out = read_file(path);
  return true;
}

std::vector<std::string> Cache::list(const std::string& hash16) const {
  std::vector<std::string> names;
  std::ifstream in(entry_dir(hash16) + "/manifest.jsonl", std::ios::binary);
  if (!in) return names;
  std::string line;
  while (std::getline(in, line)) {
    // Each line is {"name": "...", ...}; extract the first string value.
    std::size_t k = line.find("\"name\": \"");
    if (k == std::string::npos) continue;
    k += 9;
    std::size_t end = line.find('"', k);
    if (end != std::string::npos) names.push_back(line.substr(k, end - k));
  }
  return names;
}

std::uintmax_t Cache::clean() {
  std::uintmax_t bytes = 0;
  if (fs::exists(root_)) {
    for (auto it = fs::recursive_directory_iterator(root_);
         it != fs::recursive_directory_iterator(); ++it)
      if (it->is_regular_file()) bytes += it->file_size();
    fs::remove_all(root_);
  }
  return bytes;
}

}  // namespace magtube
