#include "magtube/report.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace magtube {

namespace {

constexpr char kMagic[8] = {'M', 'T', 'A', 'R', 'R', '0', '0', '1'};

std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

void json_escape(std::string& out, const std::string& s) {
  out.push_back('"');
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(char(c));
        }
    }
  }
  out.push_back('"');
}

}  // namespace

std::string shortest(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ============================================================
// JsonWriter
// ============================================================

JsonWriter::JsonWriter() {
  out_ = "{";
  stack_.push_back({'o', false});
}

void JsonWriter::prelude(bool is_key) {
  if (finished_) throw std::runtime_error("JsonWriter: already finished");
  if (stack_.empty()) throw std::runtime_error("JsonWriter: no open scope");
  char scope = stack_.back().first;
  if (is_key) {
    if (scope != 'o')
      throw std::runtime_error("JsonWriter: key outside an object");
    if (key_pending_) throw std::runtime_error("JsonWriter: two keys in a row");
  } else {
    if (scope == 'o' && !key_pending_)
      throw std::runtime_error("JsonWriter: value in object needs a key");
  }
  if (scope == 'o' && is_key) {
    if (stack_.back().second) out_.push_back(',');
    out_.push_back('\n');
    out_.append(2 * stack_.size(), ' ');
  } else if (scope == 'a' && !is_key) {
    if (stack_.back().second) out_ += ", ";
    stack_.back().second = true;
  }
}

JsonWriter& JsonWriter::key(const std::string& k) {
  prelude(true);
  json_escape(out_, k);
  out_ += ": ";
  stack_.back().second = true;
  key_pending_ = true;
  return *this;
}

JsonWriter& JsonWriter::begin_object() {
  prelude(false);
  key_pending_ = false;
  out_.push_back('{');
  stack_.push_back({'o', false});
  return *this;
}

JsonWriter& JsonWriter::end_object() {
  if (stack_.empty() || stack_.back().first != 'o' || key_pending_)
    throw std::runtime_error("JsonWriter: mismatched end_object");
  bool had = stack_.back().second;
  stack_.pop_back();
  if (had) {
    out_.push_back('\n');
    out_.append(2 * stack_.size(), ' ');
  }
  out_.push_back('}');
  return *this;
}

JsonWriter& JsonWriter::begin_array() {
  prelude(false);
  key_pending_ = false;
  out_.push_back('[');
  stack_.push_back({'a', false});
  return *this;
}

JsonWriter& JsonWriter::end_array() {
  if (stack_.empty() || stack_.back().first != 'a')
    throw std::runtime_error("JsonWriter: mismatched end_array");
  stack_.pop_back();
  out_.push_back(']');
  return *this;
}

JsonWriter& JsonWriter::number(double v) {
  prelude(false);
  key_pending_ = false;
  out_ += std::isfinite(v) ? shortest(v) : "null";
  return *this;
}

JsonWriter& JsonWriter::integer(std::int64_t v) {
  prelude(false);
  key_pending_ = false;
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::uinteger(std::uint64_t v) {
  prelude(false);
  key_pending_ = false;
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::boolean(bool v) {
  prelude(false);
  key_pending_ = false;
  out_ += v ? "true" : "false";
  return *this;
}

JsonWriter& JsonWriter::string(const std::string& v) {
  prelude(false);
  key_pending_ = false;
  json_escape(out_, v);
  return *this;
}

JsonWriter& JsonWriter::null() {
  prelude(false);
  key_pending_ = false;
  out_ += "null";
  return *this;
}

JsonWriter& JsonWriter::numbers(const std::vector<double>& v) {
  begin_array();
  for (double x : v) number(x);
  return end_array();
}

JsonWriter& JsonWriter::integers(const std::vector<int>& v) {
  begin_array();
  for (int x : v) integer(x);
  return end_array();
}

JsonWriter& JsonWriter::strings(const std::vector<std::string>& v) {
  begin_array();
  for (const std::string& x : v) string(x);
  return end_array();
}

JsonWriter& JsonWriter::kv(const std::string& k, double v) {
  return key(k).number(v);
}
JsonWriter& JsonWriter::kv(const std::string& k, std::int64_t v) {
  return key(k).integer(v);
}
JsonWriter& JsonWriter::kv(const std::string& k, int v) {
  return key(k).integer(v);
}
JsonWriter& JsonWriter::kv(const std::string& k, std::uint64_t v) {
  return key(k).uinteger(v);
}
JsonWriter& JsonWriter::kv(const std::string& k, bool v) {
  return key(k).boolean(v);
}
JsonWriter& JsonWriter::kv(const std::string& k, const std::string& v) {
  return key(k).string(v);
}
JsonWriter& JsonWriter::kv(const std::string& k, const char* v) {
  return key(k).string(std::string(v));
}
JsonWriter& JsonWriter::kv(const std::string& k, const std::vector<double>& v) {
  return key(k).numbers(v);
}
JsonWriter& JsonWriter::kv(const std::string& k, const std::vector<int>& v) {
  return key(k).integers(v);
}
JsonWriter& JsonWriter::kv(const std::string& k,
                           const std::vector<std::string>& v) {
  return key(k).strings(v);
}

std::string JsonWriter::finish() {
  if (finished_) throw std::runtime_error("JsonWriter: already finished");
  if (stack_.size() != 1 || key_pending_)
    throw std::runtime_error("JsonWriter: unclosed scopes at finish");
  bool had = stack_.back().second;
  stack_.pop_back();
  if (had) out_.push_back('\n');
  out_ += "}\n";
  finished_ = true;
  return std::move(out_);
}

// ============================================================
// CSV
// ============================================================

std::string csv_text(const std::vector<TraceColumn>& cols) {
  if (cols.empty()) throw std::invalid_argument("csv_text: no columns");
  std::size_t rows = cols[0].values.size();
  std::string out;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c].values.size() != rows)
      throw std::invalid_argument("csv_text: ragged columns ('" +
                                  cols[c].name + "')");
    if (cols[c].name.find_first_of(",\"\n\r") != std::string::npos)
      throw std::invalid_argument("csv_text: column name needs quoting: '" +
                                  cols[c].name + "'");
    if (c) out.push_back(',');
    out += cols[c].name;
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out.push_back(',');
      out += shortest(cols[c].values[r]);
    }
    out.push_back('\n');
  }
  return out;
}

// ============================================================
// Files and names
// ============================================================

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string out((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  return out;
}

std::string iso8601_utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec);
  return buf;
}

std::string grid_tag(const Grid2& g) {
  return std::to_string(g.n[0]) + "x" + std::to_string(g.n[1]) + "_h" +
         shortest(g.h(0));
}

std::string grid_tag(const Grid3& g) {
  return std::to_string(g.n[0]) + "x" + std::to_string(g.n[1]) + "x" +
         std::to_string(g.n[2]) + "_h" + shortest(g.h(0));
}

std::string summary_name(const std::string& experiment,
                         const std::string& hash16, const std::string& tag) {
  return "summary_" + experiment + "_" + hash16 + "_" + tag + ".json";
}

std::string trace_name(const std::string& experiment,
                       const std::string& hash16, const std::string& tag) {
  return "trace_" + experiment + "_" + hash16 + "_" + tag + ".csv";
}

// ============================================================
// Binary array container
// ============================================================

void Blob::add(const std::vector<double>& v) {
  BlobSection s;
  s.kind = BlobSection::F64;
  s.f64 = v;
  sections.push_back(std::move(s));
}

void Blob::add(const std::vector<std::complex<double>>& v) {
  BlobSection s;
  s.kind = BlobSection::C128;
  s.c128 = v;
  sections.push_back(std::move(s));
}

void Blob::add(const std::vector<std::int64_t>& v) {
  BlobSection s;
  s.kind = BlobSection::I64;
  s.i64 = v;
  sections.push_back(std::move(s));
}

namespace {

// Doubles are stored as their IEEE-754 bit patterns, little-endian.
void put_payload(std::string& out, const double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &p[i], 8);
    put_u64(out, bits);
  }
}

void put_payload(std::string& out, const std::int64_t* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    put_u64(out, static_cast<std::uint64_t>(p[i]));
}

}  // namespace

void write_blob(const std::string& path, const Blob& blob) {
  std::string out(kMagic, sizeof(kMagic));
  for (const BlobSection& s : blob.sections) {
    std::string payload;
    std::size_t count = 0;
    switch (s.kind) {
      case BlobSection::F64:
        count = s.f64.size();
        put_payload(payload, s.f64.data(), count);
        break;
      case BlobSection::C128:
        count = s.c128.size();
        put_payload(payload,
                    reinterpret_cast<const double*>(s.c128.data()),
                    2 * count);
        break;
      case BlobSection::I64:
        count = s.i64.size();
        put_payload(payload, s.i64.data(), count);
        break;
      default:
        throw std::invalid_argument("write_blob: unknown section kind");
    }
    put_u64(out, static_cast<std::uint64_t>(s.kind));
    put_u64(out, count);
    out += payload;
    put_u64(out, fnv1a(reinterpret_cast<const unsigned char*>(payload.data()),
                       payload.size()));
  }
  write_file_atomic(path, out);
}

Blob read_blob(const std::string& path) {
  std::string raw = read_file(path);
  const unsigned char* p = reinterpret_cast<const unsigned char*>(raw.data());
  std::size_t n = raw.size();
  if (n < sizeof(kMagic) || std::memcmp(p, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error(path + ": not an MTARR001 file");
  std::size_t off = sizeof(kMagic);
  Blob blob;
  while (off < n) {
    if (n - off < 16) throw std::runtime_error(path + ": truncated header");
    std::uint64_t kind = get_u64(p + off);
    std::uint64_t count = get_u64(p + off + 8);
    off += 16;
    std::size_t unit = kind == BlobSection::C128 ? 16 : 8;
    if (kind != BlobSection::F64 && kind != BlobSection::C128 &&
        kind != BlobSection::I64)
      throw std::runtime_error(path + ": unknown section kind " +
                               std::to_string(kind));
    if (count > (n - off) / unit)
      throw std::runtime_error(path + ": truncated payload");
    std::size_t bytes = count * unit;
    if (n - off - bytes < 8)
      throw std::runtime_error(path + ": missing checksum");
    if (fnv1a(p + off, bytes) != get_u64(p + off + bytes))
      throw std::runtime_error(path + ": checksum mismatch");
    BlobSection s;
    s.kind = static_cast<BlobSection::Kind>(kind);
    std::size_t words = bytes / 8;
    std::vector<std::uint64_t> tmp(words);
    for (std::size_t i = 0; i < words; ++i) tmp[i] = get_u64(p + off + 8 * i);
    if (kind == BlobSection::F64) {
      s.f64.resize(count);
      std::memcpy(s.f64.data(), tmp.data(), bytes);
    } else if (kind == BlobSection::C128) {
      s.c128.resize(count);
      std::memcpy(reinterpret_cast<double*>(s.c128.data()), tmp.data(),
                  bytes);
    } else {
      s.i64.resize(count);
      std::memcpy(s.i64.data(), tmp.data(), bytes);
    }
    blob.sections.push_back(std::move(s));
    off += bytes + 8;
  }
  return blob;
}

}  // namespace magtube
