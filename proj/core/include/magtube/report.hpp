// Result serialization: deterministic JSON summaries, CSV traces, and a
// checksummed binary container for large arrays. Every format is documented
// in docs/file-formats.md; reruns of the same scenario produce byte-identical
// files except for the explicit timestamp field.
#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "magtube/grid.hpp"

namespace magtube {

// Shortest decimal form that parses back to the same double.
std::string shortest(double v);

// ============================================================
// Ordered JSON
// ============================================================

/// Streaming writer for a single JSON document. Keys appear in call order,
/// objects are indented two spaces, scalar arrays are kept on one line, and
/// doubles use the shortest round-trip form, so equal inputs give equal
/// bytes. Non-finite doubles serialize as null (JSON has no NaN).
class JsonWriter {
 public:
  JsonWriter();

  JsonWriter& key(const std::string& k);  // inside an object, before a value
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();

  JsonWriter& number(double v);
  JsonWriter& integer(std::int64_t v);
  JsonWriter& uinteger(std::uint64_t v);
  JsonWriter& boolean(bool v);
  JsonWriter& string(const std::string& v);
  JsonWriter& null();
  JsonWriter& numbers(const std::vector<double>& v);
  JsonWriter& integers(const std::vector<int>& v);
  JsonWriter& strings(const std::vector<std::string>& v);

  JsonWriter& kv(const std::string& k, double v);
  JsonWriter& kv(const std::string& k, std::int64_t v);
  JsonWriter& kv(const std::string& k, int v);
  JsonWriter& kv(const std::string& k, std::uint64_t v);
  JsonWriter& kv(const std::string& k, bool v);
  JsonWriter& kv(const std::string& k, const std::string& v);
  JsonWriter& kv(const std::string& k, const char* v);
  JsonWriter& kv(const std::string& k, const std::vector<double>& v);
  JsonWriter& kv(const std::string& k, const std::vector<int>& v);
  JsonWriter& kv(const std::string& k, const std::vector<std::string>& v);

  /// Close the root object and return the document (callable once).
  std::string finish();

 private:
  void prelude(bool is_key);
  std::string out_;
  // Each frame: 'o' object or 'a' array, plus whether a comma is pending.
  std::vector<std::pair<char, bool>> stack_;
  bool key_pending_ = false;
  bool finished_ = false;
};

// ============================================================
// CSV traces
// ============================================================

struct TraceColumn {
  std::string name;
  std::vector<double> values;
};

/// Header row of column names, then one row per sample; doubles in shortest
/// round-trip form, comma separator, '\n' line ends. All columns must have
/// equal length.
std::string csv_text(const std::vector<TraceColumn>& cols);

// ============================================================
// Files and names
// ============================================================

/// Write via a temporary file in the same directory plus an atomic rename,
/// creating parent directories as needed. Readers never observe a torn file.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);  // throws runtime_error

std::string iso8601_utc_now();

/// Grid fingerprint used in file names: cell counts and spacing, e.g.
/// "240x240_h0.05" or "120x120x130_h0.1".
std::string grid_tag(const Grid2& g);
std::string grid_tag(const Grid3& g);

/// File-name conventions: summary_<experiment>_<hash16>_<gridtag>.json and
/// trace_<experiment>_<hash16>_<gridtag>.csv inside the run directory.
std::string summary_name(const std::string& experiment,
                         const std::string& hash16, const std::string& tag);
std::string trace_name(const std::string& experiment,
                       const std::string& hash16, const std::string& tag);

// ============================================================
// Binary array container ("MTARR001")
// ============================================================

/// One stored array: exactly one of the three payloads is used.
struct BlobSection {
  enum Kind : std::uint64_t { F64 = 1, C128 = 2, I64 = 3 };
  Kind kind = F64;
  std::vector<double> f64;
  std::vector<std::complex<double>> c128;
  std::vector<std::int64_t> i64;
};

/// File layout (little-endian): 8-byte magic "MTARR001", then sections until
/// end of file. Each section: u64 kind, u64 count, payload (8 bytes per f64
/// or i64 element, 16 per c128), u64 FNV-1a checksum of the payload bytes.
struct Blob {
  std::vector<BlobSection> sections;

  void add(const std::vector<double>& v);
  void add(const std::vector<std::complex<double>>& v);
  void add(const std::vector<std::int64_t>& v);
};

/// Serialize/deserialize a blob; write is atomic. read_blob throws
/// runtime_error on a missing file, bad magic, truncation, or a checksum
/// mismatch — a corrupt cache entry must never pass for data.
void write_blob(const std::string& path, const Blob& blob);
Blob read_blob(const std::string& path);

}  // namespace magtube
