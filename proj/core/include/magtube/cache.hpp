// Append-only result cache. Expensive reusable artifacts — assembled tube
// operators, gauge link phases, solved eigenvalues — are stored under
// <root>/<scenario-digest>/ in the checksummed MTARR001 container, so a
// rerun of an identical scenario replays identical bits instead of
// recomputing. Nothing is evicted automatically; `cache clean` removes the
// whole root.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "magtube/fields.hpp"
#include "magtube/operators.hpp"

namespace magtube {

class Cache {
 public:
  /// root is the cache directory (conventionally <out>/cache); it is
  /// created lazily on the first put.
  explicit Cache(std::string root);

  const std::string& root() const { return root_; }
  std::string entry_dir(const std::string& hash16) const;

  /// True when the named artifact exists for this digest. Names are
  /// restricted to [A-Za-z0-9._-] so they map 1:1 onto file names.
  bool has(const std::string& hash16, const std::string& name) const;

  // --- plain double arrays (eigenvalues, traces) --------------------
  void put_values(const std::string& hash16, const std::string& name,
                  const std::vector<double>& v);
  /// False when absent; throws runtime_error on a corrupt entry. The
  /// returned values are bit-identical to what was stored.
  bool get_values(const std::string& hash16, const std::string& name,
                  std::vector<double>* out) const;

  // --- gauge link phases --------------------------------------------
  void put_phases(const std::string& hash16, const std::string& name,
                  const LinkPhases& lp);
  /// Validates the stored cell counts against `grid` and rebuilds the
  /// phase table on it; a mismatch reads as absent (the cache never
  /// serves data for a different discretization).
  bool get_phases(const std::string& hash16, const std::string& name,
                  const Grid3& grid, LinkPhases* out) const;

  // --- assembled tube operators ---------------------------------------
  void put_operator(const std::string& hash16, const std::string& name,
                    const StencilOp3& op);
  bool get_operator(const std::string& hash16, const std::string& name,
                    const Grid3& grid, StencilOp3* out) const;

  // --- small text notes (scenario dump, provenance) -------------------
  void put_text(const std::string& hash16, const std::string& name,
                const std::string& text);
  bool get_text(const std::string& hash16, const std::string& name,
                std::string* out) const;

  /// Artifact names recorded in this entry's manifest, in insertion order.
  std::vector<std::string> list(const std::string& hash16) const;

  /// Delete the whole cache root. Returns the number of bytes removed.
  std::uintmax_t clean();

 private:
  std::string file_for(const std::string& hash16, const std::string& name,
                       const char* ext) const;
  void note(const std::string& hash16, const std::string& name,
            const char* kind, std::uint64_t bytes) const;
  std::string root_;
};

}  // namespace magtube
