#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "alsim/cache_model.hpp"

namespace alsim {

enum class Side { Data, Instruction };

inline AccessKind access_kind(Side s) {
  return s == Side::Instruction ? AccessKind::InstructionFetch : AccessKind::DataRead;
}

struct StrategyTriple {
  unsigned n = 1, a = 1, d = 1;
  std::uint64_t total_accesses() const {
    return std::uint64_t(n) * a * d;
  }
};

// Sliding-window eviction parameters plus the ordered eviction set.
struct EvictionStrategy {
  unsigned n = 1;  // number of windows
  unsigned a = 1;  // repetitions per window
  unsigned d = 1;  // addresses per window
  Side side = Side::Data;
  std::vector<Address> addresses;  // the eviction set C, set-congruent with the target

  std::uint64_t total_accesses() const { return std::uint64_t(n) * a * d; }
  void validate() const;  // throws std::invalid_argument
};

// Returns `size` distinct addresses mapping to the target's L2 set, none equal
// to the target, walking tags upward from the target's line.
std::vector<Address> build_eviction_set(Address target, std::size_t size,
                                        const HierarchyConfig& cfg);

EvictionStrategy make_strategy(StrategyTriple t, Side side, Address target,
                               const HierarchyConfig& cfg);

// Issues exactly n*a*d accesses of strategy.side kind on `core`:
// for i in [0,n) for j in [0,a) for k in [0,d): access(C[i+k]).
void run_eviction(CacheHierarchy& h, const EvictionStrategy& strategy, unsigned core);

struct SearchCandidate {
  StrategyTriple triple;
  double success_rate = 0.0;
  std::uint64_t total_accesses = 0;
};

struct SearchReport {
  std::vector<SearchCandidate> candidates;
  std::optional<SearchCandidate> chosen;  // empty: no reliable strategy in grid

  void write_csv(std::ostream& os) const;
};

struct SearchGrid {
  std::vector<unsigned> n_values;
  std::vector<unsigned> a_values;
  std::vector<unsigned> d_values;

  bool empty() const { return n_values.empty() || a_values.empty() || d_values.empty(); }
};

// For each triple, runs `trials` rounds of {reset; same-core access of the
// target; same-core eviction; L2 inspection}; success means the target left
// L2. Chooses the cheapest triple whose success rate meets `threshold`.
SearchReport search_parameters(const HierarchyConfig& cfg, Side side, Address target,
                               const SearchGrid& grid, unsigned trials, double threshold,
                               unsigned core = 0);

}  // namespace alsim
