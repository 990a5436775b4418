#include "alsim/eviction.hpp"

#include <algorithm>
#include <stdexcept>

namespace alsim {

void EvictionStrategy::validate() const {
  if (n == 0 || a == 0 || d == 0)
    throw std::invalid_argument("eviction strategy: N, A, D must be >= 1");
  if (addresses.size() < std::size_t(n) + d)
    throw std::invalid_argument("eviction strategy: |C| must be >= N + D");
}

std::vector<Address> build_eviction_set(Address target, std::size_t size,
                                        const HierarchyConfig& cfg) {
  if (size == 0) throw std::invalid_argument("eviction set size must be >= 1");
  if (target >= cfg.mem_bytes)
    throw std::out_of_range("eviction set target outside physical range");
  const std::uint64_t stride = std::uint64_t(cfg.line_size) * cfg.l2_sets;
  std::vector<Address> out;
  out.reserve(size);
  for (Address a = target + stride; out.size() < size; a += stride) {
    if (a >= cfg.mem_bytes)
      throw std::runtime_error("address space too small for requested eviction set");
    out.push_back(a);
  }
  return out;
}

EvictionStrategy make_strategy(StrategyTriple t, Side side, Address target,
                               const HierarchyConfig& cfg) {
  EvictionStrategy s;
  s.n = t.n;
  s.a = t.a;
  s.d = t.d;
  s.side = side;
  s.addresses = build_eviction_set(target, std::size_t(t.n) + t.d, cfg);
  s.validate();
  return s;
}

void run_eviction(CacheHierarchy& h, const EvictionStrategy& strategy, unsigned core) {
  strategy.validate();
  const AccessKind kind = access_kind(strategy.side);
  for (unsigned i = 0; i < strategy.n; ++i)
    for (unsigned j = 0; j < strategy.a; ++j)
      for (unsigned k = 0; k < strategy.d; ++k)
        h.access({core, strategy.addresses[i + k], kind});
}

void SearchReport::write_csv(std::ostream& os) const {
  os << "N,A,D,accesses,success_rate\n";
  for (const SearchCandidate& c : candidates)
    os << c.triple.n << ',' << c.triple.a << ',' << c.triple.d << ','
       << c.total_accesses << ',' << c.success_rate << '\n';
}

SearchReport search_parameters(const HierarchyConfig& cfg, Side side, Address target,
                               const SearchGrid& grid, unsigned trials, double threshold,
                               unsigned core) {
  if (grid.empty()) throw std::invalid_argument("parameter search: empty grid");
  if (trials == 0) throw std::invalid_argument("parameter search: trials must be >= 1");

  CacheHierarchy h(cfg);
  const AccessKind kind = access_kind(side);

  SearchReport report;
  for (unsigned n : grid.n_values)
    for (unsigned a : grid.a_values)
      for (unsigned d : grid.d_values) {
        EvictionStrategy s = make_strategy({n, a, d}, side, target, cfg);
        unsigned successes = 0;
        for (unsigned t = 0; t < trials; ++t) {
          h.reset();
          h.access({core, target, kind});
          run_eviction(h, s, core);
          if (!h.inspect_l2(target).present) ++successes;
        }
        report.candidates.push_back(
            {{n, a, d}, double(successes) / trials, s.total_accesses()});
      }

  std::stable_sort(report.candidates.begin(), report.candidates.end(),
                   [](const SearchCandidate& x, const SearchCandidate& y) {
                     return x.total_accesses < y.total_accesses;
                   });
  for (const SearchCandidate& c : report.candidates)
    if (c.success_rate >= threshold) {
      report.chosen = c;
      break;
    }
  return report;
}

}  // namespace alsim
