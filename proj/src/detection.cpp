#include "alsim/detection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace alsim {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double stddev(const std::vector<double>& v) {
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / double(v.size()));
}

DetectionVerdict finish(DetectionMethod method, const std::vector<bool>& votes,
                        std::vector<double> evidence) {
  unsigned yes = unsigned(std::count(votes.begin(), votes.end(), true));
  bool present = 2 * yes > votes.size();
  unsigned agree = present ? yes : unsigned(votes.size()) - yes;
  return {method, present, double(agree) / double(votes.size()), std::move(evidence)};
}

// Prerequisite for every test: the strategy must evict reliably in the same-core
// setting before any cross-core conclusion can be drawn.
void guard_same_core(TargetPlatform& p, Address target, const EvictionStrategy& strategy,
                     unsigned core) {
  const Capabilities caps = p.capabilities();
  p.reset();
  p.bring_in(core, target, strategy.side);
  p.evict_from(core, strategy);
  bool evicted;
  if (caps.can_inspect) {
    evicted = !p.inspect(Level::L2, core, target).present &&
              !p.inspect(Level::L1, core, target).present;
  } else if (caps.can_count_events) {
    std::uint64_t before = p.l2_access_count();
    p.reload_time(core, target, strategy.side);
    evicted = p.l2_access_count() > before;  // reload had to leave L1
  } else {
    throw UnsupportedMethodError("platform exposes no usable capability");
  }
  p.reset();
  if (!evicted)
    throw InconclusiveError("same-core eviction failed with the given strategy");
}

}  // namespace

DetectionVerdict debugger_test(TargetPlatform& p, Address target,
                               const EvictionStrategy& strategy, unsigned trials,
                               const DetectionOptions& opt) {
  if (!p.capabilities().can_inspect)
    throw UnsupportedMethodError("debugger test requires state inspection");
  if (trials == 0) throw std::invalid_argument("trials must be >= 1");
  guard_same_core(p, target, strategy, opt.attacker_core);

  std::vector<bool> votes;
  std::vector<double> evidence;
  for (unsigned t = 0; t < trials; ++t) {
    p.reset();
    p.bring_in(opt.victim_core, target, strategy.side);
    p.evict_from(opt.attacker_core, strategy);
    bool found = p.inspect(Level::L1, opt.victim_core, target).present ||
                 p.inspect(Level::L2, opt.victim_core, target).present;
    votes.push_back(found);
    evidence.push_back(found ? 1.0 : 0.0);
  }
  return finish(DetectionMethod::Debugger, votes, std::move(evidence));
}

DetectionVerdict pmu_test(TargetPlatform& p, Address target,
                          const EvictionStrategy& strategy, unsigned trials,
                          const DetectionOptions& opt, std::uint64_t tolerance) {
  if (!p.capabilities().can_count_events)
    throw UnsupportedMethodError("pmu test requires event counting");
  if (trials == 0) throw std::invalid_argument("trials must be >= 1");
  guard_same_core(p, target, strategy, opt.attacker_core);

  // Reference R: L2 access delta for a reload with no previous eviction run,
  // which guarantees a fetch from core-private cache.
  p.reset();
  p.bring_in(opt.victim_core, target, strategy.side);
  std::uint64_t before = p.l2_access_count();
  p.reload_time(opt.victim_core, target, strategy.side);
  std::uint64_t reference = p.l2_access_count() - before;

  std::vector<bool> votes;
  std::vector<double> evidence;
  for (unsigned t = 0; t < trials; ++t) {
    p.reset();
    p.bring_in(opt.victim_core, target, strategy.side);
    p.evict_from(opt.attacker_core, strategy);
    before = p.l2_access_count();
    p.reload_time(opt.victim_core, target, strategy.side);
    std::uint64_t d = p.l2_access_count() - before;
    std::uint64_t gap = d > reference ? d - reference : reference - d;
    votes.push_back(gap <= tolerance);
    evidence.push_back(double(d));
  }
  return finish(DetectionMethod::Pmu, votes, std::move(evidence));
}

DetectionVerdict timing_test(TargetPlatform& p, Address target,
                             const EvictionStrategy& strategy, unsigned trials,
                             double memory_threshold, const DetectionOptions& opt) {
  if (!p.capabilities().can_time)
    throw UnsupportedMethodError("timing test requires a timing source");
  if (trials == 0) throw std::invalid_argument("trials must be >= 1");
  guard_same_core(p, target, strategy, opt.attacker_core);

  std::vector<bool> votes;
  std::vector<double> evidence;
  for (unsigned t = 0; t < trials; ++t) {
    p.reset();
    p.bring_in(opt.victim_core, target, strategy.side);
    p.evict_from(opt.attacker_core, strategy);
    double time = p.reload_time(opt.victim_core, target, strategy.side);
    votes.push_back(time < memory_threshold);
    evidence.push_back(time);
  }
  DetectionVerdict v = finish(DetectionMethod::Timing, votes, std::move(evidence));
  v.present = median(v.evidence) < memory_threshold;
  unsigned agree = 0;
  for (double e : v.evidence)
    if ((e < memory_threshold) == v.present) ++agree;
  v.confidence = double(agree) / double(v.evidence.size());
  return v;
}

double calibrate_threshold(TargetPlatform& p, Address target, Side side,
                           std::size_t samples, unsigned core) {
  if (samples < 2) throw std::invalid_argument("calibration needs >= 2 samples");
  std::size_t per_set = samples / 2;
  if (per_set == 0) per_set = 1;

  std::vector<double> cached, uncached;
  p.reset();
  p.bring_in(core, target, side);
  for (std::size_t i = 0; i < per_set; ++i) {
    p.demote_to_l2(core, target);
    cached.push_back(p.reload_time(core, target, side));
  }
  for (std::size_t i = 0; i < per_set; ++i) {
    p.reset();
    uncached.push_back(p.reload_time(core, target, side));
  }
  p.reset();

  double m_cached = median(cached), m_uncached = median(uncached);
  double gap = m_uncached - m_cached;
  double pooled = 0.5 * (stddev(cached) + stddev(uncached));
  if (gap <= 0.0 || gap < 2.0 * pooled)
    throw CalibrationError("reload distributions not separable");
  return 0.5 * (m_cached + m_uncached);
}

std::vector<HistogramRow> emit_histogram(TargetPlatform& p, Address target,
                                         const EvictionStrategy& strategy,
                                         std::size_t samples, bool with_eviction,
                                         const DetectionOptions& opt) {
  if (samples == 0) throw std::invalid_argument("histogram needs >= 1 sample");
  std::map<std::uint64_t, std::uint64_t> bins;
  for (std::size_t i = 0; i < samples; ++i) {
    p.reset();
    p.bring_in(opt.victim_core, target, strategy.side);
    if (with_eviction) p.evict_from(opt.attacker_core, strategy);
    double t = p.reload_time(opt.victim_core, target, strategy.side);
    ++bins[std::uint64_t(t / 10.0)];
  }
  std::vector<HistogramRow> rows;
  const char* label = with_eviction ? "with_eviction" : "without_eviction";
  for (auto [bin, count] : bins) rows.push_back({double(bin) * 10.0, count, label});
  return rows;
}

void write_histogram_csv(std::ostream& os, const std::vector<HistogramRow>& rows) {
  os << "latency_bin,count,series_label\n";
  for (const HistogramRow& r : rows)
    os << r.latency_bin << ',' << r.count << ',' << r.series_label << '\n';
}

const char* to_string(DetectionMethod m) {
  switch (m) {
    case DetectionMethod::Debugger: return "debugger";
    case DetectionMethod::Pmu: return "pmu";
    case DetectionMethod::Timing: return "timing";
  }
  return "?";
}

}  // namespace alsim
