#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "alsim/cache_model.hpp"
#include "alsim/eviction.hpp"

namespace alsim {

struct Capabilities {
  bool can_inspect = false;
  bool can_count_events = false;
  bool can_time = false;
};

struct UnsupportedMethodError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Same-core eviction with the given strategy failed; a verdict would be
// meaningless (false positives).
struct InconclusiveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dual-core test harness contract: one process brings the target in, the
// other evicts. The simulator backend reports all three capabilities.
class TargetPlatform {
 public:
  virtual ~TargetPlatform() = default;
  virtual Capabilities capabilities() const = 0;
  virtual void reset() = 0;
  virtual void bring_in(unsigned core, Address addr, Side side) = 0;
  virtual void evict_from(unsigned core, const EvictionStrategy& strategy) = 0;
  virtual double reload_time(unsigned core, Address addr, Side side) = 0;
  virtual std::uint64_t l2_access_count() const = 0;
  // Pushes the line out of `core`'s L1 while keeping an L2 copy; used to
  // sample L2-hit reload times during threshold calibration.
  virtual void demote_to_l2(unsigned core, Address addr) = 0;
  // Valid only when can_inspect.
  virtual LineState inspect(Level level, unsigned core, Address addr) const = 0;
};

class SimulatorPlatform final : public TargetPlatform {
 public:
  explicit SimulatorPlatform(CacheHierarchy& h) : h_(h) {}

  Capabilities capabilities() const override { return {true, true, true}; }
  void reset() override { h_.reset(); }
  void bring_in(unsigned core, Address addr, Side side) override {
    h_.access({core, addr, access_kind(side)});
  }
  void evict_from(unsigned core, const EvictionStrategy& strategy) override {
    run_eviction(h_, strategy, core);
  }
  double reload_time(unsigned core, Address addr, Side side) override {
    return h_.access({core, addr, access_kind(side)}).latency;
  }
  std::uint64_t l2_access_count() const override { return h_.counters().l2_accesses; }
  void demote_to_l2(unsigned core, Address addr) override { h_.demote_from_l1(core, addr); }
  LineState inspect(Level level, unsigned core, Address addr) const override {
    return h_.inspect(level, core, addr);
  }
  CacheHierarchy& hierarchy() { return h_; }

 private:
  CacheHierarchy& h_;
};

enum class DetectionMethod { Debugger, Pmu, Timing };

struct DetectionVerdict {
  DetectionMethod method;
  bool present = false;       // majority over trials
  double confidence = 0.0;    // fraction of trials agreeing with the majority
  std::vector<double> evidence;  // per-trial raw values
};

struct DetectionOptions {
  unsigned victim_core = 0;
  unsigned attacker_core = 1;
  Side side = Side::Data;
};

DetectionVerdict debugger_test(TargetPlatform& p, Address target,
                               const EvictionStrategy& strategy, unsigned trials,
                               const DetectionOptions& opt = {});

DetectionVerdict pmu_test(TargetPlatform& p, Address target,
                          const EvictionStrategy& strategy, unsigned trials,
                          const DetectionOptions& opt = {},
                          std::uint64_t tolerance = 0);

DetectionVerdict timing_test(TargetPlatform& p, Address target,
                             const EvictionStrategy& strategy, unsigned trials,
                             double memory_threshold, const DetectionOptions& opt = {});

// Midpoint between the median L2-hit reload and the median uncached reload,
// both measured same-core. Throws CalibrationError if the two distributions
// are not separable (median gap below twice the pooled stddev, or zero).
double calibrate_threshold(TargetPlatform& p, Address target, Side side,
                           std::size_t samples, unsigned core = 0);

struct HistogramRow {
  double latency_bin;  // lower edge, bin width 10 cycles
  std::uint64_t count;
  std::string series_label;
};

std::vector<HistogramRow> emit_histogram(TargetPlatform& p, Address target,
                                         const EvictionStrategy& strategy,
                                         std::size_t samples, bool with_eviction,
                                         const DetectionOptions& opt = {});

void write_histogram_csv(std::ostream& os, const std::vector<HistogramRow>& rows);

const char* to_string(DetectionMethod m);

}  // namespace alsim
