#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "alsim/aes_target.hpp"
#include "alsim/cache_model.hpp"
#include "alsim/eviction.hpp"
#include "alsim/profile.hpp"

namespace alsim {

enum class AttackVariant { Original, Majority, ProbFilter, Weighted };

struct MonitoredLine {
  unsigned table = 0;
  unsigned line = 0;
  Address addr = 0;
  EvictionStrategy strategy;
};

struct AttackConfig {
  unsigned attacker_core = 0;
  unsigned victim_core = 1;
  TTableLayout layout;
  std::vector<MonitoredLine> monitored;  // table-major eviction order
  std::size_t encryptions = 0;
  double reload_threshold = 0.0;

  void validate(const HierarchyConfig& cfg) const;
};

// One record per encryption: the ciphertext and, per monitored line, whether
// the reload was fast (cached) or slow (evicted, i.e. not accessed).
struct AttackObservation {
  AesBlock ciphertext{};
  std::vector<bool> reload_fast;
};

// Score accumulators for one monitored line. A slow observation of line l of
// table t means no entry on l was looked up, so for each of t's four last
// round ciphertext bytes the candidates c_i ^ S[e] (e on l) are excluded and
// every other candidate gains one count. Stored as exclusion counts; the
// accumulator value for candidate k is slow_count - exclusions[k].
class KeyHypothesisTable {
 public:
  KeyHypothesisTable() = default;
  KeyHypothesisTable(unsigned table, unsigned line);

  void record_slow(const AesBlock& ciphertext, const TTableLayout& layout);
  void record_observation() { ++observations_; }
  void freeze_window() { window_slow_ = slow_count_, window_obs_ = observations_; }

  std::uint64_t observations() const { return observations_; }
  std::uint64_t slow_count() const { return slow_count_; }
  // Empirical no-access frequency P~_na for this line.
  double empirical_no_access() const {
    return observations_ ? double(slow_count_) / double(observations_) : 0.0;
  }
  double windowed_no_access() const {
    return window_obs_ ? double(window_slow_) / double(window_obs_) : 0.0;
  }
  bool window_frozen() const { return window_obs_ != 0; }

  unsigned table() const { return table_; }
  unsigned line() const { return line_; }

  // Accumulator for byte `i` (must satisfy last_round_table(i) == table()).
  std::int64_t score(unsigned byte_index, std::uint8_t candidate) const;

 private:
  unsigned table_ = 0;
  unsigned line_ = 0;
  std::uint64_t observations_ = 0;
  std::uint64_t slow_count_ = 0;
  std::uint64_t window_slow_ = 0;
  std::uint64_t window_obs_ = 0;
  // exclusion counts for the 4 ciphertext bytes this table serves
  std::array<std::array<std::uint32_t, 256>, 4> exclusions_{};
};

struct AttackState {
  AttackConfig config;
  std::vector<KeyHypothesisTable> tables;  // parallel to config.monitored
  std::size_t observation_count = 0;

  explicit AttackState(AttackConfig cfg);
};

// One Evict+Reload round: evict every monitored line, let the victim encrypt
// one random plaintext, reload and classify each line.
AttackObservation evict_reload_round(CacheHierarchy& h, const AttackConfig& cfg,
                                     VictimProcess& v, std::mt19937_64& plaintext_rng);

void accumulate(const AttackObservation& obs, const TTableLayout& layout,
                AttackState& state);

struct RecoveredKey {
  AesBlock key{};
  // rank_of[i][k]: 1-based rank of candidate k for byte i (score descending,
  // ties broken toward the lower byte value).
  std::array<std::array<std::uint16_t, 256>, 16> rank_of{};
};

RecoveredKey recover_key(const AttackState& state, AttackVariant variant);

// log2 of the brute-force complexity implied by the ranks of the true key.
double log2_rank_complexity(const RecoveredKey& r, const AesBlock& true_key);

struct CampaignOptions {
  std::vector<AttackVariant> variants;  // evaluated on one shared observation stream
  unsigned keys = 1;
  std::vector<std::size_t> checkpoints;  // ascending encryption counts
  std::uint64_t seed = 0;
  bool same_core = false;
  unsigned attacker_core = 0;
  unsigned victim_core = 1;
  // Eviction triple used per monitored line; defaults to the profile triple.
  std::optional<StrategyTriple> strategy_override;
  double self_evict_prob = 0.08;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct CampaignCell {
  AttackVariant variant;
  unsigned key_index;
  std::size_t encryptions;
  unsigned correct_bytes;        // vs the true round-10 key
  double log2_complexity;        // rank-product brute-force complexity
};

struct CampaignResult {
  std::vector<CampaignCell> cells;

  double mean_correct(AttackVariant v, std::size_t checkpoint) const;
  void write_csv(std::ostream& os) const;           // per-key rows
  void write_summary_csv(std::ostream& os) const;   // mean curve
};

CampaignResult run_campaign(const SoCProfile& profile, const CampaignOptions& opt);

const char* to_string(AttackVariant v);
AttackVariant variant_from_string(const std::string& s);

}  // namespace alsim
