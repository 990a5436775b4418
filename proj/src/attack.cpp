#include "alsim/attack.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "alsim/detection.hpp"
#include "alsim/util.hpp"

namespace alsim {

namespace {

// AES-128 with four 1 kiB tables touches each table 40 times per encryption.
constexpr unsigned kAccessesPerTable = 40;

// Ciphertext byte positions served by table t in the last round:
// last_round_table(i) == t  <=>  i % 4 == (t + 2) % 4.
std::array<unsigned, 4> bytes_of_table(unsigned table) {
  unsigned r = (table + 2) % 4;
  return {r, r + 4, r + 8, r + 12};
}

}  // namespace

void AttackConfig::validate(const HierarchyConfig& cfg) const {
  layout.validate();
  if (attacker_core >= cfg.num_cores || victim_core >= cfg.num_cores)
    throw std::invalid_argument("attack: core index out of range");
  if (monitored.empty()) throw std::invalid_argument("attack: no monitored lines");
  if (reload_threshold <= 0) throw std::invalid_argument("attack: bad reload threshold");
  for (const auto& m : monitored) {
    if (m.table >= 4 || m.line >= layout.lines_per_table())
      throw std::invalid_argument("attack: monitored line out of range");
    m.strategy.validate();
  }
}

KeyHypothesisTable::KeyHypothesisTable(unsigned table, unsigned line)
    : table_(table), line_(line) {}

void KeyHypothesisTable::record_slow(const AesBlock& ciphertext, const TTableLayout& layout) {
  ++slow_count_;
  const auto& sbox = aes_sbox();
  unsigned epl = layout.entries_per_line();
  auto bytes = bytes_of_table(table_);
  for (unsigned g = 0; g < 4; ++g) {
    std::uint8_t c = ciphertext[bytes[g]];
    for (unsigned e = line_ * epl; e < (line_ + 1) * epl; ++e)
      ++exclusions_[g][c ^ sbox[e]];
  }
}

std::int64_t KeyHypothesisTable::score(unsigned byte_index, std::uint8_t candidate) const {
  return std::int64_t(slow_count_) - exclusions_[byte_index / 4][candidate];
}

AttackState::AttackState(AttackConfig cfg) : config(std::move(cfg)) {
  tables.reserve(config.monitored.size());
  for (const auto& m : config.monitored) tables.emplace_back(m.table, m.line);
}

AttackObservation evict_reload_round(CacheHierarchy& h, const AttackConfig& cfg,
                                     VictimProcess& v, std::mt19937_64& plaintext_rng) {
  for (const auto& m : cfg.monitored) run_eviction(h, m.strategy, cfg.attacker_core);

  AesBlock pt;
  for (auto& b : pt) b = std::uint8_t(plaintext_rng());

  AttackObservation obs;
  obs.ciphertext = encrypt(v, h, pt);
  obs.reload_fast.reserve(cfg.monitored.size());
  for (const auto& m : cfg.monitored) {
    double t = h.access({cfg.attacker_core, m.addr, AccessKind::DataRead}).latency;
    obs.reload_fast.push_back(t < cfg.reload_threshold);
  }
  return obs;
}

void accumulate(const AttackObservation& obs, const TTableLayout& layout, AttackState& state) {
  ++state.observation_count;
  for (std::size_t i = 0; i < state.tables.size(); ++i) {
    state.tables[i].record_observation();
    if (!obs.reload_fast[i]) state.tables[i].record_slow(obs.ciphertext, layout);
  }
}

namespace {

const KeyHypothesisTable* find_line(const AttackState& s, unsigned table, unsigned line) {
  for (const auto& t : s.tables)
    if (t.table() == table && t.line() == line) return &t;
  return nullptr;
}

// Descending score, ties toward the lower byte value.
std::array<std::uint16_t, 256> rank_candidates(const std::array<double, 256>& score) {
  std::array<std::uint16_t, 256> order;
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint16_t a, std::uint16_t b) { return score[a] > score[b]; });
  std::array<std::uint16_t, 256> rank{};
  for (unsigned r = 0; r < 256; ++r) rank[order[r]] = std::uint16_t(r + 1);
  return rank;
}

}  // namespace

RecoveredKey recover_key(const AttackState& state, AttackVariant variant) {
  const TTableLayout& layout = state.config.layout;
  double p_na = no_access_probability(layout.entries_per_line(), kAccessesPerTable);

  RecoveredKey out;
  for (unsigned t = 0; t < 4; ++t) {
    std::vector<const KeyHypothesisTable*> lines;
    for (const auto& kt : state.tables)
      if (kt.table() == t) lines.push_back(&kt);
    if (lines.empty()) throw std::logic_error("recover_key: table has no monitored lines");

    for (unsigned i : bytes_of_table(t)) {
      std::array<double, 256> score{};
      switch (variant) {
        case AttackVariant::Original: {
          const auto* l0 = find_line(state, t, 0);
          if (!l0) throw std::logic_error("recover_key: line 0 not monitored");
          for (unsigned k = 0; k < 256; ++k) score[k] = double(l0->score(i, std::uint8_t(k)));
          break;
        }
        case AttackVariant::ProbFilter: {
          const KeyHypothesisTable* best = nullptr;
          double best_d = 0;
          for (const auto* l : lines) {
            double f = l->window_frozen() ? l->windowed_no_access() : l->empirical_no_access();
            double d = std::abs(f - p_na);
            if (!best || d < best_d) best = l, best_d = d;
          }
          for (unsigned k = 0; k < 256; ++k) score[k] = double(best->score(i, std::uint8_t(k)));
          break;
        }
        case AttackVariant::Weighted: {
          for (const auto* l : lines) {
            double d = std::abs(l->empirical_no_access() - p_na);
            double w = std::max(0.0, 1.0 - d / (1.0 - p_na));
            for (unsigned k = 0; k < 256; ++k) score[k] += w * double(l->score(i, std::uint8_t(k)));
          }
          break;
        }
        case AttackVariant::Majority: {
          for (const auto* l : lines) {
            unsigned best_k = 0;
            std::int64_t best_s = l->score(i, 0);
            for (unsigned k = 1; k < 256; ++k) {
              std::int64_t s = l->score(i, std::uint8_t(k));
              if (s > best_s) best_s = s, best_k = k;
            }
            score[best_k] += 1.0;
          }
          break;
        }
      }
      out.rank_of[i] = rank_candidates(score);
      for (unsigned k = 0; k < 256; ++k)
        if (out.rank_of[i][k] == 1) out.key[i] = std::uint8_t(k);
    }
  }
  return out;
}

double log2_rank_complexity(const RecoveredKey& r, const AesBlock& true_key) {
  double bits = 0;
  for (unsigned i = 0; i < 16; ++i) bits += std::log2(double(r.rank_of[i][true_key[i]]));
  return bits;
}

double CampaignResult::mean_correct(AttackVariant v, std::size_t checkpoint) const {
  double sum = 0;
  unsigned n = 0;
  for (const auto& c : cells)
    if (c.variant == v && c.encryptions == checkpoint) sum += c.correct_bytes, ++n;
  return n ? sum / n : 0.0;
}

void CampaignResult::write_csv(std::ostream& os) const {
  os << "variant,key_index,encryptions,correct_bytes,log2_complexity\n";
  for (const auto& c : cells)
    os << to_string(c.variant) << ',' << c.key_index << ',' << c.encryptions << ','
       << c.correct_bytes << ',' << c.log2_complexity << '\n';
}

void CampaignResult::write_summary_csv(std::ostream& os) const {
  os << "variant,encryptions,mean_correct_bytes\n";
  std::vector<std::pair<AttackVariant, std::size_t>> seen;
  for (const auto& c : cells) {
    std::pair<AttackVariant, std::size_t> key{c.variant, c.encryptions};
    if (std::find(seen.begin(), seen.end(), key) == seen.end()) seen.push_back(key);
  }
  for (const auto& [v, e] : seen)
    os << to_string(v) << ',' << e << ',' << mean_correct(v, e) << '\n';
}

namespace {

struct KeyRun {
  std::vector<CampaignCell> cells;
};

KeyRun run_one_key(const SoCProfile& profile, const CampaignOptions& opt, unsigned key_index) {
  std::uint64_t key_seed = derive_seed(opt.seed, 1000 + key_index);

  AesKey key;
  {
    std::mt19937_64 rng(derive_seed(key_seed, 0x6b));
    for (auto& b : key) b = std::uint8_t(rng());
  }

  HierarchyConfig cfg = profile.config;
  cfg.latency.rng_seed = derive_seed(key_seed, 0x11);
  cfg.replacement_seed = derive_seed(key_seed, 0x12);
  CacheHierarchy h(cfg);

  TTableLayout layout = TTableLayout::contiguous(1u << 20, cfg.line_size);
  unsigned victim_core = opt.same_core ? opt.attacker_core : opt.victim_core;
  VictimProcess victim =
      make_victim(key, victim_core, layout, derive_seed(key_seed, 0x71), opt.self_evict_prob);

  SimulatorPlatform platform(h);
  double threshold =
      calibrate_threshold(platform, Address(64u) << 20, Side::Data, 101, opt.attacker_core);
  h.reset();

  // One shared observation stream serves every variant; variants needing the
  // whole table monitor all lines, a pure first-line run monitors only those.
  bool all_lines = std::any_of(opt.variants.begin(), opt.variants.end(),
                               [](AttackVariant v) { return v != AttackVariant::Original; });
  StrategyTriple triple = opt.strategy_override.value_or(profile.strategy);

  AttackConfig acfg;
  acfg.attacker_core = opt.attacker_core;
  acfg.victim_core = victim_core;
  acfg.layout = layout;
  acfg.reload_threshold = threshold;
  acfg.encryptions = opt.checkpoints.empty() ? 0 : opt.checkpoints.back();
  for (unsigned t = 0; t < 4; ++t)
    for (unsigned l = 0; l < (all_lines ? layout.lines_per_table() : 1u); ++l) {
      MonitoredLine m;
      m.table = t;
      m.line = l;
      m.addr = layout.line_addr(t, l);
      m.strategy = make_strategy(triple, Side::Data, m.addr, cfg);
      acfg.monitored.push_back(std::move(m));
    }
  acfg.validate(cfg);

  AttackState state(acfg);
  std::mt19937_64 plaintext_rng(derive_seed(key_seed, 0x91));
  std::size_t window_point = std::max<std::size_t>(1, acfg.encryptions / 10);

  KeyRun out;
  const AesBlock& true_rk10 = victim.round_keys[10];
  for (std::size_t enc = 1; enc <= acfg.encryptions; ++enc) {
    AttackObservation obs = evict_reload_round(h, acfg, victim, plaintext_rng);
    accumulate(obs, layout, state);
    if (enc == window_point)
      for (auto& t : state.tables) t.freeze_window();
    if (std::find(opt.checkpoints.begin(), opt.checkpoints.end(), enc) !=
        opt.checkpoints.end()) {
      for (AttackVariant v : opt.variants) {
        RecoveredKey r = recover_key(state, v);
        unsigned correct = 0;
        for (unsigned i = 0; i < 16; ++i)
          if (r.key[i] == true_rk10[i]) ++correct;
        out.cells.push_back({v, key_index, enc, correct, log2_rank_complexity(r, true_rk10)});
      }
    }
  }
  return out;
}

}  // namespace

CampaignResult run_campaign(const SoCProfile& profile, const CampaignOptions& opt) {
  if (opt.variants.empty()) throw std::invalid_argument("campaign: no variants");
  if (opt.checkpoints.empty()) throw std::invalid_argument("campaign: no checkpoints");
  if (!std::is_sorted(opt.checkpoints.begin(), opt.checkpoints.end()))
    throw std::invalid_argument("campaign: checkpoints must be ascending");

  unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());

  std::vector<KeyRun> runs(opt.keys);
  for (unsigned base = 0; base < opt.keys; base += threads) {
    unsigned batch = std::min(threads, opt.keys - base);
    std::vector<std::future<KeyRun>> futs;
    futs.reserve(batch);
    for (unsigned k = 0; k < batch; ++k)
      futs.push_back(std::async(std::launch::async, run_one_key, std::cref(profile),
                                std::cref(opt), base + k));
    for (unsigned k = 0; k < batch; ++k) runs[base + k] = futs[k].get();
  }

  CampaignResult result;
  for (const auto& r : runs)
    result.cells.insert(result.cells.end(), r.cells.begin(), r.cells.end());
  return result;
}

const char* to_string(AttackVariant v) {
  switch (v) {
    case AttackVariant::Original: return "original";
    case AttackVariant::Majority: return "majority";
    case AttackVariant::ProbFilter: return "prob_filter";
    case AttackVariant::Weighted: return "weighted";
  }
  return "?";
}

AttackVariant variant_from_string(const std::string& s) {
  if (s == "original") return AttackVariant::Original;
  if (s == "majority") return AttackVariant::Majority;
  if (s == "prob_filter") return AttackVariant::ProbFilter;
  if (s == "weighted") return AttackVariant::Weighted;
  throw std::invalid_argument("unknown attack variant: " + s);
}

}  // namespace alsim
