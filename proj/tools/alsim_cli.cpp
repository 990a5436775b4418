#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alsim/attack.hpp"
#include "alsim/cache_model.hpp"
#include "alsim/detection.hpp"
#include "alsim/eviction.hpp"
#include "alsim/profile.hpp"
#include "alsim/util.hpp"

namespace {

#ifndef ALSIM_PROFILE_DIR
#define ALSIM_PROFILE_DIR "profiles"
#endif

alsim::SoCProfile resolve_profile(const std::string& spec) {
  namespace fs = std::filesystem;
  if (fs::exists(spec)) return alsim::load_profile(spec);
  fs::path shipped = fs::path(ALSIM_PROFILE_DIR) / (spec + ".profile");
  if (fs::exists(shipped)) return alsim::load_profile(shipped.string());
  throw CLI::ValidationError("--profile", "no such profile file or shipped profile: " + spec);
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot open output file: " + path);
  return file;
}

alsim::StrategyTriple parse_triple(const std::string& s) {
  alsim::StrategyTriple t;
  char dash1 = 0, dash2 = 0;
  std::istringstream in(s);
  if (!(in >> t.n >> dash1 >> t.a >> dash2 >> t.d) || dash1 != '-' || dash2 != '-')
    throw CLI::ValidationError("--strategy", "expected N-A-D, e.g. 23-4-2");
  return t;
}

int run_detect(const alsim::SoCProfile& profile, std::uint64_t seed, unsigned trials,
               const std::string& out_path) {
  alsim::HierarchyConfig cfg = profile.config;
  cfg.latency.rng_seed = alsim::derive_seed(seed, 1);
  cfg.replacement_seed = alsim::derive_seed(seed, 2);
  alsim::CacheHierarchy h(cfg);
  alsim::SimulatorPlatform platform(h);

  alsim::Side side = profile.strategy_side;
  alsim::Address target = 1u << 20;
  alsim::EvictionStrategy strategy =
      alsim::make_strategy(profile.strategy, side, target, cfg);
  double threshold = alsim::calibrate_threshold(platform, target, side, 101);

  std::ofstream file;
  std::ostream& os = open_out(out_path, file);
  os << "method,attacker_core,autolock_detected,confidence\n";

  bool all_match = true;
  for (unsigned core = 1; core < cfg.num_cores; ++core) {
    alsim::DetectionOptions opt;
    opt.victim_core = 0;
    opt.attacker_core = core;
    opt.side = side;
    for (alsim::DetectionMethod m : {alsim::DetectionMethod::Debugger,
                                     alsim::DetectionMethod::Pmu,
                                     alsim::DetectionMethod::Timing}) {
      alsim::DetectionVerdict v;
      try {
        switch (m) {
          case alsim::DetectionMethod::Debugger:
            v = alsim::debugger_test(platform, target, strategy, trials, opt);
            break;
          case alsim::DetectionMethod::Pmu:
            v = alsim::pmu_test(platform, target, strategy, trials, opt);
            break;
          case alsim::DetectionMethod::Timing:
            v = alsim::timing_test(platform, target, strategy, trials, threshold, opt);
            break;
        }
      } catch (const alsim::InconclusiveError& e) {
        std::cerr << "inconclusive (" << alsim::to_string(m) << ", core " << core
                  << "): " << e.what() << '\n';
        all_match = false;
        continue;
      }
      os << alsim::to_string(m) << ',' << core << ',' << (v.present ? 1 : 0) << ','
         << v.confidence << '\n';
      if (v.present != profile.ground_truth_autolock) all_match = false;
    }
  }
  return all_match ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AutoLock cache hierarchy simulator and analysis toolchain"};
  app.require_subcommand(1);

  std::string profile_spec = "cortex-a15";
  std::uint64_t seed = 0;
  unsigned trials = 101;
  std::string out_path;
  app.add_option("--profile", profile_spec, "shipped profile name or path to a .profile file")
      ->capture_default_str();
  app.add_option("--seed", seed, "global RNG seed")->capture_default_str();
  app.add_option("--trials", trials, "trials per detection test")->capture_default_str();
  app.add_option("--out", out_path, "output file (default: stdout)");

  auto* detect = app.add_subcommand("detect", "grade the inclusion lock detection tests");

  auto* tune = app.add_subcommand("tune", "search eviction strategy parameters");
  unsigned max_n = 40, max_a = 6, max_d = 6;
  double success = 1.0;
  unsigned tune_trials = 20;
  tune->add_option("--max-n", max_n, "largest window count")->capture_default_str();
  tune->add_option("--max-a", max_a, "largest repetition count")->capture_default_str();
  tune->add_option("--max-d", max_d, "largest window size")->capture_default_str();
  tune->add_option("--min-success", success, "required eviction rate")->capture_default_str();
  tune->add_option("--tune-trials", tune_trials, "rounds per candidate")->capture_default_str();

  auto* attack = app.add_subcommand("attack", "run an evict+reload key recovery campaign");
  unsigned keys = 1;
  std::size_t encryptions = 100000;
  std::vector<std::string> variant_names{"original"};
  std::vector<std::size_t> checkpoints;
  bool same_core = false;
  std::string triple_spec;
  std::string summary_path;
  double self_evict = 0.08;
  unsigned threads = 0;
  attack->add_option("--keys", keys, "number of random keys")->capture_default_str();
  attack->add_option("--encryptions", encryptions, "encryptions per key")->capture_default_str();
  attack->add_option("--variant", variant_names,
                     "original, majority, prob_filter, weighted (repeatable)");
  attack->add_option("--checkpoint", checkpoints, "intermediate grading points (repeatable)");
  attack->add_flag("--same-core", same_core, "attacker shares the victim core");
  attack->add_option("--strategy", triple_spec, "eviction triple override, N-A-D");
  attack->add_option("--summary-out", summary_path, "also write the mean curve CSV here");
  attack->add_option("--self-evict-prob", self_evict, "victim noise rate")->capture_default_str();
  attack->add_option("--threads", threads, "worker threads (0: all cores)");

  auto* histogram = app.add_subcommand("histogram", "reload latency histogram CSV");
  std::size_t samples = 50000;
  histogram->add_option("--samples", samples, "samples per series")->capture_default_str();

  app.add_subcommand("dump-profile", "print a profile in its file format");
  app.add_subcommand("dump-tables", "print the encryption lookup tables");

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("dump-tables")) {
      std::ofstream file;
      alsim::dump_tables(open_out(out_path, file));
      return 0;
    }

    alsim::SoCProfile profile = resolve_profile(profile_spec);

    if (app.got_subcommand("dump-profile")) {
      std::ofstream file;
      alsim::save_profile(profile, open_out(out_path, file));
      return 0;
    }

    if (app.got_subcommand(detect)) return run_detect(profile, seed, trials, out_path);

    if (app.got_subcommand(tune)) {
      alsim::HierarchyConfig cfg = profile.config;
      cfg.latency.rng_seed = alsim::derive_seed(seed, 1);
      cfg.replacement_seed = alsim::derive_seed(seed, 2);
      alsim::SearchGrid grid;
      for (unsigned n = 1; n <= max_n; ++n) grid.n_values.push_back(n);
      for (unsigned a = 1; a <= max_a; ++a) grid.a_values.push_back(a);
      for (unsigned d = 1; d <= max_d; ++d) grid.d_values.push_back(d);
      alsim::SearchReport report = alsim::search_parameters(
          cfg, profile.strategy_side, 1u << 20, grid, tune_trials, success);
      std::ofstream file;
      report.write_csv(open_out(out_path, file));
      if (!report.chosen) {
        std::cerr << "no reliable strategy in grid\n";
        return 1;
      }
      return 0;
    }

    if (app.got_subcommand(attack)) {
      alsim::CampaignOptions opt;
      for (const auto& v : variant_names)
        opt.variants.push_back(alsim::variant_from_string(v));
      opt.keys = keys;
      opt.checkpoints = checkpoints;
      opt.checkpoints.push_back(encryptions);
      std::sort(opt.checkpoints.begin(), opt.checkpoints.end());
      opt.checkpoints.erase(std::unique(opt.checkpoints.begin(), opt.checkpoints.end()),
                            opt.checkpoints.end());
      opt.seed = seed;
      opt.same_core = same_core;
      opt.self_evict_prob = self_evict;
      opt.threads = threads;
      if (!triple_spec.empty()) opt.strategy_override = parse_triple(triple_spec);
      alsim::CampaignResult result = alsim::run_campaign(profile, opt);
      std::ofstream file;
      result.write_csv(open_out(out_path, file));
      if (!summary_path.empty()) {
        std::ofstream sfile;
        result.write_summary_csv(open_out(summary_path, sfile));
      }
      return 0;
    }

    if (app.got_subcommand(histogram)) {
      alsim::HierarchyConfig cfg = profile.config;
      cfg.latency.rng_seed = alsim::derive_seed(seed, 1);
      cfg.replacement_seed = alsim::derive_seed(seed, 2);
      alsim::CacheHierarchy h(cfg);
      alsim::SimulatorPlatform platform(h);
      alsim::Address target = 1u << 20;
      alsim::EvictionStrategy strategy =
          alsim::make_strategy(profile.strategy, profile.strategy_side, target, cfg);
      auto rows = alsim::emit_histogram(platform, target, strategy, samples, true);
      auto without = alsim::emit_histogram(platform, target, strategy, samples, false);
      rows.insert(rows.end(), without.begin(), without.end());
      std::ofstream file;
      alsim::write_histogram_csv(open_out(out_path, file), rows);
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
