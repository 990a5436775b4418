#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "alsim/cache_model.hpp"
#include "alsim/eviction.hpp"

namespace alsim {

// One simulated SoC: cache geometry plus the eviction parameters that are
// known to work on it, and the ground truth the detection suite is graded
// against.
struct SoCProfile {
  std::string name;
  HierarchyConfig config;
  StrategyTriple strategy;
  Side strategy_side = Side::Data;
  bool ground_truth_autolock = false;
};

SoCProfile parse_profile(std::istream& in);
SoCProfile load_profile(const std::string& path);
void save_profile(const SoCProfile& p, std::ostream& out);

// Names of the profiles shipped under profiles/.
const std::vector<std::string>& shipped_profile_names();

}  // namespace alsim
