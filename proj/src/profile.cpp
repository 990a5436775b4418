#include "alsim/profile.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace alsim {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

InclusiveSide parse_side(const std::string& v) {
  if (v == "instruction") return InclusiveSide::InstructionSide;
  if (v == "data") return InclusiveSide::DataSide;
  if (v == "none") return InclusiveSide::NonInclusive;
  throw std::invalid_argument("profile: bad inclusive side '" + v + "'");
}

ReplacementKind parse_replacement(const std::string& v) {
  if (v == "lru") return ReplacementKind::Lru;
  if (v == "round_robin") return ReplacementKind::RoundRobin;
  if (v == "pseudo_random") return ReplacementKind::PseudoRandom;
  throw std::invalid_argument("profile: bad replacement '" + v + "'");
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("profile: bad boolean '" + v + "'");
}

const char* side_name(InclusiveSide s) {
  switch (s) {
    case InclusiveSide::InstructionSide: return "instruction";
    case InclusiveSide::DataSide: return "data";
    case InclusiveSide::NonInclusive: return "none";
  }
  return "?";
}

const char* replacement_name(ReplacementKind r) {
  switch (r) {
    case ReplacementKind::Lru: return "lru";
    case ReplacementKind::RoundRobin: return "round_robin";
    case ReplacementKind::PseudoRandom: return "pseudo_random";
  }
  return "?";
}

}  // namespace

SoCProfile parse_profile(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("profile: expected key = value, got '" + s + "'");
    kv[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end())
      throw std::invalid_argument(std::string("profile: missing key '") + key + "'");
    return it->second;
  };
  auto get_u = [&](const char* key) { return unsigned(std::stoul(need(key))); };
  auto get_u64 = [&](const char* key) { return std::stoull(need(key)); };
  auto get_d = [&](const char* key) { return std::stod(need(key)); };

  SoCProfile p;
  p.name = need("name");
  p.config.num_cores = get_u("cores");
  p.config.line_size = get_u("line_size");
  p.config.l1_sets = get_u("l1_sets");
  p.config.l1i_ways = get_u("l1i_ways");
  p.config.l1d_ways = get_u("l1d_ways");
  p.config.l2_sets = get_u("l2_sets");
  p.config.l2_ways = get_u("l2_ways");
  p.config.l2_inclusive_side = parse_side(need("inclusive_side"));
  p.config.autolock = parse_bool(need("autolock"));
  p.config.replacement = parse_replacement(need("replacement"));
  p.config.replacement_seed = get_u64("replacement_seed");
  p.config.mem_bytes = get_u64("mem_bytes");
  p.config.latency.l1_hit = get_d("latency_l1_hit");
  p.config.latency.l2_hit = get_d("latency_l2_hit");
  p.config.latency.memory = get_d("latency_memory");
  p.config.latency.jitter_stddev = get_d("latency_jitter_stddev");
  p.config.latency.rng_seed = get_u64("latency_rng_seed");

  std::istringstream triple(need("strategy"));
  char dash1 = 0, dash2 = 0;
  if (!(triple >> p.strategy.n >> dash1 >> p.strategy.a >> dash2 >> p.strategy.d) ||
      dash1 != '-' || dash2 != '-')
    throw std::invalid_argument("profile: strategy must look like N-A-D");
  const std::string& side = need("strategy_side");
  if (side == "instruction") p.strategy_side = Side::Instruction;
  else if (side == "data") p.strategy_side = Side::Data;
  else throw std::invalid_argument("profile: bad strategy_side '" + side + "'");
  p.ground_truth_autolock = parse_bool(need("ground_truth_autolock"));

  p.config.validate();
  return p;
}

SoCProfile load_profile(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open profile '" + path + "'");
  return parse_profile(f);
}

void save_profile(const SoCProfile& p, std::ostream& out) {
  const HierarchyConfig& c = p.config;
  out << "name = " << p.name << '\n'
      << "cores = " << c.num_cores << '\n'
      << "line_size = " << c.line_size << '\n'
      << "l1_sets = " << c.l1_sets << '\n'
      << "l1i_ways = " << c.l1i_ways << '\n'
      << "l1d_ways = " << c.l1d_ways << '\n'
      << "l2_sets = " << c.l2_sets << '\n'
      << "l2_ways = " << c.l2_ways << '\n'
      << "inclusive_side = " << side_name(c.l2_inclusive_side) << '\n'
      << "autolock = " << (c.autolock ? "true" : "false") << '\n'
      << "replacement = " << replacement_name(c.replacement) << '\n'
      << "replacement_seed = " << c.replacement_seed << '\n'
      << "mem_bytes = " << c.mem_bytes << '\n'
      << "latency_l1_hit = " << c.latency.l1_hit << '\n'
      << "latency_l2_hit = " << c.latency.l2_hit << '\n'
      << "latency_memory = " << c.latency.memory << '\n'
      << "latency_jitter_stddev = " << c.latency.jitter_stddev << '\n'
      << "latency_rng_seed = " << c.latency.rng_seed << '\n'
      << "strategy = " << p.strategy.n << '-' << p.strategy.a << '-' << p.strategy.d << '\n'
      << "strategy_side = " << (p.strategy_side == Side::Instruction ? "instruction" : "data")
      << '\n'
      << "ground_truth_autolock = " << (p.ground_truth_autolock ? "true" : "false") << '\n';
}

const std::vector<std::string>& shipped_profile_names() {
  static const std::vector<std::string> names = {"cortex-a7", "cortex-a15", "cortex-a53",
                                                 "cortex-a57", "krait450"};
  return names;
}

}  // namespace alsim
