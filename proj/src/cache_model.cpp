#include "alsim/cache_model.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>
#include <stdexcept>

#include "alsim/util.hpp"

namespace alsim {

namespace {

bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

void LatencyModel::validate() const {
  if (!(l1_hit < l2_hit && l2_hit < memory))
    throw std::invalid_argument("latency model requires l1_hit < l2_hit < memory");
  if (jitter_stddev < 0.0)
    throw std::invalid_argument("jitter_stddev must be non-negative");
  if (!((memory - l2_hit) > 6.0 * jitter_stddev))
    throw std::invalid_argument("(memory - l2_hit) must exceed 6 * jitter_stddev");
}

unsigned HierarchyConfig::inclusive_l1_ways() const {
  switch (l2_inclusive_side) {
    case InclusiveSide::InstructionSide: return l1i_ways;
    case InclusiveSide::DataSide: return l1d_ways;
    case InclusiveSide::NonInclusive: return 0;
  }
  return 0;
}

bool HierarchyConfig::side_is_inclusive(AccessKind kind) const {
  if (kind == AccessKind::InstructionFetch)
    return l2_inclusive_side == InclusiveSide::InstructionSide;
  return l2_inclusive_side == InclusiveSide::DataSide;
}

void HierarchyConfig::validate() const {
  if (num_cores == 0) throw std::invalid_argument("num_cores must be >= 1");
  if (!is_pow2(line_size)) throw std::invalid_argument("line_size must be a power of two");
  if (!is_pow2(l1_sets) || !is_pow2(l2_sets))
    throw std::invalid_argument("set counts must be powers of two");
  if (l1i_ways == 0 || l1d_ways == 0 || l2_ways == 0)
    throw std::invalid_argument("associativities must be >= 1");
  if (autolock) {
    if (l2_inclusive_side == InclusiveSide::NonInclusive)
      throw std::invalid_argument("autolock requires an inclusive L2 side");
    // W_l < W_h,sum has no defined semantics; such configs are rejected.
    if (l2_ways < num_cores * inclusive_l1_ways())
      throw std::invalid_argument(
          "autolock requires l2_ways >= num_cores * inclusive-side L1 ways");
  }
  if (mem_bytes < std::uint64_t(line_size) * l2_sets)
    throw std::invalid_argument("mem_bytes too small for one line per L2 set");
  latency.validate();
}

void CacheHierarchy::CacheArray::init(unsigned s, unsigned w) {
  sets = s;
  ways = w;
  lines.assign(std::size_t(s) * w, CacheLine{});
  rr_next.assign(s, 0);
}

void CacheHierarchy::CacheArray::clear() {
  std::fill(lines.begin(), lines.end(), CacheLine{});
  std::fill(rr_next.begin(), rr_next.end(), 0u);
}

CacheLine* CacheHierarchy::CacheArray::find(unsigned set, Address tag) {
  CacheLine* base = &lines[std::size_t(set) * ways];
  for (unsigned w = 0; w < ways; ++w)
    if (base[w].valid && base[w].tag == tag) return &base[w];
  return nullptr;
}

const CacheLine* CacheHierarchy::CacheArray::find(unsigned set, Address tag) const {
  return const_cast<CacheArray*>(this)->find(set, tag);
}

CacheHierarchy::CacheHierarchy(HierarchyConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  l1i_.resize(cfg_.num_cores);
  l1d_.resize(cfg_.num_cores);
  for (unsigned c = 0; c < cfg_.num_cores; ++c) {
    l1i_[c].init(cfg_.l1_sets, cfg_.l1i_ways);
    l1d_[c].init(cfg_.l1_sets, cfg_.l1d_ways);
  }
  l2_.init(cfg_.l2_sets, cfg_.l2_ways);
  reset();
}

void CacheHierarchy::reset() {
  for (auto& c : l1i_) c.clear();
  for (auto& c : l1d_) c.clear();
  l2_.clear();
  counters_ = EventCounters{};
  tick_ = 0;
  jitter_rng_.seed(derive_seed(cfg_.latency.rng_seed, 0x6a1));
  repl_rng_.seed(derive_seed(cfg_.replacement_seed, 0x7e9));
}

bool CacheHierarchy::side_inclusive(L1Side side) const {
  if (side == L1Side::Instruction)
    return cfg_.l2_inclusive_side == InclusiveSide::InstructionSide;
  return cfg_.l2_inclusive_side == InclusiveSide::DataSide;
}

L2AllocPolicy CacheHierarchy::alloc_policy(L1Side side) const {
  return side_inclusive(side) ? cfg_.alloc_inclusive : cfg_.alloc_noninclusive;
}

double CacheHierarchy::draw_latency(double base) {
  if (cfg_.latency.jitter_stddev <= 0.0) return base;
  std::normal_distribution<double> jitter(0.0, cfg_.latency.jitter_stddev);
  return std::max(0.0, base + jitter(jitter_rng_));
}

unsigned CacheHierarchy::victim_way(CacheArray& c, unsigned set) {
  CacheLine* base = c.line(set, 0);
  switch (cfg_.replacement) {
    case ReplacementKind::Lru: {
      unsigned best = 0;
      for (unsigned w = 1; w < c.ways; ++w)
        if (base[w].replacement_meta < base[best].replacement_meta) best = w;
      return best;
    }
    case ReplacementKind::RoundRobin: {
      unsigned w = c.rr_next[set];
      c.rr_next[set] = (w + 1) % c.ways;
      return w;
    }
    case ReplacementKind::PseudoRandom:
      return std::uniform_int_distribution<unsigned>(0, c.ways - 1)(repl_rng_);
  }
  return 0;
}

// The policy is queried repeatedly, skipping lines with the inclusion bit
// set; -1 means every line in the set is locked.
int CacheHierarchy::victim_way_unlocked(CacheArray& c, unsigned set) {
  CacheLine* base = c.line(set, 0);
  switch (cfg_.replacement) {
    case ReplacementKind::Lru: {
      int best = -1;
      for (unsigned w = 0; w < c.ways; ++w) {
        if (base[w].inclusion_locked) continue;
        if (best < 0 || base[w].replacement_meta < base[best].replacement_meta)
          best = int(w);
      }
      return best;
    }
    case ReplacementKind::RoundRobin: {
      for (unsigned i = 0; i < c.ways; ++i) {
        unsigned w = (c.rr_next[set] + i) % c.ways;
        if (!base[w].inclusion_locked) {
          c.rr_next[set] = (w + 1) % c.ways;
          return int(w);
        }
      }
      return -1;
    }
    case ReplacementKind::PseudoRandom: {
      unsigned unlocked = 0;
      for (unsigned w = 0; w < c.ways; ++w)
        if (!base[w].inclusion_locked) ++unlocked;
      if (unlocked == 0) return -1;
      unsigned pick = std::uniform_int_distribution<unsigned>(0, unlocked - 1)(repl_rng_);
      for (unsigned w = 0; w < c.ways; ++w) {
        if (base[w].inclusion_locked) continue;
        if (pick-- == 0) return int(w);
      }
      return -1;
    }
  }
  return -1;
}

bool CacheHierarchy::other_core_holds(unsigned core, L1Side side, Address tag) const {
  unsigned set = unsigned(tag % cfg_.l1_sets);
  for (unsigned c = 0; c < cfg_.num_cores; ++c) {
    if (c == core) continue;
    if (l1(c, side).find(set, tag)) return true;
  }
  return false;
}

void CacheHierarchy::back_invalidate_inclusive_l1(Address tag) {
  L1Side side = cfg_.l2_inclusive_side == InclusiveSide::InstructionSide
                    ? L1Side::Instruction
                    : L1Side::Data;
  unsigned set = unsigned(tag % cfg_.l1_sets);
  for (unsigned c = 0; c < cfg_.num_cores; ++c)
    if (CacheLine* l = l1(c, side).find(set, tag)) *l = CacheLine{};
}

void CacheHierarchy::on_l1_evict(unsigned core, L1Side side, Address tag) {
  if (side_inclusive(side)) {
    if (cfg_.autolock && !other_core_holds(core, side, tag)) {
      CacheLine* l = l2_.find(unsigned(tag % cfg_.l2_sets), tag);
      assert(l && "inclusion: an inclusive-side L1 line must be in L2");
      if (l) l->inclusion_locked = false;
    }
    return;  // the L2 copy itself stays valid
  }
  if (alloc_policy(side) == L2AllocPolicy::OnL1Evict) {
    if (!l2_.find(unsigned(tag % cfg_.l2_sets), tag)) allocate_l2(tag, false);
  }
}

CacheLine* CacheHierarchy::allocate_l2(Address tag, bool required) {
  unsigned set = unsigned(tag % cfg_.l2_sets);
  CacheLine* base = l2_.line(set, 0);
  for (unsigned w = 0; w < l2_.ways; ++w) {
    if (!base[w].valid) {
      base[w] = CacheLine{tag, true, false, 0};
      touch(l2_, base[w]);
      return &base[w];
    }
  }
  int way;
  if (cfg_.autolock) {
    way = victim_way_unlocked(l2_, set);
    if (way < 0) {
      // Every line in the set is locked. An allocation that must succeed to
      // keep the inclusive side consistent falls back to back-invalidation;
      // a lazy non-inclusive-side allocation simply fails.
      if (!required) return nullptr;
      way = int(victim_way(l2_, set));
      back_invalidate_inclusive_l1(base[way].tag);
      ++counters_.l2_lock_fallbacks;
    }
  } else {
    way = int(victim_way(l2_, set));
    if (cfg_.l2_inclusive_side != InclusiveSide::NonInclusive)
      back_invalidate_inclusive_l1(base[way].tag);
  }
  ++counters_.l2_evictions;
  base[way] = CacheLine{tag, true, false, 0};
  touch(l2_, base[way]);
  return &base[way];
}

void CacheHierarchy::allocate_l1(unsigned core, L1Side side, Address tag) {
  CacheArray& c = l1(core, side);
  unsigned set = unsigned(tag % cfg_.l1_sets);
  CacheLine* base = c.line(set, 0);
  for (unsigned w = 0; w < c.ways; ++w) {
    if (!base[w].valid) {
      base[w] = CacheLine{tag, true, false, 0};
      touch(c, base[w]);
      return;
    }
  }
  unsigned way = victim_way(c, set);
  on_l1_evict(core, side, base[way].tag);
  base[way] = CacheLine{tag, true, false, 0};
  touch(c, base[way]);
}

AccessResult CacheHierarchy::access(const MemoryAccess& a) {
  if (a.core >= cfg_.num_cores) throw std::invalid_argument("access: core out of range");
  if (a.addr >= cfg_.mem_bytes)
    throw std::out_of_range("access: address outside configured physical range");
  if (trace_) trace_->push_back(a);

  Address tag = a.addr / cfg_.line_size;
  L1Side side = a.kind == AccessKind::InstructionFetch ? L1Side::Instruction : L1Side::Data;
  CacheArray& c1 = l1(a.core, side);
  unsigned s1 = unsigned(tag % cfg_.l1_sets);

  if (CacheLine* l = c1.find(s1, tag)) {
    touch(c1, *l);
    ++counters_.l1_hits;
    return {Level::L1, draw_latency(cfg_.latency.l1_hit)};
  }

  ++counters_.l2_accesses;
  bool inclusive = side_inclusive(side);
  unsigned s2 = unsigned(tag % cfg_.l2_sets);
  Level served;
  CacheLine* l2line = l2_.find(s2, tag);
  if (l2line) {
    touch(l2_, *l2line);
    ++counters_.l2_hits;
    served = Level::L2;
  } else {
    ++counters_.memory_fetches;
    served = Level::Memory;
    if (alloc_policy(side) == L2AllocPolicy::OnMiss)
      l2line = allocate_l2(tag, /*required=*/inclusive);
  }
  allocate_l1(a.core, side, tag);
  if (inclusive && cfg_.autolock) {
    assert(l2line && "inclusive-side allocation must land in L2");
    if (l2line) l2line->inclusion_locked = true;
  }
  double base = served == Level::L2 ? cfg_.latency.l2_hit : cfg_.latency.memory;
  return {served, draw_latency(base)};
}

void CacheHierarchy::demote_from_l1(unsigned core, Address addr) {
  if (core >= cfg_.num_cores) throw std::invalid_argument("demote: core out of range");
  Address tag = addr / cfg_.line_size;
  unsigned set = unsigned(tag % cfg_.l1_sets);
  for (L1Side side : {L1Side::Instruction, L1Side::Data}) {
    if (CacheLine* l = l1(core, side).find(set, tag)) {
      *l = CacheLine{};
      on_l1_evict(core, side, tag);
    }
  }
}

LineState CacheHierarchy::inspect(Level level, unsigned core, Address addr) const {
  Address tag = addr / cfg_.line_size;
  if (level == Level::L2) {
    const CacheLine* l = l2_.find(unsigned(tag % cfg_.l2_sets), tag);
    return l ? LineState{true, l->inclusion_locked} : LineState{};
  }
  if (level == Level::L1) {
    if (core >= cfg_.num_cores) throw std::invalid_argument("inspect: core out of range");
    unsigned set = unsigned(tag % cfg_.l1_sets);
    if (l1i_[core].find(set, tag) || l1d_[core].find(set, tag)) return {true, false};
    return {};
  }
  throw std::invalid_argument("inspect: level must be L1 or L2");
}

std::vector<LineRecord> CacheHierarchy::snapshot() const {
  std::vector<LineRecord> out;
  auto emit = [&](const CacheArray& c, CacheUnit unit, unsigned core) {
    for (unsigned s = 0; s < c.sets; ++s)
      for (unsigned w = 0; w < c.ways; ++w) {
        const CacheLine* l = c.line(s, w);
        out.push_back({unit, core, s, w, l->tag, l->valid, l->inclusion_locked});
      }
  };
  for (unsigned c = 0; c < cfg_.num_cores; ++c) {
    emit(l1i_[c], CacheUnit::L1I, c);
    emit(l1d_[c], CacheUnit::L1D, c);
  }
  emit(l2_, CacheUnit::L2, 0);
  return out;
}

std::string CacheHierarchy::dump() const {
  std::ostringstream os;
  for (const LineRecord& r : snapshot())
    os << to_string(r.unit) << ' ' << r.core << ' ' << r.set << ' ' << r.way << ' '
       << r.tag << ' ' << (r.valid ? 1 : 0) << ' ' << (r.locked ? 1 : 0) << '\n';
  return os.str();
}

const char* to_string(CacheUnit u) {
  switch (u) {
    case CacheUnit::L1I: return "L1I";
    case CacheUnit::L1D: return "L1D";
    case CacheUnit::L2: return "L2";
  }
  return "?";
}

const char* to_string(Level l) {
  switch (l) {
    case Level::L1: return "L1";
    case Level::L2: return "L2";
    case Level::Memory: return "Memory";
  }
  return "?";
}

}  // namespace alsim
