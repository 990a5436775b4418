#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace alsim {

using Address = std::uint64_t;

enum class InclusiveSide { InstructionSide, DataSide, NonInclusive };
enum class ReplacementKind { Lru, RoundRobin, PseudoRandom };
enum class AccessKind { DataRead, DataWrite, InstructionFetch };
enum class Level { L1, L2, Memory };
enum class CacheUnit { L1I, L1D, L2 };

// When a level misses, a line can be allocated there immediately (OnMiss) or
// lazily, when the level above evicts it (OnL1Evict).
enum class L2AllocPolicy { OnMiss, OnL1Evict };

struct LatencyModel {
  double l1_hit = 4.0;
  double l2_hit = 40.0;
  double memory = 300.0;
  double jitter_stddev = 20.0;  // Gaussian, truncated at 0
  std::uint64_t rng_seed = 0;

  void validate() const;  // throws std::invalid_argument
};

struct HierarchyConfig {
  unsigned num_cores = 2;
  unsigned line_size = 64;  // bytes, power of two
  unsigned l1i_ways = 2;
  unsigned l1d_ways = 2;
  unsigned l2_ways = 8;
  unsigned l1_sets = 128;  // power of two
  unsigned l2_sets = 1024; // power of two
  InclusiveSide l2_inclusive_side = InclusiveSide::InstructionSide;
  bool autolock = true;
  ReplacementKind replacement = ReplacementKind::Lru;
  std::uint64_t replacement_seed = 0;
  LatencyModel latency;
  // Simulated physical memory size; accesses outside it are rejected.
  std::uint64_t mem_bytes = 1ULL << 30;
  L2AllocPolicy alloc_inclusive = L2AllocPolicy::OnMiss;
  L2AllocPolicy alloc_noninclusive = L2AllocPolicy::OnL1Evict;

  void validate() const;  // throws std::invalid_argument
  unsigned inclusive_l1_ways() const;
  bool side_is_inclusive(AccessKind kind) const;
};

struct CacheLine {
  Address tag = 0;  // full line index (addr / line_size); set-unambiguous
  bool valid = false;
  bool inclusion_locked = false;  // L2 only, only with autolock
  std::uint64_t replacement_meta = 0;
};

struct EventCounters {
  std::uint64_t l2_accesses = 0;  // hit or miss, mirrors PMU event 0x16
  std::uint64_t l1_hits = 0;
  std::uint64_t l2_hits = 0;
  std::uint64_t memory_fetches = 0;
  std::uint64_t l2_evictions = 0;
  std::uint64_t l2_lock_fallbacks = 0;
};

struct MemoryAccess {
  unsigned core = 0;
  Address addr = 0;
  AccessKind kind = AccessKind::DataRead;
};

struct AccessResult {
  Level level_served;
  double latency;
};

struct LineState {
  bool present = false;
  bool locked = false;
};

struct LineRecord {
  CacheUnit unit;
  unsigned core;  // 0 for L2
  unsigned set;
  unsigned way;
  Address tag;
  bool valid;
  bool locked;
};

class CacheHierarchy {
 public:
  explicit CacheHierarchy(HierarchyConfig cfg);

  AccessResult access(const MemoryAccess& a);

  LineState inspect(Level level, unsigned core, Address addr) const;
  LineState inspect_l2(Address addr) const { return inspect(Level::L2, 0, addr); }

  const EventCounters& counters() const { return counters_; }
  void reset();

  // Pushes one line out of `core`'s L1 (either side) through the normal L1
  // eviction path: inclusion bit cleared if no other core holds a copy, and
  // a non-inclusive-side victim is allocated into L2. No counter changes.
  void demote_from_l1(unsigned core, Address addr);

  std::vector<LineRecord> snapshot() const;
  std::string dump() const;

  const HierarchyConfig& config() const { return cfg_; }

  // Optional access trace; every access() is appended while a sink is set.
  void set_trace_sink(std::vector<MemoryAccess>* sink) { trace_ = sink; }

 private:
  struct CacheArray {
    unsigned sets = 0;
    unsigned ways = 0;
    std::vector<CacheLine> lines;     // sets * ways
    std::vector<unsigned> rr_next;    // per-set round-robin cursor

    void init(unsigned s, unsigned w);
    CacheLine* find(unsigned set, Address tag);
    const CacheLine* find(unsigned set, Address tag) const;
    CacheLine* line(unsigned set, unsigned way) { return &lines[std::size_t(set) * ways + way]; }
    const CacheLine* line(unsigned set, unsigned way) const {
      return &lines[std::size_t(set) * ways + way];
    }
    void clear();
  };

  enum class L1Side { Instruction, Data };

  CacheArray& l1(unsigned core, L1Side side) {
    return side == L1Side::Instruction ? l1i_[core] : l1d_[core];
  }
  const CacheArray& l1(unsigned core, L1Side side) const {
    return side == L1Side::Instruction ? l1i_[core] : l1d_[core];
  }

  bool side_inclusive(L1Side side) const;
  L2AllocPolicy alloc_policy(L1Side side) const;

  void touch(CacheArray& c, CacheLine& l) { (void)c; l.replacement_meta = ++tick_; }

  unsigned victim_way(CacheArray& c, unsigned set);                 // policy first choice
  int victim_way_unlocked(CacheArray& c, unsigned set);             // -1 if all locked
  void allocate_l1(unsigned core, L1Side side, Address tag);
  void on_l1_evict(unsigned core, L1Side side, Address tag);
  CacheLine* allocate_l2(Address tag, bool required);
  void back_invalidate_inclusive_l1(Address tag);
  bool other_core_holds(unsigned core, L1Side side, Address tag) const;

  double draw_latency(double base);

  HierarchyConfig cfg_;
  std::vector<CacheArray> l1i_, l1d_;
  CacheArray l2_;
  EventCounters counters_;
  std::uint64_t tick_ = 0;
  std::mt19937_64 jitter_rng_;
  std::mt19937_64 repl_rng_;
  std::vector<MemoryAccess>* trace_ = nullptr;
};

const char* to_string(CacheUnit u);
const char* to_string(Level l);

}  // namespace alsim
