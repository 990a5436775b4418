#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "alsim/cache_model.hpp"

using namespace alsim;

namespace {

HierarchyConfig tiny_config() {
  HierarchyConfig cfg;
  cfg.num_cores = 2;
  cfg.line_size = 64;
  cfg.l1_sets = 2;
  cfg.l1i_ways = 2;
  cfg.l1d_ways = 2;
  cfg.l2_sets = 4;
  cfg.l2_ways = 4;
  cfg.l2_inclusive_side = InclusiveSide::InstructionSide;
  cfg.autolock = true;
  cfg.latency.jitter_stddev = 0.0;
  cfg.mem_bytes = 1 << 20;
  return cfg;
}

Address addr(unsigned line) { return Address(line) * 64; }

// Full-scan structural invariants over a snapshot.
void check_invariants(const CacheHierarchy& h) {
  const HierarchyConfig& cfg = h.config();
  auto snap = h.snapshot();

  std::set<std::tuple<int, unsigned, unsigned, Address>> tags;  // (unit,core,set,tag)
  std::map<Address, bool> l2_locked;                            // valid L2 tag -> lock bit
  std::set<Address> inclusive_l1_tags;

  CacheUnit inclusive_unit = cfg.l2_inclusive_side == InclusiveSide::InstructionSide
                                 ? CacheUnit::L1I
                                 : CacheUnit::L1D;
  for (const LineRecord& r : snap) {
    if (!r.valid) {
      REQUIRE(!r.locked);
      continue;
    }
    unsigned sets = r.unit == CacheUnit::L2 ? cfg.l2_sets : cfg.l1_sets;
    REQUIRE(r.tag % sets == r.set);  // a line sits in the set its tag maps to
    REQUIRE(tags.insert({int(r.unit), r.core, r.set, r.tag}).second);  // no duplicates
    if (r.unit == CacheUnit::L2) {
      l2_locked[r.tag] = r.locked;
    } else {
      REQUIRE(!r.locked);  // only L2 lines carry the inclusion bit
      if (r.unit == inclusive_unit && cfg.l2_inclusive_side != InclusiveSide::NonInclusive)
        inclusive_l1_tags.insert(r.tag);
    }
  }

  if (cfg.l2_inclusive_side != InclusiveSide::NonInclusive) {
    for (Address t : inclusive_l1_tags) REQUIRE(l2_locked.count(t) == 1);  // inclusion
  }
  for (const auto& [tag, locked] : l2_locked) {
    bool held = inclusive_l1_tags.count(tag) != 0;
    if (cfg.autolock)
      REQUIRE(locked == held);  // inclusion bit tracks the L1 copies exactly
    else
      REQUIRE(!locked);
  }
}

void random_step(CacheHierarchy& h, std::mt19937_64& rng, unsigned line_pool) {
  const HierarchyConfig& cfg = h.config();
  MemoryAccess a;
  a.core = unsigned(rng() % cfg.num_cores);
  a.addr = addr(unsigned(rng() % line_pool));
  switch (rng() % 3) {
    case 0: a.kind = AccessKind::DataRead; break;
    case 1: a.kind = AccessKind::DataWrite; break;
    default: a.kind = AccessKind::InstructionFetch; break;
  }
  h.access(a);
  if (rng() % 8 == 0) h.demote_from_l1(a.core, a.addr);
}

}  // namespace

TEST_CASE("config validation rejects malformed geometries") {
  CHECK_NOTHROW(tiny_config().validate());

  auto bad = tiny_config();
  bad.l1_sets = 3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = tiny_config();
  bad.line_size = 48;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = tiny_config();
  bad.l2_ways = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  // AutoLock with fewer L2 ways than the sum of inclusive-side L1 ways is
  // rejected: the L1s could then hold more lines of a set than L2 can track.
  bad = tiny_config();
  bad.l2_ways = 3;  // 2 cores x 2 L1I ways = 4 > 3
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = tiny_config();
  bad.l2_inclusive_side = InclusiveSide::NonInclusive;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);  // autolock needs an inclusive side
  bad.autolock = false;
  CHECK_NOTHROW(bad.validate());

  bad = tiny_config();
  bad.latency.l2_hit = 3.0;  // must sit between l1_hit and memory
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("levels and exact latencies with jitter disabled") {
  CacheHierarchy h(tiny_config());

  auto r = h.access({0, addr(0), AccessKind::DataRead});
  CHECK(r.level_served == Level::Memory);
  CHECK(r.latency == doctest::Approx(300.0));

  r = h.access({0, addr(0), AccessKind::DataRead});
  CHECK(r.level_served == Level::L1);
  CHECK(r.latency == doctest::Approx(4.0));

  h.demote_from_l1(0, addr(0));
  r = h.access({0, addr(0), AccessKind::DataRead});
  CHECK(r.level_served == Level::L2);
  CHECK(r.latency == doctest::Approx(40.0));
}

TEST_CASE("l2_accesses counts exactly the L1 misses") {
  CacheHierarchy h(tiny_config());
  h.access({0, addr(0), AccessKind::DataRead});  // L1 miss
  h.access({0, addr(0), AccessKind::DataRead});  // L1 hit
  h.access({0, addr(0), AccessKind::DataRead});  // L1 hit
  h.demote_from_l1(0, addr(0));                  // keeps an L2 copy
  h.access({0, addr(0), AccessKind::DataRead});  // L1 miss, L2 hit
  const auto& c = h.counters();
  CHECK(c.l2_accesses == 2);
  CHECK(c.l1_hits == 2);
  CHECK(c.l2_hits == 1);
  CHECK(c.memory_fetches == 1);
}

TEST_CASE("out-of-range accesses are rejected") {
  CacheHierarchy h(tiny_config());
  CHECK_THROWS_AS(h.access({0, 1 << 20, AccessKind::DataRead}), std::out_of_range);
  CHECK_THROWS_AS(h.access({5, addr(0), AccessKind::DataRead}), std::invalid_argument);
}

TEST_CASE("inclusive-side fill sets the inclusion bit; L1 eviction clears it") {
  CacheHierarchy h(tiny_config());
  h.access({0, addr(0), AccessKind::InstructionFetch});
  CHECK(h.inspect_l2(addr(0)).locked);

  // Two more fetches into the same 2-way L1I set push line 0 out of L1.
  h.access({0, addr(8), AccessKind::InstructionFetch});
  h.access({0, addr(16), AccessKind::InstructionFetch});
  CHECK(!h.inspect(Level::L1, 0, addr(0)).present);
  CHECK(h.inspect_l2(addr(0)).present);
  CHECK(!h.inspect_l2(addr(0)).locked);
  check_invariants(h);
}

TEST_CASE("inclusion bit survives one core's eviction while another core holds the line") {
  CacheHierarchy h(tiny_config());
  h.access({0, addr(0), AccessKind::InstructionFetch});
  h.access({1, addr(0), AccessKind::InstructionFetch});
  h.demote_from_l1(0, addr(0));
  CHECK(h.inspect_l2(addr(0)).locked);  // core 1 still holds it
  h.demote_from_l1(1, addr(0));
  CHECK(!h.inspect_l2(addr(0)).locked);
}

TEST_CASE("non-inclusive-side lines enter L2 lazily, on L1 eviction") {
  CacheHierarchy h(tiny_config());  // data side is non-inclusive here
  h.access({0, addr(1), AccessKind::DataRead});
  CHECK(!h.inspect_l2(addr(1)).present);  // L1 only until evicted
  h.demote_from_l1(0, addr(1));
  CHECK(h.inspect_l2(addr(1)).present);
  CHECK(!h.inspect_l2(addr(1)).locked);
}

TEST_CASE("locked lines are skipped by L2 replacement") {
  auto cfg = tiny_config();
  cfg.l1i_ways = 1;  // at most 2 of the 4 L2 ways can ever be locked
  CacheHierarchy h(cfg);

  h.access({0, addr(0), AccessKind::InstructionFetch});  // locked by core 0
  h.access({1, addr(4), AccessKind::InstructionFetch});  // locked by core 1

  // Drive many more lines through L2 set 0 via the lazy data-side path.
  for (unsigned i = 2; i < 12; ++i) {
    h.access({0, addr(4 * i), AccessKind::DataRead});
    h.demote_from_l1(0, addr(4 * i));
  }
  CHECK(h.counters().l2_evictions > 0);
  CHECK(h.counters().l2_lock_fallbacks == 0);
  CHECK(h.inspect_l2(addr(0)).locked);
  CHECK(h.inspect_l2(addr(4)).locked);
  check_invariants(h);
}

TEST_CASE("fully locked set: forced inclusive fill falls back to back-invalidation") {
  CacheHierarchy h(tiny_config());
  // Lines 0,4,8,12 all map to L2 set 0 and L1I set 0; two per core locks all
  // four L2 ways.
  h.access({0, addr(0), AccessKind::InstructionFetch});
  h.access({0, addr(4), AccessKind::InstructionFetch});
  h.access({1, addr(8), AccessKind::InstructionFetch});
  h.access({1, addr(12), AccessKind::InstructionFetch});
  REQUIRE(h.inspect_l2(addr(0)).locked);
  REQUIRE(h.inspect_l2(addr(12)).locked);

  h.access({0, addr(16), AccessKind::InstructionFetch});
  CHECK(h.counters().l2_lock_fallbacks == 1);
  // The oldest line was back-invalidated everywhere.
  CHECK(!h.inspect_l2(addr(0)).present);
  CHECK(!h.inspect(Level::L1, 0, addr(0)).present);
  CHECK(h.inspect_l2(addr(16)).locked);
  check_invariants(h);
}

TEST_CASE("fully locked set: lazy non-inclusive allocation drops instead") {
  CacheHierarchy h(tiny_config());
  h.access({0, addr(0), AccessKind::InstructionFetch});
  h.access({0, addr(4), AccessKind::InstructionFetch});
  h.access({1, addr(8), AccessKind::InstructionFetch});
  h.access({1, addr(12), AccessKind::InstructionFetch});
  auto before = h.counters();

  h.access({0, addr(16), AccessKind::DataRead});
  h.demote_from_l1(0, addr(16));  // would allocate into the fully locked set
  CHECK(!h.inspect_l2(addr(16)).present);
  CHECK(h.counters().l2_evictions == before.l2_evictions);
  CHECK(h.counters().l2_lock_fallbacks == before.l2_lock_fallbacks);
  for (unsigned l : {0u, 4u, 8u, 12u}) CHECK(h.inspect_l2(addr(l)).locked);

  // The dropped line is gone: reloading it goes to memory.
  CHECK(h.access({0, addr(16), AccessKind::DataRead}).level_served == Level::Memory);
  check_invariants(h);
}

TEST_CASE("without autolock an inclusive L2 eviction back-invalidates L1") {
  auto cfg = tiny_config();
  cfg.autolock = false;
  CacheHierarchy h(cfg);
  h.access({0, addr(0), AccessKind::InstructionFetch});
  for (unsigned i = 1; i < 6; ++i) h.access({1, addr(4 * i), AccessKind::InstructionFetch});
  // Line 0 was evicted from the 4-way L2 set; core 0's copy must be gone too.
  CHECK(!h.inspect_l2(addr(0)).present);
  CHECK(!h.inspect(Level::L1, 0, addr(0)).present);
  check_invariants(h);
}

TEST_CASE("L1 LRU picks the least recently touched way") {
  auto cfg = tiny_config();
  cfg.l1_sets = 1;
  CacheHierarchy h(cfg);
  h.access({0, addr(0), AccessKind::DataRead});
  h.access({0, addr(1), AccessKind::DataRead});
  h.access({0, addr(0), AccessKind::DataRead});  // refresh line 0
  h.access({0, addr(2), AccessKind::DataRead});  // evicts line 1
  CHECK(h.inspect(Level::L1, 0, addr(0)).present);
  CHECK(!h.inspect(Level::L1, 0, addr(1)).present);
  CHECK(h.inspect(Level::L1, 0, addr(2)).present);
}

TEST_CASE("round-robin replacement cycles through ways regardless of recency") {
  auto cfg = tiny_config();
  cfg.l1_sets = 1;
  cfg.replacement = ReplacementKind::RoundRobin;
  CacheHierarchy h(cfg);
  h.access({0, addr(0), AccessKind::DataRead});
  h.access({0, addr(1), AccessKind::DataRead});
  h.access({0, addr(0), AccessKind::DataRead});  // recency is ignored
  h.access({0, addr(2), AccessKind::DataRead});  // cursor at way 0: evicts line 0
  CHECK(!h.inspect(Level::L1, 0, addr(0)).present);
  CHECK(h.inspect(Level::L1, 0, addr(1)).present);
}

TEST_CASE("pseudo-random replacement is reproducible from its seed") {
  auto cfg = tiny_config();
  cfg.replacement = ReplacementKind::PseudoRandom;
  cfg.replacement_seed = 1234;
  CacheHierarchy a(cfg), b(cfg);
  std::mt19937_64 rng_a(7), rng_b(7);
  for (int i = 0; i < 5000; ++i) {
    random_step(a, rng_a, 24);
    random_step(b, rng_b, 24);
  }
  CHECK(a.dump() == b.dump());
  CHECK(a.counters().l2_evictions == b.counters().l2_evictions);
  check_invariants(a);
}

TEST_CASE("reset restores a pristine, reseeded hierarchy") {
  auto cfg = tiny_config();
  cfg.latency.jitter_stddev = 20.0;
  cfg.latency.memory = 300.0;
  cfg.latency.l2_hit = 40.0;
  CacheHierarchy h(cfg);

  std::vector<double> first;
  std::mt19937_64 rng(99);
  for (int i = 0; i < 2000; ++i) {
    random_step(h, rng, 24);
    if (i < 50) first.push_back(h.access({0, addr(unsigned(i) % 24), AccessKind::DataRead}).latency);
  }
  h.reset();
  for (const LineRecord& r : h.snapshot()) CHECK(!r.valid);
  CHECK(h.counters().l2_accesses == 0);

  // Replaying the identical sequence reproduces latencies bit for bit.
  std::vector<double> second;
  std::mt19937_64 rng2(99);
  for (int i = 0; i < 2000; ++i) {
    random_step(h, rng2, 24);
    if (i < 50) second.push_back(h.access({0, addr(unsigned(i) % 24), AccessKind::DataRead}).latency);
  }
  CHECK(first == second);
}

TEST_CASE("structural invariants hold across randomized traces") {
  std::vector<HierarchyConfig> configs;
  configs.push_back(tiny_config());
  {
    auto c = tiny_config();
    c.l2_inclusive_side = InclusiveSide::DataSide;
    configs.push_back(c);
  }
  {
    auto c = tiny_config();
    c.autolock = false;
    configs.push_back(c);
  }
  {
    auto c = tiny_config();
    c.autolock = false;
    c.l2_inclusive_side = InclusiveSide::NonInclusive;
    configs.push_back(c);
  }
  {
    auto c = tiny_config();
    c.replacement = ReplacementKind::RoundRobin;
    configs.push_back(c);
  }
  {
    auto c = tiny_config();
    c.replacement = ReplacementKind::PseudoRandom;
    configs.push_back(c);
  }

  for (const auto& cfg : configs) {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      CacheHierarchy h(cfg);
      std::mt19937_64 rng(seed);
      for (int i = 0; i < 2000; ++i) {
        random_step(h, rng, 24);
        if (i % 500 == 499) check_invariants(h);
      }
      check_invariants(h);
    }
  }

  // One long soak on the default tiny config.
  CacheHierarchy h(tiny_config());
  std::mt19937_64 rng(424242);
  for (int i = 0; i < 100000; ++i) {
    random_step(h, rng, 32);
    if (i % 5000 == 4999) check_invariants(h);
  }
  check_invariants(h);
}
