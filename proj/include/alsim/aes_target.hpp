#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

#include "alsim/cache_model.hpp"

namespace alsim {

using AesBlock = std::array<std::uint8_t, 16>;
using AesKey = std::array<std::uint8_t, 16>;
using RoundKeys = std::array<AesBlock, 11>;

// Four 1 kiB lookup tables, line-aligned and disjoint.
struct TTableLayout {
  std::array<Address, 4> base{};
  unsigned line_size = 64;

  unsigned entries_per_line() const { return line_size / 4; }
  unsigned lines_per_table() const { return 1024 / line_size; }
  Address entry_addr(unsigned table, unsigned entry) const {
    return base[table] + 4u * entry;
  }
  Address line_addr(unsigned table, unsigned line) const {
    return base[table] + Address(line) * line_size;
  }
  unsigned line_of_entry(unsigned entry) const { return entry * 4u / line_size; }

  static TTableLayout contiguous(Address base0, unsigned line_size);
  void validate() const;
};

RoundKeys expand_key(const AesKey& key);
// Inverts the schedule: recovers the master key from the round-10 key.
AesKey master_key_from_round10(const AesBlock& rk10);

const std::array<std::uint8_t, 256>& aes_sbox();
const std::array<std::uint32_t, 256>& te_table(unsigned i);
void dump_tables(std::ostream& os);

// The lookup table serving ciphertext byte i in the last round.
inline unsigned last_round_table(unsigned byte_index) {
  return (byte_index % 4 + 2) % 4;
}

// Encryption victim. Every table lookup is routed through the simulator as a
// DataRead on `core`. After each encryption a noise step models sporadic
// evictions of table lines from the victim's core-private cache: each line
// leaves L1 (its L2 copy staying behind, unlocked) with probability
// self_evict_prob. Lines listed in sticky_lines sit next to the victim's hot
// working set and are displaced far less often (factor sticky_evict_factor);
// by convention these are the first line of each table.
struct VictimProcess {
  AesKey key{};
  RoundKeys round_keys{};
  unsigned core = 0;
  TTableLayout layout;
  double self_evict_prob = 0.08;
  double sticky_evict_factor = 0.025;
  std::vector<std::pair<unsigned, unsigned>> sticky_lines;  // (table, line)
  std::mt19937_64 noise_rng;

  double line_evict_prob(unsigned table, unsigned line) const;
};

VictimProcess make_victim(const AesKey& key, unsigned core, const TTableLayout& layout,
                          std::uint64_t noise_seed, double self_evict_prob = 0.08);

// AES-128 encryption issuing 160 table DataReads (40 per table) on v.core,
// followed by the self-eviction noise step.
AesBlock encrypt(VictimProcess& v, CacheHierarchy& h, const AesBlock& plaintext);

// usage[t][l]: line l of table t was touched by the (single-encryption) trace.
using LineUsage = std::array<std::vector<bool>, 4>;
LineUsage line_usage(const std::vector<MemoryAccess>& trace, const TTableLayout& layout);

// P_na = (1 - t/256)^n.
double no_access_probability(unsigned entries_per_line, unsigned accesses_per_table);

}  // namespace alsim
