#include "alsim/aes_target.hpp"

#include <cmath>
#include <iomanip>
#include <stdexcept>

#include "alsim/util.hpp"

namespace alsim {

namespace {

std::array<std::uint8_t, 256> compute_sbox() {
  // Multiplicative inverse in GF(2^8) followed by the affine transform.
  std::array<std::uint8_t, 256> inv{};
  std::uint8_t p = 1, q = 1;
  do {  // generator walk: p = 3^i, q = 3^-i
    p = std::uint8_t(p ^ (p << 1) ^ ((p & 0x80) ? 0x1b : 0));
    q ^= std::uint8_t(q << 1);
    q ^= std::uint8_t(q << 2);
    q ^= std::uint8_t(q << 4);
    if (q & 0x80) q ^= 0x09;
    inv[p] = q;
  } while (p != 1);
  inv[0] = 0;
  std::array<std::uint8_t, 256> s{};
  for (int x = 0; x < 256; ++x) {
    std::uint8_t b = inv[x];
    std::uint8_t r = std::uint8_t(b ^ std::uint8_t(b << 1 | b >> 7) ^
                                  std::uint8_t(b << 2 | b >> 6) ^
                                  std::uint8_t(b << 3 | b >> 5) ^
                                  std::uint8_t(b << 4 | b >> 4) ^ 0x63);
    s[x] = r;
  }
  return s;
}

std::uint8_t xtime(std::uint8_t x) {
  return std::uint8_t((x << 1) ^ ((x & 0x80) ? 0x1b : 0));
}

struct Tables {
  std::array<std::uint8_t, 256> sbox;
  std::array<std::array<std::uint32_t, 256>, 4> te;

  Tables() : sbox(compute_sbox()) {
    for (int x = 0; x < 256; ++x) {
      std::uint8_t s = sbox[x];
      std::uint8_t s2 = xtime(s);
      std::uint8_t s3 = std::uint8_t(s2 ^ s);
      te[0][x] = (std::uint32_t(s2) << 24) | (std::uint32_t(s) << 16) |
                 (std::uint32_t(s) << 8) | s3;
      te[1][x] = (std::uint32_t(s3) << 24) | (std::uint32_t(s2) << 16) |
                 (std::uint32_t(s) << 8) | s;
      te[2][x] = (std::uint32_t(s) << 24) | (std::uint32_t(s3) << 16) |
                 (std::uint32_t(s2) << 8) | s;
      te[3][x] = (std::uint32_t(s) << 24) | (std::uint32_t(s) << 16) |
                 (std::uint32_t(s3) << 8) | s2;
    }
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

std::uint32_t load_be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | p[3];
}

void store_be32(std::uint8_t* p, std::uint32_t v) {
  p[0] = std::uint8_t(v >> 24);
  p[1] = std::uint8_t(v >> 16);
  p[2] = std::uint8_t(v >> 8);
  p[3] = std::uint8_t(v);
}

constexpr std::uint8_t kRcon[10] = {0x01, 0x02, 0x04, 0x08, 0x10,
                                    0x20, 0x40, 0x80, 0x1b, 0x36};

}  // namespace

const std::array<std::uint8_t, 256>& aes_sbox() { return tables().sbox; }

const std::array<std::uint32_t, 256>& te_table(unsigned i) {
  if (i >= 4) throw std::invalid_argument("te_table index out of range");
  return tables().te[i];
}

void dump_tables(std::ostream& os) {
  for (unsigned t = 0; t < 4; ++t) {
    os << "# Te" << t << '\n';
    for (int x = 0; x < 256; ++x) {
      os << std::hex << std::setw(8) << std::setfill('0') << te_table(t)[x]
         << ((x % 8 == 7) ? '\n' : ' ');
    }
    os << std::dec;
  }
}

RoundKeys expand_key(const AesKey& key) {
  const auto& sbox = tables().sbox;
  std::array<std::uint32_t, 44> w{};
  for (int i = 0; i < 4; ++i) w[i] = load_be32(key.data() + 4 * i);
  for (int i = 4; i < 44; ++i) {
    std::uint32_t t = w[i - 1];
    if (i % 4 == 0) {
      t = (t << 8) | (t >> 24);  // RotWord
      t = (std::uint32_t(sbox[(t >> 24) & 0xff]) << 24) |
          (std::uint32_t(sbox[(t >> 16) & 0xff]) << 16) |
          (std::uint32_t(sbox[(t >> 8) & 0xff]) << 8) | sbox[t & 0xff];
      t ^= std::uint32_t(kRcon[i / 4 - 1]) << 24;
    }
    w[i] = w[i - 4] ^ t;
  }
  RoundKeys rk{};
  for (int r = 0; r < 11; ++r)
    for (int c = 0; c < 4; ++c) store_be32(rk[r].data() + 4 * c, w[4 * r + c]);
  return rk;
}

AesKey master_key_from_round10(const AesBlock& rk10) {
  const auto& sbox = tables().sbox;
  std::array<std::uint32_t, 44> w{};
  for (int c = 0; c < 4; ++c) w[40 + c] = load_be32(rk10.data() + 4 * c);
  for (int i = 43; i >= 4; --i) {
    // w[i] = w[i-4] ^ f(w[i-1])  =>  w[i-4] = w[i] ^ f(w[i-1])
    std::uint32_t t = w[i - 1];
    if (i % 4 == 0) {
      t = (t << 8) | (t >> 24);
      t = (std::uint32_t(sbox[(t >> 24) & 0xff]) << 24) |
          (std::uint32_t(sbox[(t >> 16) & 0xff]) << 16) |
          (std::uint32_t(sbox[(t >> 8) & 0xff]) << 8) | sbox[t & 0xff];
      t ^= std::uint32_t(kRcon[i / 4 - 1]) << 24;
    }
    w[i - 4] = w[i] ^ t;
  }
  AesKey key{};
  for (int c = 0; c < 4; ++c) store_be32(key.data() + 4 * c, w[c]);
  return key;
}

TTableLayout TTableLayout::contiguous(Address base0, unsigned line_size) {
  TTableLayout l;
  l.line_size = line_size;
  for (unsigned t = 0; t < 4; ++t) l.base[t] = base0 + 1024u * t;
  l.validate();
  return l;
}

void TTableLayout::validate() const {
  if (line_size == 0 || 1024 % line_size != 0)
    throw std::invalid_argument("table layout: line_size must divide 1024");
  for (unsigned t = 0; t < 4; ++t) {
    if (base[t] % line_size != 0)
      throw std::invalid_argument("table layout: bases must be line-aligned");
    for (unsigned u = 0; u < t; ++u)
      if (base[t] < base[u] + 1024 && base[u] < base[t] + 1024)
        throw std::invalid_argument("table layout: tables must be disjoint");
  }
}

double VictimProcess::line_evict_prob(unsigned table, unsigned line) const {
  for (auto [t, l] : sticky_lines)
    if (t == table && l == line) return self_evict_prob * sticky_evict_factor;
  return self_evict_prob;
}

VictimProcess make_victim(const AesKey& key, unsigned core, const TTableLayout& layout,
                          std::uint64_t noise_seed, double self_evict_prob) {
  VictimProcess v;
  v.key = key;
  v.round_keys = expand_key(key);
  v.core = core;
  v.layout = layout;
  v.self_evict_prob = self_evict_prob;
  for (unsigned t = 0; t < 4; ++t) v.sticky_lines.emplace_back(t, 0u);
  v.noise_rng.seed(derive_seed(noise_seed, 0x5e1f));
  return v;
}

AesBlock encrypt(VictimProcess& v, CacheHierarchy& h, const AesBlock& plaintext) {
  const auto& te = tables().te;
  auto lookup = [&](unsigned table, std::uint8_t idx) {
    h.access({v.core, v.layout.entry_addr(table, idx), AccessKind::DataRead});
    return te[table][idx];
  };

  std::uint32_t s0 = load_be32(plaintext.data() + 0) ^ load_be32(v.round_keys[0].data() + 0);
  std::uint32_t s1 = load_be32(plaintext.data() + 4) ^ load_be32(v.round_keys[0].data() + 4);
  std::uint32_t s2 = load_be32(plaintext.data() + 8) ^ load_be32(v.round_keys[0].data() + 8);
  std::uint32_t s3 = load_be32(plaintext.data() + 12) ^ load_be32(v.round_keys[0].data() + 12);

  for (int r = 1; r <= 9; ++r) {
    const std::uint8_t* rk = v.round_keys[r].data();
    std::uint32_t t0 = lookup(0, std::uint8_t(s0 >> 24)) ^ lookup(1, std::uint8_t(s1 >> 16)) ^
                       lookup(2, std::uint8_t(s2 >> 8)) ^ lookup(3, std::uint8_t(s3)) ^
                       load_be32(rk + 0);
    std::uint32_t t1 = lookup(0, std::uint8_t(s1 >> 24)) ^ lookup(1, std::uint8_t(s2 >> 16)) ^
                       lookup(2, std::uint8_t(s3 >> 8)) ^ lookup(3, std::uint8_t(s0)) ^
                       load_be32(rk + 4);
    std::uint32_t t2 = lookup(0, std::uint8_t(s2 >> 24)) ^ lookup(1, std::uint8_t(s3 >> 16)) ^
                       lookup(2, std::uint8_t(s0 >> 8)) ^ lookup(3, std::uint8_t(s1)) ^
                       load_be32(rk + 8);
    std::uint32_t t3 = lookup(0, std::uint8_t(s3 >> 24)) ^ lookup(1, std::uint8_t(s0 >> 16)) ^
                       lookup(2, std::uint8_t(s1 >> 8)) ^ lookup(3, std::uint8_t(s2)) ^
                       load_be32(rk + 12);
    s0 = t0;
    s1 = t1;
    s2 = t2;
    s3 = t3;
  }

  // Last round: 16 lookups, four per table, extracting the plain S-box byte
  // from each entry. c_i = k_i^10 ^ S[state byte].
  const std::uint8_t* rk = v.round_keys[10].data();
  std::uint32_t o0 = (lookup(2, std::uint8_t(s0 >> 24)) & 0xff000000u) ^
                     (lookup(3, std::uint8_t(s1 >> 16)) & 0x00ff0000u) ^
                     (lookup(0, std::uint8_t(s2 >> 8)) & 0x0000ff00u) ^
                     (lookup(1, std::uint8_t(s3)) & 0x000000ffu) ^ load_be32(rk + 0);
  std::uint32_t o1 = (lookup(2, std::uint8_t(s1 >> 24)) & 0xff000000u) ^
                     (lookup(3, std::uint8_t(s2 >> 16)) & 0x00ff0000u) ^
                     (lookup(0, std::uint8_t(s3 >> 8)) & 0x0000ff00u) ^
                     (lookup(1, std::uint8_t(s0)) & 0x000000ffu) ^ load_be32(rk + 4);
  std::uint32_t o2 = (lookup(2, std::uint8_t(s2 >> 24)) & 0xff000000u) ^
                     (lookup(3, std::uint8_t(s3 >> 16)) & 0x00ff0000u) ^
                     (lookup(0, std::uint8_t(s0 >> 8)) & 0x0000ff00u) ^
                     (lookup(1, std::uint8_t(s1)) & 0x000000ffu) ^ load_be32(rk + 8);
  std::uint32_t o3 = (lookup(2, std::uint8_t(s3 >> 24)) & 0xff000000u) ^
                     (lookup(3, std::uint8_t(s0 >> 16)) & 0x00ff0000u) ^
                     (lookup(0, std::uint8_t(s1 >> 8)) & 0x0000ff00u) ^
                     (lookup(1, std::uint8_t(s2)) & 0x000000ffu) ^ load_be32(rk + 12);

  AesBlock ct{};
  store_be32(ct.data() + 0, o0);
  store_be32(ct.data() + 4, o1);
  store_be32(ct.data() + 8, o2);
  store_be32(ct.data() + 12, o3);

  // Noise step: sporadic evictions of table lines from the victim's L1.
  if (v.self_evict_prob > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (unsigned t = 0; t < 4; ++t)
      for (unsigned l = 0; l < v.layout.lines_per_table(); ++l)
        if (u(v.noise_rng) < v.line_evict_prob(t, l))
          h.demote_from_l1(v.core, v.layout.line_addr(t, l));
  }
  return ct;
}

LineUsage line_usage(const std::vector<MemoryAccess>& trace, const TTableLayout& layout) {
  LineUsage usage;
  for (auto& u : usage) u.assign(layout.lines_per_table(), false);
  for (const MemoryAccess& a : trace)
    for (unsigned t = 0; t < 4; ++t)
      if (a.addr >= layout.base[t] && a.addr < layout.base[t] + 1024) {
        usage[t][unsigned((a.addr - layout.base[t]) / layout.line_size)] = true;
        break;
      }
  return usage;
}

double no_access_probability(unsigned entries_per_line, unsigned accesses_per_table) {
  if (entries_per_line > 256)
    throw std::invalid_argument("no_access_probability: entries per line > 256");
  return std::pow(1.0 - entries_per_line / 256.0, double(accesses_per_table));
}

}  // namespace alsim
