#pragma once

#include <cstdint>
#include <random>

namespace grpsel {

// splitmix64 scrambler (Steele, Lea, Flood 2014). Used to derive independent
// stream seeds from (base_seed, stream_id, role) so that replications can be
// scheduled in any order without changing the draws any one of them sees.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream,
                              std::uint64_t role = 0) {
  std::uint64_t s = splitmix64(base ^ 0x51a2b3c4d5e6f708ULL);
  s = splitmix64(s ^ stream);
  return splitmix64(s ^ (role * 0x2545f4914f6cdd1dULL));
}

// One RNG stream per (seed, replication, role). Streams never share state.
inline std::mt19937_64 make_stream(std::uint64_t base, std::uint64_t stream,
                                   std::uint64_t role = 0) {
  return std::mt19937_64(mix_seed(base, stream, role));
}

}  // namespace grpsel
