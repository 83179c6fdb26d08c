#pragma once

#include <cstdint>
#include <random>

namespace lp {

// splitmix64; used to derive independent seed streams from one user seed so
// that parallel work items (permutations, bootstrap replicates) are
// reproducible regardless of thread count.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag,
                              std::uint64_t index = 0) {
  return splitmix64(splitmix64(seed ^ tag) + index);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t tag,
                                std::uint64_t index = 0) {
  return std::mt19937_64(mix_seed(seed, tag, index));
}

// Stream tags; arbitrary distinct constants.
namespace rng_tag {
constexpr std::uint64_t kSplit = 0x53504c4954ULL;
constexpr std::uint64_t kCorrupt = 0x434f5252ULL;
constexpr std::uint64_t kInit = 0x494e4954ULL;
constexpr std::uint64_t kShuffle = 0x53484146ULL;
constexpr std::uint64_t kValNeg = 0x56414c4eULL;
constexpr std::uint64_t kPerm = 0x5045524dULL;
constexpr std::uint64_t kAlign = 0x414c4e47ULL;
constexpr std::uint64_t kBoot = 0x424f4f54ULL;
constexpr std::uint64_t kWorld = 0x574f524cULL;
constexpr std::uint64_t kEval = 0x4556414cULL;
constexpr std::uint64_t kPerturb = 0x50455254ULL;
constexpr std::uint64_t kFit = 0x46495420ULL;
constexpr std::uint64_t kSweep = 0x53575045ULL;
}  // namespace rng_tag

}  // namespace lp
