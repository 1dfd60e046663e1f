#pragma once

#include <cstdint>
#include <random>

namespace msinv {

using Rng = std::mt19937_64;

/// Logical random streams. Samplers draw each state block from its own
/// stream so that disabling one block leaves the draws of the others
/// untouched (chains stay comparable under shared seeds).
enum class StreamBlock : std::uint32_t {
  Main = 0,
  Eta = 1,
  Z = 2,
  Gamma = 3,
  Noise = 4,
};

inline Rng make_stream(std::uint64_t seed, StreamBlock block) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(block)};
  return Rng(seq);
}

inline Rng make_stream(std::uint64_t seed) { return make_stream(seed, StreamBlock::Main); }

}  // namespace msinv
