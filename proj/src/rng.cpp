#include "cavcool/rng.hpp"

namespace cavcool {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t index) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(index), hi(index), 0x63617663u};
  return std::mt19937_64(seq);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t index) : engine_(make_engine(seed, index)) {}

}  // namespace cavcool
