#pragma once

#include <cstdint>
#include <random>

namespace cavcool {

// Per-trajectory random stream. The engine for trajectory `index` of a run
// with master seed `seed` is mt19937_64 seeded through
//   std::seed_seq{lo32(seed), hi32(seed), lo32(index), hi32(index), 0x63617663}
// so adding trajectories never perturbs earlier ones.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t index = 0);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace cavcool
