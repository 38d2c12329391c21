#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cmes {

using Rng = std::mt19937_64;

// Purposes for which independent random streams are derived from one seed.
enum class Stream : std::uint64_t {
  InitialDesign = 1,
  MaxValue = 2,
  Acquisition = 3,
  Thompson = 4,
  RandomQuery = 5,
  Hyperparameters = 6,
  Recommendation = 7,
  Validation = 8,
  Features = 9,
  Problem = 10,
};

std::uint64_t splitmix64(std::uint64_t& state);

// Hashes a seed and a path of tags into an independent 64-bit seed.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

inline std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index n);
Eigen::MatrixXd standard_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols);
double uniform01(Rng& rng);

}  // namespace cmes
