#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "morphome/nn/gradcheck.hpp"

namespace morphome::nn {

struct OpCheck {
  std::string op;
  GradCheckResult result;
};

// Finite-difference check of every differentiable op on random small shapes
// (64-bit). One entry per op/configuration.
std::vector<OpCheck> check_all_ops(std::uint64_t seed);

// Random matrix with entries N(0, stddev).
Matrix<double> random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev = 1.0);

}  // namespace morphome::nn
