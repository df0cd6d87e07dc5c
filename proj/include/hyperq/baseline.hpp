#pragma once

#include <cstddef>
#include <vector>

#include "hyperq/solver.hpp"

namespace hyperq {

inline constexpr int kOracleMaxUnits = 14;

struct MatrixEntry {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

/// Balance equations over the 2^N hypercube states followed by the C queue
/// states. Row m reads: (outflow rate of m) P_m - sum_l (rate l->m) P_l = 0.
struct BalanceSystem {
  std::size_t dimension = 0;
  std::vector<MatrixEntry> entries;
  std::vector<double> rhs;
};

/// With `normalize`, the all-idle row is replaced by sum P = 1.
BalanceSystem assemble(const ServiceSystem& sys, bool normalize = true, int max_units = kOracleMaxUnits);

/// max_i |(A x - b)_i|
double residual_inf(const BalanceSystem& system, const std::vector<double>& x);

/// Sparse LU solve of the assembled system.
SteadyStateDistribution solve_direct(const ServiceSystem& sys, int max_units = kOracleMaxUnits);

/// The solved vector (hypercube states then queue tail) for a prepared system.
std::vector<double> solve_balance(const BalanceSystem& system);

}  // namespace hyperq
