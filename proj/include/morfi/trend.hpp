#pragma once

#include "morfi/common.hpp"

#include <span>

namespace morfi {

struct TrendResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int n = 0;
};

// Largest n for which the two-sided p-value comes from the exact permutation
// null; beyond that the t (Spearman) / normal (Mann-Kendall) approximation kicks in.
inline constexpr int kSpearmanExactMaxN = 9;
inline constexpr int kMannKendallExactMaxN = 10;

// Spearman rank correlation of x against the reference ordering v, with
// average ranks for ties. Two-sided p-value: exact permutation null for
// n <= 9, else the t approximation  p = 2 P(T_{n-2} >= |rho| sqrt((n-2)/(1-rho^2))).
// A constant x yields statistic 0, p-value 1. Requires n >= 3 and at least two
// distinct values in v.
TrendResult spearman_trend(std::span<const double> x, std::span<const double> v);

// Mann-Kendall trend test: S = sum_{i<j} sign(x_j - x_i), tie-corrected tau_b
// against an implicit untied time axis, two-sided p-value from the exact null
// of S (permutation enumeration under ties) for n <= 10, else the normal
// approximation with continuity correction and tie-adjusted variance.
// An all-tied x yields statistic 0, p-value 1. Requires n >= 3.
TrendResult mann_kendall(std::span<const double> x);

// Regularized incomplete beta I_x(a, b) and the two-sided tail helpers the
// approximations above are built on. Exposed for testing.
double incomplete_beta(double a, double b, double x);
double student_t_two_sided(double t, double dof);
double normal_two_sided(double z);

} // namespace morfi
