// observables.hpp - Collective bath-coordinate moments X^(n) from the ADO hierarchy
//
//   X^(1) = - sum_{tier 1} rho_n
//   X^(2) = A0 rho_0 + sum_{one entry = 2} rho_n + 2 sum_{two entries = 1} rho_n
//   X^(n) = sum_i L^(n)_i sum_{tier i} (i! / prod_a n_a!) rho_n
//   L^(n+1)_i = -L^(n)_{i-1} + n A0 L^(n-1)_i,   L^(0)_0 = 1
//
// A projection keeps only indices supported on the selected axes, and A0 is
// then summed over those axes alone. The L table is complex because A0 is.

#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "lduo/bath.hpp"
#include "lduo/hierarchy.hpp"
#include "lduo/propagator.hpp"

namespace lduo::observables {

enum class Projection { Full, UoOnly, LdOnly };

std::string to_string(Projection p);

struct BathMoment {
    int order;
    Eigen::Matrix2cd value;
    Projection projection;
    double time; // fs
};

// Axes of the modes selected by a projection.
std::vector<std::size_t> projection_axes(const bath::BathModel& model, Projection p);

// Sum of e_a over the given axes.
cd projected_a0(const bath::BathModel& model, const std::vector<std::size_t>& axes);

// table[n][i] = L^(n)_i for 0 <= i <= n <= order.
std::vector<std::vector<cd>> moment_table(int order, cd a0);

// Mask-level forms; mask[i] selects node i, a0 multiplies rho_0 terms.
Eigen::Matrix2cd moment1(const hierarchy::HierarchySpace& space, const ADOState& state,
                         const std::vector<bool>& mask);
Eigen::Matrix2cd moment2(const hierarchy::HierarchySpace& space, const ADOState& state,
                         const std::vector<bool>& mask, cd a0);
Eigen::Matrix2cd moment_n(const hierarchy::HierarchySpace& space, const ADOState& state,
                          const std::vector<bool>& mask, cd a0, int order);

// Projection forms.
BathMoment moment1(const hierarchy::HierarchySpace& space, const ADOState& state, const bath::BathModel& model,
                   Projection p = Projection::Full);
BathMoment moment2(const hierarchy::HierarchySpace& space, const ADOState& state, const bath::BathModel& model,
                   Projection p = Projection::Full);
BathMoment moment_n(const hierarchy::HierarchySpace& space, const ADOState& state, const bath::BathModel& model,
                    int order, Projection p = Projection::Full);

struct MomentSeries {
    std::vector<double> times;
    std::vector<Eigen::Matrix2cd> values;
};

struct Residual {
    MomentSeries series;
    double sup_norm;        // max over t of the largest element modulus
    double integrated_norm; // trapezoid integral of that modulus, fs
};

// full - ld - uo pointwise. Throws ContractError when the time grids differ.
Residual residual(const MomentSeries& full, const MomentSeries& ld, const MomentSeries& uo);

// Largest element modulus of a matrix.
double max_abs(const Eigen::Matrix2cd& m);

} // namespace lduo::observables
