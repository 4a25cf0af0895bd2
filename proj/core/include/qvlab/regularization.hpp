#pragma once

#include <qvlab/grid.hpp>
#include <qvlab/spaces.hpp>

#include <vector>

namespace qvlab {

/// Decreasing list of epsilon values, each an exact integer multiple of the
/// grid dt (the smallest admissible shift is one grid step). Restricting
/// shifts to grid multiples keeps every estimator grid-exact.
struct EpsilonLadder {
    std::vector<int> multiples;  // strictly decreasing, >= 1

    explicit EpsilonLadder(std::vector<int> m);
    static EpsilonLadder standard() { return EpsilonLadder({32, 16, 8, 4, 2, 1}); }

    int size() const { return static_cast<int>(multiples.size()); }
    double epsilon(const TimeGrid& grid, int i) const { return multiples[i] * grid.dt(); }
};

/// Validate epsilon as a multiple of grid.dt() and return the step count.
int epsilon_steps(const TimeGrid& grid, double epsilon);

// All estimators below use left-point sums over grid points t_i < t with the
// endpoint-clamp convention for t_i + epsilon beyond T, and return cumulative
// paths (value 0 at t_0).

/// Forward-integral approximation, operator integrand:
/// I_eps(t) = sum_{t_i < t} X(t_i) (Y(t_i+eps) - Y(t_i)) / eps * dt.
VecPath forward_integral(const MatPath& x_op, const VecPath& y, double epsilon);

/// Forward-integral approximation, covector integrand (real-valued output).
RealPath forward_integral(const VecPath& x_covector, const VecPath& y, double epsilon);

/// Real covariation: C_eps(t) = (1/eps) sum_{t_i<t} dX_i dY_i * dt.
RealPath real_covariation(const RealPath& x, const RealPath& y, double epsilon);

/// Scalar quadratic variation of an H-valued (or real) path:
/// (1/eps) sum |X(t_i+eps) - X(t_i)|_H^2 * dt. Nondecreasing in t.
RealPath scalar_qv(const VecPath& x, double epsilon);
RealPath scalar_qv(const RealPath& x, double epsilon);

/// Tensor covariation: (1/eps) sum (dX_i (x) dY_i) * dt as coefficient arrays.
MatPath tensor_qv(const VecPath& x, const VecPath& y, double epsilon);
/// Terminal value only (cheaper for ensembles).
Mat tensor_qv_final(const VecPath& x, const VecPath& y, double epsilon);

/// chi-covariation against a finite-rank functional:
/// (1/eps) sum_i sum_j <a_j, dX_i><b_j, dY_i> * dt.
RealPath chi_covariation(const VecPath& x, const VecPath& y, const ChiFunctional& phi,
                         double epsilon);

/// H1 diagnostic over the whole window [s, T]:
/// A(eps) = (1/eps) sum_{i=0}^{M-1} |J(dX_i (x) dY_i)|_{chibar*} dt, using the
/// rank-one identity |J(a (x) b)|_{chibar*} = dual_graph_norm(a) dual_graph_norm(b).
double h1_diagnostic(const TruncatedSpace& space, const VecPath& x, const VecPath& y,
                     double epsilon);

/// (1/eps) sum dual_graph_norm(dX_i)^2 dt at T; the dual-norm scalar QV used
/// by the Cauchy-Schwarz splitting of A(eps).
double dual_norm_scalar_qv_final(const TruncatedSpace& space, const VecPath& x,
                                 double epsilon);

}  // namespace qvlab
