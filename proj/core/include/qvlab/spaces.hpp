#pragma once

#include <qvlab/grid.hpp>

#include <string>
#include <utility>
#include <vector>

namespace qvlab {

/// N-mode truncation of a separable Hilbert space H with a fixed eigenbasis
/// e_1..e_N, a diagonal generator A (spectrum lambda_k <= 0 in the default
/// model) and a diagonal covariance Q (spectrum q_k > 0, summable by
/// construction). A is self-adjoint in truncation, so D(A*) carries the
/// graph-norm weights 1 + lambda_k^2.
struct TruncatedSpace {
    Vec lambda;  // generator spectrum, units 1/time
    Vec q;       // covariance spectrum, dimensionless
    std::string label;

    TruncatedSpace() = default;
    TruncatedSpace(Vec lam, Vec qq, std::string lbl);

    int n_modes() const { return static_cast<int>(lambda.size()); }
    double trace_q() const { return q.sum(); }

    /// Graph-norm weights 1 + lambda_k^2.
    const Vec& graph_weights() const { return graph_w_; }
    /// e^{lambda_k * t} for one step of length t (no caching).
    Vec semigroup_factors(double t) const;

  private:
    Vec graph_w_;
};

/// Dirichlet Laplacian on (0,1): lambda_k = -(k pi)^2, q_k = k^-2.
TruncatedSpace make_dirichlet_space(int n_modes);
/// Zero generator (A = 0) with q_k = k^-2; useful for exact identities.
TruncatedSpace make_zero_generator_space(int n_modes);
/// Rule-based factory used by the CLI config: lambda_rule in
/// {"dirichlet", "zero"}, q_rule in {"inverse-square", "flat"}.
TruncatedSpace make_space(int n_modes, const std::string& lambda_rule,
                          const std::string& q_rule);

// --- vectors -----------------------------------------------------------

void require_dim(const TruncatedSpace& space, const Vec& z, const char* where);

/// |z|_{D(A*)} = (|z|^2 + |A* z|^2)^{1/2} = (sum (1+lambda_k^2) z_k^2)^{1/2}.
double graph_norm(const TruncatedSpace& space, const Vec& z);

/// sup { <phi, x> : graph_norm(phi) <= 1 } = (sum x_k^2 / (1+lambda_k^2))^{1/2}.
double dual_graph_norm(const TruncatedSpace& space, const Vec& x);

/// e^{tA} x, t >= 0. Contraction when all lambda_k <= 0.
Vec semigroup_apply(const TruncatedSpace& space, double t, const Vec& x);

/// A* z (= A z in truncation).
Vec adjoint_generator_apply(const TruncatedSpace& space, const Vec& z);

// --- tensors -----------------------------------------------------------
// An element of H (x) H is its N x N coefficient array u_{jk} against
// e_j (x) e_k. Elements of the dual are bounded bilinear forms with the
// same coordinate layout.

Mat rank_one(const Vec& x, const Vec& y);

/// Projective norm pi(u): nuclear norm of the coefficient array (exact in
/// Hilbert spaces).
double projective_norm(const Mat& u);

/// Injective norm eps(u): largest singular value (the sup of the bilinear
/// form over unit balls).
double injective_norm(const Mat& u);

/// Pairing of a bounded bilinear form psi with u in H (x)_pi H:
/// Tr(T_u B_psi) = sum_{jk} u_{jk} psi_{jk}.
double trace_pairing(const Mat& psi, const Mat& u);

/// |J(u)|_{chibar*} with chibar = D(A*) (x)_pi D(A*): largest singular value
/// of G^{-1/2} u G^{-1/2}, G = diag(1 + lambda_k^2). For rank-one a (x) b this
/// is dual_graph_norm(a) * dual_graph_norm(b).
double chi_dual_norm(const TruncatedSpace& space, const Mat& u);

// --- finite-rank functionals on H (x)_pi H -----------------------------

/// Finite-rank element of chibar = D(A*) (x)_pi D(A*), stored as covector
/// pairs: phi = sum_i a_i* (x) b_i*. Immutable after construction.
struct ChiFunctional {
    TruncatedSpace space;
    std::vector<std::pair<Vec, Vec>> terms;

    ChiFunctional(TruncatedSpace sp, std::vector<std::pair<Vec, Vec>> ts);
};

/// phi(u) = sum_i a_i^T u b_i (agrees with sum_i <a_i, x><b_i, y> on x (x) y).
double evaluate(const ChiFunctional& phi, const Mat& u);

/// Upper bound for |phi|_{chibar}: sum_i graph_norm(a_i) graph_norm(b_i)
/// (the projective norm is an infimum over representations).
double chi_norm_upper(const ChiFunctional& phi);

}  // namespace qvlab
