#include <qvlab/spaces.hpp>

#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qvlab {

TruncatedSpace::TruncatedSpace(Vec lam, Vec qq, std::string lbl)
    : lambda(std::move(lam)), q(std::move(qq)), label(std::move(lbl)) {
    if (lambda.size() != q.size())
        throw std::invalid_argument("TruncatedSpace: lambda and q must have equal length");
    if (lambda.size() < 1) throw std::invalid_argument("TruncatedSpace: need at least one mode");
    for (int k = 0; k < q.size(); ++k)
        if (!(q[k] > 0.0)) throw std::invalid_argument("TruncatedSpace: q_k must be positive");
    graph_w_ = Vec::Ones(lambda.size()) + lambda.cwiseProduct(lambda);
}

Vec TruncatedSpace::semigroup_factors(double t) const {
    return (lambda.array() * t).exp().matrix();
}

TruncatedSpace make_dirichlet_space(int n_modes) {
    Vec lam(n_modes), q(n_modes);
    for (int k = 1; k <= n_modes; ++k) {
        lam[k - 1] = -std::pow(k * std::numbers::pi, 2);
        q[k - 1] = 1.0 / (static_cast<double>(k) * k);
    }
    return TruncatedSpace(lam, q, "dirichlet-laplacian");
}

TruncatedSpace make_zero_generator_space(int n_modes) {
    Vec lam = Vec::Zero(n_modes), q(n_modes);
    for (int k = 1; k <= n_modes; ++k) q[k - 1] = 1.0 / (static_cast<double>(k) * k);
    return TruncatedSpace(lam, q, "zero-generator");
}

TruncatedSpace make_space(int n_modes, const std::string& lambda_rule,
                          const std::string& q_rule) {
    Vec lam(n_modes), q(n_modes);
    if (lambda_rule == "dirichlet") {
        for (int k = 1; k <= n_modes; ++k) lam[k - 1] = -std::pow(k * std::numbers::pi, 2);
    } else if (lambda_rule == "zero") {
        lam.setZero();
    } else {
        throw std::invalid_argument("make_space: unknown lambda_rule '" + lambda_rule + "'");
    }
    if (q_rule == "inverse-square") {
        for (int k = 1; k <= n_modes; ++k) q[k - 1] = 1.0 / (static_cast<double>(k) * k);
    } else if (q_rule == "flat") {
        q.setOnes();
    } else {
        throw std::invalid_argument("make_space: unknown q_rule '" + q_rule + "'");
    }
    return TruncatedSpace(lam, q, lambda_rule + "/" + q_rule);
}

void require_dim(const TruncatedSpace& space, const Vec& z, const char* where) {
    if (z.size() != space.lambda.size())
        throw std::invalid_argument(std::string(where) + ": vector has dimension " +
                                    std::to_string(z.size()) + ", space has " +
                                    std::to_string(space.lambda.size()) + " modes");
}

double graph_norm(const TruncatedSpace& space, const Vec& z) {
    require_dim(space, z, "graph_norm");
    return std::sqrt(z.cwiseProduct(z).dot(space.graph_weights()));
}

double dual_graph_norm(const TruncatedSpace& space, const Vec& x) {
    require_dim(space, x, "dual_graph_norm");
    return std::sqrt(x.cwiseProduct(x).cwiseQuotient(space.graph_weights()).sum());
}

Vec semigroup_apply(const TruncatedSpace& space, double t, const Vec& x) {
    require_dim(space, x, "semigroup_apply");
    if (t < 0.0) throw std::invalid_argument("semigroup_apply: t must be nonnegative");
    return x.cwiseProduct(space.semigroup_factors(t));
}

Vec adjoint_generator_apply(const TruncatedSpace& space, const Vec& z) {
    require_dim(space, z, "adjoint_generator_apply");
    return z.cwiseProduct(space.lambda);
}

Mat rank_one(const Vec& x, const Vec& y) { return x * y.transpose(); }

double projective_norm(const Mat& u) {
    // JacobiSVD: most accurate option for the small dense arrays we use.
    Eigen::JacobiSVD<Mat> svd(u);
    return svd.singularValues().sum();
}

double injective_norm(const Mat& u) {
    Eigen::JacobiSVD<Mat> svd(u);
    return svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0;
}

double trace_pairing(const Mat& psi, const Mat& u) {
    if (psi.rows() != u.rows() || psi.cols() != u.cols())
        throw std::invalid_argument("trace_pairing: shape mismatch");
    return psi.cwiseProduct(u).sum();
}

double chi_dual_norm(const TruncatedSpace& space, const Mat& u) {
    if (u.rows() != space.n_modes() || u.cols() != space.n_modes())
        throw std::invalid_argument("chi_dual_norm: tensor shape does not match space");
    const Vec gs = space.graph_weights().cwiseSqrt().cwiseInverse();
    return injective_norm(gs.asDiagonal() * u * gs.asDiagonal());
}

ChiFunctional::ChiFunctional(TruncatedSpace sp, std::vector<std::pair<Vec, Vec>> ts)
    : space(std::move(sp)), terms(std::move(ts)) {
    for (const auto& [a, b] : terms) {
        require_dim(space, a, "ChiFunctional");
        require_dim(space, b, "ChiFunctional");
    }
}

double evaluate(const ChiFunctional& phi, const Mat& u) {
    if (u.rows() != phi.space.n_modes() || u.cols() != phi.space.n_modes())
        throw std::invalid_argument("ChiFunctional::evaluate: tensor shape mismatch");
    double s = 0.0;
    for (const auto& [a, b] : phi.terms) s += a.dot(u * b);
    return s;
}

double chi_norm_upper(const ChiFunctional& phi) {
    double s = 0.0;
    for (const auto& [a, b] : phi.terms)
        s += graph_norm(phi.space, a) * graph_norm(phi.space, b);
    return s;
}

}  // namespace qvlab
