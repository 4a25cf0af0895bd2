#include <qvlab/regularization.hpp>

#include <cmath>
#include <stdexcept>

namespace qvlab {

EpsilonLadder::EpsilonLadder(std::vector<int> m) : multiples(std::move(m)) {
    if (multiples.empty()) throw std::invalid_argument("EpsilonLadder: empty ladder");
    for (std::size_t i = 0; i < multiples.size(); ++i) {
        if (multiples[i] < 1)
            throw std::invalid_argument("EpsilonLadder: multiples must be >= 1");
        if (i > 0 && multiples[i] >= multiples[i - 1])
            throw std::invalid_argument("EpsilonLadder: multiples must be strictly decreasing");
    }
}

int epsilon_steps(const TimeGrid& grid, double epsilon) {
    const double ratio = epsilon / grid.dt();
    const double r = std::round(ratio);
    if (r < 1.0 || std::abs(ratio - r) > 1e-9 * std::max(1.0, ratio))
        throw std::invalid_argument("epsilon must be a positive integer multiple of dt, got eps/dt = " +
                                    std::to_string(ratio));
    return static_cast<int>(r);
}

VecPath forward_integral(const MatPath& x_op, const VecPath& y, double epsilon) {
    require_same_grid(x_op.grid, y.grid, "forward_integral");
    const int p = epsilon_steps(y.grid, epsilon);
    const int m = y.grid.n_steps;
    if (x_op.values[0].cols() != y.values[0].size())
        throw std::invalid_argument("forward_integral: operator columns do not match integrator dimension");
    const double w = 1.0 / p;  // dt / epsilon
    const int out_dim = static_cast<int>(x_op.values[0].rows());
    std::vector<Vec> out(static_cast<std::size_t>(m) + 1, Vec::Zero(out_dim));
    Vec acc = Vec::Zero(out_dim);
    for (int i = 0; i < m; ++i) {
        acc.noalias() += w * (x_op.values[i] * (y.at_clamped(i + p) - y.values[i]));
        out[static_cast<std::size_t>(i) + 1] = acc;
    }
    return VecPath(y.grid, std::move(out));
}

RealPath forward_integral(const VecPath& x_covector, const VecPath& y, double epsilon) {
    require_same_grid(x_covector.grid, y.grid, "forward_integral");
    const int p = epsilon_steps(y.grid, epsilon);
    const int m = y.grid.n_steps;
    if (x_covector.values[0].size() != y.values[0].size())
        throw std::invalid_argument("forward_integral: covector/integrator dimension mismatch");
    const double w = 1.0 / p;
    std::vector<double> out(static_cast<std::size_t>(m) + 1, 0.0);
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        acc += w * x_covector.values[i].dot(y.at_clamped(i + p) - y.values[i]);
        out[static_cast<std::size_t>(i) + 1] = acc;
    }
    return RealPath(y.grid, std::move(out));
}

RealPath real_covariation(const RealPath& x, const RealPath& y, double epsilon) {
    require_same_grid(x.grid, y.grid, "real_covariation");
    const int p = epsilon_steps(x.grid, epsilon);
    const int m = x.grid.n_steps;
    const double w = 1.0 / p;
    std::vector<double> out(static_cast<std::size_t>(m) + 1, 0.0);
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        acc += w * (x.at_clamped(i + p) - x.values[i]) * (y.at_clamped(i + p) - y.values[i]);
        out[static_cast<std::size_t>(i) + 1] = acc;
    }
    return RealPath(x.grid, std::move(out));
}

RealPath scalar_qv(const VecPath& x, double epsilon) {
    const int p = epsilon_steps(x.grid, epsilon);
    const int m = x.grid.n_steps;
    const double w = 1.0 / p;
    std::vector<double> out(static_cast<std::size_t>(m) + 1, 0.0);
    double acc = 0.0;
    const int n = static_cast<int>(x.values[0].size());
    for (int i = 0; i < m; ++i) {
        const Vec& a = x.at_clamped(i + p);
        const Vec& b = x.values[i];
        double d2 = 0.0;
        for (int k = 0; k < n; ++k) {
            const double d = a[k] - b[k];
            d2 += d * d;
        }
        acc += w * d2;
        out[static_cast<std::size_t>(i) + 1] = acc;
    }
    return RealPath(x.grid, std::move(out));
}

RealPath scalar_qv(const RealPath& x, double epsilon) { return real_covariation(x, x, epsilon); }

MatPath tensor_qv(const VecPath& x, const VecPath& y, double epsilon) {
    require_same_grid(x.grid, y.grid, "tensor_qv");
    const int p = epsilon_steps(x.grid, epsilon);
    const int m = x.grid.n_steps;
    const int nx = static_cast<int>(x.values[0].size());
    const int ny = static_cast<int>(y.values[0].size());
    const double w = 1.0 / p;
    std::vector<Mat> out(static_cast<std::size_t>(m) + 1, Mat::Zero(nx, ny));
    Mat acc = Mat::Zero(nx, ny);
    for (int i = 0; i < m; ++i) {
        acc.noalias() += w * (x.at_clamped(i + p) - x.values[i]) *
                         (y.at_clamped(i + p) - y.values[i]).transpose();
        out[static_cast<std::size_t>(i) + 1] = acc;
    }
    return MatPath(x.grid, std::move(out));
}

Mat tensor_qv_final(const VecPath& x, const VecPath& y, double epsilon) {
    require_same_grid(x.grid, y.grid, "tensor_qv_final");
    const int p = epsilon_steps(x.grid, epsilon);
    const int m = x.grid.n_steps;
    const int nx = static_cast<int>(x.values[0].size());
    const int ny = static_cast<int>(y.values[0].size());
    const double w = 1.0 / p;
    Mat acc = Mat::Zero(nx, ny);
    Vec dx(nx), dy(ny);
    for (int i = 0; i < m; ++i) {
        dx = x.at_clamped(i + p) - x.values[i];
        dy = y.at_clamped(i + p) - y.values[i];
        acc.noalias() += w * dx * dy.transpose();
    }
    return acc;
}

RealPath chi_covariation(const VecPath& x, const VecPath& y, const ChiFunctional& phi,
                         double epsilon) {
    require_same_grid(x.grid, y.grid, "chi_covariation");
    if (phi.space.n_modes() != x.values[0].size() || phi.space.n_modes() != y.values[0].size())
        throw std::invalid_argument("chi_covariation: functional space does not match paths");
    const int p = epsilon_steps(x.grid, epsilon);
    const int m = x.grid.n_steps;
    const double w = 1.0 / p;
    std::vector<double> out(static_cast<std::size_t>(m) + 1, 0.0);
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        const Vec dx = x.at_clamped(i + p) - x.values[i];
        const Vec dy = y.at_clamped(i + p) - y.values[i];
        double term = 0.0;
        for (const auto& [a, b] : phi.terms) term += a.dot(dx) * b.dot(dy);
        acc += w * term;
        out[static_cast<std::size_t>(i) + 1] = acc;
    }
    return RealPath(x.grid, std::move(out));
}

double h1_diagnostic(const TruncatedSpace& space, const VecPath& x, const VecPath& y,
                     double epsilon) {
    require_same_grid(x.grid, y.grid, "h1_diagnostic");
    const int p = epsilon_steps(x.grid, epsilon);
    const int m = x.grid.n_steps;
    const int n = space.n_modes();
    const Vec& gw = space.graph_weights();
    const double w = x.grid.dt() / epsilon;
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        const Vec& xa = x.at_clamped(i + p);
        const Vec& xb = x.values[i];
        const Vec& ya = y.at_clamped(i + p);
        const Vec& yb = y.values[i];
        double sx = 0.0, sy = 0.0;
        for (int k = 0; k < n; ++k) {
            const double dx = xa[k] - xb[k];
            const double dy = ya[k] - yb[k];
            sx += dx * dx / gw[k];
            sy += dy * dy / gw[k];
        }
        acc += w * std::sqrt(sx * sy);
    }
    return acc;
}

double dual_norm_scalar_qv_final(const TruncatedSpace& space, const VecPath& x,
                                 double epsilon) {
    const int p = epsilon_steps(x.grid, epsilon);
    const int m = x.grid.n_steps;
    const int n = space.n_modes();
    const Vec& gw = space.graph_weights();
    const double w = x.grid.dt() / epsilon;
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
        const Vec& xa = x.at_clamped(i + p);
        const Vec& xb = x.values[i];
        double sx = 0.0;
        for (int k = 0; k < n; ++k) {
            const double dx = xa[k] - xb[k];
            sx += dx * dx / gw[k];
        }
        acc += w * sx;
    }
    return acc;
}

}  // namespace qvlab
