#include <qvlab/parallel.hpp>
#include <qvlab/spde.hpp>

#include <cmath>
#include <stdexcept>

namespace qvlab {

SPDEModel make_heat_model(const TruncatedSpace& space, const Vec& x0, double drift_coeff) {
    require_dim(space, x0, "make_heat_model");
    SPDEModel m;
    m.space = space;
    m.drift = [drift_coeff](double, const Vec& x) -> Vec { return drift_coeff * x; };
    m.diffusion_apply = [](double, const Vec&, const Vec& dw) -> Vec { return dw; };
    Mat gram = space.q.asDiagonal();
    m.diffusion_gram = [gram](double, const Vec&) -> Mat { return gram; };
    m.x0 = x0;
    m.lipschitz_c = std::abs(drift_coeff);
    m.id = "heat";
    return m;
}

SPDEModel make_drift_free_model(const TruncatedSpace& space, const Vec& x0) {
    SPDEModel m = make_heat_model(space, x0, 0.0);
    m.id = "drift-free";
    return m;
}

CoefficientSpotCheck coefficient_spot_check(const SPDEModel& model, const TimeGrid& grid,
                                            int n_probes, std::uint64_t seed) {
    const int n = model.space.n_modes();
    GaussianStream g(SeedSpec{seed, 0, "coefficient-probes"}, 0);
    auto gvec = [&](double scale) {
        Vec v(n);
        for (int k = 0; k < n; ++k) v[k] = scale * g.next();
        return v;
    };
    CoefficientSpotCheck out;
    const double c = model.lipschitz_c;
    for (int p = 0; p < n_probes; ++p) {
        const double u = 0.5 * std::erfc(-g.next() / std::sqrt(2.0));
        const double t = grid.t_start + u * grid.horizon();
        const Vec x = gvec(2.0), y = gvec(2.0), w = gvec(1.0);
        const double lip = (model.drift(t, x) - model.drift(t, y)).norm() /
                           std::max(1e-300, c * (x - y).norm());
        const double grw = model.drift(t, x).norm() / std::max(1e-300, c * (1.0 + x.norm()));
        const double sig = (model.diffusion_apply(t, x, w) - model.diffusion_apply(t, y, w)).norm();
        out.worst_lipschitz = std::max(out.worst_lipschitz, lip);
        out.worst_growth = std::max(out.worst_growth, grw);
        const double slack = 1.0 + 1e-9;
        if (lip > slack || grw > slack) out.ok = false;
        // default models have state-independent diffusion; a Lipschitz bound
        // with the same constant covers the state-dependent case
        if (sig > c * (x - y).norm() * (1.0 + w.norm()) * slack && sig > 1e-12) out.ok = false;
    }
    return out;
}

MildPath simulate_mild(const SPDEModel& model, const TimeGrid& grid, const VecPath& noise) {
    require_same_grid(grid, noise.grid, "simulate_mild");
    const int n = model.space.n_modes();
    if (noise.values[0].size() != n)
        throw std::invalid_argument("simulate_mild: noise dimension does not match space");
    require_dim(model.space, model.x0, "simulate_mild");

    const int m = grid.n_steps;
    const double dt = grid.dt();
    const Vec efac = model.space.semigroup_factors(dt);

    MildPath out;
    out.W = noise;
    out.drift_left.reserve(static_cast<std::size_t>(m));
    out.noise_incr.reserve(static_cast<std::size_t>(m));
    std::vector<Vec> xs(static_cast<std::size_t>(m) + 1);
    xs[0] = model.x0;
    for (int i = 0; i < m; ++i) {
        const double t = grid.time(i);
        const Vec& x = xs[static_cast<std::size_t>(i)];
        Vec b = model.drift(t, x);
        Vec incr = model.diffusion_apply(t, x, noise.values[static_cast<std::size_t>(i) + 1] -
                                                   noise.values[static_cast<std::size_t>(i)]);
        Vec next = efac.cwiseProduct(x + dt * b + incr);
        if (!next.allFinite())
            throw std::runtime_error("simulate_mild: non-finite state at step " +
                                     std::to_string(i + 1) + ", t = " + std::to_string(t + dt));
        out.drift_left.push_back(std::move(b));
        out.noise_incr.push_back(std::move(incr));
        xs[static_cast<std::size_t>(i) + 1] = std::move(next);
    }
    out.X = VecPath(grid, std::move(xs));
    return out;
}

VecPath y_process(const SPDEModel& model, const MildPath& mild) {
    const TimeGrid& grid = mild.X.grid;
    const int m = grid.n_steps;
    const double dt = grid.dt();
    std::vector<Vec> ys(static_cast<std::size_t>(m) + 1);
    Vec acc = Vec::Zero(model.space.n_modes());
    ys[0] = Vec::Zero(model.space.n_modes());
    for (int i = 0; i < m; ++i) {
        acc += dt * mild.drift_left[static_cast<std::size_t>(i)] +
               mild.noise_incr[static_cast<std::size_t>(i)];
        ys[static_cast<std::size_t>(i) + 1] =
            mild.X.values[static_cast<std::size_t>(i) + 1] - model.x0 - acc;
    }
    return VecPath(grid, std::move(ys));
}

RealPath ondrejat_residual(const SPDEModel& model, const MildPath& mild, const VecPath& y,
                           const Vec& z) {
    require_dim(model.space, z, "ondrejat_residual");
    const TimeGrid& grid = mild.X.grid;
    const int m = grid.n_steps;
    const double dt = grid.dt();
    const Vec az = adjoint_generator_apply(model.space, z);
    std::vector<double> res(static_cast<std::size_t>(m) + 1, 0.0);
    double sum = 0.0;
    for (int i = 0; i < m; ++i) {
        sum += dt * az.dot(mild.X.values[static_cast<std::size_t>(i)]);
        res[static_cast<std::size_t>(i) + 1] =
            z.dot(y.values[static_cast<std::size_t>(i) + 1]) - sum;
    }
    return RealPath(grid, std::move(res));
}

ZeroChiQvReport zero_chi_qv_certificate(const SPDEModel& model, const TimeGrid& grid,
                                        const EpsilonLadder& ladder,
                                        const EnsembleSpec& ensemble) {
    const std::size_t n_paths = static_cast<std::size_t>(ensemble.n_paths);
    const std::size_t n_eps = static_cast<std::size_t>(ladder.size());
    std::vector<std::vector<double>> samples(n_eps, std::vector<double>(n_paths, 0.0));
    std::vector<std::uint8_t> ok(n_paths, 1);

    SeedSpec seed{ensemble.master_seed, 0, "q-wiener"};
    parallel_for(n_paths, [&](std::uint64_t j) {
        VecPath w = sample_q_wiener(model.space, grid, seed.with_path(j));
        MildPath mild = simulate_mild(model, grid, w);
        VecPath y = y_process(model, mild);
        double sup_x2 = 0.0;
        for (const Vec& x : mild.X.values) sup_x2 = std::max(sup_x2, x.squaredNorm());
        for (std::size_t e = 0; e < n_eps; ++e) {
            const double eps = ladder.epsilon(grid, static_cast<int>(e));
            const double a = h1_diagnostic(model.space, y, y, eps);
            samples[e][j] = a;
            if (a > eps * sup_x2 * (1.0 + 1e-12)) ok[j] = 0;
        }
    });

    ZeroChiQvReport report;
    for (std::size_t e = 0; e < n_eps; ++e) {
        report.epsilons.push_back(ladder.epsilon(grid, static_cast<int>(e)));
        report.medians.push_back(quantile(samples[e], 0.5));
    }
    for (std::size_t j = 0; j < n_paths; ++j)
        if (!ok[j]) {
            report.bound_ok = false;
            report.violating_paths.push_back(j);
        }
    report.decrease_factor =
        report.medians.back() > 0.0 ? report.medians.front() / report.medians.back() : 0.0;
    return report;
}

// --- test functions ---------------------------------------------------------

namespace {
TestFunction make_profile(const TruncatedSpace& space, const Vec& h, std::string id,
                          std::function<double(double)> phi, std::function<double(double)> dphi,
                          std::function<double(double)> d2phi) {
    require_dim(space, h, "test function");
    TestFunction f;
    f.id = std::move(id);
    f.h = h;
    f.h_graph_norm = graph_norm(space, h);
    f.phi = std::move(phi);
    f.dphi = std::move(dphi);
    f.d2phi = std::move(d2phi);
    f.rho = [](double) { return 1.0; };
    f.drho = [](double) { return 0.0; };
    return f;
}
}  // namespace

TestFunction constant_f(const TruncatedSpace& space, double c) {
    return make_profile(
        space, Vec::Zero(space.n_modes()), "constant", [c](double) { return c; },
        [](double) { return 0.0; }, [](double) { return 0.0; });
}

TestFunction linear_f(const TruncatedSpace& space, const Vec& h) {
    return make_profile(
        space, h, "linear", [](double s) { return s; }, [](double) { return 1.0; },
        [](double) { return 0.0; });
}

TestFunction quadratic_f(const TruncatedSpace& space, const Vec& h) {
    return make_profile(
        space, h, "quadratic", [](double s) { return s * s; }, [](double s) { return 2.0 * s; },
        [](double) { return 2.0; });
}

TestFunction composite_f(const TruncatedSpace& space, const Vec& h) {
    return make_profile(
        space, h, "composite-sin", [](double s) { return std::sin(s); },
        [](double s) { return std::cos(s); }, [](double s) { return -std::sin(s); });
}

TestFunction with_ramp(TestFunction f) {
    auto rho0 = f.rho;
    auto drho0 = f.drho;
    f.rho = [rho0](double t) { return rho0(t) * (1.0 + 0.5 * t); };
    f.drho = [rho0, drho0](double t) { return drho0(t) * (1.0 + 0.5 * t) + 0.5 * rho0(t); };
    f.id += "-ramp";
    return f;
}

double ito_residual(const SPDEModel& model, const MildPath& mild, const TestFunction& f) {
    const TimeGrid& grid = mild.X.grid;
    const int m = grid.n_steps;
    const double dt = grid.dt();
    const Vec& lambda = model.space.lambda;

    const double lhs =
        f.value(grid.t_end, mild.X.values.back()) - f.value(grid.t_start, mild.X.values.front());
    double rhs = 0.0;
    const Mat hh = f.h * f.h.transpose();
    for (int i = 0; i < m; ++i) {
        const double t = grid.time(i);
        const Vec& x = mild.X.values[static_cast<std::size_t>(i)];
        const Vec grad = f.gradient(t, x);
        double drift_terms = f.time_derivative(t, x);
        drift_terms += grad.cwiseProduct(lambda).dot(x);  // <A* grad, X>
        drift_terms += grad.dot(mild.drift_left[static_cast<std::size_t>(i)]);
        const double hc = f.hess_coeff(t, x);
        if (hc != 0.0)
            drift_terms += 0.5 * hc * trace_pairing(hh, model.diffusion_gram(t, x));
        rhs += dt * drift_terms;
        rhs += grad.dot(mild.noise_incr[static_cast<std::size_t>(i)]);
    }
    return lhs - rhs;
}

RealPath martingale_part(const MildPath& mild, const TestFunction& f) {
    const TimeGrid& grid = mild.X.grid;
    const int m = grid.n_steps;
    std::vector<double> r(static_cast<std::size_t>(m) + 1);
    r[0] = f.value(grid.t_start, mild.X.values.front());
    for (int i = 0; i < m; ++i) {
        const double t = grid.time(i);
        const Vec& x = mild.X.values[static_cast<std::size_t>(i)];
        r[static_cast<std::size_t>(i) + 1] =
            r[static_cast<std::size_t>(i)] +
            f.gradient(t, x).dot(mild.noise_incr[static_cast<std::size_t>(i)]);
    }
    return RealPath(grid, std::move(r));
}

RealPath orthogonal_part(const MildPath& mild, const TestFunction& f) {
    const RealPath r = martingale_part(mild, f);
    const TimeGrid& grid = mild.X.grid;
    std::vector<double> a(r.values.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        a[i] = f.value(grid.time(static_cast<int>(i)), mild.X.values[i]) - r.values[i];
    return RealPath(grid, std::move(a));
}

RealPath mode_projection(const VecPath& w, int mode) {
    std::vector<double> v(w.values.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = w.values[i][mode];
    return RealPath(w.grid, std::move(v));
}

RealPath weighted_wiener_integral(const VecPath& w, int mode,
                                  const std::function<double(double)>& kernel) {
    const int m = w.grid.n_steps;
    std::vector<double> v(static_cast<std::size_t>(m) + 1, 0.0);
    for (int i = 0; i < m; ++i) {
        const double dw = w.values[static_cast<std::size_t>(i) + 1][mode] -
                          w.values[static_cast<std::size_t>(i)][mode];
        v[static_cast<std::size_t>(i) + 1] =
            v[static_cast<std::size_t>(i)] + kernel(w.grid.time(i)) * dw;
    }
    return RealPath(w.grid, std::move(v));
}

ConvergenceReport orthogonality_check(const SPDEModel& model, const TimeGrid& grid,
                                      const TestFunction& f, const std::string& martingale_id,
                                      const EpsilonLadder& ladder,
                                      const EnsembleSpec& ensemble) {
    const std::size_t n_paths = static_cast<std::size_t>(ensemble.n_paths);
    const std::size_t n_eps = static_cast<std::size_t>(ladder.size());
    std::vector<std::vector<double>> samples(n_eps, std::vector<double>(n_paths, 0.0));
    std::vector<double> f_qv(n_paths, 0.0);

    const double lambda1 = model.space.lambda[0];
    const double t_end = grid.t_end;
    SeedSpec seed{ensemble.master_seed, 0, "q-wiener"};
    SeedSpec indep_seed{ensemble.master_seed, 0, "orthogonality-independent"};

    parallel_for(n_paths, [&](std::uint64_t j) {
        VecPath w = sample_q_wiener(model.space, grid, seed.with_path(j));
        MildPath mild = simulate_mild(model, grid, w);
        RealPath a_f = orthogonal_part(mild, f);

        RealPath n_path;
        if (martingale_id == "mode-1") {
            n_path = mode_projection(w, 0);
        } else if (martingale_id == "mode-2") {
            n_path = mode_projection(w, 1);
        } else if (martingale_id == "convolution") {
            n_path = weighted_wiener_integral(
                w, 0, [lambda1, t_end](double r) { return std::exp(lambda1 * (t_end - r)); });
        } else if (martingale_id == "independent-bm") {
            n_path = sample_real_bm(grid, indep_seed.with_path(j));
        } else {
            throw std::invalid_argument("orthogonality_check: unknown martingale '" +
                                        martingale_id + "'");
        }

        for (std::size_t e = 0; e < n_eps; ++e) {
            const double eps = ladder.epsilon(grid, static_cast<int>(e));
            samples[e][j] = real_covariation(a_f, n_path, eps).values.back();
        }
        std::vector<double> fv(mild.X.values.size());
        for (std::size_t i = 0; i < fv.size(); ++i)
            fv[i] = f.value(grid.time(static_cast<int>(i)), mild.X.values[i]);
        RealPath f_path(grid, std::move(fv));
        f_qv[j] = real_covariation(f_path, f_path, ladder.epsilon(grid, ladder.size() - 1))
                      .values.back();
    });

    ConvergenceReport report;
    report.estimator = "orthogonality[" + f.id + "," + martingale_id + "]";
    report.scale = std::max(quantile(f_qv, 0.5), 1e-300);
    report.rel_tol = 0.05;
    report.target = 0.0;
    std::vector<double> medians(n_eps);
    for (std::size_t e = 0; e < n_eps; ++e) {
        LadderRow row;
        row.epsilon = ladder.epsilon(grid, static_cast<int>(e));
        row.t = grid.t_end;
        row.q05 = quantile(samples[e], 0.05);
        row.q50 = quantile(samples[e], 0.50);
        row.q95 = quantile(samples[e], 0.95);
        row.n_paths = ensemble.n_paths;
        report.rows.push_back(row);
        medians[e] = row.q50;
    }
    report.finest_dispersion = report.rows.back().q95 - report.rows.back().q05;
    finalize_verdict(report, medians);
    return report;
}

}  // namespace qvlab
