#include <qvlab/spde.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace qvlab;

namespace {

VecPath zero_noise(const TimeGrid& grid, int n) {
    return VecPath(grid, std::vector<Vec>(static_cast<std::size_t>(grid.n_steps) + 1,
                                          Vec::Zero(n)));
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    return xs[xs.size() / 2];
}

}  // namespace

TEST_CASE("simulate_mild: deterministic semigroup flow") {
    const TruncatedSpace space = make_dirichlet_space(6);
    const TimeGrid grid(0.0, 1.0, 512);
    Vec x0(6);
    for (int k = 0; k < 6; ++k) x0[k] = 1.0 / (k + 1);
    const SPDEModel model = make_heat_model(space, x0, 0.0);

    const MildPath mild = simulate_mild(model, grid, zero_noise(grid, 6));
    for (int i = 0; i <= 512; i += 64) {
        const Vec expect = semigroup_apply(space, grid.time(i) - grid.t_start, x0);
        CHECK((mild.X.values[static_cast<std::size_t>(i)] - expect).norm() <=
              1e-12 * (1.0 + expect.norm()));
    }
}

TEST_CASE("simulate_mild: zero generator makes X = x + W") {
    const TruncatedSpace space = make_zero_generator_space(6);
    const TimeGrid grid(0.0, 1.0, 256);
    Vec x0 = Vec::Ones(6);
    const SPDEModel model = make_drift_free_model(space, x0);
    const VecPath w = sample_q_wiener(space, grid, SeedSpec{41, 0, "spde"});
    const MildPath mild = simulate_mild(model, grid, w);
    for (int i = 0; i <= 256; ++i) {
        const Vec expect = x0 + w.values[static_cast<std::size_t>(i)];
        CHECK((mild.X.values[static_cast<std::size_t>(i)] - expect).norm() <=
              1e-12 * expect.norm());
    }
}

TEST_CASE("simulate_mild: linear drift converges to the scalar ODE at rate dt") {
    Vec lam(1), q(1);
    lam[0] = -2.0;
    q[0] = 1.0;
    const TruncatedSpace one(lam, q, "one");
    Vec x0(1);
    x0[0] = 1.5;
    const double c = 0.8;
    const SPDEModel model = make_heat_model(one, x0, c);

    auto terminal_error = [&](int steps) {
        const TimeGrid g(0.0, 1.0, steps);
        const MildPath mild = simulate_mild(model, g, zero_noise(g, 1));
        const double exact = x0[0] * std::exp((lam[0] + c) * g.horizon());
        return std::abs(mild.X.values.back()[0] - exact);
    };
    const double e1 = terminal_error(256);
    const double e2 = terminal_error(512);
    CHECK(e2 / e1 == doctest::Approx(0.5).epsilon(0.1));  // halving dt halves the error
}

TEST_CASE("simulate_mild: validation") {
    const TruncatedSpace space = make_dirichlet_space(4);
    const TimeGrid grid(0.0, 1.0, 16);
    const SPDEModel model = make_heat_model(space, Vec::Ones(4));
    const TimeGrid other(0.0, 1.0, 32);
    CHECK_THROWS_AS(simulate_mild(model, grid, zero_noise(other, 4)), std::invalid_argument);

    SPDEModel bad = model;
    bad.drift = [](double, const Vec& x) -> Vec {
        return std::numeric_limits<double>::infinity() * x;
    };
    CHECK_THROWS_AS(simulate_mild(bad, grid, zero_noise(grid, 4)), std::runtime_error);
}

TEST_CASE("y_process identities") {
    // A = 0: Y vanishes identically
    const TruncatedSpace flat = make_zero_generator_space(5);
    const TimeGrid grid(0.0, 1.0, 128);
    const SPDEModel model0 = make_heat_model(flat, Vec::Ones(5), -0.3);
    const VecPath w = sample_q_wiener(flat, grid, SeedSpec{43, 0, "y"});
    const MildPath m0 = simulate_mild(model0, grid, w);
    const VecPath y0 = y_process(model0, m0);
    for (const Vec& v : y0.values) CHECK(v.norm() <= 1e-12);

    // b = sigma = 0: Y(t) = e^{(t-s)A} x - x
    const TruncatedSpace dir = make_dirichlet_space(5);
    Vec x0(5);
    for (int k = 0; k < 5; ++k) x0[k] = 1.0 / (k + 1);
    const SPDEModel model1 = make_heat_model(dir, x0, 0.0);
    const MildPath m1 = simulate_mild(model1, grid, zero_noise(grid, 5));
    const VecPath y1 = y_process(model1, m1);
    for (int i = 0; i <= 128; i += 16) {
        const Vec expect = semigroup_apply(dir, grid.time(i), x0) - x0;
        CHECK((y1.values[static_cast<std::size_t>(i)] - expect).norm() <=
              1e-12 * (1.0 + expect.norm()));
    }
}

TEST_CASE("ondrejat residual: exact closed form in the deterministic case") {
    const TruncatedSpace dir = make_dirichlet_space(4);
    const TimeGrid grid(0.0, 1.0, 256);
    Vec x0(4);
    x0 << 1.0, 0.5, 0.25, 0.125;
    const SPDEModel model = make_heat_model(dir, x0, 0.0);
    const MildPath mild = simulate_mild(model, grid, zero_noise(grid, 4));
    const VecPath y = y_process(model, mild);

    // A = 0 companion: residual identically zero
    const TruncatedSpace flat = make_zero_generator_space(4);
    const SPDEModel fmodel = make_heat_model(flat, x0, 0.0);
    const MildPath fmild = simulate_mild(fmodel, grid, zero_noise(grid, 4));
    const VecPath fy = y_process(fmodel, fmild);
    Vec z = Vec::Zero(4);
    z[0] = 1.0;
    const RealPath fres = ondrejat_residual(fmodel, fmild, fy, z);
    for (double v : fres.values) CHECK(std::abs(v) <= 1e-14);

    // one-mode closed form: left-rule quadrature error of lambda int x_1
    const RealPath res = ondrejat_residual(model, mild, y, z);
    const double lam = dir.lambda[0];
    const double dt = grid.dt();
    for (int i = 32; i <= 256; i += 32) {
        const double tau = grid.time(i);
        const double predicted =
            x0[0] * std::expm1(lam * tau) * (1.0 - lam * dt / std::expm1(lam * dt));
        CHECK(res.values[static_cast<std::size_t>(i)] ==
              doctest::Approx(predicted).epsilon(1e-9));
    }

    // halving dt halves the residual
    const TimeGrid fine(0.0, 1.0, 512);
    const MildPath mild2 = simulate_mild(model, fine, zero_noise(fine, 4));
    const RealPath res2 = ondrejat_residual(model, mild2, y_process(model, mild2), z);
    CHECK(std::abs(res2.values.back() / res.values.back()) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("zero chi-qv certificate") {
    const TruncatedSpace dir = make_dirichlet_space(8);
    const TimeGrid grid(0.0, 1.0, 512);
    const EpsilonLadder ladder({32, 16, 8, 4, 2, 1});

    // b = sigma = 0 and x = 0: A(eps) is identically zero
    const SPDEModel null_model = make_heat_model(dir, Vec::Zero(8), 0.0);
    {
        const VecPath w = zero_noise(grid, 8);
        const MildPath mild = simulate_mild(null_model, grid, w);
        const VecPath y = y_process(null_model, mild);
        for (int p : {32, 1})
            CHECK(h1_diagnostic(dir, y, y, p * grid.dt()) == 0.0);
    }

    // default model: pathwise bound and decreasing ladder medians
    Vec x0(8);
    for (int k = 0; k < 8; ++k) x0[k] = 1.0 / (k + 1);
    const SPDEModel model = make_heat_model(dir, x0);
    const ZeroChiQvReport rep =
        zero_chi_qv_certificate(model, grid, ladder, EnsembleSpec{200, 97});
    CHECK(rep.bound_ok);
    CHECK(rep.violating_paths.empty());
    for (std::size_t e = 1; e < rep.medians.size(); ++e)
        CHECK(rep.medians[e] < rep.medians[e - 1]);
    CHECK(rep.decrease_factor >= 8.0);
}

TEST_CASE("ito residual: constant and linear test functions") {
    const TruncatedSpace dir = make_dirichlet_space(8);
    const TimeGrid grid(0.0, 1.0, 512);
    Vec x0(8);
    for (int k = 0; k < 8; ++k) x0[k] = 1.0 / (k + 1);
    const SPDEModel model = make_heat_model(dir, x0);

    Vec e1 = Vec::Zero(8);
    e1[0] = 1.0;
    const TestFunction f0 = constant_f(dir, 3.25);
    const TestFunction fl = linear_f(dir, e1);

    std::vector<double> lin_res;
    for (int j = 0; j < 50; ++j) {
        const VecPath w =
            sample_q_wiener(dir, grid, SeedSpec{51, static_cast<std::uint64_t>(j), "ito"});
        const MildPath mild = simulate_mild(model, grid, w);
        CHECK(ito_residual(model, mild, f0) == 0.0);
        lin_res.push_back(std::abs(ito_residual(model, mild, fl)));
    }
    // linear f: residual is the Ondrejat bookkeeping, O(dt)
    CHECK(median(lin_res) <= 10.0 * grid.dt() * std::abs(dir.lambda[0]));
}

TEST_CASE("ito residual shrinks when dt halves") {
    const TruncatedSpace dir = make_dirichlet_space(8);
    Vec x0(8);
    for (int k = 0; k < 8; ++k) x0[k] = 1.0 / (k + 1);
    const SPDEModel model = make_heat_model(dir, x0);
    Vec e1 = Vec::Zero(8);
    e1[0] = 1.0;
    const TestFunction fq = quadratic_f(dir, e1);

    auto med_at = [&](int steps) {
        const TimeGrid g(0.0, 1.0, steps);
        std::vector<double> rs;
        for (int j = 0; j < 400; ++j) {
            const VecPath w =
                sample_q_wiener(dir, g, SeedSpec{53, static_cast<std::uint64_t>(j), "ito"});
            rs.push_back(std::abs(ito_residual(model, simulate_mild(model, g, w), fq)));
        }
        return median(rs);
    };
    const double m1 = med_at(256), m2 = med_at(512);
    CHECK(m2 < m1);
    CHECK(m2 / m1 > 0.4);  // roughly sqrt(dt) contraction, not faster
}

TEST_CASE("martingale part") {
    const TruncatedSpace dir = make_dirichlet_space(6);
    const TimeGrid grid(0.0, 1.0, 256);
    Vec x0 = Vec::Ones(6);
    const SPDEModel model = make_heat_model(dir, x0);
    const VecPath w = sample_q_wiener(dir, grid, SeedSpec{57, 0, "mart"});
    const MildPath mild = simulate_mild(model, grid, w);

    // constant f: R is the constant
    const RealPath r0 = martingale_part(mild, constant_f(dir, -1.5));
    for (double v : r0.values) CHECK(v == -1.5);

    // linear f with sigma = I: R(t) = <x0,h> + sum <h, dW>
    Vec h = Vec::Zero(6);
    h[0] = 1.0;
    h[3] = 2.0;
    const RealPath rl = martingale_part(mild, linear_f(dir, h));
    double manual = h.dot(x0);
    CHECK(rl.values[0] == doctest::Approx(manual));
    for (int i = 0; i < 256; ++i) {
        manual += h.dot(w.values[static_cast<std::size_t>(i) + 1] -
                        w.values[static_cast<std::size_t>(i)]);
        CHECK(rl.values[static_cast<std::size_t>(i) + 1] ==
              doctest::Approx(manual).epsilon(1e-12));
    }

    // martingale property: E R(T) = R(s) within 3 SE
    const int n_paths = 5000;
    const TestFunction fq = quadratic_f(dir, h);
    std::vector<double> rT(n_paths);
    double mean = 0.0;
    for (int j = 0; j < n_paths; ++j) {
        const VecPath wj =
            sample_q_wiener(dir, grid, SeedSpec{57, static_cast<std::uint64_t>(j), "mart"});
        const MildPath mj = simulate_mild(model, grid, wj);
        rT[j] = martingale_part(mj, fq).values.back();
        mean += rT[j];
    }
    mean /= n_paths;
    double var = 0.0;
    for (double v : rT) var += (v - mean) * (v - mean);
    const double se = std::sqrt(var / (n_paths - 1.0) / n_paths);
    const double r_s = fq.value(0.0, x0);
    CHECK(std::abs(mean - r_s) <= 3.0 * se);
}

TEST_CASE("orthogonality check: exact degenerate case") {
    // A = 0, b = 0, f linear: A_f vanishes and every covariation is zero
    const TruncatedSpace flat = make_zero_generator_space(4);
    const TimeGrid grid(0.0, 1.0, 128);
    const SPDEModel model = make_drift_free_model(flat, Vec::Ones(4));
    Vec h = Vec::Zero(4);
    h[0] = 1.0;
    const ConvergenceReport rep =
        orthogonality_check(model, grid, linear_f(flat, h), "mode-1",
                            EpsilonLadder({8, 4, 2, 1}), EnsembleSpec{100, 3});
    CHECK(rep.verdict == Verdict::Converges);
    for (const auto& row : rep.rows) CHECK(std::abs(row.q50) <= 1e-20);

    CHECK_THROWS_AS(orthogonality_check(model, grid, linear_f(flat, h), "nope",
                                        EpsilonLadder({4, 2, 1}), EnsembleSpec{4, 3}),
                    std::invalid_argument);
}

TEST_CASE("coefficient spot check") {
    const TruncatedSpace dir = make_dirichlet_space(6);
    const TimeGrid grid(0.0, 1.0, 64);
    const SPDEModel model = make_heat_model(dir, Vec::Ones(6), -0.4);
    const CoefficientSpotCheck ok = coefficient_spot_check(model, grid, 100, 7);
    CHECK(ok.ok);
    CHECK(ok.worst_lipschitz <= 1.0 + 1e-9);

    // a drift violating its declared constant is caught
    SPDEModel lying = model;
    lying.drift = [](double, const Vec& x) -> Vec { return 5.0 * x; };
    const CoefficientSpotCheck bad = coefficient_spot_check(lying, grid, 100, 7);
    CHECK_FALSE(bad.ok);
}

TEST_CASE("test martingale builders") {
    const TruncatedSpace dir = make_dirichlet_space(4);
    const TimeGrid grid(0.0, 1.0, 64);
    const VecPath w = sample_q_wiener(dir, grid, SeedSpec{61, 0, "tm"});

    const RealPath p1 = mode_projection(w, 2);
    for (int i = 0; i <= 64; ++i)
        CHECK(p1.values[static_cast<std::size_t>(i)] ==
              w.values[static_cast<std::size_t>(i)][2]);

    const RealPath wi = weighted_wiener_integral(w, 0, [](double) { return 2.0; });
    for (int i = 0; i <= 64; ++i)
        CHECK(wi.values[static_cast<std::size_t>(i)] ==
              doctest::Approx(2.0 * w.values[static_cast<std::size_t>(i)][0]).epsilon(1e-12));
}
