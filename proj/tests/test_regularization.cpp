#include <qvlab/ladder.hpp>
#include <qvlab/noise.hpp>
#include <qvlab/regularization.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace qvlab;

namespace {

const TruncatedSpace& space8() {
    static TruncatedSpace s = make_dirichlet_space(8);
    return s;
}

RealPath real_path_of(const TimeGrid& grid, const std::function<double(double)>& f) {
    std::vector<double> v(static_cast<std::size_t>(grid.n_steps) + 1);
    for (int i = 0; i <= grid.n_steps; ++i) v[static_cast<std::size_t>(i)] = f(grid.time(i));
    return RealPath(grid, std::move(v));
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    return xs[xs.size() / 2];
}

}  // namespace

TEST_CASE("epsilon ladder validation") {
    CHECK_THROWS_AS(EpsilonLadder({}), std::invalid_argument);
    CHECK_THROWS_AS(EpsilonLadder({4, 4, 2}), std::invalid_argument);
    CHECK_THROWS_AS(EpsilonLadder({4, 0}), std::invalid_argument);
    const TimeGrid grid(0.0, 1.0, 64);
    CHECK(epsilon_steps(grid, grid.dt()) == 1);
    CHECK(epsilon_steps(grid, 8 * grid.dt()) == 8);
    CHECK_THROWS_AS(epsilon_steps(grid, 2.5 * grid.dt()), std::invalid_argument);
    CHECK_THROWS_AS(epsilon_steps(grid, 0.0), std::invalid_argument);
}

TEST_CASE("forward integral: zero and constant integrands") {
    const TimeGrid grid(0.0, 1.0, 128);
    const VecPath w = sample_q_wiener(space8(), grid, SeedSpec{3, 0, "fi"});

    // X == 0 gives the zero path
    std::vector<Mat> zeros(129, Mat::Zero(8, 8));
    const VecPath zero_out = forward_integral(MatPath(grid, zeros), w, grid.dt());
    for (const Vec& v : zero_out.values) CHECK(v.norm() == 0.0);

    // constant operator at eps = dt telescopes to C W(T)
    Mat c = Mat::Zero(8, 8);
    for (int i = 0; i < 8; ++i) c(i, (i + 1) % 8) = 1.0 + 0.25 * i;  // non-diagonal
    std::vector<Mat> cs(129, c);
    const Vec got = forward_integral(MatPath(grid, cs), w, grid.dt()).values.back();
    const Vec expect = c * w.values.back();
    CHECK((got - expect).norm() <= 1e-13 * expect.norm());

    // shape mismatch
    std::vector<Mat> bad(129, Mat::Zero(8, 7));
    CHECK_THROWS_AS(forward_integral(MatPath(grid, bad), w, grid.dt()), std::invalid_argument);
}

TEST_CASE("forward integral: adapted step matches the two-block Ito sum at eps = dt") {
    const TimeGrid grid(0.0, 1.0, 128);
    const VecPath w = sample_q_wiener(space8(), grid, SeedSpec{3, 1, "fi"});
    Mat c1 = 2.0 * Mat::Identity(8, 8), c2 = -0.5 * Mat::Identity(8, 8);
    c1(0, 3) = 1.0;
    c2(5, 1) = -2.0;
    std::vector<Mat> ops(129);
    for (int i = 0; i <= 128; ++i) ops[static_cast<std::size_t>(i)] = grid.time(i) < 0.5 ? c1 : c2;
    const Vec got = forward_integral(MatPath(grid, ops), w, grid.dt()).values.back();
    // two-block Riemann-Ito sum: C1 (W(mid) - W(0)) + C2 (W(T) - W(mid))
    const Vec expect = c1 * (w.values[64] - w.values[0]) + c2 * (w.values[128] - w.values[64]);
    CHECK((got - expect).norm() <= 1e-12 * (1.0 + expect.norm()));
}

TEST_CASE("forward integral: covector integrand produces the real integral") {
    const TimeGrid grid(0.0, 1.0, 64);
    const VecPath w = sample_q_wiener(space8(), grid, SeedSpec{3, 2, "fi"});
    Vec h = Vec::Zero(8);
    h[0] = 1.0;
    h[2] = -0.5;
    std::vector<Vec> hs(65, h);
    const RealPath out = forward_integral(VecPath(grid, hs), w, grid.dt());
    double manual = 0.0;
    for (int i = 0; i < 64; ++i)
        manual += h.dot(w.values[static_cast<std::size_t>(i) + 1] -
                        w.values[static_cast<std::size_t>(i)]);
    CHECK(out.values.back() == doctest::Approx(manual).epsilon(1e-13));
}

TEST_CASE("real covariation: exact properties") {
    const TimeGrid grid(0.0, 1.0, 256);
    const RealPath x = sample_real_bm(grid, SeedSpec{9, 0, "rc"});
    const RealPath y = sample_real_bm(grid, SeedSpec{9, 0, "rc-other"});
    const double eps = 4 * grid.dt();

    // symmetry, exactly
    const RealPath xy = real_covariation(x, y, eps);
    const RealPath yx = real_covariation(y, x, eps);
    for (std::size_t i = 0; i < xy.values.size(); ++i) CHECK(xy.values[i] == yx.values[i]);

    // square integrand is nonnegative and nondecreasing
    const RealPath xx = real_covariation(x, x, eps);
    for (std::size_t i = 1; i < xx.values.size(); ++i) {
        CHECK(xx.values[i] >= 0.0);
        CHECK(xx.values[i] >= xx.values[i - 1]);
    }

    // bilinearity at machine precision
    std::vector<double> zsum(x.values.size());
    for (std::size_t i = 0; i < zsum.size(); ++i) zsum[i] = 2.0 * x.values[i] - 3.0 * y.values[i];
    const RealPath z(grid, zsum);
    const RealPath lhs = real_covariation(z, y, eps);
    const RealPath rx = real_covariation(x, y, eps);
    const RealPath ry = real_covariation(y, y, eps);
    for (std::size_t i = 0; i < lhs.values.size(); ++i)
        CHECK(lhs.values[i] ==
              doctest::Approx(2.0 * rx.values[i] - 3.0 * ry.values[i]).epsilon(1e-11));

    // smooth deterministic factor kills the covariation
    const RealPath tpath = real_path_of(grid, [](double t) { return t; });
    const RealPath ct = real_covariation(x, tpath, eps);
    CHECK(std::abs(ct.values.back()) < 0.05);

    // grid mismatch
    const TimeGrid other(0.0, 1.0, 128);
    CHECK_THROWS_AS(real_covariation(x, sample_real_bm(other, SeedSpec{9, 0, "rc"}), eps),
                    std::invalid_argument);
}

TEST_CASE("real covariation: BM bracket concentrates near t") {
    const TimeGrid grid(0.0, 1.0, 1024);
    const int n_paths = 10000;
    std::vector<double> vals(n_paths);
    for (int j = 0; j < n_paths; ++j) {
        const RealPath b =
            sample_real_bm(grid, SeedSpec{77, static_cast<std::uint64_t>(j), "bracket"});
        vals[j] = real_covariation(b, b, 4 * grid.dt()).values.back();
    }
    CHECK(std::abs(median(vals) - 1.0) < 0.05);
}

TEST_CASE("scalar qv") {
    const TimeGrid grid(0.0, 1.0, 256);

    // bounded-variation path: value <= eps (T-s) |x0|^2
    Vec x0 = Vec::Zero(8);
    x0[0] = 2.0;
    x0[4] = -1.0;
    std::vector<Vec> bv(257);
    for (int i = 0; i <= 256; ++i) bv[static_cast<std::size_t>(i)] = grid.time(i) * x0;
    const VecPath bvp(grid, std::move(bv));
    for (int p : {32, 8, 1}) {
        const double eps = p * grid.dt();
        const RealPath qv = scalar_qv(bvp, eps);
        CHECK(qv.values.back() <= eps * grid.horizon() * x0.squaredNorm() * (1.0 + 1e-12));
        for (std::size_t i = 1; i < qv.values.size(); ++i)
            CHECK(qv.values[i] >= qv.values[i - 1]);
    }

    // W_Q: median near (t-s) Tr Q
    const int n_paths = 2000;
    std::vector<double> vals(n_paths);
    for (int j = 0; j < n_paths; ++j) {
        const VecPath w =
            sample_q_wiener(space8(), grid, SeedSpec{13, static_cast<std::uint64_t>(j), "qv"});
        vals[j] = scalar_qv(w, 4 * grid.dt()).values.back();
    }
    const double target = grid.horizon() * space8().trace_q();
    CHECK(std::abs(median(vals) - target) < 0.05 * target);
}

TEST_CASE("tensor qv") {
    const TimeGrid grid(0.0, 1.0, 256);
    const double eps = 4 * grid.dt();

    // deterministic constant second factor gives the zero array
    const VecPath w = sample_q_wiener(space8(), grid, SeedSpec{17, 0, "tqv"});
    std::vector<Vec> consts(257, Vec::Ones(8));
    const MatPath zero = tensor_qv(w, VecPath(grid, consts), eps);
    CHECK(zero.values.back().norm() == 0.0);

    // final-value helper agrees with the full path
    const MatPath full = tensor_qv(w, w, eps);
    const Mat fin = tensor_qv_final(w, w, eps);
    CHECK((full.values.back() - fin).norm() <= 1e-12 * fin.norm());

    // diagonal Psi: closed-form target int diag(w_k^2 q_k) dr, ensemble median
    Vec wd(8);
    for (int k = 0; k < 8; ++k) wd[k] = 1.0 + 0.25 * k;
    const int n_paths = 1000;
    std::vector<std::vector<double>> diag_samples(8, std::vector<double>(n_paths));
    for (int j = 0; j < n_paths; ++j) {
        const VecPath wj =
            sample_q_wiener(space8(), grid, SeedSpec{17, static_cast<std::uint64_t>(j), "tqv"});
        std::vector<Vec> mv(257);
        mv[0] = Vec::Zero(8);
        for (int i = 0; i < 256; ++i)
            mv[static_cast<std::size_t>(i) + 1] =
                mv[static_cast<std::size_t>(i)] +
                wd.cwiseProduct(wj.values[static_cast<std::size_t>(i) + 1] -
                                wj.values[static_cast<std::size_t>(i)]);
        const VecPath conv(grid, std::move(mv));
        const Mat qv = tensor_qv_final(conv, conv, eps);
        for (int k = 0; k < 8; ++k) diag_samples[static_cast<std::size_t>(k)][j] = qv(k, k);
    }
    for (int k = 0; k < 8; ++k) {
        const double target = grid.horizon() * wd[k] * wd[k] * space8().q[k];
        CHECK(std::abs(median(diag_samples[static_cast<std::size_t>(k)]) - target) <
              0.10 * target);
    }
}

TEST_CASE("chi covariation") {
    const TimeGrid grid(0.0, 1.0, 256);
    const VecPath x = sample_q_wiener(space8(), grid, SeedSpec{21, 0, "cc"});
    const VecPath y = sample_q_wiener(space8(), grid, SeedSpec{21, 1, "cc"});
    const double eps = 2 * grid.dt();

    // empty functional gives the zero path
    const ChiFunctional empty(space8(), {});
    const RealPath z = chi_covariation(x, y, empty, eps);
    for (double v : z.values) CHECK(v == 0.0);

    // rank-one mode functional reproduces the real covariation of projections
    Vec e1 = Vec::Zero(8);
    e1[0] = 1.0;
    const ChiFunctional phi(space8(), {{e1, e1}});
    const RealPath via_chi = chi_covariation(x, y, phi, eps);
    std::vector<double> px(257), py(257);
    for (int i = 0; i <= 256; ++i) {
        px[static_cast<std::size_t>(i)] = x.values[static_cast<std::size_t>(i)][0];
        py[static_cast<std::size_t>(i)] = y.values[static_cast<std::size_t>(i)][0];
    }
    const RealPath via_real =
        real_covariation(RealPath(grid, px), RealPath(grid, py), eps);
    for (std::size_t i = 0; i < via_chi.values.size(); ++i)
        CHECK(via_chi.values[i] == doctest::Approx(via_real.values[i]).epsilon(1e-12));

    // space mismatch
    const ChiFunctional small(make_dirichlet_space(4), {});
    CHECK_THROWS_AS(chi_covariation(x, y, small, eps), std::invalid_argument);
}

TEST_CASE("estimators are bilinear at the discrete level") {
    const TimeGrid grid(0.0, 1.0, 128);
    const VecPath x1 = sample_q_wiener(space8(), grid, SeedSpec{71, 0, "bil"});
    const VecPath x2 = sample_q_wiener(space8(), grid, SeedSpec{71, 1, "bil"});
    const VecPath y = sample_q_wiener(space8(), grid, SeedSpec{71, 2, "bil"});
    const double eps = 4 * grid.dt();
    const double a = 2.5, b = -1.25;

    std::vector<Vec> mix(129);
    for (int i = 0; i <= 128; ++i)
        mix[static_cast<std::size_t>(i)] = a * x1.values[static_cast<std::size_t>(i)] +
                                           b * x2.values[static_cast<std::size_t>(i)];
    const VecPath xm(grid, std::move(mix));

    // tensor covariation
    const Mat lhs = tensor_qv_final(xm, y, eps);
    const Mat rhs = a * tensor_qv_final(x1, y, eps) + b * tensor_qv_final(x2, y, eps);
    CHECK((lhs - rhs).norm() <= 1e-11 * (1.0 + rhs.norm()));

    // chi covariation against a two-term functional
    Vec u = Vec::Zero(8), v = Vec::Zero(8);
    u[0] = 1.0;
    u[3] = -0.5;
    v[1] = 2.0;
    const ChiFunctional phi(space8(), {{u, v}, {v, u}});
    const double clhs = chi_covariation(xm, y, phi, eps).values.back();
    const double crhs = a * chi_covariation(x1, y, phi, eps).values.back() +
                        b * chi_covariation(x2, y, phi, eps).values.back();
    CHECK(clhs == doctest::Approx(crhs).epsilon(1e-11));

    // forward integral in the integrator slot
    std::vector<Vec> hs(129, u);
    const VecPath cov(grid, hs);
    const double flhs = forward_integral(cov, xm, eps).values.back();
    const double frhs = a * forward_integral(cov, x1, eps).values.back() +
                        b * forward_integral(cov, x2, eps).values.back();
    CHECK(flhs == doctest::Approx(frhs).epsilon(1e-11));
}

TEST_CASE("chi covariation: single-mode bracket of the Q-Wiener process") {
    const TimeGrid grid(0.0, 1.0, 1024);
    Vec e1 = Vec::Zero(8);
    e1[0] = 1.0;
    const ChiFunctional phi(space8(), {{e1, e1}});
    const int n_paths = 2000;
    std::vector<double> vals(n_paths);
    for (int j = 0; j < n_paths; ++j) {
        const VecPath w =
            sample_q_wiener(space8(), grid, SeedSpec{25, static_cast<std::uint64_t>(j), "cc"});
        vals[j] = chi_covariation(w, w, phi, 4 * grid.dt()).values.back();
    }
    const double target = grid.horizon() * space8().q[0];
    CHECK(std::abs(median(vals) - target) < 0.05 * target);
}

TEST_CASE("ladder study: independent brownian motions have zero covariation") {
    const TimeGrid grid(0.0, 1.0, 512);
    const EpsilonLadder ladder({16, 8, 4, 2, 1});
    LadderStudySpec spec;
    spec.name = "real-covariation[independent-bms]";
    spec.scale = grid.horizon();
    spec.target = 0.0;
    spec.estimate = [&](std::uint64_t j, double eps) {
        const RealPath x = sample_real_bm(grid, SeedSpec{201, j, "indep-x"});
        const RealPath y = sample_real_bm(grid, SeedSpec{201, j, "indep-y"});
        return real_covariation(x, y, eps).values.back();
    };
    const ConvergenceReport rep = ladder_study(spec, ladder, grid, EnsembleSpec{2000, 201});
    CHECK(rep.verdict == Verdict::Converges);
    CHECK(rep.limit == 0.0);
    CHECK(std::abs(rep.finest().q50) < 0.05 * grid.horizon());
}

TEST_CASE("h1 diagnostic") {
    const TimeGrid grid(0.0, 1.0, 256);
    const double eps = 4 * grid.dt();

    // constant path: zero
    std::vector<Vec> consts(257, Vec::Ones(8));
    const VecPath c(grid, consts);
    CHECK(h1_diagnostic(space8(), c, c, eps) == 0.0);

    // discrete Cauchy-Schwarz split on every sampled path
    for (int j = 0; j < 20; ++j) {
        const VecPath x =
            sample_q_wiener(space8(), grid, SeedSpec{23, static_cast<std::uint64_t>(j), "h1"});
        const VecPath y = sample_q_wiener(space8(), grid,
                                          SeedSpec{24, static_cast<std::uint64_t>(j), "h1"});
        const double a = h1_diagnostic(space8(), x, y, eps);
        const double dual_qv = dual_norm_scalar_qv_final(space8(), x, eps);
        const double sqv = scalar_qv(y, eps).values.back();
        CHECK(a * a <= dual_qv * sqv * (1.0 + 1e-10));
    }
}
