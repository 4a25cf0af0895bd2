#include <qvlab/noise.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace qvlab;

namespace {

// Kolmogorov-Smirnov p-value (asymptotic series with the usual small-sample
// correction of the effective sqrt(n)).
double ks_p_value(std::vector<double> standardized) {
    std::sort(standardized.begin(), standardized.end());
    const double n = static_cast<double>(standardized.size());
    double d = 0.0;
    for (std::size_t i = 0; i < standardized.size(); ++i) {
        const double cdf = 0.5 * std::erfc(-standardized[i] / std::sqrt(2.0));
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d = std::max({d, std::abs(cdf - lo), std::abs(cdf - hi)});
    }
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    double p = 0.0;
    for (int j = 1; j <= 100; ++j)
        p += 2.0 * (j % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST_CASE("q-wiener basics") {
    const TruncatedSpace space = make_dirichlet_space(8);
    const TimeGrid grid(0.0, 1.0, 64);
    const SeedSpec seed{2024, 0, "q-wiener"};

    const VecPath w = sample_q_wiener(space, grid, seed);
    CHECK(w.values.size() == 65);
    CHECK(w.values[0].norm() == 0.0);  // W(s) = 0 exactly

    // identical spec => bitwise identical draws
    const VecPath w2 = sample_q_wiener(space, grid, seed);
    for (std::size_t i = 0; i < w.values.size(); ++i)
        CHECK((w.values[i] - w2.values[i]).norm() == 0.0);

    // different path index => different path
    const VecPath w3 = sample_q_wiener(space, grid, seed.with_path(1));
    CHECK((w.values.back() - w3.values.back()).norm() > 0.0);

    // a larger truncation extends the same path mode-by-mode
    const TruncatedSpace big = make_dirichlet_space(16);
    const VecPath wb = sample_q_wiener(big, grid, seed);
    for (std::size_t i = 0; i < w.values.size(); ++i)
        CHECK((wb.values[i].head(8) - w.values[i]).norm() == 0.0);

    // the purpose tag separates streams
    const VecPath w4 = sample_q_wiener(space, grid, SeedSpec{2024, 0, "other-purpose"});
    CHECK((w.values.back() - w4.values.back()).norm() > 0.0);
}

TEST_CASE("q-wiener moments") {
    const TruncatedSpace space = make_dirichlet_space(8);
    const TimeGrid grid(0.0, 1.0, 64);
    const int n_paths = 10000;

    double mean_sq = 0.0;
    std::vector<double> sq(n_paths);
    for (int j = 0; j < n_paths; ++j) {
        const VecPath w =
            sample_q_wiener(space, grid, SeedSpec{11, static_cast<std::uint64_t>(j), "mom"});
        sq[j] = w.values.back().squaredNorm();
        mean_sq += sq[j];
    }
    mean_sq /= n_paths;
    double var = 0.0;
    for (double v : sq) var += (v - mean_sq) * (v - mean_sq);
    var /= (n_paths - 1);
    const double se = std::sqrt(var / n_paths);
    const double target = grid.horizon() * space.trace_q();
    CHECK(std::abs(mean_sq - target) <= 3.0 * se);
}

TEST_CASE("q-wiener mode marginals pass a KS test") {
    const TruncatedSpace space = make_dirichlet_space(8);
    const TimeGrid grid(0.0, 1.0, 16);
    const int n_paths = 10000;
    for (int mode : {0, 3, 7}) {
        std::vector<double> xs(n_paths);
        const double sd = std::sqrt(space.q[mode] * grid.horizon());
        for (int j = 0; j < n_paths; ++j) {
            const VecPath w =
                sample_q_wiener(space, grid, SeedSpec{31, static_cast<std::uint64_t>(j), "ks"});
            xs[j] = w.values.back()[mode] / sd;
        }
        CHECK(ks_p_value(std::move(xs)) > 0.001);
    }
}

TEST_CASE("real brownian motion") {
    const TimeGrid grid(0.0, 2.0, 128);
    const RealPath b = sample_real_bm(grid, SeedSpec{5, 0, "bm"});
    CHECK(b.values[0] == 0.0);

    const int n_paths = 10000;
    double mean_sq = 0.0, mean_cross = 0.0;
    std::vector<double> sq(n_paths), cross(n_paths);
    for (int j = 0; j < n_paths; ++j) {
        const RealPath p = sample_real_bm(grid, SeedSpec{5, static_cast<std::uint64_t>(j), "bm"});
        sq[j] = p.values.back() * p.values.back();
        // increments over the two disjoint halves
        const double d1 = p.values[64] - p.values[0];
        const double d2 = p.values[128] - p.values[64];
        cross[j] = d1 * d2;
        mean_sq += sq[j];
        mean_cross += cross[j];
    }
    mean_sq /= n_paths;
    mean_cross /= n_paths;
    auto se_of = [&](const std::vector<double>& xs, double mean) {
        double var = 0.0;
        for (double v : xs) var += (v - mean) * (v - mean);
        return std::sqrt(var / (n_paths - 1.0) / n_paths);
    };
    CHECK(std::abs(mean_sq - grid.horizon()) <= 3.0 * se_of(sq, mean_sq));
    CHECK(std::abs(mean_cross) <= 3.0 * se_of(cross, mean_cross));
}

TEST_CASE("clamp convention") {
    const TimeGrid grid(0.0, 1.0, 4);
    std::vector<double> vals = {0.0, 1.0, 2.0, 3.0, 4.0};
    const RealPath p(grid, vals);

    CHECK(clamp_eval(p, 1.5) == 4.0);   // t > T -> values[M]
    CHECK(clamp_eval(p, -1.0) == 0.0);  // t < s -> values[0]
    CHECK(clamp_eval(p, 0.5) == 2.0);   // exact grid point
    CHECK_THROWS_AS(clamp_eval(p, 0.3), std::invalid_argument);  // off-grid interior

    CHECK(p.at_clamped(-3) == 0.0);
    CHECK(p.at_clamped(9) == 4.0);
}

TEST_CASE("grid and path validation") {
    CHECK_THROWS_AS(TimeGrid(1.0, 1.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid(0.0, 1.0, 0), std::invalid_argument);
    const TimeGrid grid(0.0, 1.0, 4);
    CHECK_THROWS_AS(RealPath(grid, std::vector<double>(3, 0.0)), std::invalid_argument);
    CHECK(grid.dt() == doctest::Approx(0.25));
}
