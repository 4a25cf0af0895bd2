#include <qvlab/ladder.hpp>
#include <qvlab/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qvlab {

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Converges: return "CONVERGES";
        case Verdict::Diverges: return "DIVERGES";
        default: return "INCONCLUSIVE";
    }
}

double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
    std::sort(xs.begin(), xs.end());
    const double pos = q * (xs.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - lo;
    return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

void finalize_verdict(ConvergenceReport& report, const std::vector<double>& medians) {
    if (medians.size() < 3)
        throw std::invalid_argument("finalize_verdict: need at least three rungs");
    const double tol = report.rel_tol * report.scale;
    const std::size_t last = medians.size() - 1;
    const bool cauchy = std::abs(medians[last] - medians[last - 1]) <= tol &&
                        std::abs(medians[last - 1] - medians[last - 2]) <= tol;
    const bool on_target = !report.target || std::abs(medians[last] - *report.target) <= tol;
    bool strictly_growing = true;
    for (std::size_t i = 1; i < medians.size(); ++i)
        strictly_growing = strictly_growing && std::abs(medians[i]) > std::abs(medians[i - 1]);

    if (cauchy && on_target) {
        report.verdict = Verdict::Converges;
        report.limit = report.target ? *report.target : medians[last];
    } else if (strictly_growing && std::abs(medians[last]) > report.scale) {
        report.verdict = Verdict::Diverges;
        report.limit = medians[last];
    } else {
        report.verdict = Verdict::Inconclusive;
        report.limit = medians[last];
    }
}

ConvergenceReport ladder_study(const LadderStudySpec& spec, const EpsilonLadder& ladder,
                               const TimeGrid& grid, const EnsembleSpec& ensemble) {
    if (ladder.size() < 3)
        throw std::invalid_argument("ladder_study: need at least three rungs for a verdict");
    ConvergenceReport report;
    report.estimator = spec.name;
    report.scale = spec.scale;
    report.rel_tol = spec.rel_tol;
    report.target = spec.target;

    const std::size_t n = static_cast<std::size_t>(ensemble.n_paths);
    std::vector<double> medians(ladder.multiples.size());
    for (int e = 0; e < ladder.size(); ++e) {
        const double eps = ladder.epsilon(grid, e);
        std::vector<double> sample(n);
        parallel_for(n, [&](std::uint64_t j) { sample[j] = spec.estimate(j, eps); });
        LadderRow row;
        row.epsilon = eps;
        row.t = spec.probe_time != 0.0 ? spec.probe_time : grid.t_end;
        row.q05 = quantile(sample, 0.05);
        row.q50 = quantile(sample, 0.50);
        row.q95 = quantile(sample, 0.95);
        row.n_paths = ensemble.n_paths;
        report.rows.push_back(row);
        medians[static_cast<std::size_t>(e)] = row.q50;
    }
    report.finest_dispersion = report.rows.back().q95 - report.rows.back().q05;
    finalize_verdict(report, medians);
    return report;
}

}  // namespace qvlab
