#pragma once

#include <qvlab/regularization.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace qvlab {

enum class Verdict { Converges, Diverges, Inconclusive };

const char* to_string(Verdict v);

struct LadderRow {
    double epsilon = 0.0;
    double t = 0.0;
    double q05 = 0.0, q50 = 0.0, q95 = 0.0;
    int n_paths = 0;
};

/// Ensemble quantiles of an estimator across the epsilon ladder plus a
/// verdict computed by the documented rule below -- nothing else feeds it.
///
/// Verdict rule, with medians m_1..m_L (coarse to fine) and tol = rel_tol * scale:
///   CONVERGES  iff |m_L - m_{L-1}| <= tol and |m_{L-1} - m_{L-2}| <= tol,
///              and, when a target limit is declared, |m_L - target| <= tol.
///              The reported limit is the target when declared, else m_L.
///   DIVERGES   iff |m_i| increases strictly along the whole ladder and
///              |m_L| > scale.
///   INCONCLUSIVE otherwise.
/// The finest-rung dispersion q95 - q05 is recorded for inspection; it does
/// not gate the verdict.
struct ConvergenceReport {
    std::string estimator;
    std::vector<LadderRow> rows;
    Verdict verdict = Verdict::Inconclusive;
    double limit = 0.0;
    std::optional<double> target;
    double scale = 1.0;
    double rel_tol = 0.05;
    double finest_dispersion = 0.0;  // q95 - q05 at the smallest epsilon
    std::string note;

    const LadderRow& finest() const { return rows.back(); }
};

/// One estimator evaluated per (path, epsilon); returns its value at t = T
/// (or a sup-over-grid deviation -- whatever the study measures).
struct LadderStudySpec {
    std::string name;
    std::function<double(std::uint64_t path_index, double epsilon)> estimate;
    double scale = 1.0;                  // natural magnitude of the estimator
    double rel_tol = 0.05;
    std::optional<double> target;        // declared limit, when known
    double probe_time = 0.0;             // recorded in the t column
};

struct EnsembleSpec {
    int n_paths = 10000;
    std::uint64_t master_seed = 0;
};

/// Exact order statistics (sorted sample, linear interpolation at rank
/// q*(n-1)); deterministic for a fixed ensemble.
double quantile(std::vector<double> sorted_or_not, double q);

/// Apply the documented verdict rule to medians ordered coarse-to-fine,
/// using report.scale, report.rel_tol and report.target.
void finalize_verdict(ConvergenceReport& report, const std::vector<double>& medians);

ConvergenceReport ladder_study(const LadderStudySpec& spec, const EpsilonLadder& ladder,
                               const TimeGrid& grid, const EnsembleSpec& ensemble);

}  // namespace qvlab
