#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qvlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Uniform time grid on [s, T]: points t_i = s + i*dt, i = 0..n_steps.
struct TimeGrid {
    double t_start = 0.0;
    double t_end = 1.0;
    int n_steps = 1024;

    TimeGrid() = default;
    TimeGrid(double s, double t, int m) : t_start(s), t_end(t), n_steps(m) {
        if (!(t > s)) throw std::invalid_argument("TimeGrid: t_end must exceed t_start");
        if (m < 1) throw std::invalid_argument("TimeGrid: n_steps must be positive");
    }

    double dt() const { return (t_end - t_start) / n_steps; }
    double horizon() const { return t_end - t_start; }
    double time(int i) const { return t_start + i * dt(); }
    int n_points() const { return n_steps + 1; }

    bool operator==(const TimeGrid& o) const {
        return t_start == o.t_start && t_end == o.t_end && n_steps == o.n_steps;
    }
};

/// Process sampled on a TimeGrid. Values outside [s, T] clamp to the
/// endpoint values; interior evaluation is exact-grid-point only, no
/// interpolation ever happens.
template <class T>
struct GridPath {
    TimeGrid grid;
    std::vector<T> values;  // length n_steps + 1

    GridPath() = default;
    GridPath(const TimeGrid& g, std::vector<T> v) : grid(g), values(std::move(v)) {
        if (static_cast<int>(values.size()) != grid.n_points())
            throw std::invalid_argument("GridPath: need n_steps + 1 values, got " +
                                        std::to_string(values.size()));
    }

    /// Index access under the endpoint-clamp convention; any integer is valid.
    const T& at_clamped(long i) const {
        if (i < 0) i = 0;
        if (i > grid.n_steps) i = grid.n_steps;
        return values[static_cast<std::size_t>(i)];
    }
};

using RealPath = GridPath<double>;
using VecPath = GridPath<Vec>;
using MatPath = GridPath<Mat>;

/// Clamp t to [s, T], then look up the exact grid point. Off-grid interior
/// times are an error.
template <class T>
const T& clamp_eval(const GridPath<T>& path, double t) {
    const TimeGrid& g = path.grid;
    if (t <= g.t_start) return path.values.front();
    if (t >= g.t_end) return path.values.back();
    const double u = (t - g.t_start) / g.dt();
    const double r = std::round(u);
    if (std::abs(u - r) > 1e-9 * std::max(1.0, std::abs(u)))
        throw std::invalid_argument("clamp_eval: t=" + std::to_string(t) +
                                    " is not a grid point and interpolation is not done");
    return path.values[static_cast<std::size_t>(r)];
}

inline void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* where) {
    if (!(a == b)) throw std::invalid_argument(std::string(where) + ": grids differ");
}

}  // namespace qvlab
