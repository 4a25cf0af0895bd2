#include <qvlab/noise.hpp>

#include <cmath>
#include <numbers>

namespace qvlab {

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {
std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}
}  // namespace

GaussianStream::GaussianStream(const SeedSpec& spec, std::uint64_t substream) {
    std::uint64_t key = spec.master_seed;
    std::uint64_t mix = splitmix64(key) ^ fnv1a64(spec.purpose);
    key = mix;
    mix = splitmix64(key) ^ spec.path_index;
    key = mix;
    mix = splitmix64(key) ^ substream;
    key = mix;
    std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                      static_cast<std::uint32_t>(splitmix64(key)),
                      static_cast<std::uint32_t>(splitmix64(key))};
    eng_.seed(seq);
}

double GaussianStream::next() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // uniforms in (0,1]; u1 > 0 guards the log
    double u1, u2;
    do {
        u1 = (eng_() >> 11) * 0x1.0p-53;
    } while (u1 <= 0.0);
    u2 = (eng_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

VecPath sample_q_wiener(const TruncatedSpace& space, const TimeGrid& grid,
                        const SeedSpec& seed) {
    const int n = space.n_modes();
    const int m = grid.n_steps;
    const double dt = grid.dt();
    std::vector<Vec> values(static_cast<std::size_t>(m) + 1, Vec::Zero(n));
    for (int k = 0; k < n; ++k) {
        GaussianStream g(seed, static_cast<std::uint64_t>(k));
        const double sd = std::sqrt(space.q[k] * dt);
        double w = 0.0;
        for (int i = 1; i <= m; ++i) {
            w += sd * g.next();
            values[static_cast<std::size_t>(i)][k] = w;
        }
    }
    return VecPath(grid, std::move(values));
}

RealPath sample_real_bm(const TimeGrid& grid, const SeedSpec& seed) {
    const int m = grid.n_steps;
    const double sd = std::sqrt(grid.dt());
    GaussianStream g(seed, 0);
    std::vector<double> values(static_cast<std::size_t>(m) + 1, 0.0);
    for (int i = 1; i <= m; ++i) values[static_cast<std::size_t>(i)] = values[i - 1] + sd * g.next();
    return RealPath(grid, std::move(values));
}

}  // namespace qvlab
