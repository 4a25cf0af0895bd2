#pragma once

#include <qvlab/grid.hpp>
#include <qvlab/spaces.hpp>

#include <cstdint>
#include <random>
#include <string>

namespace qvlab {

/// Addresses one reproducible random stream. Identical spec => identical
/// draws; distinct (master_seed, purpose, path_index) => disjoint streams.
struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t path_index = 0;
    std::string purpose;  // e.g. "q-wiener", "real-bm", "policy-starts"

    SeedSpec with_path(std::uint64_t idx) const { return {master_seed, idx, purpose}; }
};

std::uint64_t fnv1a64(const std::string& s);

/// Standard normal draws from a mt19937_64 keyed by (seed spec, substream).
/// Box-Muller is hand-rolled so the draws do not depend on the standard
/// library's normal_distribution implementation.
class GaussianStream {
  public:
    GaussianStream(const SeedSpec& spec, std::uint64_t substream);
    double next();

  private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Q-Wiener path on the grid: W(t_0) = 0, mode-k increments independent
/// N(0, q_k dt). Mode k draws from substream k, so a path in an N-mode space
/// extends the same path in any smaller truncation.
VecPath sample_q_wiener(const TruncatedSpace& space, const TimeGrid& grid,
                        const SeedSpec& seed);

/// Standard real Brownian motion: B(t_0) = 0, increment variance dt.
RealPath sample_real_bm(const TimeGrid& grid, const SeedSpec& seed);

}  // namespace qvlab
