#pragma once

#include <qvlab/ladder.hpp>
#include <qvlab/spaces.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qvlab {

inline constexpr const char* kVersion = "0.1.0";

/// Parsed `section.key = value` experiment configuration. Unknown keys are
/// rejected so typos surface immediately; every field is echoed into the run
/// manifest through the canonical text.
struct ExperimentConfig {
    // model
    int n_modes = 8;
    std::string lambda_rule = "dirichlet";
    std::string q_rule = "inverse-square";
    double t_start = 0.0;
    double t_end = 1.0;
    int n_steps = 1024;  // dt = (t_end - t_start) / n_steps = 2^-10 by default
    // ladder
    std::vector<int> ladder_multiples = {32, 16, 8, 4, 2, 1};
    // ensemble
    int n_paths = 10000;
    std::uint64_t master_seed = 123456789;
    // experiment
    std::string name = "default";
    std::string out_dir = "out";

    TimeGrid grid() const { return TimeGrid(t_start, t_end, n_steps); }
    TruncatedSpace space() const { return make_space(n_modes, lambda_rule, q_rule); }
    EpsilonLadder ladder() const { return EpsilonLadder(ladder_multiples); }
    EnsembleSpec ensemble() const { return EnsembleSpec{n_paths, master_seed}; }

    /// Stable serialization (alphabetical keys) used for hashing and echoing.
    std::string canonical_text() const;
    /// FNV-1a of canonical_text(), 16 hex digits.
    std::string hash() const;

    void validate() const;  // throws ConfigError
};

struct ConfigError : std::runtime_error {
    int line;  // 0 when not tied to a specific line
    std::string key;
    ConfigError(int ln, std::string k, const std::string& msg)
        : std::runtime_error(msg), line(ln), key(std::move(k)) {}
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// --- reporting ---------------------------------------------------------------

/// %.17g: doubles round-trip exactly, so identical runs give identical bytes.
std::string format_double(double x);

struct CsvTable {
    std::string filename;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
    std::string to_text() const;  // header line + rows
};

CsvTable report_to_csv(const ConvergenceReport& report, const std::string& filename);

struct CriterionResult {
    std::string name;
    bool pass = false;
    std::string details;
    std::vector<std::uint64_t> failing_seeds;
};

struct RunManifest {
    std::string config_hash;
    std::string version = kVersion;
    double wall_clock_sec = 0.0;  // excluded from reproducibility comparisons
    std::vector<CriterionResult> criteria;

    std::string to_text() const;
};

void write_file(const std::string& path, const std::string& text);

}  // namespace qvlab
