// Command-line front end: runs one experiment suite against a config, writes
// CSV reports plus a run manifest, and exits 0 only if every criterion of the
// suite passed (1 = criterion failure, 2 = config error).

#include <qvlab/experiments.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

namespace {

int run_one(const std::string& suite, const qvlab::ExperimentConfig& cfg, bool quiet) {
    const auto t0 = std::chrono::steady_clock::now();
    qvlab::SuiteResult result = qvlab::run_suite(suite, cfg);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::filesystem::create_directories(cfg.out_dir);
    for (const auto& table : result.tables)
        qvlab::write_file((std::filesystem::path(cfg.out_dir) / table.filename).string(),
                          table.to_text());

    qvlab::RunManifest manifest;
    manifest.config_hash = cfg.hash();
    manifest.wall_clock_sec = elapsed;
    manifest.criteria = result.criteria;
    qvlab::write_file(
        (std::filesystem::path(cfg.out_dir) / (suite + "_manifest.txt")).string(),
        cfg.canonical_text() + manifest.to_text());

    bool all_pass = true;
    for (const auto& c : result.criteria) {
        if (!quiet) {
            std::printf("[%s] %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                        c.details.c_str());
            if (!c.pass && !c.failing_seeds.empty()) {
                std::printf("       failing path indices:");
                for (std::size_t i = 0; i < c.failing_seeds.size() && i < 16; ++i)
                    std::printf(" %llu", static_cast<unsigned long long>(c.failing_seeds[i]));
                std::printf(c.failing_seeds.size() > 16 ? " ...\n" : "\n");
            }
        }
        all_pass = all_pass && c.pass;
    }
    if (!quiet)
        std::printf("%s: %s (%.1fs), reports in %s/\n", suite.c_str(),
                    all_pass ? "all criteria passed" : "CRITERIA FAILED", elapsed,
                    cfg.out_dir.c_str());
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"regularized stochastic calculus workbench"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> paths_override;
    bool quiet = false;
    app.add_option("--config", config_path, "config file (section.key = value lines)");
    app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    app.add_option("--seed", seed_override, "master seed override");
    app.add_option("--paths", paths_override, "ensemble size override");
    app.add_flag("--quiet", quiet, "suppress per-criterion lines");

    for (const auto& name : qvlab::suite_names()) app.add_subcommand(name);

    CLI11_PARSE(app, argc, argv);

    qvlab::ExperimentConfig cfg;
    try {
        if (!config_path.empty()) cfg = qvlab::load_config(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed_override) cfg.master_seed = *seed_override;
        if (paths_override) cfg.n_paths = *paths_override;
        cfg.validate();
    } catch (const qvlab::ConfigError& e) {
        std::fprintf(stderr, "config error (line %d%s%s): %s\n", e.line,
                     e.key.empty() ? "" : ", key ", e.key.c_str(), e.what());
        return 2;
    }

    try {
        const std::string suite = app.get_subcommands().front()->get_name();
        return run_one(suite, cfg, quiet);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
