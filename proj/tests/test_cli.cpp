#include <qvlab/experiments.hpp>

#include <doctest.h>

using namespace qvlab;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.n_modes = 4;
    cfg.n_steps = 64;
    cfg.ladder_multiples = {8, 4, 2, 1};
    cfg.n_paths = 16;
    cfg.master_seed = 4242;
    return cfg;
}

std::string serialize_tables(const SuiteResult& r) {
    std::string out;
    for (const auto& t : r.tables) out += t.filename + "\n" + t.to_text();
    return out;
}

}  // namespace

TEST_CASE("config parsing") {
    const std::string text =
        "# model section\n"
        "model.n_modes = 6\n"
        "model.lambda_rule = dirichlet\n"
        "model.q_rule = inverse-square\n"
        "model.t_start = 0\n"
        "model.t_end = 2\n"
        "model.n_steps = 128\n"
        "ladder.multiples = 16, 8, 4, 2, 1\n"
        "ensemble.n_paths = 100\n"
        "ensemble.master_seed = 999\n"
        "experiment.name = smoke\n"
        "output.dir = out-smoke\n";
    const ExperimentConfig cfg = parse_config_text(text);
    CHECK(cfg.n_modes == 6);
    CHECK(cfg.t_end == 2.0);
    CHECK(cfg.ladder_multiples == std::vector<int>({16, 8, 4, 2, 1}));
    CHECK(cfg.n_paths == 100);
    CHECK(cfg.master_seed == 999);
    CHECK(cfg.name == "smoke");

    // every epsilon is an integer multiple of dt by construction
    const TimeGrid grid = cfg.grid();
    for (int m : cfg.ladder_multiples) CHECK(epsilon_steps(grid, m * grid.dt()) == m);
}

TEST_CASE("config rejects unknown keys with line diagnostics") {
    try {
        parse_config_text("model.n_modes = 4\nmodel.n_mode = 4\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.line == 2);
        CHECK(e.key == "model.n_mode");
    }

    CHECK_THROWS_AS(parse_config_text("model.n_modes = four\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("model.n_modes\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("ladder.multiples = 4, 8\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("ensemble.n_paths = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("model.t_end = -1\n"), ConfigError);
}

TEST_CASE("config hash is stable and echoes every field") {
    const ExperimentConfig a = tiny_config();
    ExperimentConfig b = tiny_config();
    CHECK(a.hash() == b.hash());
    b.out_dir = "elsewhere";  // output location is not part of the experiment identity
    CHECK(a.hash() == b.hash());
    b.master_seed += 1;
    CHECK(a.hash() != b.hash());

    const std::string canon = a.canonical_text();
    for (const char* key :
         {"model.n_modes", "model.lambda_rule", "model.q_rule", "model.t_start", "model.t_end",
          "model.n_steps", "ladder.multiples", "ensemble.n_paths", "ensemble.master_seed",
          "experiment.name", "output.dir"})
        CHECK(canon.find(key) != std::string::npos);

    // canonical text round-trips through the parser
    const ExperimentConfig c = parse_config_text(canon);
    CHECK(c.hash() == a.hash());
}

TEST_CASE("csv tables start with a header row") {
    CsvTable t;
    t.filename = "x.csv";
    t.columns = {"a", "b"};
    t.add_row({"1", "2"});
    CHECK(t.to_text().substr(0, 4) == "a,b\n");
    CHECK_THROWS_AS(t.add_row({"only-one"}), std::invalid_argument);
}

TEST_CASE("suite dispatch") {
    CHECK_THROWS_AS(run_suite("not-a-suite", tiny_config()), std::invalid_argument);
    CHECK(suite_names().size() == 6);
}

TEST_CASE("reruns with an identical config produce identical bytes") {
    const ExperimentConfig cfg = tiny_config();
    const SuiteResult a = run_qv(cfg);
    const SuiteResult b = run_qv(cfg);
    CHECK(serialize_tables(a) == serialize_tables(b));

    const SuiteResult c = run_norms_selftest(cfg);
    const SuiteResult d = run_norms_selftest(cfg);
    CHECK(serialize_tables(c) == serialize_tables(d));
}

TEST_CASE("norms selftest passes on the tiny config") {
    const SuiteResult r = run_norms_selftest(tiny_config());
    for (const auto& c : r.criteria) {
        INFO(c.name, ": ", c.details);
        CHECK(c.pass);
    }
    REQUIRE(!r.tables.empty());
    CHECK(r.tables[0].filename == "norms.csv");
    CHECK(!r.tables[0].rows.empty());
}

TEST_CASE("manifest format") {
    RunManifest m;
    m.config_hash = "deadbeef";
    m.wall_clock_sec = 1.25;
    m.criteria.push_back({"alpha", true, "fine", {}});
    m.criteria.push_back({"beta", false, "broke", {3, 5}});
    const std::string text = m.to_text();
    CHECK(text.find("config_hash = deadbeef") != std::string::npos);
    CHECK(text.find("criterion alpha = PASS") != std::string::npos);
    CHECK(text.find("criterion beta = FAIL") != std::string::npos);
    CHECK(text.find("failing_seeds=3,5") != std::string::npos);
}
