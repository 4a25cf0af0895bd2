#include <qvlab/config.hpp>
#include <qvlab/noise.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace qvlab {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<int> parse_int_list(const std::string& s, int line, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError(line, key, "empty entry in integer list");
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError(line, key, "'" + item + "' is not an integer");
        }
    }
    if (out.empty()) throw ConfigError(line, key, "empty list");
    return out;
}

double parse_double(const std::string& s, int line, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(line, key, "'" + s + "' is not a number");
    }
}

int parse_int(const std::string& s, int line, const std::string& key) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(line, key, "'" + s + "' is not an integer");
    }
}

std::uint64_t parse_u64(const std::string& s, int line, const std::string& key) {
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(line, key, "'" + s + "' is not a 64-bit unsigned integer");
    }
}

}  // namespace

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string ExperimentConfig::canonical_text() const {
    std::ostringstream os;
    os << "ensemble.master_seed = " << master_seed << "\n";
    os << "ensemble.n_paths = " << n_paths << "\n";
    os << "experiment.name = " << name << "\n";
    os << "ladder.multiples = ";
    for (std::size_t i = 0; i < ladder_multiples.size(); ++i)
        os << (i ? "," : "") << ladder_multiples[i];
    os << "\n";
    os << "model.lambda_rule = " << lambda_rule << "\n";
    os << "model.n_modes = " << n_modes << "\n";
    os << "model.n_steps = " << n_steps << "\n";
    os << "model.q_rule = " << q_rule << "\n";
    os << "model.t_end = " << format_double(t_end) << "\n";
    os << "model.t_start = " << format_double(t_start) << "\n";
    os << "output.dir = " << out_dir << "\n";
    return os.str();
}

std::string ExperimentConfig::hash() const {
    // identifies the experiment: everything except where the output lands
    std::string text = canonical_text();
    const auto pos = text.find("output.dir = ");
    if (pos != std::string::npos) text.erase(pos, text.find('\n', pos) - pos + 1);
    const std::uint64_t h = fnv1a64(text);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void ExperimentConfig::validate() const {
    if (n_modes < 1) throw ConfigError(0, "model.n_modes", "must be >= 1");
    if (n_steps < 1) throw ConfigError(0, "model.n_steps", "must be >= 1");
    if (!(t_end > t_start)) throw ConfigError(0, "model.t_end", "must exceed model.t_start");
    if (n_paths < 1) throw ConfigError(0, "ensemble.n_paths", "must be >= 1");
    try {
        EpsilonLadder check(ladder_multiples);
    } catch (const std::exception& e) {
        throw ConfigError(0, "ladder.multiples", e.what());
    }
    try {
        TruncatedSpace sp = make_space(n_modes, lambda_rule, q_rule);
        (void)sp;
    } catch (const std::exception& e) {
        throw ConfigError(0, "model.lambda_rule", e.what());
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(ss, raw)) {
        ++line_no;
        const auto hash_pos = raw.find('#');
        std::string line = trim(hash_pos == std::string::npos ? raw : raw.substr(0, hash_pos));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(line_no, "", "expected 'section.key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(line_no, "", "missing key before '='");
        if (value.empty()) throw ConfigError(line_no, key, "missing value");

        if (key == "model.n_modes") cfg.n_modes = parse_int(value, line_no, key);
        else if (key == "model.lambda_rule") cfg.lambda_rule = value;
        else if (key == "model.q_rule") cfg.q_rule = value;
        else if (key == "model.t_start") cfg.t_start = parse_double(value, line_no, key);
        else if (key == "model.t_end") cfg.t_end = parse_double(value, line_no, key);
        else if (key == "model.n_steps") cfg.n_steps = parse_int(value, line_no, key);
        else if (key == "ladder.multiples") cfg.ladder_multiples = parse_int_list(value, line_no, key);
        else if (key == "ensemble.n_paths") cfg.n_paths = parse_int(value, line_no, key);
        else if (key == "ensemble.master_seed") cfg.master_seed = parse_u64(value, line_no, key);
        else if (key == "experiment.name") cfg.name = value;
        else if (key == "output.dir") cfg.out_dir = value;
        else throw ConfigError(line_no, key, "unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "", "cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void CsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != columns.size())
        throw std::invalid_argument("CsvTable: row width mismatch in " + filename);
    rows.push_back(std::move(row));
}

std::string CsvTable::to_text() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << "\n";
    }
    return os.str();
}

CsvTable report_to_csv(const ConvergenceReport& report, const std::string& filename) {
    CsvTable t;
    t.filename = filename;
    t.columns = {"estimator", "epsilon", "t", "q05", "q50", "q95", "n_paths", "verdict"};
    for (const auto& row : report.rows)
        t.add_row({report.estimator, format_double(row.epsilon), format_double(row.t),
                   format_double(row.q05), format_double(row.q50), format_double(row.q95),
                   std::to_string(row.n_paths), to_string(report.verdict)});
    return t;
}

std::string RunManifest::to_text() const {
    std::ostringstream os;
    os << "config_hash = " << config_hash << "\n";
    os << "artifact_version = " << version << "\n";
    os << "wall_clock_sec = " << format_double(wall_clock_sec) << "\n";
    for (const auto& c : criteria) {
        os << "criterion " << c.name << " = " << (c.pass ? "PASS" : "FAIL");
        if (!c.details.empty()) os << " (" << c.details << ")";
        if (!c.failing_seeds.empty()) {
            os << " failing_seeds=";
            for (std::size_t i = 0; i < c.failing_seeds.size() && i < 16; ++i)
                os << (i ? "," : "") << c.failing_seeds[i];
            if (c.failing_seeds.size() > 16) os << ",...";
        }
        os << "\n";
    }
    return os.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

}  // namespace qvlab
