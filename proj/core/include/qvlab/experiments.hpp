#pragma once

#include <qvlab/config.hpp>
#include <qvlab/control.hpp>

namespace qvlab {

/// Output of one experiment suite: CSV tables plus pass/fail criteria. The
/// CLI serializes tables and derives its exit status from the criteria; the
/// acceptance runner maps them onto its checklist.
struct SuiteResult {
    std::string suite;
    std::vector<CsvTable> tables;
    std::vector<CriterionResult> criteria;

    bool all_pass() const {
        for (const auto& c : criteria)
            if (!c.pass) return false;
        return true;
    }
};

SuiteResult run_norms_selftest(const ExperimentConfig& cfg);
SuiteResult run_integrals(const ExperimentConfig& cfg);
SuiteResult run_qv(const ExperimentConfig& cfg);
SuiteResult run_mild(const ExperimentConfig& cfg);
SuiteResult run_ito_check(const ExperimentConfig& cfg);
SuiteResult run_control(const ExperimentConfig& cfg);

/// Dispatch by subcommand name; throws std::invalid_argument for unknown names.
SuiteResult run_suite(const std::string& name, const ExperimentConfig& cfg);
const std::vector<std::string>& suite_names();

}  // namespace qvlab
