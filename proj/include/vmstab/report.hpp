#pragma once

#include <json.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "vmstab/analysis.hpp"
#include "vmstab/config.hpp"
#include "vmstab/equilibrium.hpp"

namespace vmstab {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

json to_json(const InertiaReport& r);
json to_json(const HypothesisFlags& h);
json to_json(const CriterionVerdict& v);
json to_json(const EquilibriumResidual& r);
json to_json(const OrbitBankStats& s);
json to_json(const ScanResult& s);
json to_json(const Crossing& c);
json to_json(const NHistoryRow& r);
json to_json(const ModeResiduals& r);
json to_json(const TruncationSweep& s);
json operator_diagnostics(const OperatorSet& ops);
json resolved_settings(const RunConfig& c, double v_max, double c_weight);

// Header common to every report.
json report_header(const std::string& command, const RunConfig& c);

void write_json(const std::string& path, const json& j);

// Plain CSV with a header row; values printed with round-trip precision.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;
    CsvWriter& row(const std::vector<double>& values);

private:
    std::string path_;
    std::size_t ncol_;
    std::FILE* f_ = nullptr;
};

}  // namespace vmstab
