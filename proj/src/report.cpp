#include "vmstab/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vmstab/errors.hpp"
#include "vmstab/hash.hpp"

namespace vmstab {

namespace {

// JSON has no infinity; report it as null explicitly.
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

json to_json(const InertiaReport& r) {
    return {{"neg", r.neg},           {"zero", r.zero},         {"pos", r.pos},
            {"zero_tol", r.zero_tol}, {"margin", num(r.margin)}, {"eigenvalues", r.eigenvalues}};
}

json to_json(const HypothesisFlags& h) {
    return {{"a1_kernel_is_constants", {{"holds", h.a1_kernel_constants},
                                        {"min_abs_eigenvalue", h.a1_min_abs_eig},
                                        {"zero_tol", h.a1_zero_tol}}},
            {"l0_nonzero", {{"holds", h.l0_nonzero}, {"l0", h.l0}, {"tol", h.l0_tol}}},
            {"a2_kernel_trivial", {{"holds", h.a2_kernel_trivial},
                                   {"min_abs_eigenvalue", h.a2_min_abs_eig},
                                   {"zero_tol", h.a2_zero_tol}}}};
}

json to_json(const CriterionVerdict& v) {
    return {{"verdict", to_string(v.verdict)},
            {"reason", v.reason},
            {"lhs", v.lhs},
            {"rhs", v.rhs},
            {"neg_minus_l0", v.neg_minus_l0},
            {"hypotheses", to_json(v.hypotheses)},
            {"K1", to_json(v.K1)},
            {"A1", to_json(v.A1)},
            {"A2", to_json(v.A2)}};
}

json to_json(const EquilibriumResidual& r) {
    return {{"poisson_sup", r.poisson},
            {"ampere_sup", r.ampere},
            {"neutrality_rho", r.neutrality_rho},
            {"neutrality_j2", r.neutrality_j2}};
}

json to_json(const OrbitBankStats& s) {
    return {{"closed", s.closed},       {"window", s.window},           {"stationary", s.stationary},
            {"free", s.free},           {"max_steps", s.max_steps},     {"max_samples", s.max_samples},
            {"max_period", s.max_period}, {"max_spectral_tail", s.max_spectral_tail}};
}

json to_json(const ScanResult& s) {
    json rows = json::array();
    for (const auto& r : s.rows)
        rows.push_back({{"lambda", r.lambda}, {"neg", r.neg}, {"zero", r.zero}, {"pos", r.pos},
                        {"margin", num(r.margin)}, {"tracked_eigenvalue", r.tracked}});
    json br = json::array();
    for (auto [a, b] : s.brackets)
        br.push_back({{"lambda_lo", s.rows[a].lambda}, {"lambda_hi", s.rows[b].lambda},
                      {"neg_lo", s.rows[a].neg}, {"neg_hi", s.rows[b].neg}});
    json pc = json::array();
    for (auto [l, n] : s.plateau_checks) pc.push_back({{"lambda", l}, {"neg", n}});
    return {{"lambda_max", s.lambda_max}, {"plateau", s.plateau}, {"rows", rows}, {"brackets", br},
            {"plateau_checks", pc}};
}

json to_json(const Crossing& c) {
    return {{"lambda", c.lambda},         {"margin", c.margin},         {"bracket_lo", c.bracket_lo},
            {"bracket_hi", c.bracket_hi}, {"neg_lo", c.neg_lo},         {"neg_hi", c.neg_hi},
            {"iterations", c.iterations}, {"trivial_overlap", c.trivial_overlap}};
}

json to_json(const NHistoryRow& r) {
    return {{"n", r.n},           {"rank_phi", r.rank_phi}, {"rank_psi", r.rank_psi}, {"lambda_n", r.lambda_n},
            {"cauchy", r.cauchy}, {"margin", r.margin},     {"crossings", r.crossings}};
}

json to_json(const ModeResiduals& r) {
    return {{"poisson", r.poisson}, {"ampere", r.ampere}, {"current", r.current}, {"vlasov", r.vlasov}};
}

json to_json(const TruncationSweep& s) {
    json rows = json::array();
    for (const auto& r : s.rows)
        rows.push_back({{"n", r.n}, {"rank_phi", r.rank_phi}, {"rank_psi", r.rank_psi}, {"neg_A1", r.neg_A1},
                        {"neg_K1", r.neg_K1}, {"zero_K1", r.zero_K1}});
    return {{"N1", s.N1}, {"rows", rows}};
}

json operator_diagnostics(const OperatorSet& ops) {
    return {{"lambda", ops.lambda},
            {"M", ops.M},
            {"l", ops.l},
            {"asymmetry_A1", ops.asym_A1},
            {"asymmetry_A2", ops.asym_A2},
            {"projection_disagreement", ops.projection_disagreement},
            {"B_norm", ops.B_full.norm()},
            {"B_range_mean", ops.b_range_mean},
            {"A1_constant_row_defect", ops.a1_constant_row_defect},
            {"C_norm", ops.C.norm()},
            {"D_norm", ops.D.norm()}};
}

json resolved_settings(const RunConfig& c, double v_max, double c_weight) {
    json nl = c.n_list;
    return {{"family", c.family},
            {"params", c.params},
            {"period", c.period},
            {"alpha", c.alpha},
            {"c_weight", c_weight},
            {"n0", c.n0},
            {"nx", c.nx},
            {"nv", c.nv},
            {"v_panels", c.v_panels},
            {"M", c.M},
            {"v_max", v_max},
            {"equilibrium_method", c.solve ? c.eq.method : std::string("none")},
            {"n_list", nl},
            {"kinetic",
             {{"rtol", c.kinetic.orbit.step.rtol},
              {"atol", c.kinetic.orbit.step.atol},
              {"T_cap", c.kinetic.orbit.T_cap},
              {"nq_min", c.kinetic.orbit.nq_min},
              {"nq_max", c.kinetic.orbit.nq_max},
              {"spectral_tol", c.kinetic.orbit.spectral_tol},
              {"lambda_proj", c.kinetic.lambda_proj},
              {"proj_tol", c.kinetic.proj_tol}}},
            {"tolerances",
             {{"asym_tol", c.ops.asym_tol},
              {"zero_tol_rel", c.criterion.zero_tol_rel},
              {"l0_tol", c.criterion.l0_tol},
              {"singular_tol", c.criterion.singular_tol},
              {"eig_tol", c.scan.eig_tol}}}};
}

json report_header(const std::string& command, const RunConfig& c) {
    return {{"schema", "vmstab-report"},
            {"schema_version", kSchemaVersion},
            {"command", command},
            {"config_file", std::filesystem::path(c.path).filename().string()},
            {"config_hash", hex64(c.hash)}};
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + path);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns)
    : path_(path), ncol_(columns.size()) {
    f_ = std::fopen(path.c_str(), "wb");
    if (!f_) throw Error(ErrorKind::IoError, "cannot write " + path);
    for (std::size_t i = 0; i < columns.size(); ++i) std::fprintf(f_, "%s%s", i ? "," : "", columns[i].c_str());
    std::fputc('\n', f_);
}

CsvWriter::~CsvWriter() {
    if (f_) std::fclose(f_);
}

CsvWriter& CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != ncol_) throw Error(ErrorKind::DimensionMismatch, "CSV row width for " + path_);
    for (std::size_t i = 0; i < values.size(); ++i) std::fprintf(f_, "%s%.17g", i ? "," : "", values[i]);
    std::fputc('\n', f_);
    return *this;
}

}  // namespace vmstab
