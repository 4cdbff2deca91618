#include "vmstab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <filesystem>
#include <ostream>
#include <random>

#include "vmstab/errors.hpp"
#include "vmstab/hash.hpp"

namespace vmstab {

namespace {

std::string out_path(const RunSettings& rs, const std::string& name) {
    return (std::filesystem::path(rs.out_dir) / name).string();
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

json equilibrium_json(const Prepared& p) {
    const auto& f = p.eq.fields;
    json w = p.warnings;
    return {{"method", p.eq.method},
            {"iterations", p.eq.iterations},
            {"residual", to_json(p.eq.residual)},
            {"tail_indicator", p.tail},
            {"max_abs_phi0", max_abs(f.phi0)},
            {"max_abs_psi0", max_abs(f.psi0)},
            {"max_abs_E0", max_abs(f.E1_0)},
            {"max_abs_B0", max_abs(f.B0)},
            {"fields_hash", hex64(fnv1a(f.psi0, fnv1a(f.phi0)))},
            {"warnings", w}};
}

json base_report(const std::string& command, const Prepared& p) {
    json j = report_header(command, p.cfg);
    j["settings"] = resolved_settings(p.cfg, p.vg.v_max, p.profile.c_weight);
    j["equilibrium"] = equilibrium_json(p);
    return j;
}

json context_json(const AssemblyContext& ctx) {
    return {{"grid_hash", hex64(ctx.grid().hash)},
            {"orbits_plus", to_json(ctx.bank(Species::Plus).stats())},
            {"orbits_minus", to_json(ctx.bank(Species::Minus).stats())}};
}

struct CriterionRun {
    OperatorSet ops0;
    CriterionVerdict verdict;
    std::optional<TruncationSweep> sweep;
};

CriterionRun criterion_of(const AssemblyContext& ctx, const RunConfig& cfg) {
    CriterionRun r;
    r.ops0 = assemble_operator_set(0.0, ctx, cfg.ops);
    r.verdict = evaluate_criterion(r.ops0, cfg.criterion);
    if (r.verdict.hypotheses.a1_kernel_constants) {
        try {
            r.sweep = truncation_sweep(r.ops0, cfg.criterion);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::HypothesisFailure) throw;
        }
    }
    return r;
}

json criterion_json(const CriterionRun& r) {
    json j = to_json(r.verdict);
    j["operators"] = operator_diagnostics(r.ops0);
    j["truncation"] = r.sweep ? to_json(*r.sweep) : json(nullptr);
    return j;
}

int exit_for(Verdict v) { return v == Verdict::Ambiguous ? 2 : 0; }

}  // namespace

Prepared prepare(const RunConfig& cfg) {
    Prepared p;
    p.cfg = cfg;
    p.profile.model = cfg.family == "tabulated" ? load_tabulated_profile(cfg.table)
                                                : make_builtin_profile(cfg.family, cfg.params);
    p.profile.period = cfg.period;
    p.profile.alpha = cfg.alpha;
    p.profile.n0 = cfg.n0;
    p.profile.c_weight = 1.0;
    EquilibriumFields vac = EquilibriumFields::vacuum(cfg.period, cfg.nx);
    double v_max = cfg.v_max ? *cfg.v_max : choose_v_max(p.profile, vac, cfg.v_max_tol);
    for (int attempt = 0;; ++attempt) {
        p.profile.v_max = v_max;
        p.vg = VelocityGrid::gauss_legendre(cfg.nv, v_max, cfg.v_panels);
        if (cfg.solve) {
            p.eq = solve_equilibrium(p.profile, cfg.nx, p.vg, cfg.eq);
        } else {
            p.eq = EquilibriumSolve{};
            p.eq.fields = vac;
            p.eq.method = "none";
            p.eq.residual = equilibrium_residual(vac, p.profile, p.vg);
            const double defect = std::max(std::abs(p.eq.residual.neutrality_rho), std::abs(p.eq.residual.neutrality_j2));
            if (defect > cfg.eq.neutrality_tol || std::max(p.eq.residual.poisson, p.eq.residual.ampere) > cfg.eq.tol)
                throw Error(ErrorKind::NeutralityViolation,
                            "zero fields are not an equilibrium of this profile (use method = picard or newton)");
        }
        p.tail = tail_indicator(p.profile, p.eq.fields, v_max);
        if (p.tail <= cfg.v_max_tol) break;
        if (cfg.v_max || attempt == 2) {
            p.warnings.push_back("velocity tail indicator " + std::to_string(p.tail) + " exceeds v_max_tol at v_max = " +
                                 std::to_string(v_max));
            break;
        }
        v_max = choose_v_max(p.profile, p.eq.fields, cfg.v_max_tol);
    }
    if (cfg.c_weight) {
        p.profile.c_weight = *cfg.c_weight;
    } else {
        const double c = weight_bound_constant(p.profile, p.eq.fields, p.vg);
        p.profile.c_weight = c > 0.0 ? c : 1.0;
    }
    p.profile.validate();
    if ((cfg.M & (cfg.M - 1)) != 0 || (cfg.nx & (cfg.nx - 1)) != 0)
        p.warnings.push_back("M and N_x are not powers of two");
    return p;
}

std::unique_ptr<AssemblyContext> make_context(const Prepared& p) {
    return std::make_unique<AssemblyContext>(p.profile, p.eq.fields, p.vg, p.cfg.kinetic, p.cfg.M);
}

RunConfig refined(const RunConfig& cfg, int level) {
    RunConfig c = cfg;
    auto scale = [&](int base, double f) {
        return std::max(base, static_cast<int>(std::lround(base * std::pow(f, level))));
    };
    c.M = scale(cfg.M, cfg.refine_M);
    c.nx = std::max(scale(cfg.nx, cfg.refine_nx), 2 * c.M + 2);
    c.nv = scale(cfg.nv, cfg.refine_nv);
    const int step = std::lcm(2, cfg.v_panels);
    c.nv = (c.nv + step - 1) / step * step;
    return c;
}

CommandResult run_equilibrium(const RunConfig& cfg, const RunSettings& rs) {
    Prepared p = prepare(cfg);
    CommandResult r;
    r.report = base_report("equilibrium", p);
    if (cfg.write_csv) {
        CsvWriter csv(out_path(rs, "equilibrium_fields.csv"), {"x", "phi0", "psi0", "E0", "B0"});
        const auto& f = p.eq.fields;
        for (int j = 0; j < f.nx(); ++j) csv.row({f.x[j], f.phi0[j], f.psi0[j], f.E1_0[j], f.B0[j]});
    }
    write_json(out_path(rs, "equilibrium.json"), r.report);
    return r;
}

CommandResult run_criterion(const RunConfig& cfg, const RunSettings& rs) {
    Prepared p = prepare(cfg);
    auto ctx = make_context(p);
    CriterionRun cr = criterion_of(*ctx, cfg);
    CommandResult r;
    r.report = base_report("criterion", p);
    r.report["kinetic"] = context_json(*ctx);
    r.report["criterion"] = criterion_json(cr);
    r.exit_code = exit_for(cr.verdict.verdict);
    if (cfg.write_matrices) {
        BlockMatrix m0 = assemble_M0(cr.ops0);
        write_matrix_csv(m0.S, out_path(rs, "M0.csv"),
                         "M0 lambda=0 M=" + std::to_string(cfg.M) + " grid=" + hex64(ctx->grid().hash));
    }
    write_json(out_path(rs, "criterion.json"), r.report);
    return r;
}

CommandResult run_mode(const RunConfig& cfg, const RunSettings& rs) {
    Prepared p = prepare(cfg);
    auto ctx = make_context(p);
    CriterionRun cr = criterion_of(*ctx, cfg);
    CommandResult r;
    r.report = base_report("mode", p);
    r.report["kinetic"] = context_json(*ctx);
    r.report["criterion"] = criterion_json(cr);
    r.exit_code = exit_for(cr.verdict.verdict);

    LambdaProblem problem(*ctx, cfg.ops);
    Refinement ref = refine_n(problem, cr.ops0, cfg.n_list, cfg.scan);
    const Eigen::VectorXd u = lift_kernel_vector(ref.crossing.u, ref.pair);
    GrowingMode mode = reconstruct_mode(ref.lambda0, u, *ctx);
    mode.n_history = ref.history;
    ref.crossing.trivial_overlap = std::abs(mode.phi(0));
    if (ref.crossing.trivial_overlap > 1e-6)
        throw Error(ErrorKind::TrivialKernel, "kernel vector overlaps the trivial solution");

    // Negative control: a seeded random coefficient vector is not in the kernel.
    std::mt19937_64 rng(rs.seed);
    std::normal_distribution<double> nd;
    Eigen::VectorXd ur(u.size());
    for (Eigen::Index i = 0; i < ur.size(); ++i) ur(i) = nd(rng);
    ur /= ur.norm();
    GrowingMode control = reconstruct_mode(ref.lambda0, ur, *ctx);

    json hist = json::array();
    for (const auto& h : ref.history) hist.push_back(to_json(h));
    json m = {{"lambda0", ref.lambda0},
              {"n", ref.n},
              {"rank_phi", ref.pair.rank_phi()},
              {"rank_psi", ref.pair.rank_psi()},
              {"crossing", to_json(ref.crossing)},
              {"scan", to_json(ref.scan)},
              {"n_history", hist},
              {"cauchy_decreasing", ref.cauchy_decreasing},
              {"b", mode.b},
              {"phi", std::vector<double>(mode.phi.data(), mode.phi.data() + mode.phi.size())},
              {"psi", std::vector<double>(mode.psi.data(), mode.psi.data() + mode.psi.size())},
              {"residuals", to_json(mode.residuals)},
              {"control_residuals", to_json(control.residuals)},
              {"operator_evaluations", problem.evaluations()}};
    if (p.eq.fields.zero()) {
        DispersionOracle orc{p.profile, p.vg};
        json roots = json::array();
        double best = 0.0;
        for (int k = 1; k <= cfg.M; ++k) {
            auto es = orc.root(k, true);
            auto tr = orc.root(k, false);
            roots.push_back({{"m", k}, {"electrostatic", es ? json(*es) : json(nullptr)},
                             {"transverse", tr ? json(*tr) : json(nullptr)}});
            best = std::max({best, es.value_or(0.0), tr.value_or(0.0)});
        }
        m["dispersion"] = {{"roots", roots},
                           {"dominant", best > 0.0 ? json(best) : json(nullptr)},
                           {"relative_difference", best > 0.0 ? json(std::abs(ref.lambda0 - best) / best) : json(nullptr)}};
    }
    r.report["mode"] = m;

    if (cfg.write_csv) {
        CsvWriter scan(out_path(rs, "lambda_scan.csv"), {"lambda", "neg", "zero", "pos", "margin", "tracked"});
        for (const auto& row : ref.scan.rows)
            scan.row({row.lambda, double(row.neg), double(row.zero), double(row.pos),
                      std::isfinite(row.margin) ? row.margin : -1.0, row.tracked});
        CsvWriter fields(out_path(rs, "mode_fields.csv"),
                         {"x", "phi", "psi", "E1", "E2", "B", "rho", "j1", "j2"});
        for (std::size_t j = 0; j < mode.x.size(); ++j)
            fields.row({mode.x[j], mode.phi_x[j], mode.psi_x[j], mode.E1[j], mode.E2[j], mode.B[j], mode.rho[j],
                        mode.j1[j], mode.j2[j]});
        CsvWriter nh(out_path(rs, "n_history.csv"), {"n", "rank_phi", "rank_psi", "lambda_n", "cauchy", "margin"});
        for (const auto& h : ref.history)
            nh.row({double(h.n), double(h.rank_phi), double(h.rank_psi), h.lambda_n, h.cauchy, h.margin});
    }
    write_json(out_path(rs, "mode.json"), r.report);
    return r;
}

CommandResult run_convergence(const RunConfig& cfg, const RunSettings& rs) {
    CommandResult r;
    r.report = report_header("convergence", cfg);
    json levels = json::array();
    std::optional<OperatorSet> prev;
    int lhs0 = -1, rhs0 = -1;
    bool stable = true;
    Verdict finest = Verdict::Ambiguous;
    std::unique_ptr<CsvWriter> csv;
    if (cfg.write_csv)
        csv = std::make_unique<CsvWriter>(out_path(rs, "convergence.csv"),
                                          std::vector<std::string>{"level", "M", "nx", "nv", "lhs", "rhs", "l0",
                                                                   "entry_diff_A1", "entry_diff_A2", "lambda0"});
    for (int l = 0; l < cfg.levels; ++l) {
        RunConfig c = refined(cfg, l);
        Prepared p = prepare(c);
        auto ctx = make_context(p);
        CriterionRun cr = criterion_of(*ctx, c);
        json lv = {{"level", l}, {"M", c.M}, {"nx", c.nx}, {"nv", c.nv}, {"v_max", p.vg.v_max},
                   {"grid_hash", hex64(ctx->grid().hash)}, {"criterion", criterion_json(cr)}};
        double dA1 = -1.0, dA2 = -1.0;
        if (prev) {
            // Entries at M versus the refined basis: same functions, leading block.
            const auto n1 = prev->A1.rows(), n2 = prev->A2.rows();
            const double s1 = std::max(prev->A1.cwiseAbs().maxCoeff(), 1e-300);
            const double s2 = std::max(prev->A2.cwiseAbs().maxCoeff(), 1e-300);
            dA1 = (cr.ops0.A1.topLeftCorner(n1, n1) - prev->A1).cwiseAbs().maxCoeff() / s1;
            dA2 = (cr.ops0.A2.topLeftCorner(n2, n2) - prev->A2).cwiseAbs().maxCoeff() / s2;
            lv["entry_diff_A1"] = dA1;
            lv["entry_diff_A2"] = dA2;
            lv["l0_diff"] = std::abs(cr.ops0.l - prev->l);
        }
        double lambda0 = -1.0;
        if (cfg.convergence_mode) {
            LambdaProblem problem(*ctx, c.ops);
            std::vector<int> nl;
            for (int n : c.n_list) nl.push_back(std::min(n, 2 * c.M));
            try {
                Refinement ref = refine_n(problem, cr.ops0, nl, c.scan);
                lambda0 = ref.lambda0;
                lv["lambda0"] = lambda0;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::NoConvergence) throw;
                lv["lambda0"] = nullptr;
            }
        }
        if (l == 0) {
            lhs0 = cr.verdict.lhs;
            rhs0 = cr.verdict.rhs;
        } else if (cr.verdict.lhs != lhs0 || cr.verdict.rhs != rhs0) {
            stable = false;
        }
        finest = cr.verdict.verdict;
        if (csv)
            csv->row({double(l), double(c.M), double(c.nx), double(c.nv), double(cr.verdict.lhs),
                      double(cr.verdict.rhs), cr.ops0.l, dA1, dA2, lambda0});
        levels.push_back(lv);
        prev = cr.ops0;
    }
    const Verdict overall = stable ? finest : Verdict::Ambiguous;
    r.report["levels"] = levels;
    r.report["counts_stable"] = stable;
    r.report["verdict"] = to_string(overall);
    r.exit_code = exit_for(overall);
    write_json(out_path(rs, "convergence.json"), r.report);
    return r;
}

int run_pipeline(const std::string& command, const RunConfig& cfg, const RunSettings& rs, std::ostream& log) {
    std::filesystem::create_directories(rs.out_dir);
    CommandResult r;
    if (command == "equilibrium") {
        r = run_equilibrium(cfg, rs);
        log << "equilibrium: " << r.report["equilibrium"]["method"].get<std::string>() << ", "
            << r.report["equilibrium"]["iterations"].get<int>() << " iterations\n";
    } else if (command == "criterion") {
        r = run_criterion(cfg, rs);
        const auto& c = r.report["criterion"];
        log << "criterion: " << c["verdict"].get<std::string>() << " (lhs " << c["lhs"].get<int>() << ", rhs "
            << c["rhs"].get<int>() << ")\n";
    } else if (command == "mode") {
        r = run_mode(cfg, rs);
        log << "mode: lambda0 = " << r.report["mode"]["lambda0"].get<double>() << ", verdict "
            << r.report["criterion"]["verdict"].get<std::string>() << "\n";
    } else if (command == "convergence") {
        r = run_convergence(cfg, rs);
        log << "convergence: " << r.report["verdict"].get<std::string>()
            << (r.report["counts_stable"].get<bool>() ? ", counts stable\n" : ", counts changed\n");
    } else {
        throw Error(ErrorKind::ConfigError, "unknown command '" + command + "'");
    }
    return r.exit_code;
}

}  // namespace vmstab
