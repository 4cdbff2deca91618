#include "vmstab/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "vmstab/errors.hpp"
#include "vmstab/hash.hpp"

namespace vmstab {

namespace {

namespace pt = boost::property_tree;

[[noreturn]] void fail(const std::string& origin, const std::string& section, const std::string& key,
                       const std::string& msg) {
    throw Error(ErrorKind::ConfigError, origin + ": [" + section + "] " + key + ": " + msg);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

class Section {
public:
    Section(const std::string& origin, const std::string& name, const pt::ptree* tree)
        : origin_(origin), name_(name), tree_(tree) {}

    bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

    std::string raw(const std::string& key) {
        seen_.insert(key);
        return trim(tree_->get<std::string>(key));
    }

    void real(const std::string& key, double& out) {
        if (!has(key)) return;
        out = to_double(key, raw(key));
    }
    void positive(const std::string& key, double& out) {
        if (!has(key)) return;
        out = to_double(key, raw(key));
        if (!(out > 0.0)) fail(origin_, name_, key, "must be > 0");
    }
    void integer(const std::string& key, int& out, int lo) {
        if (!has(key)) return;
        const std::string v = raw(key);
        char* end = nullptr;
        errno = 0;
        const long x = std::strtol(v.c_str(), &end, 10);
        if (v.empty() || *end != '\0' || errno) fail(origin_, name_, key, "expected an integer, got '" + v + "'");
        if (x < lo) fail(origin_, name_, key, "must be >= " + std::to_string(lo));
        out = static_cast<int>(x);
    }
    void integer(const std::string& key, long& out, long lo) {
        int v = 0;
        if (!has(key)) return;
        integer(key, v, static_cast<int>(lo));
        out = v;
    }
    void boolean(const std::string& key, bool& out) {
        if (!has(key)) return;
        const std::string v = raw(key);
        if (v == "true" || v == "yes" || v == "1") out = true;
        else if (v == "false" || v == "no" || v == "0") out = false;
        else fail(origin_, name_, key, "expected true or false, got '" + v + "'");
    }
    void optional_positive(const std::string& key, std::optional<double>& out) {
        if (!has(key)) return;
        const std::string v = raw(key);
        if (v == "auto") {
            out.reset();
            return;
        }
        out = to_double(key, v);
        if (!(*out > 0.0)) fail(origin_, name_, key, "must be > 0 or auto");
    }
    void int_list(const std::string& key, std::vector<int>& out) {
        if (!has(key)) return;
        out.clear();
        std::stringstream ss(raw(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            char* end = nullptr;
            const long x = std::strtol(item.c_str(), &end, 10);
            if (item.empty() || *end != '\0' || x < 1)
                fail(origin_, name_, key, "expected a comma-separated list of positive integers");
            out.push_back(static_cast<int>(x));
        }
    }
    double to_double(const std::string& key, const std::string& v) const {
        char* end = nullptr;
        errno = 0;
        const double x = std::strtod(v.c_str(), &end);
        if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(x))
            fail(origin_, name_, key, "expected a finite number, got '" + v + "'");
        return x;
    }
    // Every key not consumed is an error.
    void finish() const {
        if (!tree_) return;
        for (const auto& kv : *tree_)
            if (!seen_.count(kv.first)) fail(origin_, name_, kv.first, "unknown key");
    }
    // All remaining keys as numbers (profile parameters).
    void rest_as_params(ParamMap& out) {
        if (!tree_) return;
        for (const auto& kv : *tree_)
            if (!seen_.count(kv.first)) {
                out[kv.first] = to_double(kv.first, raw(kv.first));
            }
    }

private:
    std::string origin_, name_;
    const pt::ptree* tree_;
    std::set<std::string> seen_;
};

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin, const std::string& base_dir) {
    pt::ptree root;
    try {
        std::istringstream in(text);
        pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorKind::ConfigError, origin + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    static const std::set<std::string> known = {"profile", "domain", "grid", "equilibrium", "kinetic",
                                                "operators", "criterion", "scan", "convergence", "output"};
    for (const auto& kv : root) {
        if (!known.count(kv.first))
            throw Error(ErrorKind::ConfigError, origin + ": unknown section [" + kv.first + "]");
        if (kv.second.data().size() && kv.second.empty())
            throw Error(ErrorKind::ConfigError, origin + ": key '" + kv.first + "' outside any section");
    }
    auto section = [&](const std::string& name) {
        auto it = root.find(name);
        return Section(origin, name, it == root.not_found() ? nullptr : &it->second);
    };

    RunConfig c;
    c.path = origin;
    c.hash = fnv1a(text);

    {
        Section s = section("profile");
        if (!s.has("family")) fail(origin, "profile", "family", "missing");
        c.family = s.raw("family");
        if (c.family == "tabulated") {
            if (!s.has("table")) fail(origin, "profile", "table", "missing for the tabulated family");
            std::filesystem::path p = s.raw("table");
            c.table = p.is_absolute() ? p.string() : (std::filesystem::path(base_dir) / p).string();
        }
        s.rest_as_params(c.params);
        if (c.family == "tabulated" && !c.params.empty())
            fail(origin, "profile", c.params.begin()->first, "tabulated profiles take no parameters");
    }
    {
        Section s = section("domain");
        if (!s.has("period")) fail(origin, "domain", "period", "missing");
        s.positive("period", c.period);
        s.real("alpha", c.alpha);
        if (!(c.alpha > 2.0)) fail(origin, "domain", "alpha", "must be > 2");
        s.optional_positive("c_weight", c.c_weight);
        s.real("n0", c.n0);
        s.finish();
    }
    {
        Section s = section("grid");
        s.integer("nx", c.nx, 4);
        s.integer("nv", c.nv, 4);
        s.integer("v_panels", c.v_panels, 1);
        s.integer("M", c.M, 1);
        s.optional_positive("v_max", c.v_max);
        s.positive("v_max_tol", c.v_max_tol);
        s.finish();
        if (c.nx < 2 * c.M + 2) fail(origin, "grid", "nx", "must be at least 2 M + 2");
        if (c.nv % c.v_panels != 0 || c.nv / c.v_panels < 2)
            fail(origin, "grid", "nv", "must be a multiple of v_panels with at least 2 nodes per panel");
    }
    {
        Section s = section("equilibrium");
        if (s.has("method")) {
            const std::string m = s.raw("method");
            if (m == "none") c.solve = false;
            else if (m == "picard" || m == "newton") c.eq.method = m;
            else fail(origin, "equilibrium", "method", "expected none, picard or newton");
        }
        s.integer("max_iter", c.eq.max_iter, 1);
        s.positive("tol", c.eq.tol);
        s.positive("damping", c.eq.damping);
        s.positive("neutrality_tol", c.eq.neutrality_tol);
        s.real("guess_phi", c.eq.guess_phi);
        s.real("guess_psi", c.eq.guess_psi);
        s.integer("guess_mode", c.eq.guess_mode, 1);
        s.real("guess_shift_psi", c.eq.guess_shift_psi);
        s.boolean("even", c.eq.even);
        s.finish();
    }
    {
        Section s = section("kinetic");
        auto& o = c.kinetic.orbit;
        s.positive("rtol", o.step.rtol);
        s.positive("atol", o.step.atol);
        s.real("fixed_step", o.step.fixed_step);
        s.integer("max_steps", o.step.max_steps, 1);
        s.positive("T_cap", o.T_cap);
        s.integer("nq_min", o.nq_min, 4);
        s.integer("nq_max", o.nq_max, 4);
        s.positive("spectral_tol", o.spectral_tol);
        s.boolean("force_integration", c.kinetic.force_integration);
        s.positive("tail_tol", c.kinetic.tail_tol);
        s.boolean("strict_tail", c.kinetic.strict_tail);
        s.positive("lambda_proj", c.kinetic.lambda_proj);
        s.positive("proj_tol", c.kinetic.proj_tol);
        s.boolean("check_projection", c.kinetic.check_projection);
        s.finish();
        if (o.nq_max < o.nq_min) fail(origin, "kinetic", "nq_max", "must be >= nq_min");
    }
    {
        Section s = section("operators");
        s.positive("asym_tol", c.ops.asym_tol);
        s.boolean("check_projection", c.ops.check_projection);
        s.finish();
    }
    {
        Section s = section("criterion");
        s.positive("zero_tol_rel", c.criterion.zero_tol_rel);
        s.positive("l0_tol", c.criterion.l0_tol);
        s.positive("singular_tol", c.criterion.singular_tol);
        s.finish();
        c.scan.zero_tol_rel = c.criterion.zero_tol_rel;
    }
    {
        Section s = section("scan");
        s.integer("points", c.scan.points, 2);
        s.positive("lambda_min", c.scan.lambda_min);
        if (s.has("lambda_max")) {
            std::optional<double> lm;
            s.optional_positive("lambda_max", lm);
            c.scan.lambda_max = lm.value_or(0.0);
        }
        s.positive("lambda_start", c.scan.lambda_start);
        s.positive("eig_tol", c.scan.eig_tol);
        s.int_list("n_list", c.n_list);
        s.finish();
        if (c.scan.lambda_max > 0.0 && c.scan.lambda_max <= c.scan.lambda_min)
            fail(origin, "scan", "lambda_max", "must exceed lambda_min");
        for (int n : c.n_list)
            if (n > 2 * c.M) fail(origin, "scan", "n_list", "entries must not exceed 2 M");
    }
    {
        Section s = section("convergence");
        s.integer("levels", c.levels, 1);
        s.positive("refine_M", c.refine_M);
        s.positive("refine_nx", c.refine_nx);
        s.positive("refine_nv", c.refine_nv);
        s.boolean("mode", c.convergence_mode);
        s.finish();
    }
    {
        Section s = section("output");
        s.boolean("csv", c.write_csv);
        s.boolean("matrices", c.write_matrices);
        s.finish();
    }
    if (c.n_list.empty()) c.n_list = {2 * c.M};
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::ConfigError, path + ": cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto dir = std::filesystem::path(path).parent_path();
    return parse_config(ss.str(), path, dir.empty() ? "." : dir.string());
}

}  // namespace vmstab
