#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "vmstab/equilibrium.hpp"
#include "vmstab/errors.hpp"

namespace vmstab {

namespace {

constexpr double pi = std::numbers::pi;

class ParamReader {
public:
    ParamReader(const std::string& family, const ParamMap& params) : family_(family), params_(params) {}

    double get(const std::string& key, double fallback) {
        used_.insert(key);
        auto it = params_.find(key);
        return it == params_.end() ? fallback : it->second;
    }

    void finish() const {
        for (const auto& kv : params_)
            if (!used_.count(kv.first))
                throw Error(ErrorKind::ConfigError, "unknown parameter '" + kv.first + "' for family " + family_);
    }

private:
    std::string family_;
    const ParamMap& params_;
    std::set<std::string> used_;
};

void require_positive(double v, const std::string& name) {
    if (!(v > 0.0)) throw Error(ErrorKind::ConfigError, name + " must be positive");
}

// mu = n N exp(-(e - 1) / T); N normalises the zero-field density to n.
class MaxwellianProfile final : public ProfileModel {
public:
    MaxwellianProfile(double np, double nm, double tp, double tm) : n_{np, nm}, t_{tp, tm} {
        for (int s = 0; s < 2; ++s) norm_[s] = n_[s] / (2.0 * pi * t_[s] * (1.0 + t_[s]));
    }
    ProfileValue eval(Species s, double e, double) const override {
        const int i = static_cast<int>(s);
        double mu = norm_[i] * std::exp(-(e - 1.0) / t_[i]);
        return {mu, -mu / t_[i], 0.0};
    }
    std::string family() const override { return "homogeneous-maxwellian"; }

private:
    double n_[2], t_[2], norm_[2];
};

// Counter-streaming beams written in the invariants. With s = e^2 - 1 - p^2
// (equal to v1^2 when the potentials vanish) the axis-1 profile is
// G(p) [exp(-(sqrt s - u)^2 / 2 sig^2) + exp(-(sqrt s + u)^2 / 2 sig^2)], continued
// analytically to s < 0. Axis 2 puts the beams along p instead.
class TwoStreamProfile final : public ProfileModel {
public:
    TwoStreamProfile(double n, double u, double sig, double sig_t, int axis)
        : n_(n), u_(u), sig_(sig), sig_t_(sig_t), axis_(axis) {
        norm_ = n_ / (4.0 * pi * sig_ * sig_t_);
    }

    ProfileValue eval(Species, double e, double p) const override {
        const double s = e * e - 1.0 - p * p;
        if (axis_ == 1) {
            double F, dF;
            beams_of_s(s, F, dF);
            const double G = std::exp(-p * p / (2.0 * sig_t_ * sig_t_));
            const double dG = -p / (sig_t_ * sig_t_) * G;
            return {norm_ * G * F, norm_ * G * dF * 2.0 * e, norm_ * (dG * F - 2.0 * p * G * dF)};
        }
        const double ex = std::exp(-s / (2.0 * sig_t_ * sig_t_));
        const double gm = std::exp(-(p - u_) * (p - u_) / (2.0 * sig_ * sig_));
        const double gp = std::exp(-(p + u_) * (p + u_) / (2.0 * sig_ * sig_));
        const double H = gm + gp;
        const double dH = -(p - u_) / (sig_ * sig_) * gm - (p + u_) / (sig_ * sig_) * gp;
        const double mu = norm_ * ex * H;
        return {mu, -e / (sig_t_ * sig_t_) * mu, norm_ * (p / (sig_t_ * sig_t_) * ex * H + ex * dH)};
    }
    std::string family() const override { return "two-stream"; }

private:
    void beams_of_s(double s, double& F, double& dF) const {
        const double s2 = sig_ * sig_;
        const double r = std::sqrt(std::abs(s));
        const double z = u_ * r / s2;
        if (s >= 0.0 && z > 1.0) {
            const double gm = std::exp(-(r - u_) * (r - u_) / (2.0 * s2));
            const double gp = std::exp(-(r + u_) * (r + u_) / (2.0 * s2));
            F = gm + gp;
            // E cosh z = F / 2 and E sinh(z) / z = (gm - gp) / (2 z)
            dF = -F / (2.0 * s2) + (u_ * u_ / (s2 * s2)) * (gm - gp) / (2.0 * z);
            return;
        }
        const double E = std::exp(-(s + u_ * u_) / (2.0 * s2));
        double c, sc;
        if (s >= 0.0) {
            c = std::cosh(z);
            sc = z > 1e-8 ? std::sinh(z) / z : 1.0 + z * z / 6.0;
        } else {
            c = std::cos(z);
            sc = z > 1e-8 ? std::sin(z) / z : 1.0 - z * z / 6.0;
        }
        F = 2.0 * E * c;
        dF = -E * c / s2 + 2.0 * E * (u_ * u_ / (2.0 * s2 * s2)) * sc;
    }

    double n_, u_, sig_, sig_t_, norm_;
    int axis_;
};

// mu = n N exp(-(e - 1) / T) (1 - a cos(kappa p)); even in p so both species share it.
class MagneticProfile final : public ProfileModel {
public:
    MagneticProfile(double n, double t, double a, double kappa) : t_(t), a_(a), kappa_(kappa) {
        norm_ = n / (2.0 * pi * t * (1.0 + t));
    }
    ProfileValue eval(Species, double e, double p) const override {
        const double g = norm_ * std::exp(-(e - 1.0) / t_);
        const double c = 1.0 - a_ * std::cos(kappa_ * p);
        return {g * c, -g * c / t_, g * a_ * kappa_ * std::sin(kappa_ * p)};
    }
    std::string family() const override { return "purely-magnetic-symmetric"; }

private:
    double t_, a_, kappa_, norm_;
};

// Shell in energy: mu = n N exp(-(e - e0)^2 / 2 w^2).
class RingProfile final : public ProfileModel {
public:
    RingProfile(double n, double e0, double w) : e0_(e0), w_(w) {
        const double d = 1.0 - e0;
        const double radial = w * w * std::exp(-d * d / (2.0 * w * w)) +
                              e0 * w * std::sqrt(pi / 2.0) * std::erfc(d / (std::sqrt(2.0) * w));
        norm_ = n / (2.0 * pi * radial);
    }
    ProfileValue eval(Species, double e, double) const override {
        const double d = e - e0_;
        const double mu = norm_ * std::exp(-d * d / (2.0 * w_ * w_));
        return {mu, -d / (w_ * w_) * mu, 0.0};
    }
    std::string family() const override { return "nonmonotone-ring"; }

private:
    double e0_, w_, norm_;
};

class TabulatedProfile final : public ProfileModel {
public:
    TabulatedProfile(std::vector<double> e, std::vector<double> p, std::vector<double> plus,
                     std::vector<double> minus)
        : e_(std::move(e)), p_(std::move(p)), tab_{std::move(plus), std::move(minus)} {}

    ProfileValue eval(Species s, double e, double p) const override {
        if (e < e_.front() || e > e_.back() || p < p_.front() || p > p_.back()) return {};
        const auto& t = tab_[static_cast<int>(s)];
        std::size_t i = cell(e_, e), j = cell(p_, p);
        const double de = e_[i + 1] - e_[i], dp = p_[j + 1] - p_[j];
        const double a = (e - e_[i]) / de, b = (p - p_[j]) / dp;
        const std::size_t np = p_.size();
        const double f00 = t[i * np + j], f10 = t[(i + 1) * np + j];
        const double f01 = t[i * np + j + 1], f11 = t[(i + 1) * np + j + 1];
        ProfileValue v;
        v.mu = (1 - a) * (1 - b) * f00 + a * (1 - b) * f10 + (1 - a) * b * f01 + a * b * f11;
        v.mu_e = ((1 - b) * (f10 - f00) + b * (f11 - f01)) / de;
        v.mu_p = ((1 - a) * (f01 - f00) + a * (f11 - f10)) / dp;
        return v;
    }
    std::string family() const override { return "tabulated"; }

private:
    static std::size_t cell(const std::vector<double>& g, double x) {
        auto it = std::upper_bound(g.begin(), g.end(), x);
        std::size_t k = static_cast<std::size_t>(it - g.begin());
        if (k == 0) k = 1;
        if (k >= g.size()) k = g.size() - 1;
        return k - 1;
    }
    std::vector<double> e_, p_;
    std::vector<double> tab_[2];
};

}  // namespace

std::shared_ptr<const ProfileModel> make_builtin_profile(const std::string& family, const ParamMap& params) {
    ParamReader r(family, params);
    std::shared_ptr<const ProfileModel> out;
    if (family == "homogeneous-maxwellian") {
        double n = r.get("density", 1.0), t = r.get("temperature", 1.0);
        double np = r.get("density_plus", n), nm = r.get("density_minus", n);
        double tp = r.get("temperature_plus", t), tm = r.get("temperature_minus", t);
        if (np < 0 || nm < 0) throw Error(ErrorKind::ConfigError, "densities must be non-negative");
        require_positive(tp, "temperature_plus");
        require_positive(tm, "temperature_minus");
        out = std::make_shared<MaxwellianProfile>(np, nm, tp, tm);
    } else if (family == "two-stream") {
        double n = r.get("density", 1.0), u = r.get("drift", 1.0);
        double sig = r.get("vth", 0.25), sig_t = r.get("vth_perp", 0.4);
        int axis = static_cast<int>(r.get("axis", 1.0));
        if (n < 0) throw Error(ErrorKind::ConfigError, "density must be non-negative");
        require_positive(sig, "vth");
        require_positive(sig_t, "vth_perp");
        if (axis != 1 && axis != 2) throw Error(ErrorKind::ConfigError, "axis must be 1 or 2");
        out = std::make_shared<TwoStreamProfile>(n, u, sig, sig_t, axis);
    } else if (family == "purely-magnetic-symmetric") {
        double n = r.get("density", 1.0), t = r.get("temperature", 0.25);
        double a = r.get("amplitude", 0.8), kappa = r.get("wavenumber", 2.0);
        require_positive(t, "temperature");
        if (n < 0) throw Error(ErrorKind::ConfigError, "density must be non-negative");
        if (std::abs(a) > 1.0) throw Error(ErrorKind::ConfigError, "|amplitude| must not exceed 1 (mu >= 0)");
        out = std::make_shared<MagneticProfile>(n, t, a, kappa);
    } else if (family == "nonmonotone-ring") {
        double n = r.get("density", 1.0), e0 = r.get("energy", 2.0), w = r.get("width", 0.2);
        if (n < 0) throw Error(ErrorKind::ConfigError, "density must be non-negative");
        require_positive(w, "width");
        out = std::make_shared<RingProfile>(n, e0, w);
    } else {
        throw Error(ErrorKind::ConfigError, "unknown profile family '" + family + "'");
    }
    r.finish();
    return out;
}

std::shared_ptr<const ProfileModel> load_tabulated_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open profile table " + path);
    std::string line;
    int lineno = 0;
    auto next_line = [&](std::string& out) {
        while (std::getline(in, out)) {
            ++lineno;
            if (!out.empty() && out.back() == '\r') out.pop_back();
            if (!out.empty()) return true;
        }
        return false;
    };
    if (!next_line(line)) throw Error(ErrorKind::ConfigError, path + ": empty table");
    std::string header;
    for (char c : line)
        if (c != ' ') header += c;
    if (header != "e,p,mu_plus,mu_minus")
        throw Error(ErrorKind::ConfigError, path + ":1: header must be e,p,mu_plus,mu_minus");
    struct Row {
        double e, p, a, b;
    };
    std::vector<Row> rows;
    while (next_line(line)) {
        std::stringstream ss(line);
        std::string cell;
        double vals[4];
        for (int k = 0; k < 4; ++k) {
            if (!std::getline(ss, cell, ','))
                throw Error(ErrorKind::ConfigError, path + ":" + std::to_string(lineno) + ": expected 4 columns");
            try {
                vals[k] = std::stod(cell);
            } catch (const std::exception&) {
                throw Error(ErrorKind::ConfigError,
                            path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (vals[2] < 0 || vals[3] < 0)
            throw Error(ErrorKind::ConfigError, path + ":" + std::to_string(lineno) + ": negative mu");
        rows.push_back({vals[0], vals[1], vals[2], vals[3]});
    }
    std::vector<double> es, ps;
    for (auto& r : rows) {
        es.push_back(r.e);
        ps.push_back(r.p);
    }
    std::sort(es.begin(), es.end());
    es.erase(std::unique(es.begin(), es.end()), es.end());
    std::sort(ps.begin(), ps.end());
    ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
    if (es.size() < 2 || ps.size() < 2 || es.size() * ps.size() != rows.size())
        throw Error(ErrorKind::ConfigError, path + ": table is not a full rectangular grid");
    std::vector<double> plus(rows.size(), -1.0), minus(rows.size(), -1.0);
    for (auto& r : rows) {
        std::size_t i = std::lower_bound(es.begin(), es.end(), r.e) - es.begin();
        std::size_t j = std::lower_bound(ps.begin(), ps.end(), r.p) - ps.begin();
        plus[i * ps.size() + j] = r.a;
        minus[i * ps.size() + j] = r.b;
    }
    if (std::find(plus.begin(), plus.end(), -1.0) != plus.end())
        throw Error(ErrorKind::ConfigError, path + ": duplicate (e, p) rows");
    return std::make_shared<TabulatedProfile>(es, ps, plus, minus);
}

}  // namespace vmstab
