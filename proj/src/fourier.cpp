#include "vmstab/fourier.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>

namespace vmstab {

namespace {

// The FFTW planner is not thread safe; plans are created once per size under a
// lock and executed concurrently through the new-array interface.
std::mutex plan_mutex;

struct PlanCache {
    std::map<std::pair<int, int>, fftw_plan> plans;
    ~PlanCache() {
        for (auto& kv : plans) fftw_destroy_plan(kv.second);
    }
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

fftw_plan r2c_plan(int n) {
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto key = std::make_pair(0, n);
    auto it = cache().plans.find(key);
    if (it != cache().plans.end()) return it->second;
    std::vector<double> in(n);
    std::vector<fftw_complex> out(n / 2 + 1);
    fftw_plan p = fftw_plan_dft_r2c_1d(n, in.data(), out.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache().plans[key] = p;
    return p;
}

fftw_plan c2c_plan(int n, int sign) {
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto key = std::make_pair(sign < 0 ? 1 : 2, n);
    auto it = cache().plans.find(key);
    if (it != cache().plans.end()) return it->second;
    std::vector<fftw_complex> in(n), out(n);
    fftw_plan p = fftw_plan_dft_1d(n, in.data(), out.data(), sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache().plans[key] = p;
    return p;
}

}  // namespace

std::vector<cplx> real_dft(const std::vector<double>& f) {
    const int n = static_cast<int>(f.size());
    std::vector<cplx> out(n / 2 + 1);
    std::vector<double> in(f);
    fftw_execute_dft_r2c(r2c_plan(n), in.data(), reinterpret_cast<fftw_complex*>(out.data()));
    for (auto& c : out) c /= static_cast<double>(n);
    return out;
}

void complex_dft(const std::vector<cplx>& in, std::vector<cplx>& out, int sign) {
    const int n = static_cast<int>(in.size());
    out.resize(n);
    std::vector<cplx> tmp(in);
    fftw_execute_dft(c2c_plan(n, sign), reinterpret_cast<fftw_complex*>(tmp.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
}

std::vector<double> spectral_derivative(const std::vector<double>& f, double period, int order) {
    const int n = static_cast<int>(f.size());
    auto c = real_dft(f);
    const double k1 = 2.0 * std::numbers::pi / period;
    std::vector<double> out(n, 0.0);
    for (int m = 1; m <= n / 2; ++m) {
        if (2 * m == n && order % 2 == 1) continue;
        cplx factor = std::pow(cplx(0.0, k1 * m), order);
        cplx cm = c[m] * factor * ((2 * m == n) ? 1.0 : 2.0);
        for (int j = 0; j < n; ++j) {
            double th = 2.0 * std::numbers::pi * m * j / n;
            out[j] += cm.real() * std::cos(th) - cm.imag() * std::sin(th);
        }
    }
    return out;
}

double solve_periodic_poisson(const std::vector<double>& r, double period, std::vector<double>& u) {
    const int n = static_cast<int>(r.size());
    auto c = real_dft(r);
    const double k1 = 2.0 * std::numbers::pi / period;
    u.assign(n, 0.0);
    for (int m = 1; m <= n / 2; ++m) {
        double k = k1 * m;
        cplx cm = c[m] / (k * k) * ((2 * m == n) ? 1.0 : 2.0);
        for (int j = 0; j < n; ++j) {
            double th = 2.0 * std::numbers::pi * m * j / n;
            u[j] += cm.real() * std::cos(th) - cm.imag() * std::sin(th);
        }
    }
    return c[0].real();
}

TrigSeries::TrigSeries(const std::vector<double>& samples, double period) : period_(period) {
    const int n = static_cast<int>(samples.size());
    auto c = real_dft(samples);
    mean_ = c[0].real();
    std::vector<cplx> coef(n / 2 + 1, cplx(0.0));
    double scale = std::abs(mean_);
    for (int m = 1; m <= n / 2; ++m) {
        coef[m] = c[m] * ((2 * m == n) ? 1.0 : 2.0);
        if (2 * m == n) coef[m] = cplx(coef[m].real(), 0.0);
        scale = std::max(scale, std::abs(coef[m]));
    }
    int last = 0;
    for (int m = 1; m <= n / 2; ++m)
        if (std::abs(coef[m]) > 1e-15 * scale) last = m;
    if (last > 0) coef_.assign(coef.begin(), coef.begin() + last + 1);
    nyquist_ = (n % 2 == 0) ? n / 2 : -1;
}

double TrigSeries::operator()(double x) const {
    if (coef_.empty()) return mean_;
    const double k1 = 2.0 * std::numbers::pi / period_;
    const cplx z(std::cos(k1 * x), std::sin(k1 * x));
    cplx zm = z;
    double s = mean_;
    for (std::size_t m = 1; m < coef_.size(); ++m) {
        s += coef_[m].real() * zm.real() - coef_[m].imag() * zm.imag();
        zm *= z;
    }
    return s;
}

double TrigSeries::derivative(double x) const {
    if (coef_.empty()) return 0.0;
    const double k1 = 2.0 * std::numbers::pi / period_;
    const cplx z(std::cos(k1 * x), std::sin(k1 * x));
    cplx zm = z;
    double s = 0.0;
    for (std::size_t m = 1; m < coef_.size(); ++m) {
        if (static_cast<int>(m) != nyquist_) {
            cplx d = coef_[m] * cplx(0.0, k1 * static_cast<double>(m));
            s += d.real() * zm.real() - d.imag() * zm.imag();
        }
        zm *= z;
    }
    return s;
}

void TrigSeries::eval_pair(const TrigSeries& a, const TrigSeries& b, double x, double& va, double& vb) {
    va = a.mean_;
    vb = b.mean_;
    const std::size_t na = a.coef_.size(), nb = b.coef_.size();
    const std::size_t n = std::max(na, nb);
    if (n == 0) return;
    const double k1 = 2.0 * std::numbers::pi / a.period_;
    const cplx z(std::cos(k1 * x), std::sin(k1 * x));
    cplx zm = z;
    for (std::size_t m = 1; m < n; ++m) {
        if (m < na) va += a.coef_[m].real() * zm.real() - a.coef_[m].imag() * zm.imag();
        if (m < nb) vb += b.coef_[m].real() * zm.real() - b.coef_[m].imag() * zm.imag();
        zm *= z;
    }
}

}  // namespace vmstab
