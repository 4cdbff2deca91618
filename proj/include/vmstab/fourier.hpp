#pragma once

#include <complex>
#include <vector>

namespace vmstab {

using cplx = std::complex<double>;

// c_m = (1/N) sum_j f_j exp(-2 pi i m j / N) for m = 0..N/2.
std::vector<cplx> real_dft(const std::vector<double>& f);

// In-place-free complex transforms. sign = -1 forward, +1 backward, no scaling.
void complex_dft(const std::vector<cplx>& in, std::vector<cplx>& out, int sign);

// Derivative of given order of periodic samples on [0, P). Nyquist is dropped
// for odd orders.
std::vector<double> spectral_derivative(const std::vector<double>& f, double period, int order);

// Solves -u'' = r (mean of r removed, mean of u zero). Returns removed mean.
double solve_periodic_poisson(const std::vector<double>& r, double period, std::vector<double>& u);

// Trigonometric interpolant of uniform periodic samples. Coefficients beyond the
// last non-negligible one are dropped so smooth fields evaluate cheaply.
class TrigSeries {
public:
    TrigSeries() = default;
    TrigSeries(const std::vector<double>& samples, double period);

    double operator()(double x) const;
    double derivative(double x) const;
    bool is_zero() const { return coef_.empty() && mean_ == 0.0; }
    int active_modes() const { return static_cast<int>(coef_.size()) - 1; }
    double period() const { return period_; }

    // Evaluates two series that share the same period with one recurrence.
    static void eval_pair(const TrigSeries& a, const TrigSeries& b, double x, double& va, double& vb);

private:
    double period_ = 1.0;
    double mean_ = 0.0;
    int nyquist_ = -1;
    std::vector<cplx> coef_;  // coef_[m] multiplies exp(i k_m x), real part taken, m >= 1 doubled
};

}  // namespace vmstab
