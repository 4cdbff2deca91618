#include "vmstab/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

#include "vmstab/errors.hpp"

namespace vmstab {

namespace {

// Dormand-Prince 5(4) tableau and Hairer's continuous extension.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

State axpy(const State& y, double h, std::initializer_list<std::pair<double, const State*>> terms) {
    State out = y;
    for (auto& t : terms)
        for (int i = 0; i < 3; ++i) out[i] += h * t.first * (*t.second)[i];
    return out;
}

}  // namespace

State DenseStep::at(double s) const {
    const double th = (s - s0) / h;
    const double th1 = 1.0 - th;
    State y;
    for (int i = 0; i < 3; ++i)
        y[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
    return y;
}

State characteristic_rhs(const FieldEvaluator& fe, Species sp, const State& y) {
    const double q = charge(sp);
    const double g = std::sqrt(1.0 + y[1] * y[1] + y[2] * y[2]);
    const double h1 = y[1] / g, h2 = y[2] / g;
    double E = 0.0, B = 0.0;
    if (!fe.zero()) fe.fields(y[0], E, B);
    return {h1, q * (E + h2 * B), -q * h1 * B};
}

void integrate_characteristic(const FieldEvaluator& fe, Species sp, const State& y0, double s_end,
                              const StepOptions& opts, const std::function<bool(const DenseStep&)>& on_step) {
    if (s_end == 0.0) return;
    const double dir = s_end < 0 ? -1.0 : 1.0;
    const double h_max = opts.h_max > 0 ? opts.h_max : fe.period() / 8.0;
    const bool fixed = opts.fixed_step > 0.0;
    double h = dir * (fixed ? opts.fixed_step : std::min(opts.h_init, h_max));
    double s = 0.0;
    State y = y0;
    State k1 = characteristic_rhs(fe, sp, y);
    long steps = 0;
    while (dir * (s_end - s) > 0.0) {
        if (++steps > opts.max_steps)
            throw Error(ErrorKind::StepFailure, "step budget exhausted before reaching s_end");
        bool last = false;
        if (dir * (s + h - s_end) >= 0.0) {
            h = s_end - s;
            last = true;
        }
        State k2 = characteristic_rhs(fe, sp, axpy(y, h, {{a21, &k1}}));
        State k3 = characteristic_rhs(fe, sp, axpy(y, h, {{a31, &k1}, {a32, &k2}}));
        State k4 = characteristic_rhs(fe, sp, axpy(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
        State k5 = characteristic_rhs(fe, sp, axpy(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
        State k6 =
            characteristic_rhs(fe, sp, axpy(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
        State ynew = axpy(y, h, {{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
        State k7 = characteristic_rhs(fe, sp, ynew);
        double err = 0.0;
        if (!fixed) {
            for (int i = 0; i < 3; ++i) {
                double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
                double sc = opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
                err += (ei / sc) * (ei / sc);
            }
            err = std::sqrt(err / 3.0);
        }
        if (fixed || err <= 1.0) {
            DenseStep st;
            st.s0 = s;
            st.h = h;
            st.r[0] = y;
            for (int i = 0; i < 3; ++i) {
                const double dy = ynew[i] - y[i];
                const double bspl = h * k1[i] - dy;
                st.r[1][i] = dy;
                st.r[2][i] = bspl;
                st.r[3][i] = dy - h * k7[i] - bspl;
                st.r[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
            }
            s = last ? s_end : s + h;
            y = ynew;
            k1 = k7;
            if (!on_step(st)) return;
            if (last) return;
            if (!fixed) {
                double fac = err > 0 ? 0.9 * std::pow(err, -0.2) : 10.0;
                h *= std::clamp(fac, 0.2, 10.0);
                if (std::abs(h) > h_max) h = dir * h_max;
            }
        } else {
            h *= std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
            if (std::abs(h) < opts.h_min)
                throw Error(ErrorKind::StepFailure, "step size underflow at s = " + std::to_string(s));
        }
    }
}

std::pair<double, double> invariants_of(const PhasePoint& point, const EquilibriumFields& fields) {
    double phi = 0.0, psi = 0.0;
    TrigSeries::eval_pair(fields.phi_s, fields.psi_s, point.x, phi, psi);
    const double q = charge(point.species);
    const double g = std::sqrt(1.0 + point.v1 * point.v1 + point.v2 * point.v2);
    return {g + q * phi, point.v2 + q * psi};
}

Trajectory integrate_trajectory(const EquilibriumFields& fields, const PhasePoint& start, double s_end,
                                const StepOptions& opts) {
    if (!(s_end < 0.0)) throw Error(ErrorKind::ConfigError, "s_end must be negative");
    FieldEvaluator fe(fields);
    const double P = fields.period;
    auto reduce = [P](double x) {
        double r = std::fmod(x, P);
        return r < 0 ? r + P : r;
    };
    Trajectory t;
    PhasePoint p0 = start;
    p0.x = reduce(start.x);
    t.s.push_back(0.0);
    t.states.push_back(p0);
    const auto inv0 = invariants_of(p0, fields);
    integrate_characteristic(fe, start.species, {start.x, start.v1, start.v2}, s_end, opts,
                             [&](const DenseStep& st) {
                                 State y = st.at(st.s0 + st.h);
                                 PhasePoint p{reduce(y[0]), y[1], y[2], start.species};
                                 t.s.push_back(st.s0 + st.h);
                                 t.states.push_back(p);
                                 auto inv = invariants_of(p, fields);
                                 t.e_drift = std::max(t.e_drift, std::abs(inv.first - inv0.first));
                                 t.p_drift = std::max(t.p_drift, std::abs(inv.second - inv0.second));
                                 return true;
                             });
    return t;
}

void write_trajectory_csv(const Trajectory& t, const EquilibriumFields& fields, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
    out << "s,x,v1,v2,e,p\n" << std::setprecision(17);
    for (std::size_t i = 0; i < t.s.size(); ++i) {
        auto inv = invariants_of(t.states[i], fields);
        out << t.s[i] << ',' << t.states[i].x << ',' << t.states[i].v1 << ',' << t.states[i].v2 << ','
            << inv.first << ',' << inv.second << '\n';
    }
}

namespace {

double spectral_tail(const std::vector<double>& X, const std::vector<double>& V1, const std::vector<double>& V2,
                     double k) {
    const int n = static_cast<int>(X.size());
    std::vector<cplx> in(n), out;
    double worst = 0.0;
    auto check = [&]() {
        complex_dft(in, out, -1);
        double top = 0.0, tail = 0.0;
        for (int j = 0; j < n; ++j) {
            const int freq = j <= n / 2 ? j : n - j;
            top = std::max(top, std::abs(out[j]));
            if (8 * freq >= 3 * n) tail = std::max(tail, std::abs(out[j]));
        }
        if (top > 0) worst = std::max(worst, tail / top);
    };
    for (int q = 0; q < n; ++q) in[q] = std::exp(cplx(0.0, k * X[q]));
    check();
    for (int q = 0; q < n; ++q) in[q] = cplx(V1[q], V2[q]);
    check();
    return worst;
}

void resample(const std::vector<DenseStep>& steps, double T, int n, Orbit& o) {
    o.X.resize(n);
    o.V1.resize(n);
    o.V2.resize(n);
    std::size_t k = 0;
    for (int q = 0; q < n; ++q) {
        const double s = -T * q / n;
        while (k + 1 < steps.size() && s < steps[k].s0 + steps[k].h) ++k;
        State y = steps[k].at(s);
        o.X[q] = y[0];
        o.V1[q] = y[1];
        o.V2[q] = y[2];
    }
}

}  // namespace

Orbit compute_orbit(const FieldEvaluator& fe, Species sp, double x, double v1, double v2, const OrbitOptions& opts) {
    Orbit o;
    const double P = fe.period();
    const State y0{x, v1, v2};
    const State f0 = characteristic_rhs(fe, sp, y0);
    if (std::abs(f0[0]) + std::abs(f0[1]) + std::abs(f0[2]) < 1e-14) {
        o.kind = OrbitKind::Stationary;
        o.X = {x};
        o.V1 = {v1};
        o.V2 = {v2};
        return o;
    }
    std::vector<DenseStep> steps;
    double closure = 0.0;
    bool closed = false;
    const bool turning = (v1 == 0.0);
    const double dv1_sign = f0[1] >= 0 ? 1.0 : -1.0;
    const double v1_sign = v1 > 0 ? 1.0 : -1.0;

    auto bisect = [](const DenseStep& st, double sa, double sb, const std::function<double(double)>& g) {
        double ga = g(sa);
        for (int it = 0; it < 80; ++it) {
            double sm = 0.5 * (sa + sb);
            double gm = g(sm);
            if ((gm < 0) == (ga < 0)) {
                sa = sm;
                ga = gm;
            } else {
                sb = sm;
            }
            if (std::abs(sb - sa) <= 1e-15 * std::max(1.0, std::abs(sa))) break;
        }
        (void)st;
        return 0.5 * (sa + sb);
    };

    integrate_characteristic(fe, sp, y0, -opts.T_cap, opts.step, [&](const DenseStep& st) {
        steps.push_back(st);
        const int sub = 8;
        State ya = st.r[0];
        double sa = st.s0;
        for (int k = 1; k <= sub; ++k) {
            const double sb = st.s0 + st.h * k / sub;
            const State yb = st.at(sb);
            if (!turning) {
                const double ua = (ya[0] - x) / P, ub = (yb[0] - x) / P;
                const double lo = std::min(ua, ub), hi = std::max(ua, ub);
                const long j0 = static_cast<long>(std::ceil(lo)), j1 = static_cast<long>(std::floor(hi));
                for (long jj = 0; jj <= j1 - j0; ++jj) {
                    const long j = ub > ua ? j0 + jj : j1 - jj;
                    const bool cross = (ua - j) * (ub - j) < 0 || (ub == j && ua != j);
                    if (!cross) continue;
                    const double target = x + j * P;
                    double sr = bisect(st, sa, sb, [&](double s) { return st.at(s)[0] - target; });
                    State yr = st.at(sr);
                    if ((yr[1] > 0 ? 1.0 : -1.0) == v1_sign && yr[1] != 0.0) {
                        closure = -sr;
                        closed = true;
                        return false;
                    }
                }
            } else {
                const bool cross = ya[1] * yb[1] < 0 || (yb[1] == 0.0 && ya[1] != 0.0);
                if (cross) {
                    double sr = bisect(st, sa, sb, [&](double s) { return st.at(s)[1]; });
                    State yr = st.at(sr);
                    const State fr = characteristic_rhs(fe, sp, yr);
                    const double u = (yr[0] - x) / P;
                    if ((fr[1] >= 0 ? 1.0 : -1.0) == dv1_sign && std::abs(u - std::round(u)) < 1e-6) {
                        closure = -sr;
                        closed = true;
                        return false;
                    }
                }
            }
            ya = yb;
            sa = sb;
        }
        return true;
    });
    o.steps = static_cast<long>(steps.size());
    if (!closed) {
        o.kind = OrbitKind::Window;
        o.period = -(steps.back().s0 + steps.back().h);
        resample(steps, o.period, opts.nq_max, o);
        return o;
    }
    o.kind = OrbitKind::Closed;
    o.period = closure;
    const double kmax = 2.0 * std::numbers::pi * std::max(1, opts.max_mode) / P;
    for (int n = opts.nq_min;; n *= 2) {
        resample(steps, closure, n, o);
        o.spectral_tail = spectral_tail(o.X, o.V1, o.V2, kmax);
        if (o.spectral_tail <= opts.spectral_tol || 2 * n > opts.nq_max) break;
    }
    return o;
}

}  // namespace vmstab
