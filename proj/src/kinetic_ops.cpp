#include "vmstab/kinetic_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vmstab/errors.hpp"
#include "vmstab/hash.hpp"
#include "vmstab/parallel.hpp"

namespace vmstab {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

double reduce(double x, double P) {
    double r = std::fmod(x, P);
    return r < 0 ? r + P : r;
}

void check_grid(const PhaseGrid& grid, const PhaseFunction& f) {
    if (f.grid_hash != grid.hash || f.values.size() != grid.size())
        throw Error(ErrorKind::GridMismatch, "phase function belongs to a different grid");
}

// Lagrange differentiation matrix on the velocity nodes, block diagonal over panels.
std::vector<double> velocity_diff_matrix(const VelocityGrid& vg) {
    const int n = vg.n, m = n / vg.panels;
    const double h = vg.v_max / vg.panels;
    std::vector<double> D(static_cast<std::size_t>(n) * n, 0.0);
    for (int p0 = 0; p0 < n; p0 += m) {
        std::vector<double> bw(m, 1.0);
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k)
                if (k != j) bw[j] /= (vg.v[p0 + j] - vg.v[p0 + k]) / h;
        for (int i = 0; i < m; ++i) {
            double diag = 0.0;
            for (int j = 0; j < m; ++j) {
                if (i == j) continue;
                double d = (bw[j] / bw[i]) / (vg.v[p0 + i] - vg.v[p0 + j]);
                D[(p0 + i) * n + p0 + j] = d;
                diag -= d;
            }
            D[(p0 + i) * n + p0 + i] = diag;
        }
    }
    return D;
}

// Trigonometric in x, four-point Lagrange in each velocity direction.
class GridInterpolator {
public:
    GridInterpolator(const PhaseGrid& grid, const PhaseFunction& f) : grid_(grid) {
        const int n = grid.vg.n;
        series_.resize(static_cast<std::size_t>(n) * n);
        std::vector<double> col(grid.nx);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                for (int j = 0; j < grid.nx; ++j) col[j] = f.values[grid.index(j, a, b)];
                series_[a * n + b] = TrigSeries(col, grid.period);
            }
    }

    double operator()(double x, double v1, double v2) const {
        int ia, ib;
        double wa[4], wb[4];
        stencil(v1, ia, wa);
        stencil(v2, ib, wb);
        const int n = grid_.vg.n;
        double s = 0.0;
        for (int p = 0; p < 4; ++p)
            for (int r = 0; r < 4; ++r) s += wa[p] * wb[r] * series_[(ia + p) * n + ib + r](x);
        return s;
    }

private:
    void stencil(double v, int& i0, double w[4]) const {
        const auto& nodes = grid_.vg.v;
        const int n = grid_.vg.n;
        int k = static_cast<int>(std::upper_bound(nodes.begin(), nodes.end(), v) - nodes.begin());
        i0 = std::clamp(k - 2, 0, n - 4);
        for (int p = 0; p < 4; ++p) {
            double l = 1.0;
            for (int r = 0; r < 4; ++r)
                if (r != p) l *= (v - nodes[i0 + r]) / (nodes[i0 + p] - nodes[i0 + r]);
            w[p] = l;
        }
    }

    const PhaseGrid& grid_;
    std::vector<TrigSeries> series_;
};

}  // namespace

double PhaseGrid::measure(std::size_t i) const {
    const std::size_t n = static_cast<std::size_t>(vg.n);
    const std::size_t b = i % n, a = (i / n) % n;
    return period / nx * vg.w[a] * vg.w[b];
}

PhaseGrid PhaseGrid::build(const EquilibriumProfile& profile, const EquilibriumFields& fields,
                           const VelocityGrid& vg) {
    PhaseGrid g;
    g.period = fields.period;
    g.nx = fields.nx();
    g.vg = vg;
    g.x = fields.x;
    for (Species s : {Species::Plus, Species::Minus}) {
        auto& w = g.weight[static_cast<int>(s)];
        w.resize(g.size());
        const double q = charge(s);
        for (int j = 0; j < g.nx; ++j)
            for (int a = 0; a < vg.n; ++a)
                for (int b = 0; b < vg.n; ++b) {
                    const double e =
                        std::sqrt(1.0 + vg.v[a] * vg.v[a] + vg.v[b] * vg.v[b]) + q * fields.phi0[j];
                    w[g.index(j, a, b)] = profile.weight(e);
                }
    }
    std::uint64_t h = fnv1a(&g.period, sizeof(double));
    h = fnv1a(&g.nx, sizeof(int), h);
    h = fnv1a(vg.v, h);
    h = fnv1a(vg.w, h);
    h = fnv1a(fields.phi0, h);
    h = fnv1a(fields.psi0, h);
    g.hash = h;
    return g;
}

PhaseFunction sample_phase_function(const PhaseGrid& grid, Species sp, const PhaseFn& f) {
    PhaseFunction out;
    out.species = sp;
    out.grid_hash = grid.hash;
    out.values.resize(grid.size());
    for (int j = 0; j < grid.nx; ++j)
        for (int a = 0; a < grid.vg.n; ++a)
            for (int b = 0; b < grid.vg.n; ++b)
                out.values[grid.index(j, a, b)] = f(grid.x[j], grid.vg.v[a], grid.vg.v[b]);
    return out;
}

double weighted_inner(const PhaseGrid& grid, const PhaseFunction& f, const PhaseFunction& g) {
    check_grid(grid, f);
    check_grid(grid, g);
    if (f.species != g.species) throw Error(ErrorKind::GridMismatch, "inner product across species");
    const auto& w = grid.weight[static_cast<int>(f.species)];
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) s += grid.measure(i) * w[i] * f.values[i] * g.values[i];
    return s;
}

double weighted_norm(const PhaseGrid& grid, const PhaseFunction& f) { return std::sqrt(weighted_inner(grid, f, f)); }

PhaseFunction apply_D(const PhaseGrid& grid, const EquilibriumFields& fields, const PhaseFunction& k) {
    check_grid(grid, k);
    const int n = grid.vg.n, nx = grid.nx;
    const double q = charge(k.species);
    const auto Dv = velocity_diff_matrix(grid.vg);
    PhaseFunction out = k;
    std::vector<double> col(nx);
    std::vector<double> dx(grid.size()), d1(grid.size(), 0.0), d2(grid.size(), 0.0);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            for (int j = 0; j < nx; ++j) col[j] = k.values[grid.index(j, a, b)];
            auto d = spectral_derivative(col, grid.period, 1);
            for (int j = 0; j < nx; ++j) dx[grid.index(j, a, b)] = d[j];
        }
    for (int j = 0; j < nx; ++j)
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                double s1 = 0.0, s2 = 0.0;
                for (int c = 0; c < n; ++c) {
                    s1 += Dv[a * n + c] * k.values[grid.index(j, c, b)];
                    s2 += Dv[b * n + c] * k.values[grid.index(j, a, c)];
                }
                d1[grid.index(j, a, b)] = s1;
                d2[grid.index(j, a, b)] = s2;
            }
    for (int j = 0; j < nx; ++j)
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const std::size_t i = grid.index(j, a, b);
                const double v1 = grid.vg.v[a], v2 = grid.vg.v[b];
                const double g = std::sqrt(1.0 + v1 * v1 + v2 * v2);
                const double h1 = v1 / g, h2 = v2 / g;
                out.values[i] = h1 * dx[i] + q * (fields.E1_0[j] + h2 * fields.B0[j]) * d1[i] -
                                q * h1 * fields.B0[j] * d2[i];
            }
    return out;
}

OrbitBank::OrbitBank(const PhaseGrid& grid, const EquilibriumFields& fields, Species sp, const KineticOptions& opts)
    : grid_(&grid), sp_(sp), opts_(opts), period_(grid.period) {
    int nf = opts.orbit.nq_min;
    while (nf < 4 * (opts.orbit.max_mode + 1)) nf *= 2;
    free_samples_ = nf;
    orbits_.resize(grid.size());
    FieldEvaluator fe(fields);
    const bool analytic = fe.zero() && !opts.force_integration;
    const int n = grid.vg.n;
    parallel_for(grid.size(), [&](std::size_t i) {
        const std::size_t b = i % n, a = (i / n) % n, j = i / (static_cast<std::size_t>(n) * n);
        const double x = grid.x[j], v1 = grid.vg.v[a], v2 = grid.vg.v[b];
        Orbit& o = orbits_[i];
        if (analytic) {
            if (v1 == 0.0) {
                o.kind = OrbitKind::Stationary;
                o.X = {x};
                o.V1 = {v1};
                o.V2 = {v2};
            } else {
                o.kind = OrbitKind::Free;
                const double h1 = v1 / std::sqrt(1.0 + v1 * v1 + v2 * v2);
                o.period = period_ / std::abs(h1);
            }
            return;
        }
        o = compute_orbit(fe, sp, x, v1, v2, opts.orbit);
    });
    for (const auto& o : orbits_) {
        switch (o.kind) {
            case OrbitKind::Closed: ++stats_.closed; break;
            case OrbitKind::Window: ++stats_.window; break;
            case OrbitKind::Stationary: ++stats_.stationary; break;
            case OrbitKind::Free: ++stats_.free; break;
        }
        stats_.max_steps = std::max(stats_.max_steps, o.steps);
        stats_.max_samples = std::max(stats_.max_samples, static_cast<int>(o.X.size()));
        stats_.max_period = std::max(stats_.max_period, o.period);
        stats_.max_spectral_tail = std::max(stats_.max_spectral_tail, o.spectral_tail);
    }
}

void OrbitBank::samples(std::size_t i, std::vector<double>& X, std::vector<double>& V1,
                        std::vector<double>& V2) const {
    const Orbit& o = orbits_[i];
    if (o.kind != OrbitKind::Free) {
        X = o.X;
        V1 = o.V1;
        V2 = o.V2;
        return;
    }
    const int n = grid_->vg.n;
    const std::size_t b = i % n, a = (i / n) % n, j = i / (static_cast<std::size_t>(n) * n);
    const double x = grid_->x[j], v1 = grid_->vg.v[a], v2 = grid_->vg.v[b];
    const int N = free_samples_;
    X.resize(N);
    V1.assign(N, v1);
    V2.assign(N, v2);
    const double dir = v1 > 0 ? 1.0 : -1.0;
    for (int q = 0; q < N; ++q) X[q] = x - dir * period_ * q / N;
}

void OrbitBank::weights(std::size_t i, double lambda, std::vector<double>& w) const {
    const Orbit& o = orbits_[i];
    if (o.kind == OrbitKind::Stationary) {
        w.assign(1, 1.0);
        return;
    }
    const int N = o.kind == OrbitKind::Free ? free_samples_ : static_cast<int>(o.X.size());
    if (lambda == 0.0) {
        w.assign(N, 1.0 / N);
        return;
    }
    if (o.kind == OrbitKind::Window && opts_.strict_tail && std::exp(-lambda * o.period) > opts_.tail_tol)
        throw Error(ErrorKind::TailTooLarge, "orbit did not close within T_cap and exp(-lambda T) = " +
                                                 std::to_string(std::exp(-lambda * o.period)));
    // Exact Laplace weights for the band-limited periodic interpolant of the samples.
    const double a = lambda * o.period;
    std::vector<cplx> c(N), out;
    for (int jj = 0; jj < N; ++jj) {
        const int j = jj <= N / 2 ? jj : jj - N;
        if (2 * jj == N)
            c[jj] = a * a / (a * a + std::numbers::pi * std::numbers::pi * N * N);
        else
            c[jj] = a / cplx(a, two_pi * j);
    }
    complex_dft(c, out, +1);
    w.resize(N);
    for (int q = 0; q < N; ++q) w[q] = out[q].real() / N;
}

void OrbitBank::apply_modes(std::size_t i, double lambda, int M, cplx* G, cplx* H, double& c) const {
    const Orbit& o = orbits_[i];
    const double k1 = two_pi / period_;
    if (o.kind == OrbitKind::Free || o.kind == OrbitKind::Stationary) {
        const int n = grid_->vg.n;
        const std::size_t b = i % n, a = (i / n) % n, j = i / (static_cast<std::size_t>(n) * n);
        const double x = grid_->x[j], v1 = grid_->vg.v[a], v2 = grid_->vg.v[b];
        const double g = std::sqrt(1.0 + v1 * v1 + v2 * v2);
        const double h1 = v1 / g, h2 = v2 / g;
        for (int m = 0; m <= M; ++m) {
            const double km = k1 * m;
            cplx mult;
            if (o.kind == OrbitKind::Stationary || m == 0)
                mult = 1.0;
            else if (lambda == 0.0)
                mult = 0.0;
            else
                mult = lambda / cplx(lambda, km * h1);
            G[m] = std::polar(1.0, km * x) * mult;
            H[m] = h2 * G[m];
        }
        c = h1;
        return;
    }
    std::vector<double> w;
    weights(i, lambda, w);
    for (int m = 0; m <= M; ++m) G[m] = H[m] = 0.0;
    c = 0.0;
    for (std::size_t q = 0; q < w.size(); ++q) {
        const double g = std::sqrt(1.0 + o.V1[q] * o.V1[q] + o.V2[q] * o.V2[q]);
        const double h1 = o.V1[q] / g, h2 = o.V2[q] / g;
        const cplx z = std::polar(1.0, k1 * o.X[q]);
        cplx zm = w[q];
        for (int m = 0; m <= M; ++m) {
            G[m] += zm;
            H[m] += h2 * zm;
            zm *= z;
        }
        c += w[q] * h1;
    }
}

double OrbitBank::apply_fn(std::size_t i, double lambda, const PhaseFn& k) const {
    std::vector<double> X, V1, V2, w;
    samples(i, X, V1, V2);
    weights(i, lambda, w);
    double s = 0.0;
    for (std::size_t q = 0; q < w.size(); ++q) s += w[q] * k(reduce(X[q], period_), V1[q], V2[q]);
    return s;
}

PhaseFunction apply_Q_lambda(const OrbitBank& bank, const PhaseFn& k, double lambda) {
    if (!(lambda > 0.0)) throw Error(ErrorKind::ConfigError, "Q^lambda needs lambda > 0");
    PhaseFunction out;
    out.species = bank.species();
    out.grid_hash = bank.grid().hash;
    out.values.resize(bank.grid().size());
    parallel_for(out.values.size(), [&](std::size_t i) { out.values[i] = bank.apply_fn(i, lambda, k); });
    return out;
}

PhaseFunction apply_Q_lambda(const OrbitBank& bank, const PhaseFunction& k, double lambda) {
    check_grid(bank.grid(), k);
    GridInterpolator interp(bank.grid(), k);
    return apply_Q_lambda(bank, PhaseFn([&](double x, double v1, double v2) { return interp(x, v1, v2); }), lambda);
}

namespace {

ProjectionResult project_impl(const OrbitBank& bank, const PhaseFn& k, const KineticOptions& opts) {
    const PhaseGrid& grid = bank.grid();
    ProjectionResult r;
    r.value.species = bank.species();
    r.value.grid_hash = grid.hash;
    r.value.values.resize(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) { r.value.values[i] = bank.apply_fn(i, 0.0, k); });
    PhaseFunction abel = apply_Q_lambda(bank, k, opts.lambda_proj);
    PhaseFunction kk = sample_phase_function(grid, bank.species(), k);
    PhaseFunction diff = abel;
    for (std::size_t i = 0; i < diff.values.size(); ++i) diff.values[i] -= r.value.values[i];
    const double nk = weighted_norm(grid, kk);
    r.disagreement = nk > 0 ? weighted_norm(grid, diff) / nk : 0.0;
    if (opts.check_projection && r.disagreement > opts.proj_tol)
        throw Error(ErrorKind::ProjectionDisagreement,
                    "orbit average and Abel limit differ by " + std::to_string(r.disagreement));
    return r;
}

}  // namespace

ProjectionResult apply_projection(const OrbitBank& bank, const PhaseFn& k, const KineticOptions& opts) {
    return project_impl(bank, k, opts);
}

ProjectionResult apply_projection(const OrbitBank& bank, const PhaseFunction& k, const KineticOptions& opts) {
    check_grid(bank.grid(), k);
    GridInterpolator interp(bank.grid(), k);
    ProjectionResult r =
        project_impl(bank, PhaseFn([&](double x, double v1, double v2) { return interp(x, v1, v2); }), opts);
    return r;
}

}  // namespace vmstab
