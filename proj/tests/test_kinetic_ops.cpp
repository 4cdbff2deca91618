#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "vmstab/characteristics.hpp"
#include "vmstab/errors.hpp"
#include "vmstab/kinetic_ops.hpp"

using namespace vmstab;
constexpr double pi = std::numbers::pi;

namespace {

struct Setup {
    EquilibriumProfile prof;
    EquilibriumFields fields;
    VelocityGrid vg;
    PhaseGrid grid;
};

Setup make_setup(bool with_fields, int nx, int nv, double v_max, int panels = 1) {
    Setup s;
    s.prof.model = make_builtin_profile("homogeneous-maxwellian", {});
    s.prof.period = 6.0;
    s.prof.v_max = v_max;
    if (with_fields) {
        std::vector<double> phi(nx), psi(nx);
        for (int j = 0; j < nx; ++j) {
            const double x = 6.0 * j / nx;
            phi[j] = 0.3 * std::cos(2 * pi * x / 6.0);
            psi[j] = 0.4 * std::sin(2 * pi * x / 6.0);
        }
        s.fields = EquilibriumFields::from_potentials(6.0, phi, psi);
    } else {
        s.fields = EquilibriumFields::vacuum(6.0, nx);
    }
    s.vg = VelocityGrid::gauss_legendre(nv, v_max, panels);
    s.grid = PhaseGrid::build(s.prof, s.fields, s.vg);
    return s;
}

double rel_diff(const PhaseGrid& g, const PhaseFunction& a, const PhaseFunction& b) {
    PhaseFunction d = a;
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] -= b.values[i];
    return weighted_norm(g, d) / weighted_norm(g, b);
}

}  // namespace

TEST_CASE("weighted inner product is symmetric and definite") {
    auto s = make_setup(true, 8, 8, 4.0);
    auto f = sample_phase_function(s.grid, Species::Plus, [](double x, double v1, double v2) { return std::cos(x) + v1 * v2; });
    auto g = sample_phase_function(s.grid, Species::Plus, [](double x, double v1, double) { return std::sin(x) * v1 + 1.0; });
    CHECK(weighted_inner(s.grid, f, g) == doctest::Approx(weighted_inner(s.grid, g, f)));
    CHECK(weighted_norm(s.grid, f) > 0.0);
    CHECK(weighted_norm(s.grid, f) * weighted_norm(s.grid, f) == doctest::Approx(weighted_inner(s.grid, f, f)));
    auto other = sample_phase_function(s.grid, Species::Minus, [](double, double, double) { return 1.0; });
    CHECK(other.grid_hash == f.grid_hash);
    CHECK(s.grid.size() == 8u * 8u * 8u);
}

TEST_CASE("transport of a function of x only") {
    auto s = make_setup(true, 16, 8, 4.0);
    const double k = 2 * pi / 6.0;
    auto f = sample_phase_function(s.grid, Species::Minus, [&](double x, double, double) { return std::sin(2 * k * x); });
    auto d = apply_D(s.grid, s.fields, f);
    for (int j = 0; j < s.grid.nx; ++j)
        for (int a = 0; a < s.vg.n; ++a)
            for (int b = 0; b < s.vg.n; ++b) {
                const double v1 = s.vg.v[a], v2 = s.vg.v[b];
                const double expect = v1 / std::sqrt(1 + v1 * v1 + v2 * v2) * 2 * k * std::cos(2 * k * s.grid.x[j]);
                CHECK(d.values[s.grid.index(j, a, b)] == doctest::Approx(expect).epsilon(1e-10));
            }
}

TEST_CASE("transport annihilates functions of the invariants") {
    // The invariants are analytic in v with branch points at distance >= 1, so a single panel converges fast.
    auto s = make_setup(true, 32, 64, 4.0);
    for (Species sp : {Species::Plus, Species::Minus}) {
        const double q = charge(sp);
        auto k = sample_phase_function(s.grid, sp, [&](double x, double v1, double v2) {
            const double phi = 0.3 * std::cos(2 * pi * x / 6.0), psi = 0.4 * std::sin(2 * pi * x / 6.0);
            const double e = std::sqrt(1 + v1 * v1 + v2 * v2) + q * phi, p = v2 + q * psi;
            return std::exp(-0.5 * e) * std::cos(p);
        });
        auto d = apply_D(s.grid, s.fields, k);
        CHECK(weighted_norm(s.grid, d) < 1e-6 * weighted_norm(s.grid, k));
    }
}

TEST_CASE("free-streaming average has the resolvent multiplier") {
    auto s = make_setup(false, 8, 6, 3.0);
    KineticOptions ko;
    OrbitBank bank(s.grid, s.fields, Species::Plus, ko);
    const double k = 2 * pi / 6.0;
    for (double lam : {0.3, 2.0}) {
        auto q = apply_Q_lambda(bank, [&](double x, double, double) { return std::cos(k * x); }, lam);
        for (int j = 0; j < s.grid.nx; ++j)
            for (int a = 0; a < s.vg.n; ++a)
                for (int b = 0; b < s.vg.n; ++b) {
                    const double v1 = s.vg.v[a], v2 = s.vg.v[b];
                    const double vh = v1 / std::sqrt(1 + v1 * v1 + v2 * v2);
                    const std::complex<double> m = lam / std::complex<double>(lam, k * vh);
                    const double expect = (m * std::exp(std::complex<double>(0, k * s.grid.x[j]))).real();
                    CHECK(q.values[s.grid.index(j, a, b)] == doctest::Approx(expect).epsilon(1e-9));
                }
    }
}

TEST_CASE("averaging leaves invariant functions unchanged") {
    auto s = make_setup(true, 8, 6, 3.0);
    KineticOptions ko;
    OrbitBank bank(s.grid, s.fields, Species::Minus, ko);
    auto inv = [&](double x, double v1, double v2) {
        const double phi = 0.3 * std::cos(2 * pi * x / 6.0), psi = 0.4 * std::sin(2 * pi * x / 6.0);
        return std::exp(-(std::sqrt(1 + v1 * v1 + v2 * v2) - phi)) * (1.0 + 0.5 * (v2 - psi));
    };
    auto k = sample_phase_function(s.grid, Species::Minus, inv);
    for (double lam : {0.05, 1.0, 20.0}) CHECK(rel_diff(s.grid, apply_Q_lambda(bank, inv, lam), k) < 1e-7);
    ProjectionResult pr = apply_projection(bank, inv, ko);
    CHECK(rel_diff(s.grid, pr.value, k) < 1e-7);
    CHECK(pr.disagreement < 1e-7);
    CHECK(bank.stats().closed + bank.stats().stationary + bank.stats().window == s.grid.size());
}

TEST_CASE("Q of a sampled function matches Q of the formula") {
    auto s = make_setup(true, 16, 24, 3.0);
    KineticOptions ko;
    OrbitBank bank(s.grid, s.fields, Species::Plus, ko);
    auto fn = [](double x, double v1, double) { return std::sin(2 * pi * x / 6.0) * std::exp(-v1 * v1); };
    auto a = apply_Q_lambda(bank, fn, 0.7);
    auto b = apply_Q_lambda(bank, sample_phase_function(s.grid, Species::Plus, fn), 0.7);
    CHECK(rel_diff(s.grid, b, a) < 1e-2);
}

TEST_CASE("transport with composite velocity panels") {
    auto s = make_setup(true, 16, 96, 6.0, 6);
    const double k = 2 * pi / 6.0;
    auto f = sample_phase_function(s.grid, Species::Plus, [&](double x, double v1, double v2) {
        return std::cos(k * x) * std::exp(-0.5 * v1 * v1) * std::sin(v2);
    });
    auto d = apply_D(s.grid, s.fields, f);
    FieldEvaluator fe(s.fields);
    double err = 0.0, scale = 0.0;
    for (int j = 0; j < s.grid.nx; ++j)
        for (int a = 0; a < s.vg.n; ++a)
            for (int b = 0; b < s.vg.n; ++b) {
                const double x = s.grid.x[j], v1 = s.vg.v[a], v2 = s.vg.v[b];
                const double g = std::sqrt(1 + v1 * v1 + v2 * v2);
                double E, B;
                fe.fields(x, E, B);
                const double e1 = std::exp(-0.5 * v1 * v1);
                const double fx = -k * std::sin(k * x) * e1 * std::sin(v2);
                const double fv1 = std::cos(k * x) * (-v1 * e1) * std::sin(v2);
                const double fv2 = std::cos(k * x) * e1 * std::cos(v2);
                const double expect = v1 / g * fx + (E + v2 / g * B) * fv1 - v1 / g * B * fv2;
                err = std::max(err, std::abs(d.values[s.grid.index(j, a, b)] - expect));
                scale = std::max(scale, std::abs(expect));
            }
    CHECK(err < 1e-6 * scale);
}

TEST_CASE("grid mismatch is rejected") {
    auto s1 = make_setup(false, 8, 6, 3.0), s2 = make_setup(false, 16, 6, 3.0);
    auto f = sample_phase_function(s1.grid, Species::Plus, [](double, double, double) { return 1.0; });
    CHECK_THROWS_AS(weighted_norm(s2.grid, f), Error);
}
