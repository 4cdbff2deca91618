#include <doctest.h>

#include <cmath>
#include <random>

#include "vmstab/analysis.hpp"
#include "vmstab/errors.hpp"

using namespace vmstab;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

OperatorSet synthetic(const VectorXd& a1, const VectorXd& a2, double l, const MatrixXd& b = MatrixXd()) {
    OperatorSet o;
    o.lambda = 0.0;
    o.M = static_cast<int>(a1.size()) / 2;
    o.A1 = a1.asDiagonal();
    o.A2 = a2.asDiagonal();
    o.B = b.size() ? b : MatrixXd::Zero(a1.size(), a2.size());
    o.l = l;
    return o;
}

int count_neg(const MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
    int n = 0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) n += es.eigenvalues()(i) < 0;
    return n;
}

}  // namespace

TEST_CASE("verdict table on diagonal operator sets") {
    VectorXd one2 = VectorXd::Ones(2), one3 = VectorXd::Ones(3);
    SUBCASE("equal counts are inconclusive") {
        auto v = evaluate_criterion(synthetic(one2, one3, -1.0));
        CHECK(v.verdict == Verdict::Inconclusive);
        CHECK(v.lhs == 0);
        CHECK(v.rhs == 0);
    }
    SUBCASE("excess negative directions in K1 give theorem 1") {
        VectorXd a2(3);
        a2 << -1, 1, 2;
        auto v = evaluate_criterion(synthetic(one2, a2, -1.0));
        CHECK(v.verdict == Verdict::UnstableThm1);
        CHECK(v.lhs == 1);
    }
    SUBCASE("deficit with trivial ker A2 gives theorem 2") {
        VectorXd a1(2);
        a1 << -1, 1;
        auto v = evaluate_criterion(synthetic(a1, one3, -1.0));
        CHECK(v.verdict == Verdict::UnstableThm2);
        CHECK(v.rhs == 1);
    }
    SUBCASE("positive l0 contributes to the right-hand side") {
        auto v = evaluate_criterion(synthetic(one2, one3, 0.5));
        CHECK(v.neg_minus_l0 == 1);
        CHECK(v.rhs == 1);
        CHECK(v.verdict == Verdict::UnstableThm2);
    }
    SUBCASE("vanishing l0 is ambiguous") {
        auto v = evaluate_criterion(synthetic(one2, one3, 0.0));
        CHECK(v.verdict == Verdict::Ambiguous);
        CHECK_FALSE(v.hypotheses.l0_nonzero);
    }
    SUBCASE("singular A1 is ambiguous") {
        VectorXd a1(2);
        a1 << 0.0, 1.0;
        auto v = evaluate_criterion(synthetic(a1, one3, -1.0));
        CHECK(v.verdict == Verdict::Ambiguous);
        CHECK_FALSE(v.hypotheses.a1_kernel_constants);
    }
    SUBCASE("a zero eigenvalue of A2 makes an equality ambiguous") {
        VectorXd a1(2), a2(3);
        a1 << -1, 1;
        a2 << 0.0, 1, 1;
        MatrixXd b = MatrixXd::Zero(2, 3);
        b(0, 0) = 1.0;  // keeps K1 nonsingular: K1(0,0) = 0 + 1 * (-1) * 1
        auto v = evaluate_criterion(synthetic(a1, a2, -1.0, b));
        CHECK_FALSE(v.hypotheses.a2_kernel_trivial);
        CHECK(v.lhs == 1);
        CHECK(v.rhs == 1);
        CHECK(v.verdict == Verdict::Ambiguous);
    }
    SUBCASE("a zero eigenvalue of A2 makes an excess ambiguous") {
        VectorXd a1(2), a2(3);
        a1 << 1, 1;
        a2 << 0.0, -1, 1;
        MatrixXd b = MatrixXd::Zero(2, 3);
        b(0, 0) = 1.0;
        auto v = evaluate_criterion(synthetic(a1, a2, -1.0, b));
        CHECK(v.lhs == 1);  // K1 = diag(1, -1, 1)
        CHECK(v.rhs == 0);
        CHECK(v.verdict == Verdict::Ambiguous);
    }
    SUBCASE("deficit with a zero eigenvalue of A2 is ambiguous") {
        VectorXd a1(2), a2(3);
        a1 << -1, -1;
        a2 << 0.0, 1, 1;
        MatrixXd b = MatrixXd::Zero(2, 3);
        b(0, 0) = 1.0;
        auto v = evaluate_criterion(synthetic(a1, a2, -1.0, b));
        CHECK(v.lhs == 1);
        CHECK(v.rhs == 2);
        CHECK(v.verdict == Verdict::Ambiguous);
    }
}

TEST_CASE("lhs agrees with an explicit Schur complement") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 20; ++t) {
        VectorXd a1(4), a2(5);
        for (int i = 0; i < 4; ++i) a1(i) = nd(rng) + (nd(rng) > 0 ? 0.5 : -0.5);
        for (int i = 0; i < 5; ++i) a2(i) = nd(rng) + (nd(rng) > 0 ? 0.5 : -0.5);
        MatrixXd b(4, 5);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 5; ++j) b(i, j) = 0.5 * nd(rng);
        OperatorSet o = synthetic(a1, a2, -1.0, b);
        auto v = evaluate_criterion(o);
        if (v.verdict == Verdict::Ambiguous) continue;
        MatrixXd k = MatrixXd(a2.asDiagonal()) + b.transpose() * a1.cwiseInverse().asDiagonal() * b;
        CHECK(v.lhs == count_neg(k));
        int na = 0;
        for (int i = 0; i < 4; ++i) na += a1(i) < 0;
        CHECK(v.rhs == na);
    }
}

TEST_CASE("criterion refuses operators at nonzero lambda") {
    OperatorSet o = synthetic(VectorXd::Ones(2), VectorXd::Ones(3), -1.0);
    o.lambda = 0.5;
    CHECK_THROWS_AS(evaluate_criterion(o), Error);
}

TEST_CASE("truncation sweep on a diagonal set is constant from n = 1") {
    VectorXd a1(4), a2(5);
    a1 << -2, 1, 3, 4;
    a2 << -1, 2, 3, 5, 6;
    auto sw = truncation_sweep(synthetic(a1, a2, -1.0));
    REQUIRE(sw.rows.size() == 4);
    CHECK(sw.N1 == 1);
    for (const auto& r : sw.rows) {
        CHECK(r.neg_A1 == 1);
        CHECK(r.neg_K1 == 1);
    }
}

TEST_CASE("kernel crossing of a rotated family") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    MatrixXd g(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) g(i, j) = nd(rng);
    MatrixXd q = Eigen::HouseholderQR<MatrixXd>(g).householderQ();
    auto fam = [&](double lam) {
        VectorXd d(4);
        d << lam * lam - 2.0, 1.0, -1.0, 3.0 - lam;
        return MatrixXd(q * d.asDiagonal() * q.transpose());
    };
    ScanOptions so;
    Crossing c = find_kernel_crossing(fam, 0.5, 2.0, so);
    CHECK(c.lambda == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
    CHECK(std::abs(std::abs(c.u.dot(q.col(0))) - 1.0) < 1e-8);
    CHECK(c.neg_lo - c.neg_hi == 1);
    CHECK_THROWS_AS(find_kernel_crossing(fam, 0.5, 1.0, so), Error);
}

TEST_CASE("lambda scan grid is geometric and strictly increasing") {
    auto fam = [](double lam) {
        VectorXd d(3);
        d << 1.0 - lam, 2.0 - lam, -1.0;
        return MatrixXd(d.asDiagonal());
    };
    ScanOptions so;
    so.points = 25;
    so.lambda_min = 0.1;
    so.lambda_max = 9.0;
    ScanResult r = scan_lambda(fam, 3, so);
    REQUIRE(r.rows.size() == 25);
    for (std::size_t i = 1; i < r.rows.size(); ++i) CHECK(r.rows[i].lambda > r.rows[i - 1].lambda);
    CHECK(r.rows.back().lambda == 9.0);
    CHECK(r.rows.front().neg == 1);
    CHECK(r.rows.back().neg == 3);
    CHECK(r.brackets.size() == 2);
}

TEST_CASE("lifted kernel vector") {
    TruncationPair p;
    p.P = MatrixXd::Zero(4, 2);
    p.P(0, 0) = p.P(2, 1) = 1.0;
    p.Q = MatrixXd::Zero(5, 1);
    p.Q(4, 0) = 1.0;
    VectorXd u(4);
    u << 1, 2, 3, 4;
    VectorXd w = lift_kernel_vector(u, p);
    REQUIRE(w.size() == 10);
    VectorXd expect = VectorXd::Zero(10);
    expect(0) = 1;
    expect(2) = 2;
    expect(8) = 3;
    expect(9) = 4;
    expect /= expect.norm();
    CHECK((w - expect).norm() < 1e-15);
    // Sign convention: largest entry positive.
    CHECK(lift_kernel_vector(-u, p).isApprox(expect));
}
