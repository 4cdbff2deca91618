#include "vmstab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vmstab/errors.hpp"
#include "vmstab/parallel.hpp"

namespace vmstab {

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::UnstableThm1: return "UnstableThm1";
        case Verdict::UnstableThm2: return "UnstableThm2";
        case Verdict::Inconclusive: return "Inconclusive";
        case Verdict::Ambiguous: return "Ambiguous";
    }
    return "?";
}

namespace {

double spectral_norm(const Eigen::VectorXd& ev) { return ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0; }

double min_abs(const std::vector<double>& ev) {
    double m = std::numeric_limits<double>::infinity();
    for (double e : ev) m = std::min(m, std::abs(e));
    return m;
}

}  // namespace

HypothesisFlags check_hypotheses(const OperatorSet& ops0, const CriterionOptions& opts) {
    HypothesisFlags h;
    InertiaReport a1 = inertia_count(ops0.A1, -1.0);
    InertiaReport a2 = inertia_count(ops0.A2, -1.0);
    auto tol_of = [&](const InertiaReport& r) {
        double s = 0.0;
        for (double e : r.eigenvalues) s = std::max(s, std::abs(e));
        return opts.zero_tol_rel * s;
    };
    h.a1_zero_tol = tol_of(a1);
    h.a1_min_abs_eig = min_abs(a1.eigenvalues);
    h.a1_kernel_constants = h.a1_min_abs_eig > h.a1_zero_tol;
    h.a2_zero_tol = tol_of(a2);
    h.a2_min_abs_eig = min_abs(a2.eigenvalues);
    h.a2_kernel_trivial = h.a2_min_abs_eig > h.a2_zero_tol;
    h.l0 = ops0.l;
    h.l0_tol = opts.l0_tol;
    h.l0_nonzero = std::abs(ops0.l) > opts.l0_tol;
    return h;
}

CriterionVerdict evaluate_criterion(const OperatorSet& ops0, const CriterionOptions& opts) {
    if (ops0.lambda != 0.0) throw Error(ErrorKind::ConfigError, "criterion needs the lambda = 0 operators");
    CriterionVerdict v;
    v.dim = ops0.M;
    v.hypotheses = check_hypotheses(ops0, opts);
    auto count = [&](const Eigen::MatrixXd& S) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw Error(ErrorKind::EigFailure, "symmetric eigensolver did not converge");
        return inertia_from_eigenvalues(es.eigenvalues(), opts.zero_tol_rel * spectral_norm(es.eigenvalues()));
    };
    v.A1 = count(ops0.A1);
    v.A2 = count(ops0.A2);
    v.neg_minus_l0 = ops0.l > 0.0 && v.hypotheses.l0_nonzero ? 1 : 0;
    if (!v.hypotheses.a1_kernel_constants) {
        v.verdict = Verdict::Ambiguous;
        v.reason = "A1^0 is numerically singular on the mean-zero space";
        v.rhs = v.A1.neg + v.neg_minus_l0;
        return v;
    }
    v.K1 = count(k1_operator(ops0.A1, ops0.A2, ops0.B, opts.singular_tol));
    v.lhs = v.K1.neg;
    v.rhs = v.A1.neg + v.neg_minus_l0;
    if (!v.hypotheses.l0_nonzero) {
        v.verdict = Verdict::Ambiguous;
        v.reason = "l0 is zero within tolerance";
    } else if (v.K1.zero > 0) {
        v.verdict = Verdict::Ambiguous;
        v.reason = "K1^0 has an eigenvalue inside the zero band";
    } else if (!v.hypotheses.a2_kernel_trivial) {
        // Counts near a zero of A2^0 are not trusted in either direction.
        v.verdict = Verdict::Ambiguous;
        v.reason = "A2^0 has an eigenvalue inside the zero band";
    } else if (v.lhs > v.rhs) {
        v.verdict = Verdict::UnstableThm1;
        v.reason = "neg(K1^0) > neg(A1^0) + neg(-l0)";
    } else if (v.lhs < v.rhs) {
        v.verdict = Verdict::UnstableThm2;
        v.reason = "neg(K1^0) != neg(A1^0) + neg(-l0) and ker A2^0 is trivial";
    } else {
        v.verdict = Verdict::Inconclusive;
        v.reason = "neg(K1^0) = neg(A1^0) + neg(-l0)";
    }
    return v;
}

TruncationSweep truncation_sweep(const OperatorSet& ops0, const CriterionOptions& opts) {
    TruncationSweep sw;
    const int dim = static_cast<int>(std::min(ops0.A1.rows(), ops0.A2.rows()));
    for (int n = 1; n <= dim; ++n) {
        TruncationPair p = truncation_projectors_adjusted(ops0.A1, ops0.A2, n);
        const Eigen::MatrixXd A1n = p.P.transpose() * ops0.A1 * p.P;
        const Eigen::MatrixXd A2n = p.Q.transpose() * ops0.A2 * p.Q;
        const Eigen::MatrixXd Bn = p.P.transpose() * ops0.B * p.Q;
        TruncationRow r;
        r.n = n;
        r.rank_phi = p.rank_phi();
        r.rank_psi = p.rank_psi();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(A1n, Eigen::EigenvaluesOnly);
        r.neg_A1 = inertia_from_eigenvalues(e1.eigenvalues(), opts.zero_tol_rel * spectral_norm(e1.eigenvalues())).neg;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ek(k1_operator(A1n, A2n, Bn, opts.singular_tol),
                                                          Eigen::EigenvaluesOnly);
        InertiaReport k = inertia_from_eigenvalues(ek.eigenvalues(), opts.zero_tol_rel * spectral_norm(ek.eigenvalues()));
        r.neg_K1 = k.neg;
        r.zero_K1 = k.zero;
        sw.rows.push_back(r);
    }
    // N1: start of the final run of constant counts.
    for (int i = static_cast<int>(sw.rows.size()) - 1; i >= 0; --i) {
        const auto& a = sw.rows[i];
        const auto& last = sw.rows.back();
        if (a.neg_A1 != last.neg_A1 || a.neg_K1 != last.neg_K1) break;
        sw.N1 = a.n;
    }
    return sw;
}

LambdaProblem::LambdaProblem(const AssemblyContext& ctx, const OperatorOptions& oopts) : ctx_(ctx), oopts_(oopts) {}

std::shared_ptr<const OperatorSet> LambdaProblem::at(double lambda) const {
    {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = cache_.find(lambda);
        if (it != cache_.end()) return it->second;
    }
    auto ops = std::make_shared<const OperatorSet>(assemble_operator_set(lambda, ctx_, oopts_));
    std::lock_guard<std::mutex> lk(mu_);
    return cache_.emplace(lambda, ops).first->second;
}

std::size_t LambdaProblem::evaluations() const {
    std::lock_guard<std::mutex> lk(mu_);
    return cache_.size();
}

namespace {

struct EigAt {
    Eigen::VectorXd val;
    Eigen::MatrixXd vec;
    double norm = 0.0;
};

EigAt eig_of(const Eigen::MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::EigFailure, "symmetric eigensolver did not converge");
    return {es.eigenvalues(), es.eigenvectors(), spectral_norm(es.eigenvalues())};
}

InertiaReport counts_of(const EigAt& e, double zero_tol_rel) {
    return inertia_from_eigenvalues(e.val, zero_tol_rel * e.norm);
}

int closest_to_zero(const Eigen::VectorXd& v) {
    int k = 0;
    for (int i = 1; i < v.size(); ++i)
        if (std::abs(v(i)) < std::abs(v(k))) k = i;
    return k;
}

int best_overlap(const Eigen::MatrixXd& vec, const Eigen::VectorXd& u) {
    Eigen::VectorXd ov = (vec.transpose() * u).cwiseAbs();
    int k = 0;
    ov.maxCoeff(&k);
    return k;
}

}  // namespace

double find_lambda_max(const TruncatedFamily& fam, const ScanOptions& opts, std::vector<std::pair<double, int>>* seen) {
    double lam = opts.lambda_start;
    bool prev = false;
    for (int i = 0; i <= opts.max_doublings; ++i, lam *= 2.0) {
        const Eigen::MatrixXd S = fam.at(lam);
        InertiaReport r = counts_of(eig_of(S), opts.zero_tol_rel);
        const bool ok = r.neg == fam.plateau() && r.zero == 0;
        if (seen) seen->emplace_back(lam, r.neg);
        if (ok && prev) return lam;
        prev = ok;
    }
    throw Error(ErrorKind::NoConvergence,
                "no large-lambda plateau of " + std::to_string(fam.plateau()) + " negative eigenvalues found");
}

ScanResult scan_lambda(const std::function<Eigen::MatrixXd(double)>& fam, int plateau, const ScanOptions& opts) {
    if (!(opts.lambda_max > opts.lambda_min) || opts.lambda_min <= 0.0 || opts.points < 2)
        throw Error(ErrorKind::ConfigError, "lambda grid needs 0 < lambda_min < lambda_max and >= 2 points");
    ScanResult res;
    res.lambda_max = opts.lambda_max;
    res.plateau = plateau;
    res.rows.resize(opts.points);
    const double ratio = std::log(opts.lambda_max / opts.lambda_min) / (opts.points - 1);
    for (int i = 0; i < opts.points; ++i) {
        const double lam = i + 1 == opts.points ? opts.lambda_max : opts.lambda_min * std::exp(ratio * i);
        EigAt e = eig_of(fam(lam));
        InertiaReport r = counts_of(e, opts.zero_tol_rel);
        ScanRow& row = res.rows[i];
        row.lambda = lam;
        row.neg = r.neg;
        row.zero = r.zero;
        row.pos = r.pos;
        row.margin = r.margin;
        row.tracked = e.val(closest_to_zero(e.val));
    }
    for (int i = 0; i + 1 < opts.points; ++i)
        if (res.rows[i].neg != res.rows[i + 1].neg) res.brackets.emplace_back(i, i + 1);
    return res;
}

ScanResult scan_lambda(const TruncatedFamily& fam, const ScanOptions& opts) {
    ScanOptions o = opts;
    std::vector<std::pair<double, int>> seen;
    if (o.lambda_max <= 0.0) o.lambda_max = find_lambda_max(fam, o, &seen);
    ScanResult r = scan_lambda([&](double l) { return fam.at(l); }, fam.plateau(), o);
    r.plateau_checks = std::move(seen);
    return r;
}

Crossing find_kernel_crossing(const std::function<Eigen::MatrixXd(double)>& fam, double lo, double hi,
                              const ScanOptions& opts) {
    if (!(lo > 0.0 && hi > lo)) throw Error(ErrorKind::ConfigError, "crossing bracket must satisfy 0 < lo < hi");
    Crossing c;
    c.bracket_lo = lo;
    c.bracket_hi = hi;
    EigAt elo = eig_of(fam(lo)), ehi = eig_of(fam(hi));
    int nlo = counts_of(elo, opts.zero_tol_rel).neg, nhi = counts_of(ehi, opts.zero_tol_rel).neg;
    c.neg_lo = nlo;
    c.neg_hi = nhi;
    if (nlo == nhi) throw Error(ErrorKind::BracketLost, "negative counts agree at both bracket ends");

    // Coarse stage on counts alone.
    int it = 0;
    while (hi - lo > 1e-3 * hi && it < opts.max_iter) {
        ++it;
        const double mid = 0.5 * (lo + hi);
        EigAt em = eig_of(fam(mid));
        const int nm = counts_of(em, opts.zero_tol_rel).neg;
        if (nm != nlo) {
            hi = mid;
            ehi = std::move(em);
            nhi = nm;
        } else {
            lo = mid;
            elo = std::move(em);
        }
    }

    // Fine stage: Illinois on the tracked eigenvalue, bisection on counts as fallback.
    int klo = closest_to_zero(elo.val);
    Eigen::VectorXd ulo = elo.vec.col(klo);
    double flo = elo.val(klo);
    int khi = best_overlap(ehi.vec, ulo);
    double fhi = ehi.val(khi);
    double lam = 0.5 * (lo + hi);
    Eigen::VectorXd u = ulo;
    double nu = flo, scale = std::max(elo.norm, ehi.norm);
    bool tracked = (flo < 0) != (fhi < 0);
    int side = 0;
    while (it < opts.max_iter) {
        ++it;
        if (tracked) {
            lam = (lo * fhi - hi * flo) / (fhi - flo);
            if (!(lam > lo && lam < hi)) lam = 0.5 * (lo + hi);
        } else {
            lam = 0.5 * (lo + hi);
        }
        EigAt em = eig_of(fam(lam));
        scale = std::max(scale, em.norm);
        const int nm = counts_of(em, opts.zero_tol_rel).neg;
        int k = tracked ? best_overlap(em.vec, ulo) : closest_to_zero(em.val);
        nu = em.val(k);
        u = em.vec.col(k);
        if (std::abs(nu) <= opts.eig_tol * scale) break;
        bool to_lo;  // true: the crossing lies in [lo, lam]
        if (tracked) {
            to_lo = (nu < 0) != (flo < 0);
        } else {
            to_lo = nm != nlo;
        }
        if (to_lo) {
            hi = lam;
            fhi = nu;
            if (side == -1) flo *= 0.5;
            side = -1;
        } else {
            lo = lam;
            flo = nu;
            ulo = u;
            if (side == 1) fhi *= 0.5;
            side = 1;
        }
        if (hi - lo <= opts.bracket_tol * hi) {
            lam = 0.5 * (lo + hi);
            EigAt ef = eig_of(fam(lam));
            const int kf = closest_to_zero(ef.val);
            nu = ef.val(kf);
            u = ef.vec.col(kf);
            break;
        }
    }
    c.lambda = lam;
    c.iterations = it;
    c.margin = std::abs(nu) / std::max(scale, 1e-300);
    if (c.margin > 1e-6)
        throw Error(ErrorKind::BracketLost, "count change near lambda = " + std::to_string(lam) +
                                                " is a jump, not a continuous crossing (|nu|/||M|| = " +
                                                std::to_string(c.margin) + ")");
    int big = 0;
    u.cwiseAbs().maxCoeff(&big);
    c.u = u(big) < 0 ? Eigen::VectorXd(-u) : u;
    return c;
}

Refinement refine_n(const LambdaProblem& problem, const OperatorSet& ops0, const std::vector<int>& n_list,
                    const ScanOptions& opts) {
    if (n_list.empty()) throw Error(ErrorKind::ConfigError, "n_list is empty");
    std::vector<int> ns = n_list;
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
    Refinement out;
    bool found = false;
    double prev_lambda = 0.0, prev_diff = std::numeric_limits<double>::infinity();
    bool have_prev = false;
    for (int n : ns) {
        if (n > ops0.A1.rows())
            throw Error(ErrorKind::DimensionMismatch, "n = " + std::to_string(n) + " exceeds the basis dimension " +
                                                          std::to_string(ops0.A1.rows()));
        TruncationPair pair = truncation_projectors_adjusted(ops0.A1, ops0.A2, n);
        TruncatedFamily fam(problem, pair);
        ScanResult scan = scan_lambda(fam, opts);
        NHistoryRow row;
        row.n = n;
        row.rank_phi = pair.rank_phi();
        row.rank_psi = pair.rank_psi();
        row.crossings = static_cast<int>(scan.brackets.size());
        if (!scan.brackets.empty()) {
            // The largest-lambda crossing is the dominant growth rate.
            const auto [ia, ib] = scan.brackets.back();
            Crossing cr = find_kernel_crossing([&](double l) { return fam.at(l); }, scan.rows[ia].lambda,
                                               scan.rows[ib].lambda, opts);
            row.lambda_n = cr.lambda;
            row.margin = cr.margin;
            if (have_prev) {
                row.cauchy = std::abs(cr.lambda - prev_lambda);
                if (row.cauchy > prev_diff) out.cauchy_decreasing = false;
                prev_diff = row.cauchy;
            }
            prev_lambda = cr.lambda;
            have_prev = true;
            out.lambda0 = cr.lambda;
            out.n = n;
            out.pair = pair;
            out.crossing = cr;
            out.scan = scan;
            found = true;
        } else if (!found) {
            out.scan = scan;
        }
        out.history.push_back(row);
    }
    if (!found) throw Error(ErrorKind::NoConvergence, "no kernel crossing of M_n^lambda for any n in n_list");
    return out;
}

Eigen::VectorXd lift_kernel_vector(const Eigen::VectorXd& u_n, const TruncationPair& pair) {
    const int a = pair.rank_phi(), b = pair.rank_psi();
    if (u_n.size() != a + b + 1) throw Error(ErrorKind::DimensionMismatch, "kernel vector size");
    const Eigen::Index dp = pair.P.rows(), dq = pair.Q.rows();
    Eigen::VectorXd u(dp + dq + 1);
    u.head(dp) = pair.P * u_n.head(a);
    u.segment(dp, dq) = pair.Q * u_n.segment(a, b);
    u(dp + dq) = u_n(a + b);
    u /= std::max(u.norm(), 1e-300);
    int big = 0;
    u.cwiseAbs().maxCoeff(&big);
    if (u(big) < 0) u = -u;
    return u;
}

namespace {

double l2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / std::max<std::size_t>(v.size(), 1));
}

double rel(const std::vector<double>& r, double scale) { return scale > 0.0 ? l2(r) / scale : 0.0; }

}  // namespace

GrowingMode reconstruct_mode(double lambda0, const Eigen::VectorXd& u, const AssemblyContext& ctx) {
    if (!(lambda0 > 0.0)) throw Error(ErrorKind::ConfigError, "mode reconstruction needs lambda > 0");
    const int M = ctx.M();
    if (u.size() != 4 * M + 2) throw Error(ErrorKind::DimensionMismatch, "mode vector size");
    const PhaseGrid& grid = ctx.grid();
    const int nx = grid.nx, n = grid.vg.n;
    const SpectralBasis basis{ctx.period(), M, false};
    const int F = basis.dim();

    GrowingMode g;
    g.lambda0 = lambda0;
    g.phi = Eigen::VectorXd::Zero(F);
    g.phi.tail(2 * M) = u.head(2 * M);
    g.psi = u.segment(2 * M, F);
    g.b = u(4 * M + 1);
    g.x = grid.x;
    g.phi_x.assign(nx, 0.0);
    g.psi_x.assign(nx, 0.0);
    std::vector<double> dphi(nx, 0.0), dpsi(nx, 0.0), d2phi(nx, 0.0), d2psi(nx, 0.0);
    for (int j = 0; j < nx; ++j)
        for (int i = 0; i < F; ++i) {
            const double x = grid.x[j], k = basis.wavenumber(i), a = basis.norm(i);
            const double e = basis.eval(i, x);
            double d = 0.0;
            if (basis.mode(i) > 0) d = basis.is_sine(i) ? a * k * std::cos(k * x) : -a * k * std::sin(k * x);
            g.phi_x[j] += g.phi(i) * e;
            g.psi_x[j] += g.psi(i) * e;
            dphi[j] += g.phi(i) * d;
            dpsi[j] += g.psi(i) * d;
            d2phi[j] -= k * k * g.phi(i) * e;
            d2psi[j] -= k * k * g.psi(i) * e;
        }
    g.E1.resize(nx);
    g.E2.resize(nx);
    g.B.resize(nx);
    for (int j = 0; j < nx; ++j) {
        g.E1[j] = -dphi[j] - lambda0 * g.b;
        g.E2[j] = -lambda0 * g.psi_x[j];
        g.B[j] = dpsi[j];
    }
    g.rho.assign(nx, 0.0);
    g.j1.assign(nx, 0.0);
    g.j2.assign(nx, 0.0);
    for (Species s : {Species::Plus, Species::Minus}) {
        const int si = static_cast<int>(s);
        const double q = charge(s);
        const OrbitBank& bank = ctx.bank(s);
        const auto& mue = ctx.mu_e(s);
        const auto& mup = ctx.mu_p(s);
        g.f[si].assign(grid.size(), 0.0);
        parallel_for(nx, [&](std::size_t j) {
            std::vector<cplx> G(M + 1), H(M + 1);
            double r = 0.0, c1 = 0.0, c2 = 0.0;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    const std::size_t i = grid.index(static_cast<int>(j), a, b);
                    double f = mup[i] * g.psi_x[j];
                    if (mue[i] != 0.0) {
                        double c = 0.0;
                        bank.apply_modes(i, lambda0, M, G.data(), H.data(), c);
                        double qphi = 0.0, qpsi = 0.0;
                        for (int k = 0; k < F; ++k) {
                            const cplx gv = G[basis.mode(k)], hv = H[basis.mode(k)];
                            const double nk = basis.norm(k);
                            qphi += g.phi(k) * nk * (basis.is_sine(k) ? gv.imag() : gv.real());
                            qpsi += g.psi(k) * nk * (basis.is_sine(k) ? hv.imag() : hv.real());
                        }
                        f += mue[i] * (g.phi_x[j] - qphi + qpsi + g.b * c);
                    }
                    f *= q;
                    g.f[si][i] = f;
                    const double v1 = grid.vg.v[a], v2 = grid.vg.v[b];
                    const double gam = std::sqrt(1.0 + v1 * v1 + v2 * v2);
                    const double w = grid.vg.w[a] * grid.vg.w[b] * q * f;
                    r += w;
                    c1 += w * v1 / gam;
                    c2 += w * v2 / gam;
                }
            g.rho[j] += r;
            g.j1[j] += c1;
            g.j2[j] += c2;
        });
    }
    g.residuals = mode_residual(g, ctx);
    return g;
}

ModeResiduals mode_residual(const GrowingMode& g, const AssemblyContext& ctx) {
    const int nx = static_cast<int>(g.x.size());
    const double lam = g.lambda0;
    const SpectralBasis basis{ctx.period(), ctx.M(), false};
    std::vector<double> d2phi(nx, 0.0), d2psi(nx, 0.0);
    for (int j = 0; j < nx; ++j)
        for (int i = 0; i < basis.dim(); ++i) {
            const double k = basis.wavenumber(i), e = basis.eval(i, g.x[j]);
            d2phi[j] -= k * k * g.phi(i) * e;
            d2psi[j] -= k * k * g.psi(i) * e;
        }
    std::vector<double> rp(nx), ra(nx), rc(nx), lhs_a(nx), lhs_c(nx);
    for (int j = 0; j < nx; ++j) {
        rp[j] = -d2phi[j] - g.rho[j];
        lhs_a[j] = d2psi[j] - lam * lam * g.psi_x[j];
        ra[j] = lhs_a[j] + g.j2[j];
        lhs_c[j] = lam * g.E1[j];
        rc[j] = lhs_c[j] + g.j1[j];
    }
    ModeResiduals r;
    // One scale for all three equations, so a vanishing component does not blow up its ratio.
    const double scale =
        std::max({l2(d2phi), l2(g.rho), l2(lhs_a), l2(g.j2), l2(lhs_c), l2(g.j1)});
    r.poisson = rel(rp, scale);
    r.ampere = rel(ra, scale);
    r.current = rel(rc, scale);

    // Linearized Vlasov: (lambda + D) f = -q [mu_e (vhat1 E1 + vhat2 E2) + mu_p (E2 - vhat1 B)].
    const PhaseGrid& grid = ctx.grid();
    const int n = grid.vg.n;
    double num = 0.0, den = 0.0;
    for (Species s : {Species::Plus, Species::Minus}) {
        const int si = static_cast<int>(s);
        if (g.f[si].size() != grid.size()) continue;
        const double q = charge(s);
        PhaseFunction f{s, g.f[si], grid.hash};
        PhaseFunction Df = apply_D(grid, ctx.fields(), f);
        for (int j = 0; j < nx; ++j)
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    const std::size_t i = grid.index(j, a, b);
                    const double v1 = grid.vg.v[a], v2 = grid.vg.v[b];
                    const double gam = std::sqrt(1.0 + v1 * v1 + v2 * v2);
                    const double h1 = v1 / gam, h2 = v2 / gam;
                    const double rhs = -q * (ctx.mu_e(s)[i] * (h1 * g.E1[j] + h2 * g.E2[j]) +
                                             ctx.mu_p(s)[i] * (g.E2[j] - h1 * g.B[j]));
                    const double lhs = lam * f.values[i] + Df.values[i];
                    const double w = grid.measure(i) * grid.weight[si][i];
                    num += w * (lhs - rhs) * (lhs - rhs);
                    den += w * std::max(lhs * lhs, rhs * rhs);
                }
    }
    r.vlasov = den > 0.0 ? std::sqrt(num / den) : 0.0;
    return r;
}

double DispersionOracle::electrostatic(int m, double lambda) const {
    const double k = 2.0 * M_PI * m / profile.period;
    double s = 0.0;
    for (Species sp : {Species::Plus, Species::Minus})
        for (int a = 0; a < vg.n; ++a)
            for (int b = 0; b < vg.n; ++b) {
                const double v1 = vg.v[a], v2 = vg.v[b];
                const double gam = std::sqrt(1.0 + v1 * v1 + v2 * v2);
                const double kh = k * v1 / gam;
                const ProfileValue pv = profile.eval(sp, gam, v2);
                s += vg.w[a] * vg.w[b] * pv.mu_e * kh * kh / (lambda * lambda + kh * kh);
            }
    return k * k - s;
}

double DispersionOracle::transverse(int m, double lambda) const {
    const double k = 2.0 * M_PI * m / profile.period;
    double s = 0.0;
    for (Species sp : {Species::Plus, Species::Minus})
        for (int a = 0; a < vg.n; ++a)
            for (int b = 0; b < vg.n; ++b) {
                const double v1 = vg.v[a], v2 = vg.v[b];
                const double gam = std::sqrt(1.0 + v1 * v1 + v2 * v2);
                const double h1 = v1 / gam, h2 = v2 / gam;
                const ProfileValue pv = profile.eval(sp, gam, v2);
                const double kh = k * h1;
                const double re = lambda * lambda / (lambda * lambda + kh * kh);
                s += vg.w[a] * vg.w[b] * (h2 * pv.mu_p + pv.mu_e * h2 * h2 * re);
            }
    return k * k + lambda * lambda - s;
}

std::optional<double> DispersionOracle::root(int m, bool es, double lo, double hi) const {
    auto f = [&](double l) { return es ? electrostatic(m, l) : transverse(m, l); };
    const int N = 400;
    const double r = std::log(hi / lo) / N;
    double b = hi, fb = f(b);
    for (int i = N - 1; i >= 0; --i) {
        const double a = lo * std::exp(r * i), fa = f(a);
        if ((fa < 0) != (fb < 0)) {
            double x0 = a, x1 = b, f0 = fa;
            for (int it = 0; it < 200 && x1 - x0 > 1e-14 * x1; ++it) {
                const double mid = 0.5 * (x0 + x1), fm = f(mid);
                if ((fm < 0) == (f0 < 0)) {
                    x0 = mid;
                    f0 = fm;
                } else {
                    x1 = mid;
                }
            }
            return 0.5 * (x0 + x1);
        }
        b = a;
        fb = fa;
    }
    return std::nullopt;
}

}  // namespace vmstab
