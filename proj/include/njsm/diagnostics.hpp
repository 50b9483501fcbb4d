// Measurable versions of the a-priori estimates: energy inequalities, moment tables, the
// cadlag modulus, the uniqueness weight and the Galerkin refinement study.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "njsm/integrator.hpp"

namespace njsm {

namespace detail {

/// Cumulative trapezoid integral of a per-sample value; samples sharing a time add nothing.
template <class F>
std::vector<double> running_integral(const std::vector<Sample>& s, F value) {
    std::vector<double> out(s.size(), 0.0);
    for (std::size_t i = 1; i < s.size(); ++i)
        out[i] = out[i - 1] + 0.5 * (s[i].t - s[i - 1].t) * (value(s[i - 1]) + value(s[i]));
    return out;
}

inline void require_states(const Trajectory& traj, const char* who) {
    for (const auto& s : traj.samples)
        if (!s.state) throw std::invalid_argument(std::string(who) + ": trajectory must keep every state");
}

}  // namespace detail

// ---- director energy inequality ------------------------------------------------------------

/// sup_{r>0} [-b_N r^N / 2 - sum_{l<N} b_l r^l], clamped at 0.
inline double director_growth_constant(const PolynomialNonlinearity& poly) {
    const auto& b = poly.coeffs();
    const int N = poly.degree();
    auto g = [&](double r) {
        double acc = -0.5 * b[N] * std::pow(r, N);
        for (int l = 0; l < N; ++l) acc -= b[l] * std::pow(r, l);
        return acc;
    };
    double lower_sum = 0.0;
    for (int l = 0; l < N; ++l) lower_sum += std::abs(b[l]);
    const double R = 1.0 + 2.0 * lower_sum / b[N];  // g < 0 beyond R
    double best = -b[0], arg = 0.0;
    const int n = 20000;
    for (int i = 1; i <= n; ++i) {
        const double r = R * i / n;
        if (g(r) > best) best = g(r), arg = r;
    }
    // golden-section polish around the best grid point
    double lo = std::max(0.0, arg - R / n), hi = std::min(R, arg + R / n);
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100; ++it) {
        const double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
        (g(x1) < g(x2) ? lo : hi) = g(x1) < g(x2) ? x1 : x2;
    }
    best = std::max(best, g(0.5 * (lo + hi)));
    return std::max(0.0, best);
}

struct DirectorEnergyReport {
    double p = 2.0;
    double coercive = 0.0;  // a in front of ||d||^{2N+2}_{L^{2N+2}}
    double growth = 0.0;    // C on the right-hand side
    std::vector<double> times, d_power, integral, lhs, rhs;
    double max_excess = 0.0;  // max_t (lhs - rhs), negative when the inequality has slack
    double margin = 0.0;
    bool violated = false;
};

/// |d|^p + p int |d|^{p-2} (||grad d||^2 + a int|d|^{2N+2}) <= |d0|^p + p C int |d|^p along the path.
inline DirectorEnergyReport energy_check_director(const Trajectory& traj, double p, double margin_factor = 10.0) {
    if (p < 2.0) throw std::invalid_argument("energy_check_director: p must be >= 2");
    DirectorEnergyReport r;
    r.p = p;
    const auto& cfg = traj.config;
    if (cfg.nonlinear) {
        r.coercive = 0.5 * cfg.poly.leading();
        r.growth = director_growth_constant(cfg.poly);
    }
    if (traj.samples.empty()) return r;
    const auto& s = traj.samples;
    auto dn = [](const Sample& x) { return std::sqrt(x.ledger.d_l2); };
    auto diss = detail::running_integral(s, [&](const Sample& x) {
        return std::pow(dn(x), p - 2.0) * (x.ledger.d_grad + r.coercive * x.ledger.bulk_power);
    });
    auto grow = detail::running_integral(s, [&](const Sample& x) { return std::pow(dn(x), p); });
    const double d0 = std::pow(dn(s.front()), p);
    r.max_excess = -std::numeric_limits<double>::infinity();
    double scale = 1.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        r.times.push_back(s[i].t);
        r.d_power.push_back(std::pow(dn(s[i]), p));
        r.integral.push_back(diss[i]);
        r.lhs.push_back(r.d_power.back() + p * diss[i]);
        r.rhs.push_back(d0 + p * r.growth * grow[i]);
        r.max_excess = std::max(r.max_excess, r.lhs.back() - r.rhs.back());
        scale = std::max(scale, r.rhs.back());
    }
    r.margin = margin_factor * cfg.dt * scale;
    r.violated = r.max_excess > r.margin;
    return r;
}

// ---- coupled energy identity ---------------------------------------------------------------

struct CoupledEnergyReport {
    std::vector<double> times, psi, dissipation_integral, lap_integral;
    std::vector<double> step_residuals;  // E_{i+1} - E_i + h (D_i + D_{i+1}) / 2 between jumps
    double max_residual = 0.0;
    std::size_t jumps_checked = 0;
    double max_jump_mismatch = 0.0;  // |ledger jump in |u|^2 - (|u- + F|^2 - |u-|^2)|
};

inline CoupledEnergyReport energy_check_coupled(const Trajectory& traj) {
    CoupledEnergyReport r;
    const auto& s = traj.samples;
    if (s.empty()) return r;
    r.dissipation_integral =
        detail::running_integral(s, [](const Sample& x) { return x.ledger.u_grad + x.ledger.dissipation_d; });
    r.lap_integral = detail::running_integral(s, [](const Sample& x) { return x.ledger.d_lap; });
    for (const auto& x : s) {
        r.times.push_back(x.t);
        r.psi.push_back(x.ledger.psi);
    }
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const double h = s[i + 1].t - s[i].t;
        if (h > 0.0) {
            const double res = s[i + 1].ledger.energy - s[i].ledger.energy +
                               0.5 * h * (s[i].ledger.dissipation_rate() + s[i + 1].ledger.dissipation_rate());
            r.step_residuals.push_back(res);
            r.max_residual = std::max(r.max_residual, std::abs(res));
        }
    }
    for (const auto& j : traj.jumps) {
        const Sample& pre = s.at(j.pre_sample);
        const Sample& post = s.at(j.pre_sample + 1);
        if (!pre.state) continue;
        const auto& u = pre.state->u;
        const double expected = norm_sq(u + noise_coefficient(traj.config.noise, j.time, u, j.mark)) - norm_sq(u);
        r.max_jump_mismatch = std::max(r.max_jump_mismatch, std::abs(post.ledger.u_l2 - pre.ledger.u_l2 - expected));
        ++r.jumps_checked;
    }
    return r;
}

// ---- moments -------------------------------------------------------------------------------

struct PathSummary {
    double sup_psi = 0.0;
    double dissipation = 0.0;   // int ||grad u||^2 + |Lap d - f_n|^2
    double lap_integral = 0.0;  // int |Lap d|^2
    std::size_t jumps = 0;
};

inline PathSummary summarize(const Trajectory& traj) {
    PathSummary p;
    p.jumps = traj.jumps.size();
    if (traj.samples.empty()) return p;
    p.sup_psi = -std::numeric_limits<double>::infinity();
    for (const auto& x : traj.samples) p.sup_psi = std::max(p.sup_psi, x.ledger.psi);
    p.dissipation = detail::running_integral(traj.samples, [](const Sample& x) {
                        return x.ledger.u_grad + x.ledger.dissipation_d;
                    }).back();
    p.lap_integral = detail::running_integral(traj.samples, [](const Sample& x) { return x.ledger.d_lap; }).back();
    return p;
}

struct MomentEstimate {
    std::string quantity;
    int power = 1;
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t paths = 0;

    /// Do the [mean - k se, mean + k se] bands intersect?
    bool overlaps(const MomentEstimate& o, double k = 4.0) const {
        return std::abs(mean - o.mean) <= k * (std_error + o.std_error);
    }
};

inline constexpr std::size_t kMinMomentPaths = 100;

/// E[sup psi^p], E[(int dissipation)^p], E[(int |Lap d|^2)^p] for each requested power.
inline std::vector<MomentEstimate> moment_estimates(const std::vector<PathSummary>& paths,
                                                    const std::vector<int>& powers = {1, 2}) {
    if (paths.size() < kMinMomentPaths)
        throw std::invalid_argument("moment_estimates: need at least " + std::to_string(kMinMomentPaths) +
                                    " paths, got " + std::to_string(paths.size()));
    std::vector<MomentEstimate> out;
    const std::pair<const char*, double PathSummary::*> cols[] = {
        {"sup_psi", &PathSummary::sup_psi},
        {"dissipation", &PathSummary::dissipation},
        {"lap_integral", &PathSummary::lap_integral},
    };
    const double n = static_cast<double>(paths.size());
    for (const auto& [name, field] : cols)
        for (int p : powers) {
            double acc = 0.0, acc2 = 0.0;
            for (const auto& x : paths) {
                const double v = std::pow(x.*field, p);
                acc += v;
                acc2 += v * v;
            }
            const double mean = acc / n;
            const double var = std::max(0.0, (acc2 - n * mean * mean) / (n - 1.0));
            out.push_back({name, p, mean, std::sqrt(var / n), paths.size()});
        }
    return out;
}

inline std::vector<MomentEstimate> moment_estimates(const std::vector<Trajectory>& trajs,
                                                    const std::vector<int>& powers = {1, 2}) {
    std::vector<PathSummary> s;
    s.reserve(trajs.size());
    for (const auto& t : trajs) s.push_back(summarize(t));
    return moment_estimates(s, powers);
}

// ---- cadlag modulus ------------------------------------------------------------------------

/// inf over partitions with cells of length >= delta of the largest within-cell oscillation.
/// Cut points are samples that are not left limits; a left-limit sample belongs to the cell
/// that ends at its time. dist(i, j) is the distance between samples i and j.
inline double cadlag_modulus(const std::vector<double>& times, const std::vector<bool>& left_limit,
                             const std::function<double(std::size_t, std::size_t)>& dist, double delta) {
    const std::size_t m = times.size();
    if (m < 2) throw std::invalid_argument("cadlag_modulus: need at least two samples");
    if (left_limit.size() != m) throw std::invalid_argument("cadlag_modulus: size mismatch");
    const double T = times.back() - times.front();
    if (!(delta > 0.0)) throw std::invalid_argument("cadlag_modulus: delta must be positive");
    if (delta >= T) throw std::invalid_argument("cadlag_modulus: delta must be smaller than the horizon");

    const double inf = std::numeric_limits<double>::infinity();
    auto is_cut = [&](std::size_t i) { return i == 0 || i == m - 1 || !left_limit[i]; };
    // osc[a] = diameter of samples a..e-1, rolled forward in e
    std::vector<double> osc(m, 0.0), best(m, inf);
    best[0] = 0.0;
    for (std::size_t e = 1; e < m; ++e) {
        // extend every cell a..e-2 by sample e-1
        const std::size_t last = e - 1;
        double col = 0.0;
        for (std::size_t a = last; a-- > 0;) {
            col = std::max(col, dist(a, last));
            osc[a] = std::max(osc[a], col);
        }
        osc[last] = 0.0;
        if (!is_cut(e)) continue;
        for (std::size_t a = 0; a < e; ++a) {
            if (!is_cut(a) || best[a] == inf) continue;
            if (times[e] - times[a] < delta) continue;
            best[e] = std::min(best[e], std::max(best[a], osc[a]));
        }
    }
    return best[m - 1];
}

inline double cadlag_modulus(const Trajectory& traj, double delta, NormKind kind = NormKind::VDual) {
    detail::require_states(traj, "cadlag_modulus");
    std::vector<double> t;
    std::vector<bool> pre;
    for (const auto& s : traj.samples) {
        t.push_back(s.t);
        pre.push_back(s.kind == SampleKind::PreJump);
    }
    return cadlag_modulus(t, pre,
                          [&](std::size_t i, std::size_t j) {
                              return norm(traj.samples[i].state->u - traj.samples[j].state->u, kind);
                          },
                          delta);
}

// ---- uniqueness ----------------------------------------------------------------------------

/// (1 + ||d1||^{2N}_{L^{4N+2}} + ||d2||^{2N}_{L^{4N+2}})^2 with unit prefactor.
inline double beta_functional(const SpectralVector& d1, const SpectralVector& d2, int N) {
    if (N < 1) throw std::invalid_argument("beta_functional: N must be >= 1");
    detail::check_pair(d1.basis(), d2.basis());
    const double q = 4.0 * N + 2.0;
    auto term = [&](const SpectralVector& d) { return std::pow(lp_power(d, 2 * N + 1), 2.0 * N / q); };
    const double s = 1.0 + term(d1) + term(d2);
    return s * s;
}

struct FDifferenceReport {
    double lhs_pairing = 0.0;    // |<f(d1) - f(d2), d1 - d2>|
    double lhs_laplacian = 0.0;  // |<f(d1) - f(d2), Lap(d1 - d2)>|
    double beta = 1.0;
    double c_kappa1 = 0.0;  // smallest C with lhs_pairing <= k1 ||grad dd||^2 + C |dd|^2 beta
    double c_kappa2 = 0.0;  // smallest C with lhs_laplacian <= k2 |Lap dd|^2 + C (||grad dd||^2 + |dd|^2) beta
};

namespace detail {

/// Smallest C >= 0 with lhs <= free + C * weight (0 when the weight vanishes).
inline double needed(double lhs, double free, double weight) {
    if (!(weight > 0.0)) return 0.0;
    return std::max(0.0, (lhs - free) / weight);
}

}  // namespace detail

inline FDifferenceReport f_difference_inequalities(const SpectralVector& d1, const SpectralVector& d2, double kappa1,
                                                   double kappa2, const PolynomialNonlinearity& poly) {
    FDifferenceReport r;
    const SpectralVector dd = d1 - d2;
    const SpectralVector df = bulk_force(d1, poly) - bulk_force(d2, poly);
    r.lhs_pairing = std::abs(inner(df, dd));
    r.lhs_laplacian = std::abs(inner(df, laplacian(dd)));
    r.beta = beta_functional(d1, d2, poly.degree());
    const double l2 = norm_sq(dd), h1 = norm_sq(dd, NormKind::H1Seminorm), h2 = norm_sq(laplacian(dd));
    r.c_kappa1 = detail::needed(r.lhs_pairing, kappa1 * h1, l2 * r.beta);
    r.c_kappa2 = detail::needed(r.lhs_laplacian, kappa2 * h2, (h1 + l2) * r.beta);
    return r;
}

struct UniquenessKappas {
    double k1 = 0.5, k2 = 0.1, k3 = 1.0 / 6, k4 = 1.0 / 6, k5 = 0.1, k6 = 0.1, k7 = 0.1, k8 = 1.0 / 6, k9 = 0.1;
};

/// Calibrated C(kappa) constants of the weight Upsilon.
struct UniquenessConstants {
    double c3 = 0.0;   // |<B(w,u1),w>|
    double c45 = 0.0;  // |<M(d2,dd),w>|
    double c68 = 0.0;  // |<M(dd,d1),w>|
    double c7 = 0.0;   // |<B~(u2,dd),Lap dd>|
    double c9 = 0.0;   // |<B~(w,d1),dd>|
    double ck1 = 0.0;  // f difference against dd
    double ck2 = 0.0;  // f difference against Lap dd (C1 = C2)

    void absorb(const UniquenessConstants& o) {
        c3 = std::max(c3, o.c3), c45 = std::max(c45, o.c45), c68 = std::max(c68, o.c68);
        c7 = std::max(c7, o.c7), c9 = std::max(c9, o.c9), ck1 = std::max(ck1, o.ck1), ck2 = std::max(ck2, o.ck2);
    }
};

struct UniquenessReport {
    std::vector<double> times, D, upsilon, weighted, beta, dissipation_integral;
    UniquenessConstants constants;
    double gronwall_constant = 0.0;  // max_t log(Upsilon D / D0) / t
    double max_D = 0.0;

    double ratio() const { return D.empty() || D.front() == 0.0 ? 0.0 : D.back() / D.front(); }

    /// Upsilon(t) D(t) <= e^{C t} D(0) at every sample, up to rounding.
    bool gronwall_holds(double C, double rel_tol = 1e-9) const {
        for (std::size_t i = 0; i < times.size(); ++i)
            if (weighted[i] > std::exp(C * times[i]) * D.front() * (1.0 + rel_tol)) return false;
        return true;
    }
};

namespace detail {

struct PairQuantities {
    double D, dissipation, beta;
    double u1l2, u1h1, u2l2, u2h1, d1h1, d2h1, d1lap, d2lap;
    UniquenessConstants need;
};

inline PairQuantities pair_quantities(const State& a, const State& b, const SimConfig& cfg, const UniquenessKappas& k) {
    PairQuantities q{};
    const SpectralVelocity w = a.u - b.u;
    const SpectralVector dd = a.d - b.d;
    const double wl2 = norm_sq(w), wh1 = norm_sq(w, NormKind::H1Seminorm);
    const double ddl2 = norm_sq(dd), ddh1 = norm_sq(dd, NormKind::H1Seminorm);
    const SpectralVector lap_dd = laplacian(dd);
    const double ddlap = norm_sq(lap_dd);
    q.D = wl2 + ddl2 + ddh1;
    q.dissipation = wh1 + ddh1 + ddlap;
    q.u1l2 = norm_sq(a.u), q.u1h1 = norm_sq(a.u, NormKind::H1Seminorm);
    q.u2l2 = norm_sq(b.u), q.u2h1 = norm_sq(b.u, NormKind::H1Seminorm);
    q.d1h1 = norm_sq(a.d, NormKind::H1Seminorm), q.d2h1 = norm_sq(b.d, NormKind::H1Seminorm);
    q.d1lap = norm_sq(laplacian(a.d)), q.d2lap = norm_sq(laplacian(b.d));
    q.beta = beta_functional(a.d, b.d, cfg.poly.degree());
    if (!cfg.nonlinear || q.D == 0.0) return q;

    const SpectralVector wv = to_vector(w);
    auto& c = q.need;
    c.c3 = needed(std::abs(trilinear_b(w, a.u, w)), k.k3 * wh1, q.u1l2 * q.u1h1 * wl2);
    c.c45 = needed(std::abs(trilinear_m(b.d, dd, w)), k.k4 * wh1 + k.k5 * ddlap, q.d2h1 * q.d2lap * ddh1);
    c.c68 = needed(std::abs(trilinear_m(dd, a.d, w)), k.k8 * wh1 + k.k6 * ddlap, q.d1h1 * q.d1lap * ddh1);
    c.c7 = needed(std::abs(trilinear_b(to_vector(b.u), dd, lap_dd)), k.k7 * ddlap, q.u2l2 * q.u2h1 * ddh1);
    c.c9 = needed(std::abs(trilinear_b(wv, a.d, dd)), k.k9 * ddlap, wl2 * q.d1h1);
    const auto f = f_difference_inequalities(a.d, b.d, k.k1, k.k2, cfg.poly);
    c.ck1 = f.c_kappa1;
    c.ck2 = f.c_kappa2;
    return q;
}

}  // namespace detail

/// Two runs with a shared jump path; D, Upsilon and the Gronwall constant along the pair.
/// When `fixed` is given those constants are used instead of calibrating on this run.
inline UniquenessReport uniqueness_experiment(const SimConfig& config, const State& ic1, const State& ic2,
                                              const std::optional<UniquenessConstants>& fixed = std::nullopt,
                                              const UniquenessKappas& kappas = {}) {
    if (config.dim != 2) throw ConfigError("dim", "uniqueness experiment is two-dimensional only");
    SimConfig cfg = config;
    cfg.record_stride = 1;
    const auto events = noise_path(cfg);
    const Trajectory t1 = simulate(cfg, ic1, events);
    const Trajectory t2 = simulate(cfg, ic2, events);
    if (t1.samples.size() != t2.samples.size()) throw std::logic_error("uniqueness_experiment: sample mismatch");

    std::vector<detail::PairQuantities> q;
    q.reserve(t1.samples.size());
    UniquenessReport r;
    for (std::size_t i = 0; i < t1.samples.size(); ++i) {
        q.push_back(detail::pair_quantities(*t1.samples[i].state, *t2.samples[i].state, cfg, kappas));
        r.constants.absorb(q.back().need);
    }
    if (fixed) r.constants = *fixed;
    const auto& C = r.constants;
    auto xi = [&](const detail::PairQuantities& x) {
        const double x1 = C.c3 * x.u1l2 * x.u1h1 + C.c9 * x.d1h1;
        const double x2 = C.c45 * x.d2h1 * x.d2lap + C.c68 * x.d1h1 * x.d1lap + C.c7 * x.u2l2 * x.u2h1 + C.ck2 * x.beta;
        const double x3 = (C.ck1 + C.ck2) * x.beta;
        return x1 + x2 + x3;
    };
    double exponent = 0.0, diss = 0.0;
    const double D0 = q.front().D;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double t = t1.samples[i].t;
        if (i > 0) {
            const double h = t - t1.samples[i - 1].t;
            const double u_prev = r.upsilon.back();
            exponent += h * (xi(q[i - 1]) + xi(q[i]));  // 2 * trapezoid
            const double u_now = std::exp(-exponent);
            diss += 0.5 * h * (u_prev * q[i - 1].dissipation + u_now * q[i].dissipation);
        }
        const double ups = std::exp(-exponent);
        r.times.push_back(t);
        r.D.push_back(q[i].D);
        r.upsilon.push_back(ups);
        r.weighted.push_back(ups * q[i].D);
        r.beta.push_back(q[i].beta);
        r.dissipation_integral.push_back(diss);
        r.max_D = std::max(r.max_D, q[i].D);
        if (t > 0.0 && D0 > 0.0 && r.weighted.back() > 0.0)
            r.gronwall_constant = std::max(r.gronwall_constant, std::log(r.weighted.back() / D0) / t);
    }
    return r;
}

/// Pair (ic, ic + eps * unit perturbation in both components) with a seeded direction.
inline std::pair<State, State> perturbed_pair(const SimConfig& cfg, double eps) {
    BasisPtr basis = make_basis(cfg.dim, cfg.cutoff);
    State a = make_initial_state(cfg, basis);
    Rng rng = make_rng(cfg.seed, 0x7e);
    State b{a.u + eps * random_velocity(basis, rng, 1.0, cfg.ic.slope),
            a.d + eps * random_director(basis, rng, 1.0, cfg.ic.slope)};
    return {std::move(a), std::move(b)};
}

// ---- Galerkin refinement -------------------------------------------------------------------

struct ConvergenceRow {
    int coarse = 0, fine = 0;
    std::vector<double> times;
    std::vector<double> u_dist_sq, d_dist_sq;  // |u_c - u_f|^2 and |d_c - d_f|^2 per sample
    double u_distance = 0.0;                   // L^2(0,T; H)
    double d_distance = 0.0;                   // L^2(0,T; L^2)
    double distance() const { return std::sqrt(u_distance * u_distance + d_distance * d_distance); }
};

struct ConvergenceStudy {
    std::vector<int> cutoffs;
    std::vector<ConvergenceRow> rows;
    std::vector<State> initial;  // per cutoff

    bool monotone() const {
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (!(rows[i].distance() < rows[i - 1].distance())) return false;
        return true;
    }
};

inline double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
    double acc = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) acc += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
    return acc;
}

/// Runs every cutoff from one initial condition generated at a common cutoff and one jump path.
inline ConvergenceStudy galerkin_convergence_study(const SimConfig& config, std::vector<int> cutoffs) {
    if (cutoffs.empty()) throw std::invalid_argument("galerkin_convergence_study: empty cutoff list");
    std::sort(cutoffs.begin(), cutoffs.end());
    ConvergenceStudy study;
    study.cutoffs = cutoffs;
    SimConfig base = config;
    base.record_stride = 1;
    if (base.ic.cutoff <= 0) base.ic.cutoff = cutoffs.back();
    const auto events = noise_path(base);
    std::vector<Trajectory> runs;
    for (int K : cutoffs) {
        SimConfig c = base;
        c.cutoff = K;
        BasisPtr basis = make_basis(c.dim, K);
        study.initial.push_back(make_initial_state(c, basis));
        runs.push_back(simulate(c, study.initial.back(), events));
    }
    for (std::size_t r = 1; r < runs.size(); ++r) {
        const Trajectory& a = runs[r - 1];
        const Trajectory& b = runs[r];
        if (a.samples.size() != b.samples.size()) throw std::logic_error("convergence study: sample mismatch");
        ConvergenceRow row;
        row.coarse = cutoffs[r - 1];
        row.fine = cutoffs[r];
        for (std::size_t i = 0; i < a.samples.size(); ++i) {
            const State& sa = *a.samples[i].state;
            const State& sb = *b.samples[i].state;
            row.times.push_back(a.samples[i].t);
            row.u_dist_sq.push_back(norm_sq(project_to(sa.u, b.basis) - sb.u));
            row.d_dist_sq.push_back(norm_sq(project_to(sa.d, b.basis) - sb.d));
        }
        row.u_distance = std::sqrt(trapezoid(row.times, row.u_dist_sq));
        row.d_distance = std::sqrt(trapezoid(row.times, row.d_dist_sq));
        study.rows.push_back(std::move(row));
    }
    return study;
}

/// Linear, noise-free regime: sum over modes outside the coarse band of |c_k(0)|^2 e^{-2|k|^2 t}.
inline std::pair<double, double> linear_tail(const State& fine_initial, int coarse_cutoff, double t) {
    const Basis& b = fine_initial.d.basis();
    auto outside = [&](const Wavevector& k) {
        for (int a = 0; a < b.dim(); ++a)
            if (std::abs(k[a]) > coarse_cutoff) return true;
        return false;
    };
    double tu = 0.0, td = 0.0;
    const int n = b.dim();
    for (std::size_t m = 0; m < b.num_modes(); ++m) {
        if (!outside(b.mode(m))) continue;
        const double decay = std::exp(-2.0 * b.eigenvalue(m) * t);
        for (int c = 0; c < n; ++c) td += std::norm(fine_initial.d.at(m, c)) * decay;
        const std::size_t v = b.mode_to_velocity(m);
        for (int p = 0; p < n - 1; ++p) tu += std::norm(fine_initial.u.at(v, p)) * decay;
    }
    return {tu, td};
}

// ---- operator identities -------------------------------------------------------------------

struct IdentityResidual {
    std::string name;
    double max_relative = 0.0;
    std::size_t samples = 0;
};

/// Cancellation identities on random in-span tuples; each residual is divided by the
/// Cauchy-Schwarz bound of the pairing it comes from.
inline std::vector<IdentityResidual> operator_identities(int dim, int K, std::size_t n_samples, std::uint64_t seed,
                                                         const PolynomialNonlinearity& poly) {
    BasisPtr basis = make_basis(dim, K);
    std::vector<IdentityResidual> out{{"b_uvv"}, {"b_antisymmetry"}, {"transport_d"}, {"transport_bulk"},
                                      {"stress_transport_duality"}};
    auto rel = [](double r, double scale) { return scale > 0.0 ? std::abs(r) / scale : std::abs(r); };
    for (std::size_t i = 0; i < n_samples; ++i) {
        Rng rng = make_rng(seed, i);
        auto u = random_velocity(basis, rng, 1.0);
        auto v = random_velocity(basis, rng, 1.0);
        auto w = random_velocity(basis, rng, 1.0);
        auto d = random_director(basis, rng, 1.5);
        const auto Buv = convective(u, v), Buw = convective(u, w);
        const auto Bt = director_transport(u, d);
        const auto lap = laplacian(d);
        const double vals[5] = {
            rel(trilinear_b(u, v, v), norm(Buv) * norm(v)),
            rel(trilinear_b(u, v, w) + trilinear_b(u, w, v), norm(Buv) * norm(w) + norm(Buw) * norm(v)),
            rel(inner(Bt, d), norm(Bt) * norm(d)),
            rel(transport_bulk_pairing(u, d, poly), norm(Bt) * norm(bulk_force(d, poly))),
            rel(inner(ericksen_stress(d), u) - inner(Bt, lap), norm(Bt) * norm(lap)),
        };
        for (int k = 0; k < 5; ++k) {
            out[k].max_relative = std::max(out[k].max_relative, vals[k]);
            ++out[k].samples;
        }
    }
    return out;
}

// ---- operator bound sweeps -----------------------------------------------------------------

struct BoundSweep {
    std::string name;
    double max_ratio = 0.0;
    double max_ratio_half = 0.0;  // over the first half of the samples
    std::size_t samples = 0;

    bool finite() const { return std::isfinite(max_ratio) && max_ratio > 0.0; }
    /// Doubling the sample count moves the maximum by at most the given factor.
    bool stable(double factor = 1.5) const { return finite() && max_ratio <= factor * max_ratio_half; }
};

/// Empirical constants for the bilinear bounds and the pointwise growth of f on random fields.
inline std::vector<BoundSweep> operator_bound_sweep(int dim, int K, std::size_t n_samples, std::uint64_t seed,
                                                    const PolynomialNonlinearity& poly) {
    BasisPtr basis = make_basis(dim, K);
    const double s = dim / 4.0;
    std::vector<BoundSweep> out{{"convective_interpolated"}, {"convective_h_h"}, {"transport"},
                                {"ericksen_stress"}, {"bulk_growth"}};
    const int N = poly.degree();
    for (std::size_t i = 0; i < n_samples; ++i) {
        Rng rng = make_rng(seed, i);
        std::uniform_real_distribution<double> slope(0.0, 4.0), amp(-2.0, 1.0);
        auto u = random_velocity(basis, rng, std::pow(10.0, amp(rng)), slope(rng));
        auto v = random_velocity(basis, rng, std::pow(10.0, amp(rng)), slope(rng));
        auto d1 = random_director(basis, rng, std::pow(10.0, amp(rng)), slope(rng));
        auto d2 = random_director(basis, rng, std::pow(10.0, amp(rng)), slope(rng));
        auto l2 = [](const auto& x) { return norm(x); };
        auto h1 = [](const auto& x) { return norm(x, NormKind::H1Seminorm); };
        auto lap = [](const SpectralVector& x) { return norm(laplacian(x)); };
        const double bv = norm(convective(u, v), NormKind::VDual);
        double vals[5] = {
            bv / (std::pow(l2(u), 1 - s) * std::pow(h1(u), s) * std::pow(l2(v), 1 - s) * std::pow(h1(v), s)),
            bv / (l2(u) * l2(v)),
            norm(director_transport(u, d1)) /
                (std::pow(l2(u), 1 - s) * std::pow(h1(u), s) * std::pow(h1(d1), 1 - s) * std::pow(lap(d1), s)),
            norm(ericksen_stress(d1, d2), NormKind::VDual) /
                (std::pow(h1(d1), 1 - s) * std::pow(lap(d1), s) * std::pow(h1(d2), 1 - s) * std::pow(lap(d2), s)),
            0.0,
        };
        // pointwise |f(d)| / (1 + |d|^{2N+1}) on the grid samples of d1 scaled into a wide range
        {
            auto g = to_grid(d1, min_grid(K));
            double worst = 0.0;
            for (std::size_t x = 0; x < g.points(); ++x) {
                double r = 0.0;
                for (int c = 0; c < dim; ++c) r += g.comp(c)[x] * g.comp(c)[x];
                const double a = std::sqrt(r);
                worst = std::max(worst, std::abs(poly.f_tilde(r)) * a / (1.0 + std::pow(a, 2 * N + 1)));
            }
            vals[4] = worst;
        }
        for (int k = 0; k < 5; ++k) {
            if (!std::isfinite(vals[k])) continue;
            out[k].max_ratio = std::max(out[k].max_ratio, vals[k]);
            if (2 * i < n_samples) out[k].max_ratio_half = out[k].max_ratio;
        }
    }
    for (auto& b : out) b.samples = n_samples;
    return out;
}

}  // namespace njsm
