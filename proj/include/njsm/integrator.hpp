// Jump-adapted exponential Euler scheme for the Galerkin system driven by compensated
// Poisson noise, with optional cutoff truncation of the nonlinear terms.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "njsm/core.hpp"
#include "njsm/noise.hpp"
#include "njsm/operators.hpp"
#include "njsm/polynomial.hpp"
#include "njsm/spectral_basis.hpp"

namespace njsm {

enum class InitialKind { Zero, SingleMode, Random, NearUnitDirector };

struct InitialCondition {
    InitialKind kind = InitialKind::Random;
    double velocity_amplitude = 0.5;  // |u0|_H
    double director_amplitude = 0.5;  // |d0| for random/single mode, perturbation size for near-unit
    double slope = 3.0;               // spectrum (1+|k|^2)^(-slope/2)
    Wavevector mode{1, 0, 0};         // single-mode generator
    int cutoff = 0;                   // generation cutoff, 0 means the simulation cutoff
    std::optional<std::uint64_t> seed;
};

inline constexpr double kMaxTimeStep = 0.05;

struct SimConfig {
    int dim = 2;
    int cutoff = 8;
    double dt = 1e-3;
    double horizon = 1.0;
    PolynomialNonlinearity poly = PolynomialNonlinearity::ginzburg_landau();
    NoiseSpec noise = default_noise();
    InitialCondition ic;
    std::optional<double> truncation_level;
    std::uint64_t seed = 1;
    bool nonlinear = true;
    int record_stride = 1;  // keep the state every k-th grid step; 0 keeps only endpoints and jumps
    double blowup_factor = 1e6;

    static NoiseSpec default_noise() {
        NoiseSpec s;
        s.rate = 5.0;
        s.marks = MarkDistribution::uniform({-1.0}, {1.0});
        s.family = NoiseFamily::LinearMultiplicative;
        s.offset = 0.0;
        s.slope = 0.2;
        return s;
    }

    void validate() const {
        if (dim != 2 && dim != 3) throw ConfigError("dim", "must be 2 or 3");
        if (cutoff < 1) throw ConfigError("cutoff", "must be >= 1");
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt", "must be positive");
        if (dt > kMaxTimeStep) throw ConfigError("dt", "must not exceed " + std::to_string(kMaxTimeStep));
        if (!(horizon >= dt) || !std::isfinite(horizon)) throw ConfigError("T", "must be finite and >= dt");
        try {
            poly.check_dimension(dim);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("poly", e.what());
        }
        try {
            noise.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("noise", e.what());
        }
        if (truncation_level && !(*truncation_level >= 1.0)) throw ConfigError("truncation_level", "must be >= 1");
        if (record_stride < 0) throw ConfigError("record_stride", "must be >= 0");
        if (!(blowup_factor > 1.0)) throw ConfigError("blowup_factor", "must exceed 1");
        if (ic.cutoff < 0) throw ConfigError("ic.cutoff", "must be >= 0");
        if (!(ic.velocity_amplitude >= 0.0) || !(ic.director_amplitude >= 0.0))
            throw ConfigError("ic", "amplitudes must be >= 0");
    }
};

struct State {
    SpectralVelocity u;
    SpectralVector d;
};

/// theta_n: 1 on (-inf, n], 0 on [n+1, inf), smooth and non-increasing in between.
inline double cutoff_theta(double r, double level) {
    const double s = r - level;
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return 0.0;
    auto g = [](double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; };
    const double a = g(1.0 - s), b = g(s);
    return a / (a + b);
}

// ---- initial data --------------------------------------------------------------------------

inline State make_initial_state(const SimConfig& cfg, const BasisPtr& basis) {
    const InitialCondition& ic = cfg.ic;
    const int gen_cutoff = ic.cutoff > 0 ? ic.cutoff : cfg.cutoff;
    BasisPtr gen = gen_cutoff == basis->cutoff() ? basis : make_basis(basis->dim(), gen_cutoff);
    Rng rng = make_rng(ic.seed.value_or(cfg.seed), 0x1c);
    State s{SpectralVelocity(gen), SpectralVector(gen)};
    switch (ic.kind) {
        case InitialKind::Zero: break;
        case InitialKind::SingleMode: {
            auto idx = gen->find(ic.mode);
            if (!idx || *idx == gen->zero_mode()) throw ConfigError("ic.mode", "not a nonzero mode of the basis");
            const std::size_t v = gen->mode_to_velocity(*idx);
            s.u.at(v, 0) = ic.velocity_amplitude / std::sqrt(2.0);
            s.u.at(gen->velocity_negated(v), 0) = ic.velocity_amplitude / std::sqrt(2.0);
            s.d.at(*idx, 0) = ic.director_amplitude / std::sqrt(2.0);
            s.d.at(gen->negated(*idx), 0) = ic.director_amplitude / std::sqrt(2.0);
            break;
        }
        case InitialKind::Random:
            s.u = random_velocity(gen, rng, ic.velocity_amplitude, ic.slope);
            s.d = random_director(gen, rng, ic.director_amplitude, ic.slope);
            break;
        case InitialKind::NearUnitDirector: {
            s.u = random_velocity(gen, rng, ic.velocity_amplitude, ic.slope);
            auto w = random_director(gen, rng, 1.0, ic.slope);
            const int M = min_grid(gen_cutoff) + 1;
            GridField g = to_grid(w, M);
            const int n = gen->dim();
            // scale the perturbation so its rms is director_amplitude
            const double rms = norm(w) / std::pow(kTwoPi, 0.5 * n);
            const double eps = rms > 0.0 ? ic.director_amplitude / rms : 0.0;
            for (std::size_t x = 0; x < g.points(); ++x) {
                double v[3] = {1.0, 0.0, 0.0};
                double len = 0.0;
                for (int c = 0; c < n; ++c) {
                    v[c] += eps * g.comp(c)[x];
                    len += v[c] * v[c];
                }
                len = std::sqrt(len);
                for (int c = 0; c < n; ++c) g.comp(c)[x] = v[c] / len;
            }
            s.d = vector_from_grid(gen, g);
            break;
        }
    }
    if (gen != basis) {
        s.u = project_to(s.u, basis);
        s.d = project_to(s.d, basis);
    }
    return s;
}

// ---- energy ledger -------------------------------------------------------------------------

struct EnergyLedger {
    double u_l2 = 0.0;            // |u|^2
    double u_grad = 0.0;          // ||grad u||^2
    double d_l2 = 0.0;            // |d|^2
    double d_grad = 0.0;          // ||grad d||^2
    double d_lap = 0.0;           // |Lap d|^2
    double dissipation_d = 0.0;   // |Lap d - f_n(d)|^2
    double bulk_power = 0.0;      // int |d|^(2N+2)
    double psi_director = 0.0;    // Psi(d)
    double psi = 0.0;             // Psi(d) + |u|^2
    double energy = 0.0;          // Psi(d) + |u|^2 / 2
    double transfer_defect = 0.0; // <M',u> - <B~',Lap d> + <B~',f_n>
    double drift_power = 0.0;     // <int F dnu, u>
    double theta_u = 1.0;
    double theta_d = 1.0;

    /// Rate of energy loss implied by the Galerkin identity.
    double dissipation_rate() const { return u_grad + dissipation_d + transfer_defect + drift_power; }
};

/// Right-hand side nonlinear parts plus the ledger at one state.
struct Evaluation {
    SpectralVelocity nu;  // -B' - M' - drift
    SpectralVector nd;    // -B~' - f_n
    EnergyLedger ledger;
};

inline Evaluation evaluate(const State& s, const SimConfig& cfg) {
    const BasisPtr& basis = s.u.basis_ptr();
    Evaluation ev{SpectralVelocity(basis), SpectralVector(basis), {}};
    EnergyLedger& L = ev.ledger;
    L.u_l2 = norm_sq(s.u);
    L.u_grad = norm_sq(s.u, NormKind::H1Seminorm);
    L.d_l2 = norm_sq(s.d);
    L.d_grad = norm_sq(s.d, NormKind::H1Seminorm);
    const SpectralVector lap = laplacian(s.d);
    L.d_lap = norm_sq(lap);

    SpectralVelocity drift = compensator_drift(cfg.noise, 0.0, s.u);
    L.drift_power = inner(drift, s.u);
    ev.nu -= drift;

    double bulk_energy = 0.0;
    if (cfg.nonlinear) {
        NonlinearTerms t = evaluate_nonlinear(s.u, s.d, cfg.poly);
        if (cfg.truncation_level) {
            L.theta_u = cutoff_theta(norm(s.u, NormKind::VDual), *cfg.truncation_level);
            L.theta_d = cutoff_theta(norm(s.d, NormKind::H2Dual), *cfg.truncation_level);
            if (L.theta_u != 1.0) {
                t.convective *= L.theta_u;
                t.transport *= L.theta_u;
            }
            if (L.theta_d != 1.0) t.stress *= L.theta_d;
        }
        ev.nu -= t.convective;
        ev.nu -= t.stress;
        ev.nd -= t.transport;
        ev.nd -= t.bulk;
        L.transfer_defect = inner(t.stress, s.u) - inner(t.transport, lap) + inner(t.transport, t.bulk);
        L.dissipation_d = norm_sq(lap - t.bulk);
        L.bulk_power = t.bulk_power;
        bulk_energy = t.bulk_energy;
    } else {
        // linear regime: no bulk potential, Psi reduces to the Dirichlet energy
        L.dissipation_d = L.d_lap;
        L.bulk_power = lp_power(s.d, cfg.poly.degree() + 1);
    }
    L.psi_director = 0.5 * L.d_grad + bulk_energy;
    L.psi = L.psi_director + L.u_l2;
    L.energy = L.psi_director + 0.5 * L.u_l2;
    return ev;
}

inline EnergyLedger measure(const State& s, const SimConfig& cfg) { return evaluate(s, cfg).ledger; }

// ---- stepping ------------------------------------------------------------------------------

namespace detail {

/// h * phi1(lambda h) with phi1(z) = (1 - e^{-z}) / z.
inline double phi1_step(double lambda, double h) { return lambda > 0.0 ? -std::expm1(-lambda * h) / lambda : h; }

template <class Layout>
void exponential_update(Coefficients<Layout>& x, const Coefficients<Layout>& n, double h) {
    const std::size_t s = x.stride();
    for (std::size_t m = 0; m < x.num_modes(); ++m) {
        const double lam = mode_eigenvalue(x, m);
        const double e = std::exp(-lam * h), w = phi1_step(lam, h);
        for (std::size_t c = 0; c < s; ++c) x[m * s + c] = e * x[m * s + c] + w * n[m * s + c];
    }
}

}  // namespace detail

/// Deterministic sub-step from a precomputed evaluation.
inline State advance(const State& s, const Evaluation& ev, double h) {
    State out = s;
    detail::exponential_update(out.u, ev.nu, h);
    detail::exponential_update(out.d, ev.nd, h);
    return out;
}

/// Exponential Euler over [t, t+h] with no jump inside: linear parts exact, the rest frozen.
inline State step(const State& s, double /*t*/, double h, const SimConfig& cfg) {
    if (!(h >= 0.0)) throw std::invalid_argument("step: negative step");
    return advance(s, evaluate(s, cfg), h);
}

/// u <- u + P_n F(t, u-; y); the director does not jump.
inline State apply_jump(const State& s, double t, const Mark& y, const SimConfig& cfg) {
    State out = s;
    out.u += noise_coefficient(cfg.noise, t, s.u, y);
    return out;
}

// ---- trajectories --------------------------------------------------------------------------

enum class SampleKind : std::uint8_t { Regular = 0, PreJump = 1, PostJump = 2 };

struct Sample {
    double t = 0.0;
    SampleKind kind = SampleKind::Regular;
    EnergyLedger ledger;
    std::optional<State> state;
};

struct JumpRecord {
    double time = 0.0;
    Mark mark;
    double increment_norm = 0.0;  // |P_n F(t, u-; y)|_H
    double energy_change = 0.0;   // |u+|^2 - |u-|^2
    std::size_t pre_sample = 0;
};

struct Trajectory {
    SimConfig config;
    BasisPtr basis;
    std::vector<Sample> samples;
    std::vector<JumpRecord> jumps;

    bool empty() const { return samples.empty(); }
    double horizon() const { return samples.empty() ? 0.0 : samples.back().t; }
};

namespace detail {

inline void guard(const State& s, const EnergyLedger& L, double scale_u, double scale_d, double factor, double t) {
    const double un = std::sqrt(L.u_l2), dn = std::sqrt(L.d_l2 + L.d_grad);
    if (!std::isfinite(un) || !std::isfinite(dn) || !std::isfinite(L.energy))
        throw InstabilityError(t, "non-finite state");
    if (un > factor * scale_u || dn > factor * scale_d)
        throw InstabilityError(t, "norm exceeded " + std::to_string(factor) + " x initial scale");
    (void)s;
}

}  // namespace detail

/// Run from a given state with a given jump list (events outside (0, T] are ignored).
inline Trajectory simulate(const SimConfig& cfg, const State& initial, const std::vector<JumpEvent>& events) {
    cfg.validate();
    const BasisPtr& basis = initial.u.basis_ptr();
    if (basis->dim() != cfg.dim || basis->cutoff() != cfg.cutoff)
        throw std::invalid_argument("simulate: initial state does not match the configured basis");
    Trajectory traj;
    traj.config = cfg;
    traj.basis = basis;

    const double T = cfg.horizon;
    const auto n_steps = static_cast<std::size_t>(std::ceil(T / cfg.dt - 1e-9));
    auto grid_time = [&](std::size_t i) { return i >= n_steps ? T : static_cast<double>(i) * cfg.dt; };

    State state = initial;
    Evaluation ev = evaluate(state, cfg);
    const double scale_u = std::max(1.0, std::sqrt(ev.ledger.u_l2));
    const double scale_d = std::max(1.0, std::sqrt(ev.ledger.d_l2 + ev.ledger.d_grad));

    auto record = [&](double t, SampleKind kind, bool keep) {
        Sample smp{t, kind, ev.ledger, std::nullopt};
        if (keep) smp.state = state;
        traj.samples.push_back(std::move(smp));
    };
    record(0.0, SampleKind::Regular, true);

    std::size_t next_event = 0;
    while (next_event < events.size() && !(events[next_event].time > 0.0)) ++next_event;
    double t = 0.0;
    std::size_t i = 0;
    while (i < n_steps) {
        const double tg = grid_time(i + 1);
        const bool jump_now = next_event < events.size() && events[next_event].time <= tg;
        const double target = jump_now ? events[next_event].time : tg;
        if (target > t) {
            state = advance(state, ev, target - t);
            t = target;
            ev = evaluate(state, cfg);
            detail::guard(state, ev.ledger, scale_u, scale_d, cfg.blowup_factor, t);
        }
        const bool on_grid = target == tg;
        if (on_grid) ++i;
        if (jump_now) {
            const JumpEvent& e = events[next_event++];
            record(t, SampleKind::PreJump, true);
            const std::size_t pre = traj.samples.size() - 1;
            const SpectralVelocity inc = noise_coefficient(cfg.noise, t, state.u, e.mark);
            const double before = ev.ledger.u_l2;
            state.u += inc;
            ev = evaluate(state, cfg);
            detail::guard(state, ev.ledger, scale_u, scale_d, cfg.blowup_factor, t);
            traj.jumps.push_back({t, e.mark, norm(inc), ev.ledger.u_l2 - before, pre});
            record(t, SampleKind::PostJump, true);
        } else {
            const bool keep = i == n_steps || (cfg.record_stride > 0 && i % static_cast<std::size_t>(cfg.record_stride) == 0);
            record(t, SampleKind::Regular, keep);
        }
    }
    return traj;
}

/// Jump times and marks for a configuration (shared by every resolution with the same seed).
inline std::vector<JumpEvent> noise_path(const SimConfig& cfg) {
    if (!cfg.noise.active()) return {};
    return sample_path(cfg.noise, cfg.horizon, derive_seed(cfg.seed, 1));
}

inline Trajectory simulate(const SimConfig& cfg) {
    cfg.validate();
    BasisPtr basis = make_basis(cfg.dim, cfg.cutoff);
    return simulate(cfg, make_initial_state(cfg, basis), noise_path(cfg));
}

}  // namespace njsm
