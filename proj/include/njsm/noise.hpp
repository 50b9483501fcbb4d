// Finite-intensity Poisson random measure, compensated jump coefficients and
// Monte-Carlo verifiers for the isometry formula and the Lipschitz/growth assumption.
#pragma once

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "njsm/core.hpp"
#include "njsm/spectral_basis.hpp"

namespace njsm {

using Mark = std::vector<double>;

/// Normalised mark law nu / nu(Y) on R^m.
struct MarkDistribution {
    enum class Kind { Uniform, Gaussian, Discrete };

    Kind kind = Kind::Uniform;
    std::vector<double> lower{-1.0}, upper{1.0};         // uniform box
    std::vector<double> mean, stddev;                    // independent Gaussian components
    std::vector<std::vector<double>> atoms;              // discrete support
    std::vector<double> weights;                         // discrete probabilities

    static MarkDistribution uniform(std::vector<double> lo, std::vector<double> hi) {
        MarkDistribution d;
        d.kind = Kind::Uniform;
        d.lower = std::move(lo);
        d.upper = std::move(hi);
        return d;
    }
    static MarkDistribution gaussian(std::vector<double> mu, std::vector<double> sigma) {
        MarkDistribution d;
        d.kind = Kind::Gaussian;
        d.mean = std::move(mu);
        d.stddev = std::move(sigma);
        return d;
    }
    static MarkDistribution discrete(std::vector<std::vector<double>> pts, std::vector<double> w) {
        MarkDistribution d;
        d.kind = Kind::Discrete;
        d.atoms = std::move(pts);
        d.weights = std::move(w);
        return d;
    }

    int dim() const {
        switch (kind) {
            case Kind::Uniform: return static_cast<int>(lower.size());
            case Kind::Gaussian: return static_cast<int>(mean.size());
            case Kind::Discrete: return atoms.empty() ? 0 : static_cast<int>(atoms.front().size());
        }
        return 0;
    }

    void validate() const {
        if (dim() < 1) throw std::invalid_argument("marks: dimension must be at least 1");
        switch (kind) {
            case Kind::Uniform:
                if (upper.size() != lower.size()) throw std::invalid_argument("marks: box bounds differ in length");
                for (std::size_t i = 0; i < lower.size(); ++i)
                    if (!(lower[i] < upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
                        throw std::invalid_argument("marks: empty or unbounded box");
                break;
            case Kind::Gaussian:
                if (stddev.size() != mean.size()) throw std::invalid_argument("marks: mean/stddev length mismatch");
                for (double s : stddev)
                    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("marks: stddev must be positive");
                break;
            case Kind::Discrete: {
                if (weights.size() != atoms.size()) throw std::invalid_argument("marks: atoms/weights mismatch");
                double total = 0.0;
                for (std::size_t i = 0; i < atoms.size(); ++i) {
                    if (atoms[i].size() != atoms.front().size())
                        throw std::invalid_argument("marks: atoms of different dimension");
                    if (!(weights[i] >= 0.0)) throw std::invalid_argument("marks: negative weight");
                    total += weights[i];
                }
                if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("marks: weights must sum to 1");
                break;
            }
        }
    }

    Mark sample(Rng& rng) const {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        return sample_with_first(unit(rng), rng);
    }

    /// Draw with the first coordinate taken from stratum i of n (jittered), others as usual.
    Mark sample_stratified(std::size_t i, std::size_t n, Rng& rng) const {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        return sample_with_first((static_cast<double>(i) + unit(rng)) / static_cast<double>(n), rng);
    }

    /// E[(a + g Y_0)] for the first coordinate.
    double affine_mean(double a, double g) const {
        switch (kind) {
            case Kind::Uniform: return a + g * 0.5 * (lower[0] + upper[0]);
            case Kind::Gaussian: return a + g * mean[0];
            case Kind::Discrete: {
                double acc = 0.0;
                for (std::size_t i = 0; i < atoms.size(); ++i) acc += weights[i] * (a + g * atoms[i][0]);
                return acc;
            }
        }
        return 0.0;
    }

    /// E|a + g Y_0|^p in closed form (Gaussian supports p in {1, 2, 4}).
    double affine_abs_moment(double a, double g, int p) const {
        if (p < 1) throw std::invalid_argument("marks: moment order must be >= 1");
        switch (kind) {
            case Kind::Uniform: {
                double lo = a + g * lower[0], hi = a + g * upper[0];
                if (lo > hi) std::swap(lo, hi);
                if (hi - lo == 0.0) return std::pow(std::abs(lo), p);
                auto G = [p](double x) { return std::copysign(std::pow(std::abs(x), p + 1) / (p + 1), x); };
                return (G(hi) - G(lo)) / (hi - lo);
            }
            case Kind::Gaussian: {
                const double m = a + g * mean[0], s = std::abs(g) * stddev[0];
                if (s == 0.0) return std::pow(std::abs(m), p);
                switch (p) {
                    case 1: {
                        const double phi = 0.5 * std::erfc(m / (s * std::sqrt(2.0)));  // Phi(-m/s)
                        return s * std::sqrt(2.0 / kPi) * std::exp(-m * m / (2 * s * s)) + m * (1.0 - 2.0 * phi);
                    }
                    case 2: return m * m + s * s;
                    case 4: return m * m * m * m + 6 * m * m * s * s + 3 * s * s * s * s;
                    default: throw std::invalid_argument("marks: Gaussian moments available for p in {1,2,4}");
                }
            }
            case Kind::Discrete: {
                double acc = 0.0;
                for (std::size_t i = 0; i < atoms.size(); ++i)
                    acc += weights[i] * std::pow(std::abs(a + g * atoms[i][0]), p);
                return acc;
            }
        }
        return 0.0;
    }

private:
    Mark sample_with_first(double u0, Rng& rng) const {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        Mark y(dim());
        switch (kind) {
            case Kind::Uniform:
                y[0] = lower[0] + (upper[0] - lower[0]) * u0;
                for (std::size_t i = 1; i < y.size(); ++i) y[i] = lower[i] + (upper[i] - lower[i]) * unit(rng);
                break;
            case Kind::Gaussian: {
                const double q = std::clamp(u0, 1e-300, 1.0 - 1e-16);
                y[0] = boost::math::quantile(boost::math::normal(mean[0], stddev[0]), q);
                std::normal_distribution<double> g(0.0, 1.0);
                for (std::size_t i = 1; i < y.size(); ++i) y[i] = mean[i] + stddev[i] * g(rng);
                break;
            }
            case Kind::Discrete: {
                double acc = 0.0;
                std::size_t pick = atoms.size() - 1;
                for (std::size_t i = 0; i < atoms.size(); ++i) {
                    acc += weights[i];
                    if (u0 < acc) {
                        pick = i;
                        break;
                    }
                }
                y = atoms[pick];
                break;
            }
        }
        return y;
    }
};

enum class NoiseFamily { Additive, LinearMultiplicative, BoundedMultiplicative };

inline const char* family_name(NoiseFamily f) {
    switch (f) {
        case NoiseFamily::Additive: return "additive";
        case NoiseFamily::LinearMultiplicative: return "linear_multiplicative";
        case NoiseFamily::BoundedMultiplicative: return "bounded_multiplicative";
    }
    return "?";
}

/// Real divergence-free mode amplitude * (e_k + e_{-k})/sqrt2 on polarisation p.
struct ShapeMode {
    Wavevector k{1, 0, 0};
    int polarization = 0;
    double amplitude = 1.0;
};

struct AnalyticConstants {
    double lipschitz = 0.0;               // L
    std::array<double, 3> growth{};       // C_1, C_2, C_4
};

inline constexpr std::array<int, 3> kGrowthOrders{1, 2, 4};

/**
 * F(t, u; y) = c(y) g(u) with c(y) = offset + slope * y_0 and
 *   additive: g = phi, linear: g = u, bounded: g = u / (1 + |u|).
 */
struct NoiseSpec {
    double rate = 0.0;
    MarkDistribution marks;
    NoiseFamily family = NoiseFamily::LinearMultiplicative;
    double offset = 0.0;
    double slope = 1.0;
    std::vector<ShapeMode> shape{ShapeMode{}};

    bool active() const { return rate > 0.0; }

    double scale(const Mark& y) const { return offset + slope * y[0]; }

    /// lambda E|c|^p.
    double scale_moment(int p) const { return rate * marks.affine_abs_moment(offset, slope, p); }
    /// lambda E[c].
    double scale_mean() const { return rate * marks.affine_mean(offset, slope); }

    void validate() const {
        if (!(rate >= 0.0) || !std::isfinite(rate)) throw std::invalid_argument("noise: rate must be finite and >= 0");
        if (!std::isfinite(offset) || !std::isfinite(slope)) throw std::invalid_argument("noise: scalar map not finite");
        marks.validate();
        if (family == NoiseFamily::Additive && shape.empty())
            throw std::invalid_argument("noise: additive family needs a shape");
    }

    SpectralVelocity shape_field(const BasisPtr& basis) const {
        SpectralVelocity phi(basis);
        for (const auto& s : shape) {
            if (s.polarization < 0 || s.polarization >= basis->polarizations())
                throw std::invalid_argument("noise: shape polarization out of range");
            auto idx = basis->find(s.k);
            if (!idx || *idx == basis->zero_mode()) continue;
            const std::size_t v = basis->mode_to_velocity(*idx);
            const std::size_t w = basis->velocity_negated(v);
            phi.at(v, s.polarization) += s.amplitude / std::sqrt(2.0);
            phi.at(w, s.polarization) += s.amplitude / std::sqrt(2.0);
        }
        return phi;
    }

    AnalyticConstants constants(const BasisPtr& basis) const {
        AnalyticConstants c;
        const double phi = family == NoiseFamily::Additive ? norm(shape_field(basis)) : 1.0;
        c.lipschitz = family == NoiseFamily::Additive ? 0.0 : scale_moment(2);
        for (std::size_t i = 0; i < kGrowthOrders.size(); ++i)
            c.growth[i] = scale_moment(kGrowthOrders[i]) * std::pow(phi, kGrowthOrders[i]);
        return c;
    }
};

/// g(u): the state-dependent factor of the coefficient.
inline SpectralVelocity noise_direction(const NoiseSpec& spec, const SpectralVelocity& u) {
    switch (spec.family) {
        case NoiseFamily::Additive: return spec.shape_field(u.basis_ptr());
        case NoiseFamily::LinearMultiplicative: return u;
        case NoiseFamily::BoundedMultiplicative: return (1.0 / (1.0 + norm(u))) * u;
    }
    return u;
}

inline SpectralVelocity noise_coefficient(const NoiseSpec& spec, double /*t*/, const SpectralVelocity& u,
                                          const Mark& y) {
    return spec.scale(y) * noise_direction(spec, u);
}

/// int_Y F(t, u; y) nu(dy).
inline SpectralVelocity compensator_drift(const NoiseSpec& spec, double /*t*/, const SpectralVelocity& u) {
    if (!spec.active()) return SpectralVelocity(u.basis_ptr());
    return spec.scale_mean() * noise_direction(spec, u);
}

struct JumpEvent {
    double time = 0.0;
    Mark mark;
};

/// Atoms of eta on (0, T]: exponential inter-arrivals, i.i.d. marks.
inline std::vector<JumpEvent> sample_path(const NoiseSpec& spec, double horizon, std::uint64_t seed) {
    if (!(horizon > 0.0)) throw std::invalid_argument("sample_path: horizon must be positive");
    spec.validate();
    std::vector<JumpEvent> events;
    if (!spec.active()) return events;
    Rng rng(seed);
    std::exponential_distribution<double> wait(spec.rate);
    double t = 0.0;
    while (true) {
        t += wait(rng);
        if (t > horizon) break;
        events.push_back({t, spec.marks.sample(rng)});
    }
    return events;
}

// ---- verifiers -----------------------------------------------------------------------------

/// Integrand F(., v_i; .) on [t_i, t_{i+1}); breakpoints has one more entry than states.
struct StepProcess {
    std::vector<double> breakpoints;
    std::vector<SpectralVelocity> states;
};

struct IsometryReport {
    double empirical = 0.0;
    double analytic = 0.0;
    double std_error = 0.0;
    double z_score = 0.0;
    std::size_t paths = 0;
    bool within(double sigmas) const {
        return std::abs(empirical - analytic) <= sigmas * std_error + 1e-300 ||
               (std_error == 0.0 && empirical == analytic);
    }
};

/// Monte-Carlo second moment of the compensated integral of a step integrand.
inline IsometryReport verify_isometry(const NoiseSpec& spec, const StepProcess& xi, std::size_t n_paths,
                                      std::uint64_t seed) {
    const std::size_t m = xi.states.size();
    if (xi.breakpoints.size() != m + 1 || m == 0) throw std::invalid_argument("isometry: malformed step process");
    for (std::size_t i = 0; i < m; ++i)
        if (!(xi.breakpoints[i + 1] > xi.breakpoints[i])) throw std::invalid_argument("isometry: breakpoints must increase");
    if (xi.breakpoints.front() != 0.0) throw std::invalid_argument("isometry: first breakpoint must be 0");

    std::vector<SpectralVelocity> g;
    for (const auto& v : xi.states) g.push_back(noise_direction(spec, v));
    std::vector<double> gram(m * m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) gram[i * m + j] = inner(g[i], g[j]);

    IsometryReport rep;
    rep.paths = n_paths;
    for (std::size_t i = 0; i < m; ++i)
        rep.analytic += (xi.breakpoints[i + 1] - xi.breakpoints[i]) * spec.scale_moment(2) * gram[i * m + i];

    const double T = xi.breakpoints.back();
    const double drift = spec.scale_mean();
    std::vector<double> S(m);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        for (std::size_t i = 0; i < m; ++i) S[i] = -drift * (xi.breakpoints[i + 1] - xi.breakpoints[i]);
        for (const auto& ev : sample_path(spec, T, derive_seed(seed, p))) {
            auto it = std::upper_bound(xi.breakpoints.begin(), xi.breakpoints.end(), ev.time);
            std::size_t i = static_cast<std::size_t>(it - xi.breakpoints.begin()) - 1;
            if (i >= m) i = m - 1;
            S[i] += spec.scale(ev.mark);
        }
        double sq = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) sq += S[i] * S[j] * gram[i * m + j];
        const double delta = sq - mean;
        mean += delta / static_cast<double>(p + 1);
        m2 += delta * (sq - mean);
    }
    rep.empirical = mean;
    if (n_paths > 1) rep.std_error = std::sqrt(m2 / static_cast<double>(n_paths - 1) / static_cast<double>(n_paths));
    rep.z_score = rep.std_error > 0.0 ? (rep.empirical - rep.analytic) / rep.std_error : 0.0;
    return rep;
}

struct NoiseBoundsReport {
    double lipschitz_estimate = 0.0;
    std::array<double, 3> growth_estimate{};
    AnalyticConstants analytic;
    bool holds(double rel_tol) const {
        if (lipschitz_estimate > analytic.lipschitz * (1.0 + rel_tol)) return false;
        for (std::size_t i = 0; i < growth_estimate.size(); ++i)
            if (growth_estimate[i] > analytic.growth[i] * (1.0 + rel_tol)) return false;
        return true;
    }
};

/// Largest Monte-Carlo Lipschitz and growth ratios over random states; mark integrals use
/// stratified sampling of the first mark coordinate.
inline NoiseBoundsReport verify_noise_bounds(const NoiseSpec& spec, const BasisPtr& basis, std::size_t n_states,
                                             std::size_t n_marks, std::uint64_t seed) {
    spec.validate();
    NoiseBoundsReport rep;
    rep.analytic = spec.constants(basis);
    Rng rng(derive_seed(seed, 0));
    std::uniform_real_distribution<double> logscale(-2.0, 2.0);
    auto mc_scale_moment = [&](int p) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n_marks; ++i)
            acc += std::pow(std::abs(spec.scale(spec.marks.sample_stratified(i, n_marks, rng))), p);
        return spec.rate * acc / static_cast<double>(n_marks);
    };
    for (std::size_t s = 0; s < n_states; ++s) {
        auto u1 = random_velocity(basis, rng, std::pow(10.0, logscale(rng)));
        auto u2 = random_velocity(basis, rng, std::pow(10.0, logscale(rng)));
        const double dist2 = norm_sq(u1 - u2);
        const double gdiff2 = norm_sq(noise_direction(spec, u1) - noise_direction(spec, u2));
        if (dist2 > 0.0) rep.lipschitz_estimate = std::max(rep.lipschitz_estimate, mc_scale_moment(2) * gdiff2 / dist2);
        const double un = norm(u1), gn = norm(noise_direction(spec, u1));
        for (std::size_t i = 0; i < kGrowthOrders.size(); ++i) {
            const int p = kGrowthOrders[i];
            const double ratio = mc_scale_moment(p) * std::pow(gn, p) / (1.0 + std::pow(un, p));
            rep.growth_estimate[i] = std::max(rep.growth_estimate[i], ratio);
        }
    }
    return rep;
}

}  // namespace njsm
