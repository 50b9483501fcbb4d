// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "njsm/diagnostics.hpp"
#include "support/modulus_oracle.hpp"
#include "support/oracle.hpp"

using namespace njsm;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---- 1 -----------------------------------------------------------------------------------

Outcome identities() {
    const auto gl = PolynomialNonlinearity::ginzburg_landau();
    double worst = 0.0;
    std::string name;
    for (auto [dim, K] : {std::pair{2, 8}, std::pair{3, 3}})
        for (const auto& r : operator_identities(dim, K, 1000, 0x1d + dim, gl))
            if (r.max_relative >= worst) worst = r.max_relative, name = r.name + fmt("@%dD", dim);
    return {worst < 1e-10, fmt("worst relative residual %.2e (%s)", worst, name.c_str())};
}

// ---- 2 -----------------------------------------------------------------------------------

Outcome oracle_equivalence() {
    const auto gl = PolynomialNonlinearity::ginzburg_landau();
    double worst = 0.0;
    Rng rng(0x02);
    for (int i = 0; i < 100; ++i) {
        const int dim = i % 4 == 3 ? 3 : 2;
        const int K = dim == 2 ? 2 + i % 7 : 2 + i % 2;
        auto b = make_basis(dim, K);
        auto u = random_velocity(b, rng, 1.0), v = random_velocity(b, rng, 1.0);
        auto d = random_director(b, rng, 1.0), e = random_director(b, rng, 1.0);
        const auto uc = oracle::components(to_vector(u)), vc = oracle::components(to_vector(v));
        const auto dc = oracle::components(d), ec = oracle::components(e);
        worst = std::max(worst, oracle::band_difference(oracle::leray(oracle::advect(uc, vc, dim), dim),
                                                        to_vector(convective(u, v))));
        worst = std::max(worst, oracle::band_difference(oracle::advect(uc, dc, dim), director_transport(u, d)));
        worst = std::max(worst, oracle::band_difference(oracle::leray(oracle::stress_divergence(dc, ec, dim), dim),
                                                        to_vector(ericksen_stress(d, e))));
        worst = std::max(worst, oracle::band_difference(oracle::bulk(dc, gl.coeffs(), dim), bulk_force(d, gl)));
    }
    return {worst < 1e-10, fmt("worst coefficient difference %.2e over 100 fields", worst)};
}

// ---- 3 -----------------------------------------------------------------------------------

Outcome gradient_check() {
    bool ok = true;
    std::string detail = "orders";
    int idx = 0;
    for (const auto& poly : {PolynomialNonlinearity::ginzburg_landau(), PolynomialNonlinearity({0.2, -1.0, 0.5})}) {
        auto b = make_basis(2, 4);
        Rng rng(0x03 + idx++);
        auto d = random_director(b, rng, 1.0);
        auto g = random_director(b, rng, 1.0);
        const double exact = inner(neumann_laplacian(d) + bulk_force(d, poly), g);
        std::vector<double> err;
        for (double eps : {1e-2, 1e-3, 1e-4}) {
            const double fd = (director_energy(d + eps * g, poly) - director_energy(d - eps * g, poly)) / (2 * eps);
            err.push_back(std::abs(fd - exact));
        }
        for (std::size_t i = 0; i + 1 < err.size(); ++i) {
            const double order = std::log10(err[i] / err[i + 1]);
            ok = ok && std::abs(order - 2.0) <= 0.1;
            detail += fmt(" %.3f", order);
        }
    }
    return {ok, detail};
}

// ---- 4, 5 --------------------------------------------------------------------------------

NoiseSpec family_spec(NoiseFamily f) {
    NoiseSpec s;
    s.rate = 2.0;
    s.family = f;
    s.offset = 0.2;
    s.slope = 0.5;
    s.marks = f == NoiseFamily::BoundedMultiplicative ? MarkDistribution::gaussian({0.0}, {1.0})
                                                       : MarkDistribution::uniform({-1.0}, {1.0});
    return s;
}

constexpr NoiseFamily kFamilies[] = {NoiseFamily::Additive, NoiseFamily::LinearMultiplicative,
                                     NoiseFamily::BoundedMultiplicative};

Outcome isometry() {
    bool ok = true;
    std::string detail = "z-scores";
    auto b = make_basis(2, 3);
    Rng rng(0x04);
    StepProcess xi{{0.0, 0.3, 0.7, 1.0},
                   {random_velocity(b, rng, 1.0), random_velocity(b, rng, 2.0), random_velocity(b, rng, 0.5)}};
    for (auto f : kFamilies) {
        auto r = verify_isometry(family_spec(f), xi, 100000, 0x40 + static_cast<int>(f));
        ok = ok && r.analytic > 0.0 && r.within(4.0);
        detail += fmt(" %s=%+.2f", family_name(f), r.z_score);
    }
    return {ok, detail};
}

Outcome noise_bounds() {
    bool ok = true;
    std::string detail = "max estimate/analytic";
    auto b = make_basis(2, 3);
    for (auto f : kFamilies) {
        auto r = verify_noise_bounds(family_spec(f), b, 50, 4000, 0x50 + static_cast<int>(f));
        double worst = r.analytic.lipschitz > 0.0 ? r.lipschitz_estimate / r.analytic.lipschitz : 0.0;
        for (std::size_t i = 0; i < r.growth_estimate.size(); ++i)
            worst = std::max(worst, r.growth_estimate[i] / r.analytic.growth[i]);
        ok = ok && r.holds(0.01);
        detail += fmt(" %s=%.4f", family_name(f), worst);
    }
    return {ok, detail};
}

// ---- 6 -----------------------------------------------------------------------------------

std::pair<double, double> residual_slopes(SimConfig cfg) {
    std::vector<double> res;
    for (double dt : {1e-3, 5e-4, 2.5e-4}) {
        cfg.dt = dt;
        res.push_back(energy_check_coupled(simulate(cfg)).max_residual);
    }
    return {std::log2(res[0] / res[1]), std::log2(res[1] / res[2])};
}

Outcome energy_identity() {
    SimConfig cfg;
    cfg.cutoff = 8;
    cfg.horizon = 0.05;
    cfg.noise.rate = 0.0;
    cfg.ic.velocity_amplitude = 0.8;
    cfg.ic.director_amplitude = 1.5;
    cfg.ic.slope = 4.0;
    auto [s1, s2] = residual_slopes(cfg);
    bool ok = std::abs(s1 - 2.0) <= 0.2 && std::abs(s2 - 2.0) <= 0.2;
    // rougher data is still pre-asymptotic at these steps; reported, not gated
    cfg.ic.slope = 3.0;
    auto [r1, r2] = residual_slopes(cfg);

    cfg.noise = SimConfig::default_noise();
    cfg.horizon = 1.0;
    cfg.dt = 1e-3;
    cfg.record_stride = 0;
    auto traj = simulate(cfg);
    auto r = energy_check_coupled(traj);
    ok = ok && !traj.jumps.empty() && r.jumps_checked == traj.jumps.size() && r.max_jump_mismatch < 1e-12;
    return {ok, fmt("slopes %.3f %.3f (slope-3 data %.3f %.3f); %zu jumps, mismatch %.1e", s1, s2, r1, r2,
                    r.jumps_checked, r.max_jump_mismatch)};
}

// ---- 7 -----------------------------------------------------------------------------------

Outcome moments() {
    SimConfig cfg;
    cfg.horizon = 0.5;
    cfg.dt = 2e-3;
    cfg.record_stride = 0;
    cfg.ic.cutoff = 8;
    std::vector<std::vector<MomentEstimate>> byK;
    for (int K : {2, 4, 8}) {
        cfg.cutoff = K;
        std::vector<PathSummary> s;
        for (std::size_t p = 0; p < 200; ++p) {
            auto c = cfg;
            c.seed = derive_seed(0x07, p);
            s.push_back(summarize(simulate(c)));
        }
        byK.push_back(moment_estimates(s, {1, 2}));
    }
    bool ok = true;
    std::string detail;
    for (std::size_t q = 0; q < byK[0].size(); ++q) {
        if (byK[0][q].quantity == "dissipation") continue;
        for (std::size_t k = 0; k + 1 < byK.size(); ++k) ok = ok && byK[k].at(q).overlaps(byK[k + 1].at(q), 4.0);
        detail += fmt("%s^%d %.4g/%.4g/%.4g ", byK[0][q].quantity.c_str(), byK[0][q].power, byK[0][q].mean,
                      byK[1][q].mean, byK[2][q].mean);
    }
    return {ok, detail};
}

// ---- 8 -----------------------------------------------------------------------------------

Outcome uniqueness() {
    SimConfig cfg;
    cfg.cutoff = 4;
    cfg.horizon = 0.2;
    cfg.noise = SimConfig::default_noise();
    auto [a, unused] = perturbed_pair(cfg, 0.0);
    auto same = uniqueness_experiment(cfg, a, a);
    bool ok = same.max_D == 0.0;

    auto [b1, b2] = perturbed_pair(cfg, 1e-6);
    auto big = uniqueness_experiment(cfg, b1, b2);
    auto [c1, c2] = perturbed_pair(cfg, 1e-8);
    auto small = uniqueness_experiment(cfg, c1, c2, big.constants);
    const double C = big.gronwall_constant;
    ok = ok && big.gronwall_holds(C) && small.gronwall_holds(C + 1e-6);
    const double factor = small.ratio() / big.ratio();
    ok = ok && factor <= 4.0 && factor >= 0.25;
    return {ok, fmt("identical max D %.1e; C %.3g; D(T)/D(0) %.4g vs %.4g", same.max_D, C, big.ratio(), small.ratio())};
}

// ---- 9 -----------------------------------------------------------------------------------

Outcome modulus() {
    std::mt19937_64 rng(0x09);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    int agree = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const int m = 2 + static_cast<int>(U(rng) * 11);
        std::vector<double> t{0.0};
        std::vector<bool> left{false};
        while (static_cast<int>(t.size()) < m - 1) {
            const double next = t.back() + 0.02 + U(rng) * 0.2;
            if (U(rng) < 0.3 && static_cast<int>(t.size()) < m - 2) {
                t.push_back(next), left.push_back(true);
                t.push_back(next), left.push_back(false);
            } else {
                t.push_back(next), left.push_back(false);
            }
        }
        t.push_back(t.back() + 0.02 + U(rng) * 0.2);
        left.push_back(false);
        const int dim = 1 + trial % 3;
        std::vector<std::vector<double>> x;
        for (std::size_t i = 0; i < t.size(); ++i) {
            std::vector<double> v;
            for (int c = 0; c < dim; ++c) v.push_back(U(rng) * 4.0 - 2.0);
            x.push_back(v);
        }
        const double delta = (0.05 + 0.9 * U(rng)) * (t.back() - t.front());
        auto dist = [&](std::size_t i, std::size_t j) {
            double s = 0.0;
            for (std::size_t c = 0; c < x[i].size(); ++c) s += (x[i][c] - x[j][c]) * (x[i][c] - x[j][c]);
            return std::sqrt(s);
        };
        agree += cadlag_modulus(t, left, dist, delta) == oracle::brute_modulus(t, left, x, delta);
    }
    return {agree == 500, fmt("%d/500 exact matches", agree)};
}

// ---- 10 ----------------------------------------------------------------------------------

Outcome convergence() {
    SimConfig cfg;
    cfg.cutoff = 8;
    cfg.horizon = 0.1;
    cfg.ic.cutoff = 8;
    cfg.ic.slope = 4.0;
    cfg.ic.velocity_amplitude = 0.8;
    cfg.ic.director_amplitude = 1.5;
    auto full = galerkin_convergence_study(cfg, {2, 4, 8});
    bool ok = full.monotone();

    cfg.nonlinear = false;
    cfg.noise.rate = 0.0;
    cfg.ic.slope = 1.0;
    auto lin = galerkin_convergence_study(cfg, {2, 4, 8});
    double worst = 0.0;
    for (std::size_t r = 0; r < lin.rows.size(); ++r) {
        const auto& row = lin.rows[r];
        for (std::size_t i = 0; i < row.times.size(); ++i) {
            auto [tu, td] = linear_tail(lin.initial[r + 1], row.coarse, row.times[i]);
            worst = std::max(worst, std::abs(row.u_dist_sq[i] - tu) / std::max(1.0, tu));
            worst = std::max(worst, std::abs(row.d_dist_sq[i] - td) / std::max(1.0, td));
        }
    }
    ok = ok && lin.monotone() && worst < 1e-10;
    return {ok, fmt("distances %.3e > %.3e; linear tail error %.1e", full.rows[0].distance(),
                    full.rows[1].distance(), worst)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"operator identities", identities},
        {"oracle equivalence", oracle_equivalence},
        {"energy gradient", gradient_check},
        {"jump isometry", isometry},
        {"noise growth and Lipschitz bounds", noise_bounds},
        {"energy identity", energy_identity},
        {"moment boundedness", moments},
        {"pathwise uniqueness", uniqueness},
        {"cadlag modulus oracle", modulus},
        {"Galerkin convergence", convergence},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::printf("%s %2zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                    secs);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
