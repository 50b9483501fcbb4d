/// @file test_operators.cpp
/// Operators against direct-convolution oracles, cancellation identities and energy checks.
#include <gtest/gtest.h>

#include <cmath>

#include "njsm/operators.hpp"
#include "support/oracle.hpp"

using namespace njsm;

namespace {

double scale_of(std::initializer_list<double> xs) {
    double s = 0.0;
    for (double x : xs) s = std::max(s, std::abs(x));
    return std::max(s, 1e-300);
}

SpectralVelocity real_velocity_mode(const BasisPtr& b, Wavevector k, double amp) {
    SpectralVelocity u(b);
    auto m = *b->find(k);
    u.at(b->mode_to_velocity(m), 0) = amp;
    u.at(b->mode_to_velocity(b->negated(m)), 0) = amp;
    return u;
}

}  // namespace

TEST(Operators, StokesScalesSingleModes) {
    auto b = make_basis(2, 3);
    for (auto [k, lam] : std::vector<std::pair<Wavevector, double>>{{{1, 0, 0}, 1.0}, {{2, 1, 0}, 5.0}}) {
        auto u = real_velocity_mode(b, k, 0.7);
        auto au = stokes(u);
        EXPECT_LT(norm(au - lam * u), 1e-15);
    }
}

TEST(Operators, StokesAndLaplacianPairings) {
    auto b = make_basis(3, 3);
    Rng rng(2);
    auto u = random_velocity(b, rng, 1.0);
    EXPECT_NEAR(inner(stokes(u), u), norm_sq(u, NormKind::H1Seminorm), 1e-12);
    auto d = random_director(b, rng, 1.0);
    EXPECT_NEAR(inner(neumann_laplacian(d), d), norm_sq(d, NormKind::H1Seminorm), 1e-12);
    SpectralVector c(b);
    c.at(b->zero_mode(), 1) = 3.0;
    EXPECT_EQ(norm(neumann_laplacian(c)), 0.0);
}

TEST(Operators, TrilinearBAntisymmetry) {
    for (int dim : {2, 3}) {
        auto b = make_basis(dim, dim == 2 ? 6 : 3);
        Rng rng(10 + dim);
        for (int t = 0; t < 5; ++t) {
            auto u = to_vector(random_velocity(b, rng, 1.0));
            auto v = random_director(b, rng, 1.0);
            auto w = random_director(b, rng, 1.0);
            const double bvv = trilinear_b(u, v, v);
            EXPECT_LT(std::abs(bvv), 1e-11);
            const double bvw = trilinear_b(u, v, w), bwv = trilinear_b(u, w, v);
            EXPECT_LT(std::abs(bvw + bwv), 1e-11 * scale_of({bvw, bwv}));
        }
    }
}

TEST(Operators, TrilinearBOnHandBuiltFields) {
    // u = (sin y, 0), v = (0, sin x), w = (cos x cos y, 0); z = (cos x sin y, 0), s = (sin x, 0).
    auto b = make_basis(2, 2);
    const int M = 16;
    GridField gu(2, M, 2), gv(2, M, 2), gw(2, M, 2), gz(2, M, 2), gs(2, M, 2);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) {
            const double x = kTwoPi * i / M, y = kTwoPi * j / M;
            gu.comp(0)[i * M + j] = std::sin(y);
            gv.comp(1)[i * M + j] = std::sin(x);
            gw.comp(0)[i * M + j] = std::cos(x) * std::cos(y);
            gz.comp(0)[i * M + j] = std::cos(x) * std::sin(y);
            gs.comp(0)[i * M + j] = std::sin(x);
        }
    auto u = vector_from_grid(b, gu), v = vector_from_grid(b, gv), w = vector_from_grid(b, gw);
    auto z = vector_from_grid(b, gz), s = vector_from_grid(b, gs);
    // 256^2 quadrature of the closed-form integrands u^x d_x v^j w^j and u^x d_x z^x s^x.
    const int F = 256;
    double uvw = 0.0, uzs = 0.0;
    for (int i = 0; i < F; ++i)
        for (int j = 0; j < F; ++j) {
            const double x = kTwoPi * i / F, y = kTwoPi * j / F;
            const double ux = std::sin(y);
            uvw += ux * (0.0 * std::cos(x) * std::cos(y) + std::cos(x) * 0.0);
            uzs += ux * (-std::sin(x) * std::sin(y)) * std::sin(x);
        }
    uvw *= std::pow(kTwoPi / F, 2);
    uzs *= std::pow(kTwoPi / F, 2);
    EXPECT_NEAR(trilinear_b(u, v, w), uvw, 1e-10);
    EXPECT_NEAR(trilinear_b(u, z, s), uzs, 1e-10);
    EXPECT_NEAR(uzs, -kPi * kPi, 1e-10);
}

TEST(Operators, ConvectiveMatchesConvolutionOracle) {
    for (int dim : {2, 3}) {
        auto b = make_basis(dim, dim == 2 ? 5 : 2);
        Rng rng(30 + dim);
        auto u = random_velocity(b, rng, 1.0), v = random_velocity(b, rng, 1.0);
        auto fast = to_vector(convective(u, v));
        auto ref = oracle::leray(oracle::advect(oracle::components(to_vector(u)), oracle::components(to_vector(v)), dim), dim);
        EXPECT_LT(oracle::band_difference(ref, fast), 1e-12);
    }
}

TEST(Operators, ConvectiveDualityAndZeroInput) {
    auto b = make_basis(2, 6);
    Rng rng(12);
    auto u = random_velocity(b, rng, 1.0), v = random_velocity(b, rng, 1.0), w = random_velocity(b, rng, 1.0);
    auto B = convective(u, v);
    EXPECT_NEAR(inner(B, w), trilinear_b(u, v, w), 1e-12);
    EXPECT_LT(std::abs(inner(B, v)), 1e-12);
    EXPECT_EQ(norm(convective(SpectralVelocity(b), v)), 0.0);
}

TEST(Operators, TransportMatchesOracleAndCancels) {
    for (int dim : {2, 3}) {
        auto b = make_basis(dim, dim == 2 ? 5 : 2);
        Rng rng(40 + dim);
        auto u = random_velocity(b, rng, 1.0);
        auto d = random_director(b, rng, 1.0);
        auto fast = director_transport(u, d);
        auto ref = oracle::advect(oracle::components(to_vector(u)), oracle::components(d), dim);
        EXPECT_LT(oracle::band_difference(ref, fast), 1e-12);
        EXPECT_LT(std::abs(inner(fast, d)), 1e-11);
        EXPECT_EQ(norm(director_transport(SpectralVelocity(b), d)), 0.0);
    }
}

TEST(Operators, StressMatchesOracle) {
    for (int dim : {2, 3}) {
        auto b = make_basis(dim, dim == 2 ? 4 : 2);
        Rng rng(50 + dim);
        auto d1 = random_director(b, rng, 1.0), d2 = random_director(b, rng, 1.0);
        auto fast = to_vector(ericksen_stress(d1, d2));
        auto ref = oracle::leray(oracle::stress_divergence(oracle::components(d1), oracle::components(d2), dim), dim);
        EXPECT_LT(oracle::band_difference(ref, fast), 1e-12);
    }
}

TEST(Operators, StressOfConstantDirectorVanishes) {
    auto b = make_basis(2, 3);
    SpectralVector d(b);
    d.at(b->zero_mode(), 0) = 2.0;
    EXPECT_EQ(norm(ericksen_stress(d)), 0.0);
}

TEST(Operators, StressDualityIdentity) {
    for (int dim : {2, 3}) {
        auto b = make_basis(dim, dim == 2 ? 6 : 3);
        Rng rng(60 + dim);
        for (int t = 0; t < 4; ++t) {
            auto u = random_velocity(b, rng, 1.0);
            auto d = random_director(b, rng, 1.0);
            const double lhs = inner(ericksen_stress(d), u);
            const double rhs = inner(director_transport(u, d), laplacian(d));
            EXPECT_LT(std::abs(lhs - rhs), 1e-10 * scale_of({lhs, rhs}));
            EXPECT_NEAR(lhs, trilinear_m(d, d, u), 1e-10 * scale_of({lhs}));
        }
    }
}

TEST(Operators, BulkForceMatchesOracle) {
    for (auto coeffs : std::vector<std::vector<double>>{{-1.0, 1.0}, {0.5, -1.0, 2.0}}) {
        PolynomialNonlinearity poly(coeffs);
        auto b = make_basis(2, 4);
        Rng rng(70);
        auto d = random_director(b, rng, 2.0);
        auto fast = bulk_force(d, poly);
        auto ref = oracle::bulk(oracle::components(d), coeffs, 2);
        EXPECT_LT(oracle::band_difference(ref, fast), 1e-11);
    }
    PolynomialNonlinearity gl = PolynomialNonlinearity::ginzburg_landau();
    auto b3 = make_basis(3, 2);
    Rng rng(71);
    auto d3 = random_director(b3, rng, 2.0);
    EXPECT_LT(oracle::band_difference(oracle::bulk(oracle::components(d3), gl.coeffs(), 3), bulk_force(d3, gl)), 1e-11);
}

TEST(Operators, BulkForceVanishesOnSphereAndAtZero) {
    auto gl = PolynomialNonlinearity::ginzburg_landau();
    auto b = make_basis(2, 3);
    EXPECT_EQ(norm(bulk_force(SpectralVector(b), gl)), 0.0);
    SpectralVector d(b);
    d.at(b->zero_mode(), 0) = 0.6 * kTwoPi;  // constant (0.6, 0.8)
    d.at(b->zero_mode(), 1) = 0.8 * kTwoPi;
    EXPECT_LT(norm(bulk_force(d, gl)), 1e-12);
}

TEST(Operators, PolynomialValidation) {
    EXPECT_THROW(PolynomialNonlinearity({1.0}), std::invalid_argument);
    EXPECT_THROW(PolynomialNonlinearity({1.0, -1.0}), std::invalid_argument);
    PolynomialNonlinearity p({-1.0, 0.0, 1.0});
    EXPECT_THROW(p.check_dimension(3), std::invalid_argument);
    EXPECT_NO_THROW(p.check_dimension(2));
    // F~' = f~ by central difference
    for (double r : {0.0, 0.3, 1.7}) {
        const double h = 1e-5;
        EXPECT_NEAR((p.F_tilde(r + h) - p.F_tilde(r - h)) / (2 * h), p.f_tilde(r), 1e-8);
    }
    EXPECT_EQ(p.F_tilde(0.0), 0.0);
}

TEST(Operators, EnergyOfZeroAndSingleMode) {
    auto gl = PolynomialNonlinearity::ginzburg_landau();
    auto b = make_basis(2, 3);
    EXPECT_EQ(director_energy(SpectralVector(b), gl), 0.0);
    // d = (a cos x, 0): |d|^2 = a^2 cos^2 x; F~(r) = r^2/2 - r.
    const double a = 0.9;
    SpectralVector d(b);
    d.at(*b->find({1, 0, 0}), 0) = 0.5 * a * kTwoPi;
    d.at(*b->find({-1, 0, 0}), 0) = 0.5 * a * kTwoPi;
    const int F = 512;
    double bulk = 0.0, grad = 0.0;
    for (int i = 0; i < F; ++i) {
        const double x = kTwoPi * (i + 0.5) / F;
        const double r = a * a * std::cos(x) * std::cos(x);
        bulk += 0.5 * gl.F_tilde(r);
        grad += 0.5 * a * a * std::sin(x) * std::sin(x);
    }
    const double ref = (bulk + grad) * (kTwoPi / F) * kTwoPi;
    EXPECT_NEAR(director_energy(d, gl), ref, 1e-10);
}

TEST(Operators, EnergyGradientFiniteDifference) {
    auto poly = PolynomialNonlinearity({0.2, -1.0, 0.5});
    auto b = make_basis(2, 4);
    Rng rng(80);
    auto d = random_director(b, rng, 3.0);
    auto g = random_director(b, rng, 1.0);
    const double exact = inner(neumann_laplacian(d) + bulk_force(d, poly), g);
    std::vector<double> errs;
    for (double eps : {1e-2, 1e-3}) {
        const double fd = (director_energy(d + eps * g, poly) - director_energy(d - eps * g, poly)) / (2 * eps);
        errs.push_back(std::abs(fd - exact));
    }
    EXPECT_NEAR(std::log10(errs[0] / errs[1]), 2.0, 0.1);
}

TEST(Operators, TransportBulkPairingVanishes) {
    for (int dim : {2, 3}) {
        auto poly = dim == 2 ? PolynomialNonlinearity({-1.0, 0.5, 1.0}) : PolynomialNonlinearity::ginzburg_landau();
        auto b = make_basis(dim, dim == 2 ? 6 : 3);
        Rng rng(90 + dim);
        auto u = random_velocity(b, rng, 1.0);
        auto d = random_director(b, rng, 2.0);
        const double scale = norm(director_transport(u, d)) * norm(bulk_force(d, poly));
        EXPECT_LT(std::abs(transport_bulk_pairing(u, d, poly)), 1e-10 * scale);
        EXPECT_EQ(transport_bulk_pairing(SpectralVelocity(b), d, poly), 0.0);
        SpectralVector c(b);
        c.at(b->zero_mode(), 0) = 1.0;
        EXPECT_LT(std::abs(transport_bulk_pairing(u, c, poly)), 1e-14);
    }
}

TEST(Operators, FusedEvaluationMatchesSeparateCalls) {
    auto poly = PolynomialNonlinearity::ginzburg_landau();
    auto b = make_basis(2, 6);
    Rng rng(99);
    auto u = random_velocity(b, rng, 1.0);
    auto d = random_director(b, rng, 2.0);
    auto t = evaluate_nonlinear(u, d, poly);
    EXPECT_LT(norm(t.convective - convective(u, u)), 1e-12);
    EXPECT_LT(norm(t.stress - ericksen_stress(d)), 1e-12);
    EXPECT_LT(norm(t.transport - director_transport(u, d)), 1e-12);
    EXPECT_LT(norm(t.bulk - bulk_force(d, poly)), 1e-12);
}

TEST(Operators, LpPowerMatchesPointwiseSum) {
    auto b = make_basis(2, 3);
    Rng rng(5);
    auto d = random_director(b, rng, 2.0);
    const int F = 64;
    double acc = 0.0;
    for (int i = 0; i < F; ++i)
        for (int j = 0; j < F; ++j) {
            auto v = oracle::evaluate(d, {kTwoPi * i / F, kTwoPi * j / F, 0.0});
            const double r = v[0] * v[0] + v[1] * v[1];
            acc += r * r * r;
        }
    acc *= std::pow(kTwoPi / F, 2);
    EXPECT_NEAR(lp_power(d, 3), acc, 1e-10 * acc);
}
