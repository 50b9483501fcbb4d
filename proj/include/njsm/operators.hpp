// Linear and nonlinear operators of the Galerkin system, evaluated pseudo-spectrally on
// alias-free grids.
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "njsm/polynomial.hpp"
#include "njsm/spectral_basis.hpp"

namespace njsm {

// ---- linear operators ----------------------------------------------------------------------

/// Stokes operator, |k|^2 on every velocity mode.
inline SpectralVelocity stokes(const SpectralVelocity& u) {
    SpectralVelocity out = u;
    const std::size_t s = u.stride();
    for (std::size_t v = 0; v < u.num_modes(); ++v) {
        const double lam = u.basis().velocity_eigenvalue(v);
        for (std::size_t p = 0; p < s; ++p) out[v * s + p] *= lam;
    }
    return out;
}

/// Periodic (Neumann) Laplacian with the positive sign convention, A d = -Lap d.
inline SpectralVector neumann_laplacian(const SpectralVector& d) {
    SpectralVector out = d;
    const std::size_t s = d.stride();
    for (std::size_t m = 0; m < d.num_modes(); ++m) {
        const double lam = d.basis().eigenvalue(m);
        for (std::size_t c = 0; c < s; ++c) out[m * s + c] *= lam;
    }
    return out;
}

inline SpectralVector laplacian(const SpectralVector& d) { return -1.0 * neumann_laplacian(d); }

// ---- grid helpers --------------------------------------------------------------------------

namespace detail {

/// Samples of component `comp` of d, differentiated along `axis` when axis >= 0.
inline void synth(const SpectralVector& d, int comp, int axis, int size, std::span<double> out) {
    const Basis& b = d.basis();
    std::vector<cplx> per_mode(b.num_modes());
    for (std::size_t m = 0; m < b.num_modes(); ++m) {
        cplx c = d.at(m, comp);
        if (axis >= 0) c *= cplx{0.0, static_cast<double>(b.mode(m)[axis])};
        per_mode[m] = c;
    }
    synthesize(b, per_mode, size, out);
}

inline GridField values_grid(const SpectralVector& d, int size) {
    const int n = d.basis().dim();
    GridField g(n, size, n);
    for (int c = 0; c < n; ++c) synth(d, c, -1, size, g.comp(c));
    return g;
}

/// Component i*n + j holds d_i d^j.
inline GridField gradient_grid(const SpectralVector& d, int size) {
    const int n = d.basis().dim();
    GridField g(n, size, n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) synth(d, j, i, size, g.comp(i * n + j));
    return g;
}

/// sum_i a^i d_i v^j for every j.
inline GridField advect(const GridField& a, const GridField& grad) {
    const int n = a.dim;
    GridField out(n, a.size, n);
    const std::size_t pts = a.points();
    for (int j = 0; j < n; ++j) {
        auto o = out.comp(j);
        for (int i = 0; i < n; ++i) {
            auto ai = a.comp(i);
            auto g = grad.comp(i * n + j);
            for (std::size_t x = 0; x < pts; ++x) o[x] += ai[x] * g[x];
        }
    }
    return out;
}

/// Leray projection of div(sigma) with sigma_ij = d_i d1^k d_j d2^k.
inline SpectralVelocity stress_divergence(const BasisPtr& basis, const GridField& g1, const GridField& g2) {
    const int n = basis->dim();
    const std::size_t pts = g1.points();
    std::vector<double> sigma(pts);
    SpectralVector div(basis);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            std::fill(sigma.begin(), sigma.end(), 0.0);
            for (int k = 0; k < n; ++k) {
                auto a = g1.comp(i * n + k);
                auto c = g2.comp(j * n + k);
                for (std::size_t x = 0; x < pts; ++x) sigma[x] += a[x] * c[x];
            }
            auto hat = analyze(*basis, sigma, g1.size);
            for (std::size_t m = 0; m < basis->num_modes(); ++m)
                div.at(m, i) += cplx{0.0, static_cast<double>(basis->mode(m)[j])} * hat[m];
        }
    }
    return leray_project(div);
}

inline GridField bulk_grid(const GridField& dg, const PolynomialNonlinearity& poly) {
    const int n = dg.dim;
    GridField out(n, dg.size, n);
    const std::size_t pts = dg.points();
    for (std::size_t x = 0; x < pts; ++x) {
        double r = 0.0;
        for (int c = 0; c < n; ++c) r += dg.comp(c)[x] * dg.comp(c)[x];
        const double s = poly.f_tilde(r);
        for (int c = 0; c < n; ++c) out.comp(c)[x] = s * dg.comp(c)[x];
    }
    return out;
}

inline void check_pair(const Basis& a, const Basis& b) {
    if (!a.same_as(b)) throw std::invalid_argument("operator arguments live in different bases");
}

}  // namespace detail

// ---- nonlinear operators -------------------------------------------------------------------

/// B(u, v) = P[(u.grad) v].
inline SpectralVelocity convective(const SpectralVelocity& u, const SpectralVelocity& v) {
    detail::check_pair(u.basis(), v.basis());
    const int M = grid_for_projection(u.basis().cutoff(), 2);
    auto ug = detail::values_grid(to_vector(u), M);
    auto gv = detail::gradient_grid(to_vector(v), M);
    return velocity_from_grid(u.basis_ptr(), detail::advect(ug, gv));
}

/// B~(u, d) = P~[(u.grad) d].
inline SpectralVector director_transport(const SpectralVelocity& u, const SpectralVector& d) {
    detail::check_pair(u.basis(), d.basis());
    const int M = grid_for_projection(u.basis().cutoff(), 2);
    auto ug = detail::values_grid(to_vector(u), M);
    auto gd = detail::gradient_grid(d, M);
    return vector_from_grid(d.basis_ptr(), detail::advect(ug, gd));
}

/// M(d1, d2) = P div(grad d1 (.) grad d2), so that <M(d1,d2), u> = m(d1, d2, u).
inline SpectralVelocity ericksen_stress(const SpectralVector& d1, const SpectralVector& d2) {
    detail::check_pair(d1.basis(), d2.basis());
    const int M = grid_for_projection(d1.basis().cutoff(), 2);
    auto g1 = detail::gradient_grid(d1, M);
    auto g2 = detail::gradient_grid(d2, M);
    return detail::stress_divergence(d1.basis_ptr(), g1, g2);
}

inline SpectralVelocity ericksen_stress(const SpectralVector& d) { return ericksen_stress(d, d); }

/// f_n(d) = P~[f~(|d|^2) d].
inline SpectralVector bulk_force(const SpectralVector& d, const PolynomialNonlinearity& poly) {
    const int M = grid_for_projection(d.basis().cutoff(), poly.field_degree());
    auto dg = detail::values_grid(d, M);
    return vector_from_grid(d.basis_ptr(), detail::bulk_grid(dg, poly));
}

// ---- forms and energies (exact quadrature) -------------------------------------------------

/// b(u, v, w) = int u^i d_i v^j w^j for arbitrary band-limited vector fields.
inline double trilinear_b(const SpectralVector& u, const SpectralVector& v, const SpectralVector& w) {
    detail::check_pair(u.basis(), v.basis());
    detail::check_pair(u.basis(), w.basis());
    const int n = u.basis().dim();
    const int M = grid_for_integral(u.basis().cutoff(), 3);
    auto adv = detail::advect(detail::values_grid(u, M), detail::gradient_grid(v, M));
    auto wg = detail::values_grid(w, M);
    std::vector<double> prod(adv.points(), 0.0);
    for (int j = 0; j < n; ++j)
        for (std::size_t x = 0; x < prod.size(); ++x) prod[x] += adv.comp(j)[x] * wg.comp(j)[x];
    return grid_integral(prod, n, M);
}

inline double trilinear_b(const SpectralVelocity& u, const SpectralVelocity& v, const SpectralVelocity& w) {
    return trilinear_b(to_vector(u), to_vector(v), to_vector(w));
}

/// m(d1, d2, u) = -int d_i d1^k d_j d2^k d_j u^i.
inline double trilinear_m(const SpectralVector& d1, const SpectralVector& d2, const SpectralVelocity& u) {
    detail::check_pair(d1.basis(), d2.basis());
    detail::check_pair(d1.basis(), u.basis());
    const int n = d1.basis().dim();
    const int M = grid_for_integral(d1.basis().cutoff(), 3);
    auto g1 = detail::gradient_grid(d1, M);
    auto g2 = detail::gradient_grid(d2, M);
    auto gu = detail::gradient_grid(to_vector(u), M);
    std::vector<double> prod(g1.points(), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                auto a = g1.comp(i * n + k);
                auto b = g2.comp(j * n + k);
                auto c = gu.comp(j * n + i);
                for (std::size_t x = 0; x < prod.size(); ++x) prod[x] -= a[x] * b[x] * c[x];
            }
    return grid_integral(prod, n, M);
}

/// int |d|^(2m), exact.
inline double lp_power(const SpectralVector& d, int half_exponent) {
    const int n = d.basis().dim();
    const int M = grid_for_integral(d.basis().cutoff(), 2 * half_exponent);
    auto dg = detail::values_grid(d, M);
    std::vector<double> vals(dg.points());
    for (std::size_t x = 0; x < vals.size(); ++x) {
        double r = 0.0;
        for (int c = 0; c < n; ++c) r += dg.comp(c)[x] * dg.comp(c)[x];
        vals[x] = std::pow(r, half_exponent);
    }
    return grid_integral(vals, n, M);
}

/// 1/2 int F~(|d|^2).
inline double bulk_energy(const SpectralVector& d, const PolynomialNonlinearity& poly) {
    const int n = d.basis().dim();
    const int M = grid_for_integral(d.basis().cutoff(), 2 * poly.degree() + 2);
    auto dg = detail::values_grid(d, M);
    std::vector<double> vals(dg.points());
    for (std::size_t x = 0; x < vals.size(); ++x) {
        double r = 0.0;
        for (int c = 0; c < n; ++c) r += dg.comp(c)[x] * dg.comp(c)[x];
        vals[x] = 0.5 * poly.F_tilde(r);
    }
    return grid_integral(vals, n, M);
}

/// Psi(d) = 1/2 ||grad d||^2 + 1/2 int F~(|d|^2); its gradient is -Lap d + f(d).
inline double director_energy(const SpectralVector& d, const PolynomialNonlinearity& poly) {
    return 0.5 * norm_sq(d, NormKind::H1Seminorm) + bulk_energy(d, poly);
}

/// int (u.grad d) . f(d) with the unprojected f; vanishes for divergence-free u.
inline double transport_bulk_pairing(const SpectralVelocity& u, const SpectralVector& d,
                                     const PolynomialNonlinearity& poly) {
    detail::check_pair(u.basis(), d.basis());
    const int n = d.basis().dim();
    const int M = grid_for_integral(d.basis().cutoff(), poly.field_degree() + 2);
    auto adv = detail::advect(detail::values_grid(to_vector(u), M), detail::gradient_grid(d, M));
    auto fg = detail::bulk_grid(detail::values_grid(d, M), poly);
    std::vector<double> prod(adv.points(), 0.0);
    for (int j = 0; j < n; ++j)
        for (std::size_t x = 0; x < prod.size(); ++x) prod[x] += adv.comp(j)[x] * fg.comp(j)[x];
    return grid_integral(prod, n, M);
}

// ---- fused evaluation used by the integrator -----------------------------------------------

struct NonlinearTerms {
    SpectralVelocity convective;  // B(u, u)
    SpectralVelocity stress;      // M(d, d)
    SpectralVector transport;     // B~(u, d)
    SpectralVector bulk;          // f_n(d)
    double bulk_energy = 0.0;     // 1/2 int F~(|d|^2)
    double bulk_power = 0.0;      // int |d|^(2N+2)
};

/// All four nonlinear terms from one set of grid samples.
inline NonlinearTerms evaluate_nonlinear(const SpectralVelocity& u, const SpectralVector& d,
                                         const PolynomialNonlinearity& poly) {
    detail::check_pair(u.basis(), d.basis());
    const BasisPtr& basis = d.basis_ptr();
    const int M = grid_for_projection(basis->cutoff(), std::max(2, poly.field_degree()));
    const SpectralVector uv = to_vector(u);
    auto ug = detail::values_grid(uv, M);
    auto gu = detail::gradient_grid(uv, M);
    auto dg = detail::values_grid(d, M);
    auto gd = detail::gradient_grid(d, M);
    NonlinearTerms out{
        velocity_from_grid(basis, detail::advect(ug, gu)),
        detail::stress_divergence(basis, gd, gd),
        vector_from_grid(basis, detail::advect(ug, gd)),
        vector_from_grid(basis, detail::bulk_grid(dg, poly)),
    };
    // the same grid integrates degree 2N+2 exactly
    const int n = basis->dim();
    std::vector<double> energy(dg.points()), power(dg.points());
    for (std::size_t x = 0; x < dg.points(); ++x) {
        double r = 0.0;
        for (int c = 0; c < n; ++c) r += dg.comp(c)[x] * dg.comp(c)[x];
        energy[x] = 0.5 * poly.F_tilde(r);
        power[x] = std::pow(r, poly.degree() + 1);
    }
    out.bulk_energy = grid_integral(energy, n, M);
    out.bulk_power = grid_integral(power, n, M);
    return out;
}

}  // namespace njsm
