/// @file oracle.hpp
/// Slow reference implementations: direct convolution sums and pointwise trigonometric
/// evaluation. Nothing here touches the FFT path.
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "njsm/spectral_basis.hpp"

namespace oracle {

using njsm::cplx;
using njsm::Wavevector;

/// Sparse scalar Fourier series in the e^{ikx}/(2pi)^{n/2} normalisation.
using Series = std::map<Wavevector, cplx>;

inline double norm_factor(int dim) { return std::pow(2.0 * M_PI, -0.5 * dim); }

inline Series component(const njsm::SpectralVector& d, int c) {
    Series s;
    for (std::size_t m = 0; m < d.num_modes(); ++m) s[d.basis().mode(m)] = d.at(m, c);
    return s;
}

inline Series derivative(const Series& s, int axis) {
    Series out;
    for (const auto& [k, c] : s) out[k] = c * cplx{0.0, static_cast<double>(k[axis])};
    return out;
}

inline Series product(const Series& a, const Series& b, int dim) {
    Series out;
    const double f = norm_factor(dim);
    for (const auto& [k, x] : a)
        for (const auto& [l, y] : b) {
            Wavevector q{k[0] + l[0], k[1] + l[1], k[2] + l[2]};
            out[q] += f * x * y;
        }
    return out;
}

inline void add_to(Series& acc, const Series& s, cplx scale = 1.0) {
    for (const auto& [k, c] : s) acc[k] += scale * c;
}

using VectorSeries = std::vector<Series>;

inline VectorSeries components(const njsm::SpectralVector& d) {
    VectorSeries out;
    for (int c = 0; c < d.basis().dim(); ++c) out.push_back(component(d, c));
    return out;
}

/// Textbook projection w - (q.w) q/|q|^2, zero mean.
inline VectorSeries leray(const VectorSeries& w, int dim) {
    VectorSeries out(dim);
    Series keys;
    for (const auto& s : w) add_to(keys, s, 0.0);
    for (const auto& [q, unused] : keys) {
        (void)unused;
        double q2 = 0.0;
        for (int a = 0; a < dim; ++a) q2 += q[a] * q[a];
        if (q2 == 0.0) continue;
        cplx dot = 0.0;
        for (int a = 0; a < dim; ++a) {
            auto it = w[a].find(q);
            if (it != w[a].end()) dot += static_cast<double>(q[a]) * it->second;
        }
        for (int a = 0; a < dim; ++a) {
            auto it = w[a].find(q);
            cplx v = it != w[a].end() ? it->second : cplx{0.0, 0.0};
            out[a][q] = v - dot * static_cast<double>(q[a]) / q2;
        }
    }
    return out;
}

/// (u.grad) v for vector series.
inline VectorSeries advect(const VectorSeries& u, const VectorSeries& v, int dim) {
    VectorSeries out(dim);
    for (int j = 0; j < dim; ++j)
        for (int i = 0; i < dim; ++i) add_to(out[j], product(u[i], derivative(v[j], i), dim));
    return out;
}

inline VectorSeries stress_divergence(const VectorSeries& d1, const VectorSeries& d2, int dim) {
    VectorSeries out(dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            Series sigma;
            for (int k = 0; k < dim; ++k)
                add_to(sigma, product(derivative(d1[k], i), derivative(d2[k], j), dim));
            add_to(out[i], derivative(sigma, j));
        }
    return out;
}

inline VectorSeries bulk(const VectorSeries& d, const std::vector<double>& coeffs, int dim) {
    Series r;
    for (int c = 0; c < dim; ++c) add_to(r, product(d[c], d[c], dim));
    // scalar f~(r) as a series: constant term b_0 is b_0 (2pi)^{n/2} times e_0.
    Series ftilde;
    ftilde[Wavevector{0, 0, 0}] = coeffs[0] / norm_factor(dim);
    Series power = r;
    for (std::size_t l = 1; l < coeffs.size(); ++l) {
        add_to(ftilde, power, coeffs[l]);
        if (l + 1 < coeffs.size()) power = product(power, r, dim);
    }
    VectorSeries out(dim);
    for (int c = 0; c < dim; ++c) out[c] = product(ftilde, d[c], dim);
    return out;
}

/// Max abs difference between a series and basis coefficients, restricted to the band.
inline double band_difference(const VectorSeries& ref, const njsm::SpectralVector& got) {
    double worst = 0.0;
    const auto& b = got.basis();
    for (std::size_t m = 0; m < b.num_modes(); ++m)
        for (int c = 0; c < b.dim(); ++c) {
            auto it = ref[c].find(b.mode(m));
            cplx r = it != ref[c].end() ? it->second : cplx{0.0, 0.0};
            worst = std::max(worst, std::abs(r - got.at(m, c)));
        }
    return worst;
}

/// Pointwise value of a vector field at x via the explicit trigonometric sum.
inline std::array<double, 3> evaluate(const njsm::SpectralVector& d, const std::array<double, 3>& x) {
    std::array<double, 3> out{0.0, 0.0, 0.0};
    const auto& b = d.basis();
    const double f = norm_factor(b.dim());
    for (std::size_t m = 0; m < b.num_modes(); ++m) {
        const auto& k = b.mode(m);
        double phase = 0.0;
        for (int a = 0; a < b.dim(); ++a) phase += k[a] * x[a];
        const cplx e{std::cos(phase), std::sin(phase)};
        for (int c = 0; c < b.dim(); ++c) out[c] += f * (d.at(m, c) * e).real();
    }
    return out;
}

}  // namespace oracle
