// Fourier Galerkin basis on the periodic box [0, 2pi]^n, coefficient containers,
// norms and grid transforms.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "njsm/core.hpp"
#include "njsm/fft.hpp"

namespace njsm {

using Wavevector = std::array<int, 3>;
using Vec3 = std::array<double, 3>;

enum class NormKind { L2, H1Seminorm, H1, H2, VDual, H2Dual };

inline double norm_weight(NormKind kind, double lambda) {
    switch (kind) {
        case NormKind::L2: return 1.0;
        case NormKind::H1Seminorm: return lambda;
        case NormKind::H1: return 1.0 + lambda;
        case NormKind::H2: return 1.0 + lambda + lambda * lambda;
        case NormKind::VDual: return 1.0 / (1.0 + lambda);
        case NormKind::H2Dual: return 1.0 / ((1.0 + lambda) * (1.0 + lambda));
    }
    return 1.0;
}

/**
 * All wavevectors with |k|_inf <= K in lexicographic order (first component slowest).
 * The velocity space drops k = 0 and carries n-1 real polarisation vectors per mode,
 * orthonormal and orthogonal to k; the director space keeps n components on every mode.
 */
class Basis {
public:
    static constexpr int kMaxCutoff2D = 128;
    static constexpr int kMaxCutoff3D = 24;

    Basis(int dim, int cutoff) : dim_(dim), cutoff_(cutoff) {
        if (dim != 2 && dim != 3) throw std::invalid_argument("basis: dim must be 2 or 3");
        const int cap = dim == 2 ? kMaxCutoff2D : kMaxCutoff3D;
        if (cutoff < 1 || cutoff > cap)
            throw std::invalid_argument("basis: cutoff must lie in [1, " + std::to_string(cap) + "]");
        side_ = 2 * cutoff + 1;
        std::size_t total = 1;
        for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(side_);
        modes_.resize(total);
        eigen_.resize(total);
        for (std::size_t i = 0; i < total; ++i) {
            std::size_t r = i;
            Wavevector k{0, 0, 0};
            for (int a = dim - 1; a >= 0; --a) {
                k[a] = static_cast<int>(r % side_) - cutoff;
                r /= side_;
            }
            modes_[i] = k;
            eigen_[i] = static_cast<double>(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
        }
        zero_ = (total - 1) / 2;
        polar_.resize((total - 1) * (dim - 1));
        for (std::size_t v = 0; v + 1 < total; ++v) {
            const Wavevector& k = modes_[velocity_to_mode(v)];
            auto frame = polarization_frame(k);
            for (int p = 0; p < dim - 1; ++p) polar_[v * (dim - 1) + p] = frame[p];
        }
    }

    int dim() const { return dim_; }
    int cutoff() const { return cutoff_; }
    int side() const { return side_; }
    int polarizations() const { return dim_ - 1; }

    std::size_t num_modes() const { return modes_.size(); }
    std::size_t num_velocity_modes() const { return modes_.size() - 1; }
    std::size_t velocity_size() const { return num_velocity_modes() * (dim_ - 1); }
    std::size_t director_size() const { return num_modes() * dim_; }

    const Wavevector& mode(std::size_t i) const { return modes_[i]; }
    double eigenvalue(std::size_t i) const { return eigen_[i]; }
    std::size_t zero_mode() const { return zero_; }
    std::size_t negated(std::size_t i) const { return modes_.size() - 1 - i; }

    std::size_t velocity_to_mode(std::size_t v) const { return v < zero_ ? v : v + 1; }
    std::size_t mode_to_velocity(std::size_t i) const {
        if (i == zero_) throw std::out_of_range("basis: zero mode carries no velocity");
        return i < zero_ ? i : i - 1;
    }
    std::size_t velocity_negated(std::size_t v) const { return num_velocity_modes() - 1 - v; }
    double velocity_eigenvalue(std::size_t v) const { return eigen_[velocity_to_mode(v)]; }

    const Vec3& polarization(std::size_t v, int p) const { return polar_[v * (dim_ - 1) + p]; }

    std::optional<std::size_t> find(const Wavevector& k) const {
        std::size_t idx = 0;
        for (int a = 0; a < dim_; ++a) {
            if (k[a] < -cutoff_ || k[a] > cutoff_) return std::nullopt;
            idx = idx * side_ + static_cast<std::size_t>(k[a] + cutoff_);
        }
        for (int a = dim_; a < 3; ++a)
            if (k[a] != 0) return std::nullopt;
        return idx;
    }

    bool same_as(const Basis& o) const { return dim_ == o.dim_ && cutoff_ == o.cutoff_; }

private:
    // Frame depends only on the canonical representative of {k, -k}, so e_p(-k) = e_p(k).
    std::array<Vec3, 2> polarization_frame(const Wavevector& k) const {
        Wavevector c = k;
        for (int a = 0; a < 3; ++a) {
            if (k[a] > 0) break;
            if (k[a] < 0) {
                c = {-k[0], -k[1], -k[2]};
                break;
            }
        }
        const double len = std::sqrt(static_cast<double>(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]));
        Vec3 kh{c[0] / len, c[1] / len, c[2] / len};
        std::array<Vec3, 2> out{};
        if (dim_ == 2) {
            out[0] = {-kh[1], kh[0], 0.0};
            return out;
        }
        int axis = 0;
        for (int a = 1; a < 3; ++a)
            if (std::abs(kh[a]) < std::abs(kh[axis])) axis = a;
        Vec3 ax{0.0, 0.0, 0.0};
        ax[axis] = 1.0;
        Vec3 e1{kh[1] * ax[2] - kh[2] * ax[1], kh[2] * ax[0] - kh[0] * ax[2], kh[0] * ax[1] - kh[1] * ax[0]};
        const double n1 = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
        for (double& x : e1) x /= n1;
        Vec3 e2{kh[1] * e1[2] - kh[2] * e1[1], kh[2] * e1[0] - kh[0] * e1[2], kh[0] * e1[1] - kh[1] * e1[0]};
        out[0] = e1;
        out[1] = e2;
        return out;
    }

    int dim_;
    int cutoff_;
    int side_ = 0;
    std::size_t zero_ = 0;
    std::vector<Wavevector> modes_;
    std::vector<double> eigen_;
    std::vector<Vec3> polar_;
};

using BasisPtr = std::shared_ptr<const Basis>;

inline BasisPtr make_basis(int dim, int cutoff) { return std::make_shared<const Basis>(dim, cutoff); }

struct VelocityLayout {
    static std::size_t size(const Basis& b) { return b.velocity_size(); }
    static std::size_t stride(const Basis& b) { return static_cast<std::size_t>(b.polarizations()); }
};

struct VectorLayout {
    static std::size_t size(const Basis& b) { return b.director_size(); }
    static std::size_t stride(const Basis& b) { return static_cast<std::size_t>(b.dim()); }
};

/// Flat coefficient vector bound to a basis. Entry (mode, component) lives at mode*stride + component.
template <class Layout>
class Coefficients {
public:
    Coefficients() = default;
    explicit Coefficients(BasisPtr basis)
        : basis_(std::move(basis)), c_(Layout::size(*basis_), cplx{0.0, 0.0}) {}

    const BasisPtr& basis_ptr() const { return basis_; }
    const Basis& basis() const { return *basis_; }
    std::size_t size() const { return c_.size(); }
    std::size_t stride() const { return Layout::stride(*basis_); }
    std::size_t num_modes() const { return c_.size() / stride(); }

    cplx& operator[](std::size_t i) { return c_[i]; }
    const cplx& operator[](std::size_t i) const { return c_[i]; }
    cplx& at(std::size_t mode, int comp) { return c_[mode * stride() + comp]; }
    const cplx& at(std::size_t mode, int comp) const { return c_[mode * stride() + comp]; }

    std::span<cplx> values() { return c_; }
    std::span<const cplx> values() const { return c_; }

    Coefficients& operator+=(const Coefficients& o) {
        check(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
        return *this;
    }
    Coefficients& operator-=(const Coefficients& o) {
        check(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
        return *this;
    }
    Coefficients& operator*=(double s) {
        for (auto& x : c_) x *= s;
        return *this;
    }
    void axpy(double a, const Coefficients& x) {
        check(x);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += a * x.c_[i];
    }
    void set_zero() {
        for (auto& x : c_) x = cplx{0.0, 0.0};
    }

    friend Coefficients operator+(Coefficients a, const Coefficients& b) { return a += b; }
    friend Coefficients operator-(Coefficients a, const Coefficients& b) { return a -= b; }
    friend Coefficients operator*(double s, Coefficients a) { return a *= s; }
    friend Coefficients operator*(Coefficients a, double s) { return a *= s; }

    bool operator==(const Coefficients& o) const { return basis_->same_as(*o.basis_) && c_ == o.c_; }

private:
    void check(const Coefficients& o) const {
        if (!basis_ || !o.basis_ || !basis_->same_as(*o.basis_))
            throw std::invalid_argument("coefficients: basis mismatch");
    }

    BasisPtr basis_;
    std::vector<cplx> c_;
};

using SpectralVelocity = Coefficients<VelocityLayout>;
/// Also used for general (non-solenoidal) vector fields such as the director.
using SpectralVector = Coefficients<VectorLayout>;
using SpectralDirector = SpectralVector;

inline double mode_eigenvalue(const SpectralVelocity& u, std::size_t m) { return u.basis().velocity_eigenvalue(m); }
inline double mode_eigenvalue(const SpectralVector& d, std::size_t m) { return d.basis().eigenvalue(m); }

template <class Layout>
double inner(const Coefficients<Layout>& a, const Coefficients<Layout>& b, NormKind kind = NormKind::L2) {
    if (!a.basis().same_as(b.basis())) throw std::invalid_argument("inner: basis mismatch");
    const std::size_t s = a.stride();
    double acc = 0.0;
    for (std::size_t m = 0; m < a.num_modes(); ++m) {
        const double w = norm_weight(kind, mode_eigenvalue(a, m));
        double part = 0.0;
        for (std::size_t c = 0; c < s; ++c) {
            const cplx x = a[m * s + c], y = b[m * s + c];
            part += x.real() * y.real() + x.imag() * y.imag();
        }
        acc += w * part;
    }
    return acc;
}

template <class Layout>
double norm_sq(const Coefficients<Layout>& a, NormKind kind = NormKind::L2) {
    return inner(a, a, kind);
}

template <class Layout>
double norm(const Coefficients<Layout>& a, NormKind kind = NormKind::L2) {
    return std::sqrt(norm_sq(a, kind));
}

inline std::size_t negated_mode(const SpectralVelocity& u, std::size_t m) { return u.basis().velocity_negated(m); }
inline std::size_t negated_mode(const SpectralVector& d, std::size_t m) { return d.basis().negated(m); }

/// Replace c(k) by the Hermitian part (c(k) + conj(c(-k)))/2, i.e. project onto real fields.
template <class Layout>
void hermitize(Coefficients<Layout>& a) {
    const std::size_t s = a.stride();
    const std::size_t nm = a.num_modes();
    for (std::size_t m = 0; m < nm; ++m) {
        const std::size_t mm = negated_mode(a, m);
        if (mm < m) continue;
        for (std::size_t c = 0; c < s; ++c) {
            const cplx x = a[m * s + c], y = a[mm * s + c];
            const cplx h = 0.5 * (x + std::conj(y));
            a[m * s + c] = h;
            a[mm * s + c] = std::conj(h);
        }
    }
}

template <class Layout>
double hermitian_defect(const Coefficients<Layout>& a) {
    const std::size_t s = a.stride();
    double worst = 0.0;
    for (std::size_t m = 0; m < a.num_modes(); ++m) {
        const std::size_t mm = negated_mode(a, m);
        for (std::size_t c = 0; c < s; ++c)
            worst = std::max(worst, std::abs(a[m * s + c] - std::conj(a[mm * s + c])));
    }
    return worst;
}

/// Components of a solenoidal field, sum_p a_p(k) e_p(k).
inline SpectralVector to_vector(const SpectralVelocity& u) {
    const Basis& b = u.basis();
    SpectralVector out(u.basis_ptr());
    const int n = b.dim();
    for (std::size_t v = 0; v < b.num_velocity_modes(); ++v) {
        const std::size_t m = b.velocity_to_mode(v);
        for (int p = 0; p < n - 1; ++p) {
            const Vec3& e = b.polarization(v, p);
            const cplx a = u.at(v, p);
            for (int i = 0; i < n; ++i) out.at(m, i) += a * e[i];
        }
    }
    return out;
}

/// Leray projection: keep the divergence-free part and drop the mean.
inline SpectralVelocity leray_project(const SpectralVector& w) {
    const Basis& b = w.basis();
    SpectralVelocity out(w.basis_ptr());
    const int n = b.dim();
    for (std::size_t v = 0; v < b.num_velocity_modes(); ++v) {
        const std::size_t m = b.velocity_to_mode(v);
        for (int p = 0; p < n - 1; ++p) {
            const Vec3& e = b.polarization(v, p);
            cplx acc{0.0, 0.0};
            for (int i = 0; i < n; ++i) acc += e[i] * w.at(m, i);
            out.at(v, p) = acc;
        }
    }
    return out;
}

/// Copy coefficients into another basis of the same dimension (truncating or zero-padding).
template <class Layout>
Coefficients<Layout> project_to(const Coefficients<Layout>& a, const BasisPtr& target) {
    const Basis& src = a.basis();
    if (src.dim() != target->dim()) throw std::invalid_argument("project_to: dimension mismatch");
    Coefficients<Layout> out(target);
    const std::size_t s = a.stride();
    const bool velocity = std::is_same_v<Layout, VelocityLayout>;
    for (std::size_t m = 0; m < a.num_modes(); ++m) {
        const std::size_t full = velocity ? src.velocity_to_mode(m) : m;
        auto idx = target->find(src.mode(full));
        if (!idx) continue;
        const std::size_t dst = velocity ? target->mode_to_velocity(*idx) : *idx;
        for (std::size_t c = 0; c < s; ++c) out[dst * s + c] = a[m * s + c];
    }
    return out;
}

// ---- grids ---------------------------------------------------------------------------------

/// Real samples of a field with `components` scalar components on a uniform size^dim grid.
struct GridField {
    int dim = 2;
    int size = 0;
    int components = 1;
    std::vector<double> values;

    GridField() = default;
    GridField(int d, int m, int comps)
        : dim(d), size(m), components(comps), values(fft::grid_points(d, m) * comps, 0.0) {}

    std::size_t points() const { return fft::grid_points(dim, size); }
    std::span<double> comp(int c) { return {values.data() + c * points(), points()}; }
    std::span<const double> comp(int c) const { return {values.data() + c * points(), points()}; }
};

/// Smallest transform size that synthesises every mode of a band-K field.
inline int min_grid(int cutoff) { return 2 * cutoff + 1; }

/// Grid on which projecting a product of `factors` band-K fields back to band K is alias-free.
inline int grid_for_projection(int cutoff, int factors) {
    return fft::good_size((factors + 1) * cutoff + 1);
}

/// Grid on which the mean of a product of `factors` band-K fields is exact.
inline int grid_for_integral(int cutoff, int factors) { return fft::good_size(factors * cutoff + 1); }

namespace detail {

inline std::size_t wrap_index(const Basis& b, std::size_t mode, int size) {
    const Wavevector& k = b.mode(mode);
    std::size_t idx = 0;
    for (int a = 0; a < b.dim(); ++a) idx = idx * size + static_cast<std::size_t>((k[a] % size + size) % size);
    return idx;
}

inline void check_grid(const Basis& b, int size) {
    if (size < min_grid(b.cutoff()))
        throw std::invalid_argument("grid of size " + std::to_string(size) + " cannot resolve cutoff " +
                                    std::to_string(b.cutoff()));
}

}  // namespace detail

/// Real part of sum_k v_k e^{ik.x}/(2pi)^{n/2} on the grid x_j = 2 pi j / size. `per_mode` has one
/// entry per basis mode.
inline void synthesize(const Basis& b, std::span<const cplx> per_mode, int size, std::span<double> out) {
    detail::check_grid(b, size);
    const std::size_t pts = fft::grid_points(b.dim(), size);
    std::vector<cplx> buf(pts, cplx{0.0, 0.0});
    const double scale = std::pow(kTwoPi, -0.5 * b.dim());
    for (std::size_t m = 0; m < b.num_modes(); ++m) buf[detail::wrap_index(b, m, size)] = per_mode[m] * scale;
    fft::transform(buf, b.dim(), size, fft::Direction::Backward);
    for (std::size_t j = 0; j < pts; ++j) out[j] = buf[j].real();
}

/// Basis coefficients of the trigonometric interpolant of grid samples, truncated to the band.
inline std::vector<cplx> analyze(const Basis& b, std::span<const double> samples, int size) {
    detail::check_grid(b, size);
    const std::size_t pts = fft::grid_points(b.dim(), size);
    std::vector<cplx> buf(pts);
    for (std::size_t j = 0; j < pts; ++j) buf[j] = cplx{samples[j], 0.0};
    fft::transform(buf, b.dim(), size, fft::Direction::Forward);
    const double scale = std::pow(kTwoPi, 0.5 * b.dim()) / static_cast<double>(pts);
    std::vector<cplx> out(b.num_modes());
    for (std::size_t m = 0; m < b.num_modes(); ++m) out[m] = buf[detail::wrap_index(b, m, size)] * scale;
    return out;
}

inline GridField to_grid(const SpectralVector& d, int size) {
    const Basis& b = d.basis();
    const int n = b.dim();
    GridField g(n, size, n);
    std::vector<cplx> scratch(b.num_modes());
    for (int c = 0; c < n; ++c) {
        for (std::size_t m = 0; m < b.num_modes(); ++m) scratch[m] = d.at(m, c);
        synthesize(b, scratch, size, g.comp(c));
    }
    return g;
}

inline GridField to_grid(const SpectralVelocity& u, int size) { return to_grid(to_vector(u), size); }

inline SpectralVector vector_from_grid(const BasisPtr& basis, const GridField& g) {
    if (g.dim != basis->dim() || g.components != basis->dim())
        throw std::invalid_argument("vector_from_grid: shape mismatch");
    SpectralVector out(basis);
    for (int c = 0; c < g.components; ++c) {
        auto coeffs = analyze(*basis, g.comp(c), g.size);
        for (std::size_t m = 0; m < basis->num_modes(); ++m) out.at(m, c) = coeffs[m];
    }
    return out;
}

inline SpectralVelocity velocity_from_grid(const BasisPtr& basis, const GridField& g) {
    return leray_project(vector_from_grid(basis, g));
}

/// Cell volume times sum of samples: exact mean of trigonometric polynomials resolved by the grid.
inline double grid_integral(std::span<const double> samples, int dim, int size) {
    double acc = 0.0;
    for (double x : samples) acc += x;
    return acc * std::pow(kTwoPi / size, dim);
}

// ---- random fields -------------------------------------------------------------------------

/// Gaussian coefficients with spectrum (1+|k|^2)^(-slope/2), made real and scaled to the given L2 norm.
inline SpectralVelocity random_velocity(const BasisPtr& basis, Rng& rng, double l2, double slope = 1.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    SpectralVelocity u(basis);
    for (std::size_t v = 0; v < basis->num_velocity_modes(); ++v) {
        const double w = std::pow(1.0 + basis->velocity_eigenvalue(v), -0.5 * slope);
        for (int p = 0; p < basis->polarizations(); ++p) u.at(v, p) = w * cplx{g(rng), g(rng)};
    }
    hermitize(u);
    const double nrm = norm(u);
    if (nrm > 0.0) u *= l2 / nrm;
    return u;
}

inline SpectralVector random_director(const BasisPtr& basis, Rng& rng, double l2, double slope = 1.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    SpectralVector d(basis);
    for (std::size_t m = 0; m < basis->num_modes(); ++m) {
        const double w = std::pow(1.0 + basis->eigenvalue(m), -0.5 * slope);
        for (int c = 0; c < basis->dim(); ++c) d.at(m, c) = w * cplx{g(rng), g(rng)};
    }
    hermitize(d);
    const double nrm = norm(d);
    if (nrm > 0.0) d *= l2 / nrm;
    return d;
}

}  // namespace njsm
