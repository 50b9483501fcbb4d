// Polynomial bulk nonlinearity f(d) = f~(|d|^2) d.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace njsm {

class PolynomialNonlinearity {
public:
    /// coeffs[l] multiplies r^l in f~(r); the leading coefficient must be positive.
    explicit PolynomialNonlinearity(std::vector<double> coeffs) : b_(std::move(coeffs)) {
        if (b_.size() < 2) throw std::invalid_argument("polynomial: degree N must be at least 1");
        if (!(b_.back() > 0.0)) throw std::invalid_argument("polynomial: leading coefficient must be positive");
        for (double x : b_)
            if (!std::isfinite(x)) throw std::invalid_argument("polynomial: coefficients must be finite");
    }

    /// f~(r) = r - 1, the Ginzburg-Landau penalty.
    static PolynomialNonlinearity ginzburg_landau() { return PolynomialNonlinearity({-1.0, 1.0}); }

    int degree() const { return static_cast<int>(b_.size()) - 1; }
    const std::vector<double>& coeffs() const { return b_; }
    double leading() const { return b_.back(); }

    double f_tilde(double r) const {
        double acc = 0.0;
        for (auto it = b_.rbegin(); it != b_.rend(); ++it) acc = acc * r + *it;
        return acc;
    }

    /// F~(r) = int_0^r f~, so that d/dd [F~(|d|^2)/2] = f(d).
    double F_tilde(double r) const {
        double acc = 0.0;
        for (int l = degree(); l >= 0; --l) acc = acc * r + b_[l] / (l + 1);
        return acc * r;
    }

    /// Degree in d of f(d), i.e. 2N+1.
    int field_degree() const { return 2 * degree() + 1; }

    void check_dimension(int dim) const {
        if (dim == 3 && degree() != 1)
            throw std::invalid_argument("polynomial: only N = 1 is admissible in three dimensions");
    }

    bool operator==(const PolynomialNonlinearity&) const = default;

private:
    std::vector<double> b_;
};

}  // namespace njsm
