#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance suite. Nothing here calls into the tile code paths.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "mixtile/covmath.hpp"
#include "mixtile/geodata.hpp"
#include "mixtile/rng.hpp"

namespace testsupport {

// Column-major n x n.
using Dense = std::vector<double>;

// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt by the trapezoid rule,
// which converges geometrically for this analytic, rapidly decaying integrand.
inline double bessel_k_quadrature(double nu, double x) {
    const double h = 1.0 / 512.0;
    // exp(-x cosh t) < 1e-300 once x cosh t > 700
    const double t_max = std::acosh(std::max(1.0, 750.0 / x)) + 1.0;
    double sum = 0.5 * std::exp(-x);
    for (double t = h; t <= t_max; t += h) sum += std::exp(-x * std::cosh(t)) * std::cosh(nu * t);
    return sum * h;
}

inline double matern_closed_form(double r, const mixtile::MaternParams& p) {
    const double x = r / p.range;
    if (p.smoothness == 0.5) return p.variance * std::exp(-x);
    if (p.smoothness == 1.5) return p.variance * (1.0 + x) * std::exp(-x);
    if (p.smoothness == 2.5) return p.variance * (1.0 + x + x * x / 3.0) * std::exp(-x);
    throw std::invalid_argument("no closed form");
}

// Unblocked lower Cholesky in long double.
inline Dense dense_cholesky(const Dense& a, std::size_t n) {
    std::vector<long double> l(n * n, 0.0L);
    for (std::size_t j = 0; j < n; ++j) {
        long double d = a[j + j * n];
        for (std::size_t k = 0; k < j; ++k) d -= l[j + k * n] * l[j + k * n];
        if (!(d > 0)) throw std::runtime_error("oracle: not positive definite");
        const long double ljj = std::sqrt(d);
        l[j + j * n] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            long double s = a[i + j * n];
            for (std::size_t k = 0; k < j; ++k) s -= l[i + k * n] * l[j + k * n];
            l[i + j * n] = s / ljj;
        }
    }
    return Dense(l.begin(), l.end());
}

inline std::vector<double> dense_forward(const Dense& l, std::size_t n, const std::vector<double>& b) {
    std::vector<long double> y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) y[i] -= l[i + k * n] * y[k];
        y[i] /= l[i + i * n];
    }
    return {y.begin(), y.end()};
}

inline std::vector<double> dense_backward(const Dense& l, std::size_t n, const std::vector<double>& b) {
    std::vector<long double> x(b.begin(), b.end());
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t k = i + 1; k < n; ++k) x[i] -= l[k + i * n] * x[k];
        x[i] /= l[i + i * n];
    }
    return {x.begin(), x.end()};
}

inline double dense_logdet(const Dense& l, std::size_t n) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < n; ++i) s += std::log(static_cast<long double>(l[i + i * n]));
    return static_cast<double>(2.0L * s);
}

inline double dense_loglik(const Dense& sigma, std::size_t n, const std::vector<double>& z) {
    const Dense l = dense_cholesky(sigma, n);
    const std::vector<double> y = dense_forward(l, n, z);
    long double quad = 0.0L;
    for (double v : y) quad += static_cast<long double>(v) * v;
    return static_cast<double>(-0.5L * n * std::log(2.0L * std::numbers::pi_v<long double>) -
                               0.5L * dense_logdet(l, n) - 0.5L * quad);
}

// Matérn covariance of a dataset, evaluated entry by entry.
inline Dense dense_covariance(const mixtile::GeoDataset& ds, const mixtile::MaternParams& p) {
    const std::size_t n = ds.size();
    Dense a(n * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i)
            a[i + j * n] = i == j ? p.variance
                                  : mixtile::matern(mixtile::distance(ds.locations()[i], ds.locations()[j], ds.metric()), p);
    return a;
}

// L L^T from a dense lower factor.
inline Dense dense_llt(const Dense& l, std::size_t n) {
    Dense a(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = j; i < n; ++i) {
            long double s = 0.0L;
            for (std::size_t k = 0; k <= j; ++k) s += static_cast<long double>(l[i + k * n]) * l[j + k * n];
            a[i + j * n] = a[j + i * n] = static_cast<double>(s);
        }
    return a;
}

inline double frobenius(const Dense& a) {
    long double s = 0.0L;
    for (double v : a) s += static_cast<long double>(v) * v;
    return static_cast<double>(std::sqrt(s));
}

// Uniform random locations in the unit square with iid standard normal z.
inline mixtile::GeoDataset random_dataset(std::size_t n, std::uint64_t seed) {
    mixtile::Rng rng(seed);
    std::vector<mixtile::Location> loc(n);
    std::vector<double> z(n);
    for (auto& l : loc) l = {rng.uniform(), rng.uniform()};
    for (double& v : z) v = rng.normal();
    return mixtile::GeoDataset(std::move(loc), std::move(z));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return INFINITY;
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace testsupport
