#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace mixtile {

// Matérn parameter vector: variance, spatial range, smoothness.
struct MaternParams {
    double variance = 1.0;
    double range = 0.1;
    double smoothness = 0.5;

    // Throws DomainError unless all three components are finite and > 0.
    void validate() const;

    // "variance,range,smoothness" with round-trip precision.
    std::string to_string() const;
    static MaternParams parse(std::string_view text);

    friend bool operator==(const MaternParams&, const MaternParams&) = default;
};

// A 2-D location. For great-circle metrics `x` is longitude and `y` latitude,
// both in degrees.
struct Location {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Location&, const Location&) = default;
};

struct DistanceMetric {
    enum class Kind { Euclidean, GreatCircle };

    Kind kind = Kind::Euclidean;
    double radius = 1.0;  // only meaningful for GreatCircle

    static DistanceMetric euclidean() { return {}; }
    static DistanceMetric great_circle(double radius);

    void validate() const;
    bool is_great_circle() const noexcept { return kind == Kind::GreatCircle; }

    friend bool operator==(const DistanceMetric&, const DistanceMetric&) = default;
};

inline constexpr double kEarthRadiusKm = 6371.0;

// Gamma function via the Lanczos approximation (g = 7, 9 coefficients).
double gamma_fn(double x);

// Modified Bessel function of the second kind K_nu(x), nu >= 0, x > 0.
double bessel_k(double nu, double x);

// K_nu at a fixed order with the order-dependent constants computed once.
// The batched form interleaves several continued fractions and returns the
// same bits as evaluating each point on its own.
class BesselK {
public:
    explicit BesselK(double nu);

    double operator()(double x) const;
    void operator()(std::span<const double> x, std::span<double> out) const;
    double order() const noexcept { return nu_; }

private:
    static constexpr std::size_t kLanes = 16;

    void series(double x, double& kmu, double& k1) const;
    void continued_fraction(const double* x, double* kmu, double* k1, std::size_t lanes) const;
    double recur(double x, double kmu, double k1) const;

    double nu_;
    int nl_;
    double mu_, mu2_;
    double fact_;
    double gam1_, gam2_, gampl_, gammi_;
};

double distance(const Location& a, const Location& b, const DistanceMetric& metric);

// Matérn covariance at distance r. Returns the variance exactly at r == 0.
double matern(double r, const MaternParams& params);

// Matérn evaluator with the normalising constant hoisted out, for assembly
// loops that evaluate millions of entries at a fixed parameter vector.
class MaternKernel {
public:
    explicit MaternKernel(const MaternParams& params);

    double operator()(double r) const;
    // out[i] = C(r[i]); bitwise equal to the scalar form.
    void operator()(std::span<const double> r, std::span<double> out) const;
    const MaternParams& params() const noexcept { return params_; }

private:
    double finish(double x, double k) const;

    MaternParams params_;
    BesselK bessel_;
    double scale_;  // variance / (2^(nu-1) Gamma(nu))
};

}  // namespace mixtile
