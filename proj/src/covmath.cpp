#include "mixtile/covmath.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "mixtile/errors.hpp"

namespace mixtile {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;

// Taylor coefficients of 1/Gamma(z) about z = 0 (c[k] multiplies z^k).
constexpr std::array<double, 27> kRecipGamma = {
    0.0,
    1.0,
    0.5772156649015328606065,
    -0.6558780715202538810770,
    -0.0420026350340952355290,
    0.1665386113822914895017,
    -0.0421977345555443367482,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.0002152416741149509728,
    0.0001280502823881161862,
    -0.0000201348547807882387,
    -0.0000012504934821426707,
    0.0000011330272319816959,
    -2.05633841697760710345e-7,
    6.116095104481415817862e-9,
    5.002007644469222930056e-9,
    -1.181274570487020144588e-9,
    1.043426711691100510492e-10,
    7.78226343990507125405e-12,
    -3.696805618642205708188e-12,
    5.100370287454475979015e-13,
    -2.058326053566506783222e-14,
    -5.34812253942301798237e-15,
    1.226778628238260790159e-15,
    -1.181259301697458769514e-16,
};

// For |mu| <= 1/2: gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu),
// gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2, gampl = 1/G(1+mu), gammi = 1/G(1-mu).
// 1/G(1+mu) = sum_k c[k] mu^(k-1) splits into even and odd parts.
struct TemmeGammas {
    double gam1, gam2, gampl, gammi;
};

TemmeGammas temme_gammas(double mu) {
    const double mu2 = mu * mu;
    double even = 0.0;  // sum over odd k of c[k] mu^(k-1)
    double odd = 0.0;   // sum over even k of c[k] mu^(k-2)
    for (int k = static_cast<int>(kRecipGamma.size()) - 1; k >= 1; --k) {
        if (k % 2 == 1)
            even = even * mu2 + kRecipGamma[k];
        else
            odd = odd * mu2 + kRecipGamma[k];
    }
    TemmeGammas g;
    g.gam1 = -odd;
    g.gam2 = even;
    g.gampl = even + mu * odd;
    g.gammi = even - mu * odd;
    return g;
}

}  // namespace

void MaternParams::validate() const {
    auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!ok(variance) || !ok(range) || !ok(smoothness))
        throw DomainError("Matern parameters must be finite and strictly positive, got " + to_string());
}

std::string MaternParams::to_string() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", variance, range, smoothness);
    return buf;
}

MaternParams MaternParams::parse(std::string_view text) {
    std::array<double, 3> v{};
    std::size_t field = 0;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = text.find(',', pos);
        std::string_view tok = text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos);
        while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
        while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
        if (field >= 3) throw DomainError("expected three comma-separated parameters: " + std::string(text));
        auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v[field]);
        if (ec != std::errc{} || end != tok.data() + tok.size() || tok.empty())
            throw DomainError("bad parameter value '" + std::string(tok) + "'");
        ++field;
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    if (field != 3) throw DomainError("expected three comma-separated parameters: " + std::string(text));
    MaternParams p{v[0], v[1], v[2]};
    p.validate();
    return p;
}

DistanceMetric DistanceMetric::great_circle(double radius) {
    DistanceMetric m{Kind::GreatCircle, radius};
    m.validate();
    return m;
}

void DistanceMetric::validate() const {
    if (kind == Kind::GreatCircle && !(std::isfinite(radius) && radius > 0.0))
        throw DomainError("great-circle radius must be positive");
}

double gamma_fn(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("gamma: argument must be positive");
    constexpr double g = 7.0;
    constexpr std::array<double, 9> coef = {
        0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
        771.32342877765313,   -176.61502916214059,   12.507343278686905,
        -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7,
    };
    if (x < 0.5) return kPi / (std::sin(kPi * x) * gamma_fn(1.0 - x));
    const double xm = x - 1.0;
    double a = coef[0];
    for (int i = 1; i < 9; ++i) a += coef[i] / (xm + i);
    const double t = xm + g + 0.5;
    return std::sqrt(2.0 * kPi) * std::pow(t, xm + 0.5) * std::exp(-t) * a;
}

// Temme's method: K_mu and K_mu+1 for |mu| <= 1/2 from a power series
// (x < 2) or Steed's continued fraction (x >= 2), then forward recurrence
// up to nu.
BesselK::BesselK(double nu) : nu_(nu) {
    if (!(nu >= 0.0) || !std::isfinite(nu)) throw DomainError("bessel_k: nu must be non-negative");
    nl_ = static_cast<int>(nu + 0.5);
    mu_ = nu - nl_;
    mu2_ = mu_ * mu_;
    const double pimu = kPi * mu_;
    fact_ = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
    const TemmeGammas g = temme_gammas(mu_);
    gam1_ = g.gam1;
    gam2_ = g.gam2;
    gampl_ = g.gampl;
    gammi_ = g.gammi;
}

void BesselK::series(double x, double& kmu, double& k1) const {
    const double x2 = 0.5 * x;
    double d = -std::log(x2);
    double e = mu_ * d;
    const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
    double ff = fact_ * (gam1_ * std::cosh(e) + gam2_ * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / gampl_;
    double q = 0.5 / (e * gammi_);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    for (int i = 1; i <= kMaxIter; ++i) {
        ff = (i * ff + p + q) / (i * static_cast<double>(i) - mu2_);
        c *= d / i;
        p /= i - mu_;
        q /= i + mu_;
        const double del = c * ff;
        sum += del;
        sum1 += c * (p - i * ff);
        if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    kmu = sum;
    k1 = sum1 * 2.0 / x;
}

namespace {

// The coefficients a and c depend only on the order, so they are shared by
// all lanes. Every lane runs the full recurrence so the loop body stays
// branch-free; each lane's result is captured at its own convergence.
template <std::size_t W>
void steed_lanes(double mu, double mu2, const double* x, double* kmu, double* k1, std::size_t lanes) {
    double xl[W], b[W], d[W], h[W], delh[W], q1[W], q2[W], q[W], s[W];
    double s_end[W], h_end[W];
    bool converged[W], done[W];
    const double a1 = 0.25 - mu2;
    for (std::size_t l = 0; l < W; ++l) {
        xl[l] = x[l < lanes ? l : 0];
        b[l] = 2.0 * (1.0 + xl[l]);
        d[l] = 1.0 / b[l];
        h[l] = d[l];
        delh[l] = d[l];
        q1[l] = 0.0;
        q2[l] = 1.0;
        q[l] = a1;
        s[l] = 1.0 + q[l] * delh[l];
        s_end[l] = s[l];
        h_end[l] = h[l];
        done[l] = l >= lanes;
    }
    double a = -a1;
    double c = a1;
    std::size_t remaining = lanes;
    for (int i = 2; i <= kMaxIter && remaining > 0; ++i) {
        a -= 2 * (i - 1);
        c = -a * c / i;
        const double ra = 1.0 / a;
        for (std::size_t l = 0; l < W; ++l) {
            const double qnew = (q1[l] - b[l] * q2[l]) * ra;
            q1[l] = q2[l];
            q2[l] = qnew;
            q[l] += c * qnew;
            b[l] += 2.0;
            d[l] = 1.0 / (b[l] + a * d[l]);
            delh[l] = (b[l] * d[l] - 1.0) * delh[l];
            h[l] += delh[l];
            const double dels = q[l] * delh[l];
            s[l] += dels;
            converged[l] = std::abs(dels) < kEps * std::abs(s[l]);
        }
        for (std::size_t l = 0; l < W; ++l) {
            if (done[l] || !converged[l]) continue;
            done[l] = true;
            s_end[l] = s[l];
            h_end[l] = h[l];
            --remaining;
        }
    }
    for (std::size_t l = 0; l < lanes; ++l) {
        if (!done[l]) {
            s_end[l] = s[l];
            h_end[l] = h[l];
        }
        kmu[l] = std::sqrt(kPi / (2.0 * x[l])) * std::exp(-x[l]) / s_end[l];
        k1[l] = kmu[l] * (mu + x[l] + 0.5 - a1 * h_end[l]) / x[l];
    }
}

}  // namespace

void BesselK::continued_fraction(const double* x, double* kmu, double* k1, std::size_t lanes) const {
    if (lanes == 1)
        steed_lanes<1>(mu_, mu2_, x, kmu, k1, lanes);
    else
        steed_lanes<kLanes>(mu_, mu2_, x, kmu, k1, lanes);
}

double BesselK::recur(double x, double kmu, double k1) const {
    const double xi2 = 2.0 / x;
    for (int i = 1; i <= nl_; ++i) {
        const double next = (mu_ + i) * xi2 * k1 + kmu;
        kmu = k1;
        k1 = next;
    }
    return kmu;
}

double BesselK::operator()(double x) const {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("bessel_k: x must be positive");
    double kmu, k1;
    if (x < 2.0)
        series(x, kmu, k1);
    else
        continued_fraction(&x, &kmu, &k1, 1);
    return recur(x, kmu, k1);
}

void BesselK::operator()(std::span<const double> x, std::span<double> out) const {
    if (out.size() != x.size()) throw DimensionError("bessel_k: output size does not match input");
    double xs[kLanes], kmu[kLanes], k1[kLanes];
    std::size_t idx[kLanes];
    std::size_t pending = 0;
    auto flush = [&] {
        continued_fraction(xs, kmu, k1, pending);
        for (std::size_t l = 0; l < pending; ++l) out[idx[l]] = recur(xs[l], kmu[l], k1[l]);
        pending = 0;
    };
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("bessel_k: x must be positive");
        if (v < 2.0) {
            double a, b;
            series(v, a, b);
            out[i] = recur(v, a, b);
            continue;
        }
        xs[pending] = v;
        idx[pending] = i;
        if (++pending == kLanes) flush();
    }
    if (pending > 0) flush();
}

double bessel_k(double nu, double x) { return BesselK(nu)(x); }

double distance(const Location& a, const Location& b, const DistanceMetric& metric) {
    if (!metric.is_great_circle()) return std::hypot(a.x - b.x, a.y - b.y);

    metric.validate();
    if (!(std::abs(a.y) <= 90.0) || !(std::abs(b.y) <= 90.0))
        throw DomainError("great-circle distance: latitude outside [-90, 90]");
    constexpr double deg = kPi / 180.0;
    const double lat1 = a.y * deg;
    const double lat2 = b.y * deg;
    const double s_lat = std::sin(0.5 * (lat2 - lat1));
    const double s_lon = std::sin(0.5 * (b.x - a.x) * deg);
    double hav = s_lat * s_lat + std::cos(lat1) * std::cos(lat2) * s_lon * s_lon;
    hav = std::clamp(hav, 0.0, 1.0);
    return 2.0 * metric.radius * std::asin(std::sqrt(hav));
}

MaternKernel::MaternKernel(const MaternParams& params)
    : params_((params.validate(), params)), bessel_(params.smoothness) {
    scale_ = params_.variance / (std::pow(2.0, params_.smoothness - 1.0) * gamma_fn(params_.smoothness));
}

double MaternKernel::finish(double x, double k) const {
    // K_nu overflows only for x so small that the correlation is 1 to
    // working precision.
    if (!std::isfinite(k)) return params_.variance;
    if (k == 0.0) return 0.0;
    return scale_ * std::pow(x, params_.smoothness) * k;
}

double MaternKernel::operator()(double r) const {
    if (r == 0.0) return params_.variance;
    if (!(r > 0.0)) throw DomainError("matern: distance must be non-negative");
    const double x = r / params_.range;
    return finish(x, bessel_(x));
}

void MaternKernel::operator()(std::span<const double> r, std::span<double> out) const {
    if (out.size() != r.size()) throw DimensionError("matern: output size does not match input");
    std::vector<double> x;
    std::vector<std::size_t> where;
    x.reserve(r.size());
    where.reserve(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (r[i] == 0.0) {
            out[i] = params_.variance;
            continue;
        }
        if (!(r[i] > 0.0)) throw DomainError("matern: distance must be non-negative");
        x.push_back(r[i] / params_.range);
        where.push_back(i);
    }
    std::vector<double> k(x.size());
    bessel_(x, k);
    for (std::size_t j = 0; j < x.size(); ++j) out[where[j]] = finish(x[j], k[j]);
}

double matern(double r, const MaternParams& params) { return MaternKernel(params)(r); }

}  // namespace mixtile
