#include "mixtile/mle.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <utility>
#include <variant>

#include "mixtile/errors.hpp"
#include "mixtile/nelder_mead.hpp"

namespace mixtile {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

LikelihoodEval infeasible() {
    LikelihoodEval e;
    e.value = -std::numeric_limits<double>::infinity();
    e.logdet = std::numeric_limits<double>::quiet_NaN();
    e.quadform = std::numeric_limits<double>::quiet_NaN();
    e.feasible = false;
    return e;
}

// logdet and Z^T Sigma^-1 Z, or nothing when Sigma does not factor.
std::optional<std::pair<double, double>> logdet_and_quadform(TileMatrix sigma, std::span<const double> z,
                                                             const PrecisionPolicy& policy,
                                                             const FactorOptions& options, FactorStats* stats) {
    if (z.size() != sigma.order())
        throw DimensionError("measurement vector length does not match covariance order");
    FactorResult result = try_cholesky(std::move(sigma), policy, options);
    if (std::holds_alternative<NotPositiveDefinite>(result)) return std::nullopt;
    const CholeskyFactor& factor = std::get<CholeskyFactor>(result);
    if (stats) *stats = factor.stats();
    const std::vector<double> y = forward_solve(factor, z);
    double quad = 0.0;
    for (double v : y) quad += v * v;
    const double ld = logdet(factor);
    if (!std::isfinite(quad) || !std::isfinite(ld)) return std::nullopt;
    return std::pair{ld, quad};
}

}  // namespace

LikelihoodEval gaussian_loglik(TileMatrix sigma, std::span<const double> z, const PrecisionPolicy& policy,
                               const FactorOptions& options, FactorStats* stats) {
    const double n = static_cast<double>(z.size());
    const auto parts = logdet_and_quadform(std::move(sigma), z, policy, options, stats);
    if (!parts) return infeasible();
    LikelihoodEval e;
    e.logdet = parts->first;
    e.quadform = parts->second;
    e.value = -0.5 * n * kLog2Pi - 0.5 * e.logdet - 0.5 * e.quadform;
    e.feasible = true;
    return e;
}

LikelihoodEval loglik(const GeoDataset& dataset, const MaternParams& params, const PrecisionPolicy& policy,
                      const EvalOptions& options, FactorStats* stats) {
    TileMatrix sigma = assemble_covariance(dataset, params, options.tile_size, policy, options.threads);
    return gaussian_loglik(std::move(sigma), dataset.z(), policy, FactorOptions::with_threads(options.threads), stats);
}

ProfileEval profile_loglik(const GeoDataset& dataset, double range, double smoothness,
                           const PrecisionPolicy& policy, const EvalOptions& options) {
    const MaternParams unit{1.0, range, smoothness};
    unit.validate();
    TileMatrix sigma = assemble_covariance(dataset, unit, options.tile_size, policy, options.threads);
    const auto parts = logdet_and_quadform(std::move(sigma), dataset.z(), policy, FactorOptions::with_threads(options.threads),
                                           nullptr);
    ProfileEval out;
    if (!parts || !(parts->second > 0.0)) {
        out.eval = infeasible();
        out.variance_opt = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    const double n = static_cast<double>(dataset.size());
    out.eval.logdet = parts->first;
    out.eval.quadform = parts->second;
    out.eval.feasible = true;
    out.variance_opt = parts->second / n;
    // The full likelihood at variance = quadform / n.
    out.eval.value = -0.5 * n * kLog2Pi - 0.5 * n + 0.5 * n * std::log(n) - 0.5 * parts->first -
                     0.5 * n * std::log(parts->second);
    return out;
}

void OptimizerConfig::validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(range_lower) || !positive(range_upper) || !positive(smoothness_lower) ||
        !positive(smoothness_upper))
        throw DomainError("optimizer bounds must be positive");
    if (range_lower > range_upper || smoothness_lower > smoothness_upper)
        throw DomainError("optimizer lower bound exceeds upper bound");
    if (!(tolerance > 0.0)) throw DomainError("optimizer tolerance must be positive");
    for (const auto& v : initial_simplex)
        if (!positive(v[0]) || !positive(v[1])) throw DomainError("initial simplex must be positive");
}

FitResult estimate(const GeoDataset& input, const PrecisionPolicy& policy, const OptimizerConfig& config) {
    config.validate();
    policy.validate();
    if (input.size() < 10) throw EstimationError("estimation needs at least 10 observations");
    const GeoDataset dataset = config.morton_sort ? morton_sorted(input) : input;

    std::size_t iteration = 0;
    std::size_t evaluation = 0;
    auto objective = [&](std::span<const double> u) {
        const double range = std::exp(u[0]);
        const double smoothness = std::exp(u[1]);
        const double value = config.objective_hook
                                 ? config.objective_hook(range, smoothness)
                                 : profile_loglik(dataset, range, smoothness, policy, config.eval).eval.value;
        ++evaluation;
        if (config.trace) config.trace({evaluation, iteration, range, smoothness, value});
        return -value;
    };

    NelderMeadOptions nm;
    nm.tolerance = config.tolerance;
    nm.max_iterations = config.max_iterations;
    nm.lower = {std::log(config.range_lower), std::log(config.smoothness_lower)};
    nm.upper = {std::log(config.range_upper), std::log(config.smoothness_upper)};
    std::vector<std::vector<double>> simplex;
    for (const auto& v : config.initial_simplex) simplex.push_back({std::log(v[0]), std::log(v[1])});

    const NelderMeadResult best =
        nelder_mead(objective, std::move(simplex), nm, [&](std::size_t it) { iteration = it; });

    FitResult fit;
    fit.iterations = best.iterations;
    fit.evaluations = best.evaluations;
    fit.converged = best.converged;
    fit.policy = policy;
    const double range = std::exp(best.x[0]);
    const double smoothness = std::exp(best.x[1]);
    if (config.objective_hook) {
        fit.theta_hat = {1.0, range, smoothness};
        fit.final_ll = -best.value;
    } else {
        const ProfileEval at_best = profile_loglik(dataset, range, smoothness, policy, config.eval);
        if (!at_best.eval.feasible) throw EstimationError("optimum is not a feasible parameter vector");
        fit.theta_hat = {at_best.variance_opt, range, smoothness};
        fit.final_ll = at_best.eval.value;
    }
    return fit;
}

void write_trace_header(std::ostream& out) { out << "evaluation,iteration,range,smoothness,value\n"; }

void write_trace_row(std::ostream& out, const TraceEntry& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g\n", e.evaluation, e.iteration, e.range, e.smoothness,
                  e.value);
    out << buf;
}

}  // namespace mixtile
