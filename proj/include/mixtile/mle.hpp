#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "mixtile/factor.hpp"
#include "mixtile/geodata.hpp"
#include "mixtile/tilestore.hpp"

namespace mixtile {

struct EvalOptions {
    std::size_t tile_size = 256;
    std::size_t threads = 0;
};

// One Gaussian log-likelihood evaluation. A covariance that fails to factor
// is reported as infeasible with value = -infinity.
struct LikelihoodEval {
    double value = 0.0;
    double logdet = 0.0;
    double quadform = 0.0;  // Z^T Sigma^-1 Z
    bool feasible = false;
};

// -n/2 log(2 pi) - 1/2 log|Sigma| - 1/2 Z^T Sigma^-1 Z for a given covariance.
LikelihoodEval gaussian_loglik(TileMatrix sigma, std::span<const double> z, const PrecisionPolicy& policy,
                               const FactorOptions& options = {}, FactorStats* stats = nullptr);

// Assembles Sigma(params) over the dataset in its stored order, factors it
// under `policy` and evaluates the log-likelihood.
LikelihoodEval loglik(const GeoDataset& dataset, const MaternParams& params, const PrecisionPolicy& policy,
                      const EvalOptions& options = {}, FactorStats* stats = nullptr);

struct ProfileEval {
    LikelihoodEval eval;     // value is the profiled log-likelihood
    double variance_opt = 0;  // Z^T Sigma~^-1 Z / n
};

// Log-likelihood with the variance profiled out: Sigma~ is built with unit
// variance and the maximizing variance is returned alongside.
ProfileEval profile_loglik(const GeoDataset& dataset, double range, double smoothness,
                           const PrecisionPolicy& policy, const EvalOptions& options = {});

struct TraceEntry {
    std::size_t evaluation = 0;
    std::size_t iteration = 0;
    double range = 0.0;
    double smoothness = 0.0;
    double value = 0.0;
};

struct OptimizerConfig {
    EvalOptions eval;
    double range_lower = 1e-3;
    double range_upper = 3.0;
    double smoothness_lower = 0.05;
    double smoothness_upper = 5.0;
    double tolerance = 1e-3;
    std::size_t max_iterations = 500;
    // Initial simplex as (range, smoothness) vertices.
    std::array<std::array<double, 2>, 3> initial_simplex{{{0.05, 0.5}, {0.2, 0.5}, {0.05, 1.5}}};
    // Sort locations along a Morton curve before estimation.
    bool morton_sort = true;
    // Replaces the profiled likelihood (maximized) when set; for testing the
    // optimizer in isolation.
    std::function<double(double range, double smoothness)> objective_hook;
    std::function<void(const TraceEntry&)> trace;

    void validate() const;
};

struct FitResult {
    MaternParams theta_hat;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    double final_ll = 0.0;
    bool converged = false;
    PrecisionPolicy policy;
};

// Maximizes the profiled likelihood over (range, smoothness) with
// Nelder-Mead on log-parameters inside the configured box; the variance is
// recovered from the profile at the optimum.
FitResult estimate(const GeoDataset& dataset, const PrecisionPolicy& policy, const OptimizerConfig& config = {});

void write_trace_header(std::ostream& out);
void write_trace_row(std::ostream& out, const TraceEntry& entry);

}  // namespace mixtile
