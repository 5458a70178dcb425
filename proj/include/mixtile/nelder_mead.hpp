#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace mixtile {

struct NelderMeadOptions {
    double tolerance = 1e-3;  // stop when max f - min f over the simplex drops below this
    std::size_t max_iterations = 500;
    std::vector<double> lower;  // box bounds; points are clamped into them
    std::vector<double> upper;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
};

// Minimizes `f` from the given initial simplex (dim + 1 points). Non-finite
// objective values count as +infinity, so infeasible points are always
// dominated. Throws EstimationError when every initial vertex is infeasible.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                             std::vector<std::vector<double>> simplex, const NelderMeadOptions& options,
                             const std::function<void(std::size_t iteration)>& on_iteration = {});

}  // namespace mixtile
