#include "mixtile/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mixtile/errors.hpp"

namespace mixtile {

namespace {

constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                             std::vector<std::vector<double>> simplex, const NelderMeadOptions& options,
                             const std::function<void(std::size_t)>& on_iteration) {
    if (simplex.size() < 2) throw EstimationError("nelder_mead: simplex needs at least two points");
    const std::size_t dim = simplex.front().size();
    if (simplex.size() != dim + 1) throw EstimationError("nelder_mead: simplex must have dim + 1 points");
    const bool bounded = !options.lower.empty();
    if (bounded && (options.lower.size() != dim || options.upper.size() != dim))
        throw EstimationError("nelder_mead: bounds have the wrong dimension");

    NelderMeadResult result;
    auto clamp = [&](std::vector<double>& x) {
        if (!bounded) return;
        for (std::size_t d = 0; d < dim; ++d) x[d] = std::clamp(x[d], options.lower[d], options.upper[d]);
    };
    auto eval = [&](std::vector<double>& x) {
        clamp(x);
        ++result.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::vector<double> values(simplex.size());
    for (std::size_t i = 0; i < simplex.size(); ++i) values[i] = eval(simplex[i]);
    if (std::none_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); }))
        throw EstimationError("every vertex of the initial simplex is infeasible");

    std::vector<std::size_t> order(simplex.size());
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        std::vector<std::vector<double>> s;
        std::vector<double> v;
        for (std::size_t i : order) {
            s.push_back(std::move(simplex[i]));
            v.push_back(values[i]);
        }
        simplex = std::move(s);
        values = std::move(v);
    };

    auto along = [&](const std::vector<double>& from, const std::vector<double>& to, double t) {
        std::vector<double> x(dim);
        for (std::size_t d = 0; d < dim; ++d) x[d] = from[d] + t * (to[d] - from[d]);
        return x;
    };

    sort_simplex();
    while (true) {
        if (values.back() - values.front() < options.tolerance) {
            result.converged = true;
            break;
        }
        if (result.iterations >= options.max_iterations) break;
        ++result.iterations;
        if (on_iteration) on_iteration(result.iterations);

        const std::size_t worst = dim;
        std::vector<double> centroid(dim, 0.0);
        for (std::size_t i = 0; i < worst; ++i)
            for (std::size_t d = 0; d < dim; ++d) centroid[d] += simplex[i][d];
        for (double& c : centroid) c /= static_cast<double>(dim);

        std::vector<double> reflected = along(centroid, simplex[worst], -kReflect);
        const double fr = eval(reflected);

        if (fr < values.front()) {
            std::vector<double> expanded = along(centroid, reflected, kExpand);
            const double fe = eval(expanded);
            if (fe < fr) {
                simplex[worst] = std::move(expanded);
                values[worst] = fe;
            } else {
                simplex[worst] = std::move(reflected);
                values[worst] = fr;
            }
        } else if (fr < values[worst - 1]) {
            simplex[worst] = std::move(reflected);
            values[worst] = fr;
        } else {
            bool accepted = false;
            if (fr < values[worst]) {
                std::vector<double> outside = along(centroid, reflected, kContract);
                const double fc = eval(outside);
                if (fc <= fr) {
                    simplex[worst] = std::move(outside);
                    values[worst] = fc;
                    accepted = true;
                }
            } else {
                std::vector<double> inside = along(centroid, simplex[worst], kContract);
                const double fc = eval(inside);
                if (fc < values[worst]) {
                    simplex[worst] = std::move(inside);
                    values[worst] = fc;
                    accepted = true;
                }
            }
            if (!accepted) {
                for (std::size_t i = 1; i < simplex.size(); ++i) {
                    simplex[i] = along(simplex.front(), simplex[i], kShrink);
                    values[i] = eval(simplex[i]);
                }
            }
        }
        sort_simplex();
    }

    result.x = simplex.front();
    result.value = values.front();
    return result;
}

}  // namespace mixtile
