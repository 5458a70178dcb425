#include "mixtile/predict.hpp"

#include <cstdio>
#include <ostream>
#include <variant>

#include <json.hpp>

#include "mixtile/errors.hpp"
#include "mixtile/factor.hpp"

namespace mixtile {

std::vector<double> krige(const GeoDataset& train_input, std::span<const Location> test, const MaternParams& params,
                          const PrecisionPolicy& policy, const EvalOptions& options) {
    const GeoDataset train = morton_sorted(train_input);
    TileMatrix sigma = assemble_covariance(train, params, options.tile_size, policy, options.threads);
    FactorResult result = try_cholesky(std::move(sigma), policy, FactorOptions::with_threads(options.threads));
    if (auto* failure = std::get_if<NotPositiveDefinite>(&result))
        throw PredictionError("training covariance is not positive definite (pivot " +
                              std::to_string(failure->global_index) + ")");
    const std::vector<double> weights = solve(std::get<CholeskyFactor>(result), train.z());

    const MaternKernel kernel(params);
    const auto& loc = train.locations();
    std::vector<double> dist(loc.size()), cov(loc.size());
    std::vector<double> out(test.size(), 0.0);
    for (std::size_t t = 0; t < test.size(); ++t) {
        for (std::size_t i = 0; i < loc.size(); ++i) dist[i] = distance(test[t], loc[i], train.metric());
        kernel(dist, cov);
        double acc = 0.0;
        for (std::size_t i = 0; i < loc.size(); ++i) acc += cov[i] * weights[i];
        out[t] = acc;
    }
    return out;
}

PredictionReport pmse_kfold(const GeoDataset& dataset, const MaternParams& params, const PrecisionPolicy& policy,
                            const FoldAssignment& folds, const KFoldOptions& options) {
    if (folds.fold_of.size() != dataset.size())
        throw DimensionError("fold assignment does not cover the dataset");
    PredictionReport report;
    report.k = folds.k;
    report.predictions.assign(dataset.size(), 0.0);
    double total = 0.0;
    for (std::size_t f = 0; f < folds.k; ++f) {
        const std::vector<std::size_t> test_idx = folds.members(f);
        const std::vector<std::size_t> train_idx = folds.complement(f);
        const GeoDataset train = dataset.subset(train_idx);
        const GeoDataset test = dataset.subset(test_idx);

        MaternParams used = params;
        if (options.refit) used = estimate(train, policy, options.fit).theta_hat;
        std::vector<double> pred = options.predictor
                                       ? options.predictor(train, test)
                                       : krige(train, test.locations(), used, policy, options.eval);
        if (pred.size() != test.size()) throw PredictionError("predictor returned the wrong number of values");

        double sq = 0.0;
        for (std::size_t t = 0; t < test.size(); ++t) {
            const double err = pred[t] - test.z()[t];
            sq += err * err;
            report.predictions[test_idx[t]] = pred[t];
        }
        total += sq;
        report.per_fold_mse.push_back(test.size() ? sq / static_cast<double>(test.size()) : 0.0);
        report.fold_sizes.push_back(test.size());
        report.fold_params.push_back(used);
    }
    report.pmse = total / static_cast<double>(dataset.size());
    return report;
}

PredictionReport pmse_kfold(const GeoDataset& dataset, const MaternParams& params, const PrecisionPolicy& policy,
                            std::size_t k, std::uint64_t seed, const KFoldOptions& options) {
    return pmse_kfold(dataset, params, policy, kfold_split(dataset.size(), k, seed), options);
}

std::string report_to_json(const PredictionReport& report, const std::string& variant) {
    nlohmann::ordered_json j;
    j["variant"] = variant;
    j["k"] = report.k;
    j["pmse"] = report.pmse;
    j["per_fold_mse"] = report.per_fold_mse;
    j["fold_sizes"] = report.fold_sizes;
    nlohmann::ordered_json params = nlohmann::ordered_json::array();
    for (const auto& p : report.fold_params) params.push_back({p.variance, p.range, p.smoothness});
    j["fold_params"] = params;
    j["predictions"] = report.predictions;
    return j.dump();
}

void write_report_csv_header(std::ostream& out) { out << "variant,replicate,statistic,value\n"; }

void write_report_csv_rows(std::ostream& out, const PredictionReport& report, const std::string& variant,
                           std::size_t replicate) {
    char buf[64];
    auto row = [&](const std::string& stat, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << variant << ',' << replicate << ',' << stat << ',' << buf << '\n';
    };
    row("pmse", report.pmse);
    for (std::size_t f = 0; f < report.per_fold_mse.size(); ++f)
        row("fold_mse_" + std::to_string(f), report.per_fold_mse[f]);
}

}  // namespace mixtile
