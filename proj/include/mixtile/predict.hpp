#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mixtile/geodata.hpp"
#include "mixtile/mle.hpp"
#include "mixtile/tilestore.hpp"

namespace mixtile {

// Simple kriging with zero mean: Z* = Sigma_21 Sigma_11^-1 Z, Sigma_11
// factored under `policy`. Training data are Morton-sorted internally.
std::vector<double> krige(const GeoDataset& train, std::span<const Location> test, const MaternParams& params,
                          const PrecisionPolicy& policy, const EvalOptions& options = {});

struct PredictionReport {
    std::vector<double> predictions;  // indexed like the input dataset
    double pmse = 0.0;
    std::size_t k = 0;
    std::vector<double> per_fold_mse;
    std::vector<std::size_t> fold_sizes;
    std::vector<MaternParams> fold_params;  // parameters used for each fold
};

// Predicts the held-out part of a split from the training part.
using Predictor = std::function<std::vector<double>(const GeoDataset& train, const GeoDataset& test)>;

struct KFoldOptions {
    EvalOptions eval;
    // Re-estimate parameters on each training complement instead of using
    // the supplied ones.
    bool refit = false;
    OptimizerConfig fit;
    Predictor predictor;  // overrides kriging when set
};

PredictionReport pmse_kfold(const GeoDataset& dataset, const MaternParams& params, const PrecisionPolicy& policy,
                            const FoldAssignment& folds, const KFoldOptions& options = {});
PredictionReport pmse_kfold(const GeoDataset& dataset, const MaternParams& params, const PrecisionPolicy& policy,
                            std::size_t k, std::uint64_t seed, const KFoldOptions& options = {});

std::string report_to_json(const PredictionReport& report, const std::string& variant);
// Long format rows: variant,replicate,statistic,value
void write_report_csv_header(std::ostream& out);
void write_report_csv_rows(std::ostream& out, const PredictionReport& report, const std::string& variant,
                           std::size_t replicate);

}  // namespace mixtile
