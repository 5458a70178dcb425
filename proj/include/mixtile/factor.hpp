#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "mixtile/tilestore.hpp"

namespace mixtile {

// Floating-point operations of a tile factorization, split by the precision
// each kernel executed in (potrf m^3/3, trsm m n^2, syrk n^2 k, gemm 2 m n k).
struct FactorStats {
    double dp_flops = 0.0;
    double sp_flops = 0.0;
    std::size_t tasks = 0;

    double total_flops() const noexcept { return dp_flops + sp_flops; }
    double dp_fraction() const noexcept { return total_flops() > 0 ? dp_flops / total_flops() : 1.0; }
};

struct FactorOptions {
    std::size_t threads = 0;  // 0: hardware concurrency
    // Execute tasks in a random dependency-respecting order drawn from this
    // seed instead of the normal schedule.
    std::optional<std::uint64_t> shuffle_seed;

    static FactorOptions with_threads(std::size_t n) {
        FactorOptions o;
        o.threads = n;
        return o;
    }
};

// Lower Cholesky factor L stored in a tile grid. Every non-zero tile carries
// a double payload; off-band tiles of a mixed-precision factor additionally
// keep the single-precision values they were computed in.
class CholeskyFactor {
public:
    CholeskyFactor(TileMatrix tiles, PrecisionPolicy policy, FactorStats stats);

    const TileMatrix& tiles() const noexcept { return tiles_; }
    const PrecisionPolicy& policy() const noexcept { return policy_; }
    const FactorStats& stats() const noexcept { return stats_; }
    std::size_t order() const noexcept { return tiles_.order(); }

    // L(a, b); zero above the diagonal.
    double element(std::size_t a, std::size_t b) const;
    std::vector<double> to_dense() const;

private:
    TileMatrix tiles_;
    PrecisionPolicy policy_;
    FactorStats stats_;
};

struct NotPositiveDefinite {
    std::size_t tile = 0;          // diagonal tile k that failed
    std::size_t pivot = 0;         // local pivot inside that tile
    std::size_t global_index = 0;  // k * nb + pivot
};

using FactorResult = std::variant<CholeskyFactor, NotPositiveDefinite>;

// Tile Cholesky under the given policy:
//   DP  - right-looking tile algorithm, all FP64;
//   MP  - band tiles in FP64, off-band panel solves and trailing updates in
//         FP32 against a narrowed copy of the diagonal factor;
//   DST - off-band tiles are zero and every update touching them is skipped.
FactorResult try_cholesky(TileMatrix matrix, const PrecisionPolicy& policy, const FactorOptions& options = {});

// As try_cholesky, but throws NotPositiveDefiniteError on failure.
CholeskyFactor cholesky(TileMatrix matrix, const PrecisionPolicy& policy, const FactorOptions& options = {});

// Flop partition that factorizing `matrix` under `policy` would execute.
FactorStats count_flops(const TileMatrix& matrix, const PrecisionPolicy& policy);

// 2 * sum(log L_ii), accumulated in double precision.
double logdet(const CholeskyFactor& factor);

// Solves L y = rhs.
std::vector<double> forward_solve(const CholeskyFactor& factor, std::span<const double> rhs);
// Solves L^T x = rhs.
std::vector<double> backward_solve(const CholeskyFactor& factor, std::span<const double> rhs);
// x = (L L^T)^-1 rhs.
std::vector<double> solve(const CholeskyFactor& factor, std::span<const double> rhs);
// L v.
std::vector<double> lower_multiply(const CholeskyFactor& factor, std::span<const double> v);

// A x for a symmetric tile matrix (double payloads, widened single payloads,
// zero tiles skipped).
std::vector<double> symmetric_multiply(const TileMatrix& matrix, std::span<const double> x);

}  // namespace mixtile
