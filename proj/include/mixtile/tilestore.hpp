#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mixtile/covmath.hpp"
#include "mixtile/geodata.hpp"
#include "mixtile/kernels.hpp"

namespace mixtile {

enum class Precision { FP64, FP32 };

enum class FactorMode { DP, MP, DST };

std::string_view to_string(FactorMode mode);

// Which tiles keep double precision: those with |i - j| < diag_thick.
// Off-band tiles are single precision (MP) or dropped (DST). DP mode keeps
// every tile in double.
struct PrecisionPolicy {
    FactorMode mode = FactorMode::DP;
    std::size_t diag_thick = 1;

    static PrecisionPolicy dp() { return {FactorMode::DP, 1}; }
    static PrecisionPolicy mp(std::size_t thick) { return {FactorMode::MP, thick}; }
    static PrecisionPolicy dst(std::size_t thick) { return {FactorMode::DST, thick}; }

    void validate() const;

    // Band half-width for a grid of order p: DP gives p, others min(diag_thick, p).
    std::size_t effective_thickness(std::size_t grid) const;

    std::string to_string() const;

    friend bool operator==(const PrecisionPolicy&, const PrecisionPolicy&) = default;
};

bool band_member(std::size_t i, std::size_t j, const PrecisionPolicy& policy);

std::size_t percent_to_thickness(double dp_percent, std::size_t grid);

// User-facing policy as a mode plus the percentage of diagonal tiles kept in
// double precision; grammar `dp`, `mp:<percent>`, `dst:<percent>`.
struct PolicySpec {
    FactorMode mode = FactorMode::DP;
    double dp_percent = 100.0;

    static PolicySpec parse(std::string_view text);
    PrecisionPolicy resolve(std::size_t grid) const;
    std::string to_string() const;
};

// One tile of the lower triangle. A tile with neither payload is an
// implicit zero tile.
struct Tile {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Precision precision = Precision::FP64;
    std::vector<double> dp;
    std::vector<float> sp;

    bool is_zero() const noexcept { return dp.empty() && sp.empty(); }
    TileView<double> dp_view() { return {rows, cols, dp}; }
    TileView<const double> dp_view() const { return {rows, cols, dp}; }
    TileView<float> sp_view() { return {rows, cols, sp}; }
    TileView<const float> sp_view() const { return {rows, cols, sp}; }
};

// Symmetric n x n matrix stored as the lower triangle of a p x p grid of
// tiles; the last tile row/column is ragged when nb does not divide n.
class TileMatrix {
public:
    TileMatrix(std::size_t n, std::size_t tile_size);

    std::size_t order() const noexcept { return n_; }
    std::size_t tile_size() const noexcept { return nb_; }
    std::size_t grid() const noexcept { return p_; }
    std::size_t tile_extent(std::size_t i) const;
    std::size_t tile_offset(std::size_t i) const { return i * nb_; }

    Tile& tile(std::size_t i, std::size_t j);
    const Tile& tile(std::size_t i, std::size_t j) const;

    // Allocates a zero-filled FP64 payload for tile (i, j).
    Tile& make_dp(std::size_t i, std::size_t j);

    // Entry (a, b) of the symmetric matrix, from the double payload when
    // present, otherwise the widened single payload, otherwise zero.
    double element(std::size_t a, std::size_t b) const;

    // Full symmetric reconstruction, column-major n x n.
    std::vector<double> to_dense() const;
    void write_dense_csv(std::ostream& out) const;

private:
    std::size_t index(std::size_t i, std::size_t j) const;

    std::size_t n_;
    std::size_t nb_;
    std::size_t p_;
    std::vector<Tile> tiles_;
};

// Round-to-nearest narrowing; dst is src^T when `transpose` is set. Throws
// PrecisionOverflowError for finite values beyond the float range.
void tile_to_sp(TileView<const double> src, TileView<float> dst, bool transpose = false);
// Exact widening.
void tile_to_dp(TileView<const float> src, TileView<double> dst, bool transpose = false);

TileMatrix assemble_covariance(const GeoDataset& dataset, const MaternParams& params, std::size_t tile_size,
                               const PrecisionPolicy& policy, std::size_t threads = 0);

}  // namespace mixtile
