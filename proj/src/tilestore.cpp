#include "mixtile/tilestore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "mixtile/errors.hpp"
#include "mixtile/taskgraph.hpp"

namespace mixtile {

std::string_view to_string(FactorMode mode) {
    switch (mode) {
        case FactorMode::DP: return "dp";
        case FactorMode::MP: return "mp";
        case FactorMode::DST: return "dst";
    }
    return "?";
}

void PrecisionPolicy::validate() const {
    if (diag_thick < 1) throw DomainError("diag_thick must be at least 1");
}

std::size_t PrecisionPolicy::effective_thickness(std::size_t grid) const {
    if (mode == FactorMode::DP) return grid;
    return std::min(diag_thick, grid);
}

std::string PrecisionPolicy::to_string() const {
    if (mode == FactorMode::DP) return "dp";
    return std::string(mixtile::to_string(mode)) + "(diag_thick=" + std::to_string(diag_thick) + ")";
}

bool band_member(std::size_t i, std::size_t j, const PrecisionPolicy& policy) {
    if (policy.mode == FactorMode::DP) return true;
    const std::size_t gap = i > j ? i - j : j - i;
    return gap < policy.diag_thick;
}

std::size_t percent_to_thickness(double dp_percent, std::size_t grid) {
    if (!(dp_percent > 0.0) || dp_percent > 100.0)
        throw DomainError("dp percentage must be in (0, 100]; an all-single-precision variant is not supported");
    if (grid == 0) throw DomainError("tile grid must be non-empty");
    const auto thick = static_cast<std::size_t>(std::llround(dp_percent / 100.0 * static_cast<double>(grid)));
    return std::clamp<std::size_t>(thick, 1, grid);
}

PolicySpec PolicySpec::parse(std::string_view text) {
    if (text == "dp") return {FactorMode::DP, 100.0};
    const std::size_t colon = text.find(':');
    if (colon == std::string_view::npos)
        throw DomainError("policy must be dp, mp:<percent> or dst:<percent>, got '" + std::string(text) + "'");
    const std::string_view head = text.substr(0, colon);
    const std::string_view tail = text.substr(colon + 1);
    PolicySpec spec;
    if (head == "mp")
        spec.mode = FactorMode::MP;
    else if (head == "dst")
        spec.mode = FactorMode::DST;
    else
        throw DomainError("unknown policy mode '" + std::string(head) + "'");
    auto [end, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), spec.dp_percent);
    if (ec != std::errc{} || end != tail.data() + tail.size() || tail.empty())
        throw DomainError("bad policy percentage '" + std::string(tail) + "'");
    if (!(spec.dp_percent > 0.0) || spec.dp_percent > 100.0)
        throw DomainError("policy percentage must be in (0, 100]");
    return spec;
}

PrecisionPolicy PolicySpec::resolve(std::size_t grid) const {
    if (mode == FactorMode::DP) return PrecisionPolicy::dp();
    return {mode, percent_to_thickness(dp_percent, grid)};
}

std::string PolicySpec::to_string() const {
    if (mode == FactorMode::DP) return "dp";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", dp_percent);
    return std::string(mixtile::to_string(mode)) + ":" + buf;
}

TileMatrix::TileMatrix(std::size_t n, std::size_t tile_size) : n_(n), nb_(tile_size) {
    if (n == 0) throw DomainError("matrix order must be positive");
    if (tile_size == 0) throw DomainError("tile size must be positive");
    p_ = (n + nb_ - 1) / nb_;
    tiles_.resize(p_ * (p_ + 1) / 2);
    for (std::size_t i = 0; i < p_; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            Tile& t = tiles_[index(i, j)];
            t.rows = tile_extent(i);
            t.cols = tile_extent(j);
        }
    }
}

std::size_t TileMatrix::tile_extent(std::size_t i) const {
    if (i + 1 < p_) return nb_;
    return n_ - (p_ - 1) * nb_;
}

std::size_t TileMatrix::index(std::size_t i, std::size_t j) const {
    if (j > i || i >= p_) throw DimensionError("tile index outside the lower triangle");
    return i * (i + 1) / 2 + j;
}

Tile& TileMatrix::tile(std::size_t i, std::size_t j) { return tiles_[index(i, j)]; }
const Tile& TileMatrix::tile(std::size_t i, std::size_t j) const { return tiles_[index(i, j)]; }

Tile& TileMatrix::make_dp(std::size_t i, std::size_t j) {
    Tile& t = tile(i, j);
    t.precision = Precision::FP64;
    t.dp.assign(t.rows * t.cols, 0.0);
    t.sp.clear();
    return t;
}

double TileMatrix::element(std::size_t a, std::size_t b) const {
    if (a >= n_ || b >= n_) throw DimensionError("element index out of range");
    if (a < b) std::swap(a, b);
    const Tile& t = tile(a / nb_, b / nb_);
    const std::size_t r = a % nb_;
    const std::size_t c = b % nb_;
    if (!t.dp.empty()) return t.dp[r + c * t.rows];
    if (!t.sp.empty()) return static_cast<double>(t.sp[r + c * t.rows]);
    return 0.0;
}

std::vector<double> TileMatrix::to_dense() const {
    std::vector<double> dense(n_ * n_);
    for (std::size_t b = 0; b < n_; ++b)
        for (std::size_t a = 0; a < n_; ++a) dense[a + b * n_] = element(a, b);
    return dense;
}

void TileMatrix::write_dense_csv(std::ostream& out) const {
    char buf[32];
    for (std::size_t a = 0; a < n_; ++a) {
        for (std::size_t b = 0; b < n_; ++b) {
            std::snprintf(buf, sizeof buf, "%.17g", element(a, b));
            if (b) out << ',';
            out << buf;
        }
        out << '\n';
    }
}

void tile_to_sp(TileView<const double> src, TileView<float> dst, bool transpose) {
    const bool ok = transpose ? (dst.rows == src.cols && dst.cols == src.rows)
                              : (dst.rows == src.rows && dst.cols == src.cols);
    if (!ok) throw DimensionError("tile_to_sp: dimension mismatch");
    constexpr double fmax = std::numeric_limits<float>::max();
    for (std::size_t c = 0; c < src.cols; ++c) {
        for (std::size_t r = 0; r < src.rows; ++r) {
            const double v = src(r, c);
            if (std::isfinite(v) && std::abs(v) > fmax)
                throw PrecisionOverflowError("tile_to_sp: value exceeds single-precision range");
            if (transpose)
                dst(c, r) = static_cast<float>(v);
            else
                dst(r, c) = static_cast<float>(v);
        }
    }
}

void tile_to_dp(TileView<const float> src, TileView<double> dst, bool transpose) {
    const bool ok = transpose ? (dst.rows == src.cols && dst.cols == src.rows)
                              : (dst.rows == src.rows && dst.cols == src.cols);
    if (!ok) throw DimensionError("tile_to_dp: dimension mismatch");
    for (std::size_t c = 0; c < src.cols; ++c) {
        for (std::size_t r = 0; r < src.rows; ++r) {
            if (transpose)
                dst(c, r) = static_cast<double>(src(r, c));
            else
                dst(r, c) = static_cast<double>(src(r, c));
        }
    }
}

TileMatrix assemble_covariance(const GeoDataset& dataset, const MaternParams& params, std::size_t tile_size,
                               const PrecisionPolicy& policy, std::size_t threads) {
    policy.validate();
    const MaternKernel kernel(params);
    TileMatrix matrix(dataset.size(), tile_size);
    const std::size_t p = matrix.grid();
    const PrecisionPolicy effective{policy.mode, policy.effective_thickness(p)};
    const auto& loc = dataset.locations();
    const auto& metric = dataset.metric();

    auto fill = [&](std::size_t i, std::size_t j) {
        Tile& t = matrix.tile(i, j);
        const bool in_band = band_member(i, j, effective);
        if (!in_band && effective.mode == FactorMode::DST) return;
        std::vector<double> values(t.rows * t.cols);
        std::vector<double> dist(t.rows);
        const std::size_t row0 = matrix.tile_offset(i);
        const std::size_t col0 = matrix.tile_offset(j);
        // Diagonal tiles: strictly lower part, then mirrored.
        const bool diagonal = i == j;
        for (std::size_t c = 0; c < t.cols; ++c) {
            const std::size_t first = diagonal ? c + 1 : 0;
            const std::size_t count = t.rows - first;
            for (std::size_t r = first; r < t.rows; ++r)
                dist[r - first] = distance(loc[row0 + r], loc[col0 + c], metric);
            double* column = values.data() + c * t.rows;
            kernel(std::span<const double>(dist.data(), count), std::span<double>(column + first, count));
            for (std::size_t r = first; r < t.rows; ++r)
                if (!std::isfinite(column[r]))
                    throw AssemblyError("non-finite covariance at (" + std::to_string(row0 + r) + ", " +
                                        std::to_string(col0 + c) + ")");
            if (diagonal) {
                column[c] = params.variance;
                for (std::size_t r = first; r < t.rows; ++r) values[c + r * t.rows] = column[r];
            }
        }
        if (in_band || effective.mode == FactorMode::DP) {
            t.precision = Precision::FP64;
            t.dp = std::move(values);
        } else {
            t.precision = Precision::FP32;
            t.sp.resize(t.rows * t.cols);
            tile_to_sp(TileView<const double>(t.rows, t.cols, values), t.sp_view());
        }
    };

    TaskGraph graph;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j <= i; ++j) graph.submit([&fill, i, j] { fill(i, j); }, {}, {});
    graph.run(resolve_threads(threads));
    return matrix;
}

}  // namespace mixtile
