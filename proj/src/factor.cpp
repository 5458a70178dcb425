#include "mixtile/factor.hpp"

#include <cmath>
#include <string>

#include "mixtile/errors.hpp"
#include "mixtile/kernels.hpp"
#include "mixtile/taskgraph.hpp"

namespace mixtile {

namespace {

double potrf_flops(double m) { return m * m * m / 3.0; }
double trsm_flops(double m, double n) { return m * n * n; }
double syrk_flops(double n, double k) { return n * n * k; }
double gemm_flops(double m, double n, double k) { return 2.0 * m * n * k; }

void widen_into(Tile& t) {
    t.dp.resize(t.rows * t.cols);
    tile_to_dp(t.sp_view(), t.dp_view());
}

void narrow_into(Tile& t) {
    t.sp.resize(t.rows * t.cols);
    tile_to_sp(std::as_const(t).dp_view(), t.sp_view());
}

// Bring the input tiles into the representation the policy expects: band
// tiles and diagonal tiles hold FP64, off-band MP tiles FP32 (converted by
// scheduled tasks), off-band DST tiles are dropped.
void normalize(TileMatrix& m, const PrecisionPolicy& policy) {
    const std::size_t p = m.grid();
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            Tile& t = m.tile(i, j);
            const bool in_band = band_member(i, j, policy);
            if (in_band) {
                if (t.dp.empty()) {
                    if (t.sp.empty())
                        m.make_dp(i, j);
                    else
                        widen_into(t);
                }
                t.sp.clear();
                t.precision = Precision::FP64;
            } else if (policy.mode == FactorMode::DST) {
                t.dp.clear();
                t.sp.clear();
                t.dp.shrink_to_fit();
                t.sp.shrink_to_fit();
            } else if (t.is_zero()) {
                t.sp.assign(t.rows * t.cols, 0.0f);
                t.precision = Precision::FP32;
            }
        }
    }
}

class Scheduler {
public:
    Scheduler(TileMatrix& m, const PrecisionPolicy& policy, TaskGraph* graph)
        : m_(m), policy_(policy), graph_(graph), p_(m.grid()), scratch_(m.grid()) {}

    FactorStats build() {
        const bool mixed = policy_.mode == FactorMode::MP;
        const std::size_t dt = policy_.diag_thick;

        // Narrow every off-band tile still held in double.
        if (mixed) {
            for (std::size_t i = 0; i < p_; ++i) {
                for (std::size_t j = 0; j < i; ++j) {
                    if (band_member(i, j, policy_)) continue;
                    Tile& t = m_.tile(i, j);
                    if (t.dp.empty()) continue;
                    submit(
                        [&t] {
                            t.sp.resize(t.rows * t.cols);
                            tile_to_sp(std::as_const(t).dp_view(), t.sp_view());
                            t.dp.clear();
                            t.dp.shrink_to_fit();
                            t.precision = Precision::FP32;
                        },
                        {}, handle(i, j));
                }
            }
        }

        for (std::size_t k = 0; k < p_; ++k) {
            Tile& diag = m_.tile(k, k);
            const bool keep_scratch = mixed && k + dt < p_;
            stats_.dp_flops += potrf_flops(diag.rows);
            submit(
                [this, &diag, k, keep_scratch] {
                    try {
                        potrf<double>(diag.dp_view());
                    } catch (const NotPositiveDefiniteError& e) {
                        throw NotPositiveDefiniteError(m_.tile_offset(k) + e.index());
                    }
                    if (keep_scratch) {
                        scratch_[k].assign(diag.rows * diag.cols, 0.0f);
                        tile_to_sp(std::as_const(diag).dp_view(), TileView<float>(diag.rows, diag.cols, scratch_[k]));
                    }
                },
                {}, handle(k, k));

            for (std::size_t i = k + 1; i < p_; ++i) {
                Tile& panel = m_.tile(i, k);
                if (panel.is_zero()) continue;
                if (band_member(i, k, policy_)) {
                    // Band panels that later feed single-precision updates
                    // also get a narrowed copy.
                    const bool narrow = mixed && i + dt < p_;
                    stats_.dp_flops += trsm_flops(panel.rows, panel.cols);
                    submit(
                        [&diag, &panel, narrow] {
                            trsm<double>(std::as_const(diag).dp_view(), panel.dp_view());
                            if (narrow) narrow_into(panel);
                        },
                        {handle(k, k)}, handle(i, k));
                } else {
                    stats_.sp_flops += trsm_flops(panel.rows, panel.cols);
                    submit(
                        [this, &diag, &panel, k] {
                            trsm<float>(TileView<const float>(diag.rows, diag.cols, scratch_[k]), panel.sp_view());
                            widen_into(panel);
                        },
                        {handle(k, k)}, handle(i, k));
                }
            }

            for (std::size_t j = k + 1; j < p_; ++j) {
                Tile& jk = m_.tile(j, k);
                if (jk.is_zero()) continue;
                Tile& jj = m_.tile(j, j);
                stats_.dp_flops += syrk_flops(jj.rows, jk.cols);
                submit([&jk, &jj] { syrk<double>(std::as_const(jk).dp_view(), jj.dp_view()); }, {handle(j, k)},
                       handle(j, j));

                for (std::size_t i = j + 1; i < p_; ++i) {
                    Tile& ik = m_.tile(i, k);
                    Tile& ij = m_.tile(i, j);
                    if (ik.is_zero() || ij.is_zero()) continue;
                    const double flops = gemm_flops(ij.rows, ij.cols, ik.cols);
                    if (band_member(i, j, policy_)) {
                        stats_.dp_flops += flops;
                        submit(
                            [&ik, &jk, &ij] {
                                gemm<double>(std::as_const(ik).dp_view(), std::as_const(jk).dp_view(), ij.dp_view());
                            },
                            {handle(i, k), handle(j, k)}, handle(i, j));
                    } else {
                        stats_.sp_flops += flops;
                        submit(
                            [&ik, &jk, &ij] {
                                gemm<float>(std::as_const(ik).sp_view(), std::as_const(jk).sp_view(), ij.sp_view());
                            },
                            {handle(i, k), handle(j, k)}, handle(i, j));
                    }
                }
            }
        }
        return stats_;
    }

private:
    TaskGraph::Handle handle(std::size_t i, std::size_t j) const { return i * p_ + j; }

    template <class F>
    void submit(F&& work, std::initializer_list<TaskGraph::Handle> reads, TaskGraph::Handle write) {
        ++stats_.tasks;
        if (graph_) graph_->submit(std::forward<F>(work), reads, {write});
    }

    TileMatrix& m_;
    PrecisionPolicy policy_;
    TaskGraph* graph_;
    std::size_t p_;
    std::vector<std::vector<float>> scratch_;  // narrowed diagonal factors
    FactorStats stats_;
};

PrecisionPolicy effective_policy(const TileMatrix& m, const PrecisionPolicy& policy) {
    policy.validate();
    return {policy.mode, policy.effective_thickness(m.grid())};
}

}  // namespace

CholeskyFactor::CholeskyFactor(TileMatrix tiles, PrecisionPolicy policy, FactorStats stats)
    : tiles_(std::move(tiles)), policy_(policy), stats_(stats) {}

double CholeskyFactor::element(std::size_t a, std::size_t b) const {
    if (a >= order() || b >= order()) throw DimensionError("factor element out of range");
    if (a < b) return 0.0;
    const std::size_t nb = tiles_.tile_size();
    const Tile& t = tiles_.tile(a / nb, b / nb);
    if (t.dp.empty()) return 0.0;
    return t.dp[(a % nb) + (b % nb) * t.rows];
}

std::vector<double> CholeskyFactor::to_dense() const {
    const std::size_t n = order();
    std::vector<double> dense(n * n, 0.0);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t a = b; a < n; ++a) dense[a + b * n] = element(a, b);
    return dense;
}

FactorResult try_cholesky(TileMatrix matrix, const PrecisionPolicy& policy, const FactorOptions& options) {
    const PrecisionPolicy effective = effective_policy(matrix, policy);
    normalize(matrix, effective);
    TaskGraph graph;
    Scheduler scheduler(matrix, effective, &graph);  // owns state the tasks use
    const FactorStats stats = scheduler.build();
    try {
        graph.run(resolve_threads(options.threads), options.shuffle_seed);
    } catch (const NotPositiveDefiniteError& e) {
        const std::size_t nb = matrix.tile_size();
        return NotPositiveDefinite{e.index() / nb, e.index() % nb, e.index()};
    }
    return CholeskyFactor(std::move(matrix), effective, stats);
}

CholeskyFactor cholesky(TileMatrix matrix, const PrecisionPolicy& policy, const FactorOptions& options) {
    FactorResult result = try_cholesky(std::move(matrix), policy, options);
    if (auto* failure = std::get_if<NotPositiveDefinite>(&result))
        throw NotPositiveDefiniteError(failure->global_index);
    return std::get<CholeskyFactor>(std::move(result));
}

FactorStats count_flops(const TileMatrix& matrix, const PrecisionPolicy& policy) {
    const PrecisionPolicy effective = effective_policy(matrix, policy);
    // Only tile shapes and zero-ness matter; work on an empty-payload grid.
    TileMatrix shape(matrix.order(), matrix.tile_size());
    for (std::size_t i = 0; i < shape.grid(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const bool zero = effective.mode == FactorMode::DST ? !band_member(i, j, effective)
                                                                : false;
            if (!zero) shape.tile(i, j).sp.resize(1);
        }
    }
    return Scheduler(shape, effective, nullptr).build();
}

double logdet(const CholeskyFactor& factor) {
    const TileMatrix& t = factor.tiles();
    double sum = 0.0;
    for (std::size_t k = 0; k < t.grid(); ++k) {
        const Tile& d = t.tile(k, k);
        for (std::size_t r = 0; r < d.rows; ++r) {
            const double v = d.dp[r + r * d.rows];
            if (!(v > 0.0) || !std::isfinite(v))
                throw CorruptFactorError("factor has a non-positive diagonal entry at " +
                                         std::to_string(t.tile_offset(k) + r));
            sum += std::log(v);
        }
    }
    return 2.0 * sum;
}

namespace {

void check_length(const CholeskyFactor& f, std::size_t len) {
    if (len != f.order())
        throw DimensionError("vector length " + std::to_string(len) + " does not match order " +
                             std::to_string(f.order()));
}

}  // namespace

std::vector<double> forward_solve(const CholeskyFactor& factor, std::span<const double> rhs) {
    check_length(factor, rhs.size());
    const TileMatrix& t = factor.tiles();
    std::vector<double> y(rhs.begin(), rhs.end());
    for (std::size_t i = 0; i < t.grid(); ++i) {
        double* yi = y.data() + t.tile_offset(i);
        for (std::size_t j = 0; j < i; ++j) {
            const Tile& l = t.tile(i, j);
            if (l.dp.empty()) continue;
            const double* yj = y.data() + t.tile_offset(j);
            for (std::size_t c = 0; c < l.cols; ++c) {
                const double v = yj[c];
                const double* col = l.dp.data() + c * l.rows;
                for (std::size_t r = 0; r < l.rows; ++r) yi[r] -= col[r] * v;
            }
        }
        const Tile& d = t.tile(i, i);
        for (std::size_t c = 0; c < d.cols; ++c) {
            const double* col = d.dp.data() + c * d.rows;
            yi[c] /= col[c];
            const double v = yi[c];
            for (std::size_t r = c + 1; r < d.rows; ++r) yi[r] -= col[r] * v;
        }
    }
    return y;
}

std::vector<double> backward_solve(const CholeskyFactor& factor, std::span<const double> rhs) {
    check_length(factor, rhs.size());
    const TileMatrix& t = factor.tiles();
    std::vector<double> x(rhs.begin(), rhs.end());
    for (std::size_t i = t.grid(); i-- > 0;) {
        double* xi = x.data() + t.tile_offset(i);
        for (std::size_t j = i + 1; j < t.grid(); ++j) {
            const Tile& l = t.tile(j, i);  // L_ji, contributes L_ji^T x_j
            if (l.dp.empty()) continue;
            const double* xj = x.data() + t.tile_offset(j);
            for (std::size_t c = 0; c < l.cols; ++c) {
                const double* col = l.dp.data() + c * l.rows;
                double acc = 0.0;
                for (std::size_t r = 0; r < l.rows; ++r) acc += col[r] * xj[r];
                xi[c] -= acc;
            }
        }
        const Tile& d = t.tile(i, i);
        for (std::size_t c = d.cols; c-- > 0;) {
            const double* col = d.dp.data() + c * d.rows;
            double acc = xi[c];
            for (std::size_t r = c + 1; r < d.rows; ++r) acc -= col[r] * xi[r];
            xi[c] = acc / col[c];
        }
    }
    return x;
}

std::vector<double> solve(const CholeskyFactor& factor, std::span<const double> rhs) {
    const std::vector<double> y = forward_solve(factor, rhs);
    return backward_solve(factor, y);
}

std::vector<double> lower_multiply(const CholeskyFactor& factor, std::span<const double> v) {
    check_length(factor, v.size());
    const TileMatrix& t = factor.tiles();
    std::vector<double> out(v.size(), 0.0);
    for (std::size_t i = 0; i < t.grid(); ++i) {
        double* oi = out.data() + t.tile_offset(i);
        for (std::size_t j = 0; j <= i; ++j) {
            const Tile& l = t.tile(i, j);
            if (l.dp.empty()) continue;
            const double* vj = v.data() + t.tile_offset(j);
            for (std::size_t c = 0; c < l.cols; ++c) {
                const double* col = l.dp.data() + c * l.rows;
                const std::size_t r0 = i == j ? c : 0;
                for (std::size_t r = r0; r < l.rows; ++r) oi[r] += col[r] * vj[c];
            }
        }
    }
    return out;
}

std::vector<double> symmetric_multiply(const TileMatrix& matrix, std::span<const double> x) {
    if (x.size() != matrix.order()) throw DimensionError("symmetric_multiply: length mismatch");
    std::vector<double> y(x.size(), 0.0);
    std::vector<double> widened;
    for (std::size_t i = 0; i < matrix.grid(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const Tile& a = matrix.tile(i, j);
            if (a.is_zero()) continue;
            const double* vals = a.dp.data();
            if (a.dp.empty()) {
                widened.assign(a.sp.begin(), a.sp.end());
                vals = widened.data();
            }
            const std::size_t oi = matrix.tile_offset(i);
            const std::size_t oj = matrix.tile_offset(j);
            for (std::size_t c = 0; c < a.cols; ++c) {
                for (std::size_t r = 0; r < a.rows; ++r) {
                    if (i == j && r < c) continue;
                    const double v = vals[r + c * a.rows];
                    y[oi + r] += v * x[oj + c];
                    if (i != j || r != c) y[oj + c] += v * x[oi + r];
                }
            }
        }
    }
    return y;
}

}  // namespace mixtile
