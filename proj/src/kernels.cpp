#include "mixtile/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "mixtile/errors.hpp"

namespace mixtile {

namespace {

template <class T>
struct VecOf;
template <>
struct VecOf<double> {
    typedef double type __attribute__((vector_size(64)));
};
template <>
struct VecOf<float> {
    typedef float type __attribute__((vector_size(64)));
};
template <class T>
using Vec = typename VecOf<T>::type;

// Register block: two 512-bit vectors of rows by four columns.
template <class T>
constexpr std::size_t kLanes = 64 / sizeof(T);
template <class T>
constexpr std::size_t kBlockRows = 2 * kLanes<T>;
constexpr std::size_t kBlockCols = 4;

// c(0:MR, 0:NR) -= sum_k a(0:MR, k) * b(0:NR, k)
template <class T, std::size_t NR>
inline void micro_kernel(std::size_t depth, const T* __restrict a, std::size_t lda, const T* __restrict b,
                         std::size_t ldb, T* __restrict c, std::size_t ldc) {
    constexpr std::size_t L = kLanes<T>;
    Vec<T> acc[NR][2] = {};
    for (std::size_t k = 0; k < depth; ++k) {
        Vec<T> a0, a1;
        std::memcpy(&a0, a + k * lda, sizeof a0);
        std::memcpy(&a1, a + k * lda + L, sizeof a1);
        const T* bk = b + k * ldb;
        for (std::size_t j = 0; j < NR; ++j) {
            acc[j][0] += a0 * bk[j];
            acc[j][1] += a1 * bk[j];
        }
    }
    for (std::size_t j = 0; j < NR; ++j) {
        for (std::size_t h = 0; h < 2; ++h) {
            Vec<T> cv;
            std::memcpy(&cv, c + j * ldc + h * L, sizeof cv);
            cv -= acc[j][h];
            std::memcpy(c + j * ldc + h * L, &cv, sizeof cv);
        }
    }
}

// Same arithmetic as micro_kernel for partial blocks. `lower_only` restricts
// the update to entries with global row >= global column.
template <class T>
void edge_kernel(std::size_t mr, std::size_t nr, std::size_t depth, const T* a, std::size_t lda, const T* b,
                 std::size_t ldb, T* c, std::size_t ldc, bool lower_only, std::size_t row0, std::size_t col0) {
    for (std::size_t j = 0; j < nr; ++j) {
        for (std::size_t i = 0; i < mr; ++i) {
            if (lower_only && row0 + i < col0 + j) continue;
            T acc = 0;
            for (std::size_t k = 0; k < depth; ++k) acc += a[i + k * lda] * b[j + k * ldb];
            c[i + j * ldc] -= acc;
        }
    }
}

template <class T>
void blocked_update(std::size_t m, std::size_t n, std::size_t depth, const T* a, std::size_t lda, const T* b,
                    std::size_t ldb, T* c, std::size_t ldc, bool lower_only) {
    constexpr std::size_t MR = kBlockRows<T>;
    constexpr std::size_t NR = kBlockCols;
    for (std::size_t j0 = 0; j0 < n; j0 += NR) {
        const std::size_t nr = std::min(NR, n - j0);
        const std::size_t i_start = lower_only ? (j0 / MR) * MR : 0;
        for (std::size_t i0 = i_start; i0 < m; i0 += MR) {
            const std::size_t mr = std::min(MR, m - i0);
            T* cb = c + i0 + j0 * ldc;
            if (mr != MR || nr != NR) {
                edge_kernel<T>(mr, nr, depth, a + i0, lda, b + j0, ldb, cb, ldc, lower_only, i0, j0);
            } else if (lower_only && i0 < j0 + nr - 1) {
                // Block straddles the diagonal: update a copy, keep the lower part.
                T scratch[MR * NR];
                for (std::size_t j = 0; j < NR; ++j)
                    for (std::size_t i = 0; i < MR; ++i) scratch[i + j * MR] = cb[i + j * ldc];
                micro_kernel<T, NR>(depth, a + i0, lda, b + j0, ldb, scratch, MR);
                for (std::size_t j = 0; j < NR; ++j)
                    for (std::size_t i = 0; i < MR; ++i)
                        if (i0 + i >= j0 + j) cb[i + j * ldc] = scratch[i + j * MR];
            } else {
                micro_kernel<T, NR>(depth, a + i0, lda, b + j0, ldb, cb, ldc);
            }
        }
    }
}

}  // namespace

template <class T>
void potrf(TileView<T> a) {
    if (a.rows != a.cols) throw DimensionError("potrf: tile must be square");
    const std::size_t n = a.rows;
    T* p = a.data.data();
    for (std::size_t j = 0; j < n; ++j) {
        T* col = p + j * n;
        for (std::size_t k = 0; k < j; ++k) {
            const T* ck = p + k * n;
            const T t = ck[j];
            for (std::size_t i = j; i < n; ++i) col[i] -= ck[i] * t;
        }
        const T d = col[j];
        if (!(d > T(0))) throw NotPositiveDefiniteError(j);
        const T root = std::sqrt(d);
        col[j] = root;
        for (std::size_t i = j + 1; i < n; ++i) col[i] /= root;
    }
}

template <class T>
void trsm(TileView<const T> l, TileView<T> b) {
    if (l.rows != l.cols || b.cols != l.rows) throw DimensionError("trsm: dimension mismatch");
    const std::size_t m = b.rows;
    const std::size_t n = b.cols;
    const T* lp = l.data.data();
    T* bp = b.data.data();
    for (std::size_t j = 0; j < n; ++j)
        if (lp[j + j * n] == T(0)) throw SingularSolveError("trsm: zero on the diagonal at " + std::to_string(j));

    // Row blocks stay in registers while the columns are solved in order.
    constexpr std::size_t L = kLanes<T>;
    std::size_t i0 = 0;
    for (; i0 + 2 * L <= m; i0 += 2 * L) {
        for (std::size_t j = 0; j < n; ++j) {
            Vec<T> x0, x1;
            std::memcpy(&x0, bp + i0 + j * m, sizeof x0);
            std::memcpy(&x1, bp + i0 + j * m + L, sizeof x1);
            for (std::size_t k = 0; k < j; ++k) {
                const T t = lp[j + k * n];
                Vec<T> y0, y1;
                std::memcpy(&y0, bp + i0 + k * m, sizeof y0);
                std::memcpy(&y1, bp + i0 + k * m + L, sizeof y1);
                x0 -= y0 * t;
                x1 -= y1 * t;
            }
            const T d = lp[j + j * n];
            x0 /= d;
            x1 /= d;
            std::memcpy(bp + i0 + j * m, &x0, sizeof x0);
            std::memcpy(bp + i0 + j * m + L, &x1, sizeof x1);
        }
    }
    for (std::size_t i = i0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            T x = bp[i + j * m];
            for (std::size_t k = 0; k < j; ++k) x -= bp[i + k * m] * lp[j + k * n];
            bp[i + j * m] = x / lp[j + j * n];
        }
    }
}

template <class T>
void syrk(TileView<const T> a, TileView<T> c) {
    if (c.rows != c.cols || a.rows != c.rows) throw DimensionError("syrk: dimension mismatch");
    blocked_update<T>(c.rows, c.cols, a.cols, a.data.data(), a.rows, a.data.data(), a.rows, c.data.data(), c.rows,
                      true);
}

template <class T>
void gemm(TileView<const T> a, TileView<const T> b, TileView<T> c) {
    if (a.rows != c.rows || b.rows != c.cols || a.cols != b.cols) throw DimensionError("gemm: dimension mismatch");
    blocked_update<T>(c.rows, c.cols, a.cols, a.data.data(), a.rows, b.data.data(), b.rows, c.data.data(), c.rows,
                      false);
}

template void potrf<double>(TileView<double>);
template void potrf<float>(TileView<float>);
template void trsm<double>(TileView<const double>, TileView<double>);
template void trsm<float>(TileView<const float>, TileView<float>);
template void syrk<double>(TileView<const double>, TileView<double>);
template void syrk<float>(TileView<const float>, TileView<float>);
template void gemm<double>(TileView<const double>, TileView<const double>, TileView<double>);
template void gemm<float>(TileView<const float>, TileView<const float>, TileView<float>);

}  // namespace mixtile
