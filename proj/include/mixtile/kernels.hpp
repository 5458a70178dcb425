#pragma once

#include <cstddef>
#include <span>
#include <type_traits>

namespace mixtile {

// Non-owning view of a column-major tile with leading dimension == rows.
template <class T>
struct TileView {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::span<T> data;

    TileView() = default;
    TileView(std::size_t r, std::size_t c, std::span<T> d) : rows(r), cols(c), data(d) {}

    template <class U>
        requires std::is_same_v<const U, T> && (!std::is_same_v<U, T>)
    TileView(TileView<U> other) : rows(other.rows), cols(other.cols), data(other.data) {}

    T& operator()(std::size_t r, std::size_t c) const { return data[r + c * rows]; }
};

// In-place lower Cholesky factor of a square tile: A = L L^T on the lower
// triangle, strict upper triangle left untouched. Throws
// NotPositiveDefiniteError with the local pivot index.
template <class T>
void potrf(TileView<T> a);

// b := b * L^-T for lower-triangular L (right side, transposed).
template <class T>
void trsm(TileView<const T> l, TileView<T> b);

// c := c - a * a^T, lower triangle of c only.
template <class T>
void syrk(TileView<const T> a, TileView<T> c);

// c := c - a * b^T. Every element accumulates its products with the inner
// index ascending before being subtracted from c.
template <class T>
void gemm(TileView<const T> a, TileView<const T> b, TileView<T> c);

extern template void potrf<double>(TileView<double>);
extern template void potrf<float>(TileView<float>);
extern template void trsm<double>(TileView<const double>, TileView<double>);
extern template void trsm<float>(TileView<const float>, TileView<float>);
extern template void syrk<double>(TileView<const double>, TileView<double>);
extern template void syrk<float>(TileView<const float>, TileView<float>);
extern template void gemm<double>(TileView<const double>, TileView<const double>, TileView<double>);
extern template void gemm<float>(TileView<const float>, TileView<const float>, TileView<float>);

}  // namespace mixtile
