#include <doctest.h>

#include <cmath>
#include <variant>

#include "mixtile/errors.hpp"
#include "mixtile/factor.hpp"
#include "support.hpp"

using namespace mixtile;
namespace ts = testsupport;

namespace {

const MaternParams kTheta{1.0, 0.1, 0.5};

struct Problem {
    GeoDataset ds;
    ts::Dense dense;
};

Problem problem(std::size_t n, std::uint64_t seed, const MaternParams& theta = kTheta) {
    GeoDataset ds = morton_sorted(ts::random_dataset(n, seed));
    ts::Dense dense = ts::dense_covariance(ds, theta);
    return {std::move(ds), std::move(dense)};
}

CholeskyFactor factor_of(const GeoDataset& ds, std::size_t nb, const PrecisionPolicy& policy,
                         const FactorOptions& options = {}, const MaternParams& theta = kTheta) {
    return cholesky(assemble_covariance(ds, theta, nb, policy), policy, options);
}

double relative_residual(const ts::Dense& a, const ts::Dense& l, std::size_t n) {
    const ts::Dense llt = ts::dense_llt(l, n);
    ts::Dense diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - llt[i];
    return ts::frobenius(diff) / ts::frobenius(a);
}

}  // namespace

TEST_CASE("double-precision tile factor matches the unblocked oracle") {
    for (auto [n, nb] : {std::pair<std::size_t, std::size_t>{1, 4}, {7, 3}, {64, 16}, {100, 32}, {150, 64}, {90, 200}}) {
        CAPTURE(n);
        CAPTURE(nb);
        const Problem pr = problem(n, n + nb);
        const CholeskyFactor f = factor_of(pr.ds, nb, PrecisionPolicy::dp());
        const ts::Dense oracle = ts::dense_cholesky(pr.dense, n);
        const ts::Dense l = f.to_dense();
        CHECK(ts::max_abs_diff(l, oracle) < 1e-12);
        CHECK(relative_residual(pr.dense, l, n) < 1e-13 * static_cast<double>(n));
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < j; ++i) REQUIRE(l[i + j * n] == 0.0);
    }
}

TEST_CASE("mixed precision with a full band is bitwise double precision") {
    for (std::size_t n : {50u, 128u, 257u}) {
        const Problem pr = problem(n, 3 * n);
        const std::size_t nb = 32;
        const std::size_t p = (n + nb - 1) / nb;
        const CholeskyFactor dp = factor_of(pr.ds, nb, PrecisionPolicy::dp());
        for (std::size_t thick : {p, p + 5}) {
            const CholeskyFactor mp = factor_of(pr.ds, nb, PrecisionPolicy::mp(thick));
            CHECK(mp.to_dense() == dp.to_dense());
            CHECK(mp.stats().sp_flops == 0.0);
        }
        const CholeskyFactor dst = factor_of(pr.ds, nb, PrecisionPolicy::dst(p));
        CHECK(dst.to_dense() == dp.to_dense());
    }
}

TEST_CASE("mixed-precision factor stays close to the double factor") {
    const std::size_t n = 320, nb = 32;
    const Problem pr = problem(n, 77);
    const ts::Dense dp = factor_of(pr.ds, nb, PrecisionPolicy::dp()).to_dense();
    for (std::size_t thick : {1u, 2u, 4u}) {
        CAPTURE(thick);
        const PrecisionPolicy policy = PrecisionPolicy::mp(thick);
        const CholeskyFactor mp = factor_of(pr.ds, nb, policy);
        const ts::Dense l = mp.to_dense();
        CHECK(relative_residual(pr.dense, l, n) < 1e-5 * static_cast<double>(n));
        CHECK(ts::max_abs_diff(l, dp) < 1e-4);
        CHECK(ts::max_abs_diff(l, dp) > 0.0);
        // Off-band tiles keep their single-precision values alongside the
        // widened copy.
        for (std::size_t i = 0; i < mp.tiles().grid(); ++i)
            for (std::size_t j = 0; j < i; ++j) {
                const Tile& t = mp.tiles().tile(i, j);
                if (band_member(i, j, policy)) continue;
                REQUIRE(t.sp.size() == t.dp.size());
                for (std::size_t e = 0; e < t.dp.size(); ++e)
                    REQUIRE(t.dp[e] == static_cast<double>(t.sp[e]));
            }
    }
}

TEST_CASE("diagonal super-tile factor is the exact factor of the truncated matrix") {
    const std::size_t n = 200, nb = 25;
    const Problem pr = problem(n, 8, {1.0, 0.03, 0.5});
    for (std::size_t thick : {1u, 2u, 3u}) {
        CAPTURE(thick);
        const PrecisionPolicy policy = PrecisionPolicy::dst(thick);
        ts::Dense truncated = pr.dense;
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i)
                if (!band_member(i / nb, j / nb, policy)) truncated[i + j * n] = 0.0;
        const CholeskyFactor f = factor_of(pr.ds, nb, policy, {}, {1.0, 0.03, 0.5});
        CHECK(ts::max_abs_diff(f.to_dense(), ts::dense_cholesky(truncated, n)) < 1e-12);
        for (std::size_t i = 0; i < f.tiles().grid(); ++i)
            for (std::size_t j = 0; j <= i; ++j) CHECK(f.tiles().tile(i, j).is_zero() == !band_member(i, j, policy));
    }
}

TEST_CASE("logdet and solves match the dense oracle") {
    const std::size_t n = 97;
    const Problem pr = problem(n, 4);
    const CholeskyFactor f = factor_of(pr.ds, 20, PrecisionPolicy::dp());
    const ts::Dense l = ts::dense_cholesky(pr.dense, n);
    CHECK(logdet(f) == doctest::Approx(ts::dense_logdet(l, n)).epsilon(1e-12));

    const std::vector<double>& z = pr.ds.z();
    const auto y = forward_solve(f, z);
    CHECK(ts::max_abs_diff(y, ts::dense_forward(l, n, z)) < 1e-10 * (1 + ts::max_abs(y)));
    const auto x = backward_solve(f, y);
    CHECK(ts::max_abs_diff(x, ts::dense_backward(l, n, y)) < 1e-10 * (1 + ts::max_abs(x)));
    CHECK(solve(f, z) == x);

    const auto lz = lower_multiply(f, z);
    std::vector<double> expect(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k <= i; ++k) expect[i] += l[i + k * n] * z[k];
    CHECK(ts::max_abs_diff(lz, expect) < 1e-12 * (1 + ts::max_abs(expect)));

    const TileMatrix a = assemble_covariance(pr.ds, kTheta, 20, PrecisionPolicy::dp());
    const auto az = symmetric_multiply(a, z);
    std::vector<double> dense_az(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) dense_az[i] += pr.dense[i + k * n] * z[k];
    CHECK(ts::max_abs_diff(az, dense_az) < 1e-12 * (1 + ts::max_abs(dense_az)));

    CHECK_THROWS_AS(forward_solve(f, std::vector<double>(n + 1)), DimensionError);
}

TEST_CASE("flop counts") {
    SUBCASE("whole tiles sum to n^3/3") {
        for (auto [n, nb] : {std::pair<std::size_t, std::size_t>{64, 16}, {256, 32}, {96, 96}}) {
            const TileMatrix shape(n, nb);
            const FactorStats s = count_flops(shape, PrecisionPolicy::dp());
            const double n3 = static_cast<double>(n) * n * n / 3.0;
            CHECK(s.total_flops() == doctest::Approx(n3).epsilon(1e-14));
            CHECK(s.sp_flops == 0.0);
            CHECK(count_flops(shape, PrecisionPolicy::mp(2)).total_flops() ==
                  doctest::Approx(n3).epsilon(1e-14));
        }
    }
    SUBCASE("ragged tiles stay within the n^3/3 + O(n^2) envelope") {
        const std::size_t n = 100;
        const FactorStats s = count_flops(TileMatrix(n, 32), PrecisionPolicy::dp());
        const double n3 = static_cast<double>(n) * n * n / 3.0;
        CHECK(std::abs(s.total_flops() - n3) < 2.0 * n * n);
    }
    SUBCASE("counted flops agree with the executed factorization") {
        const Problem pr = problem(160, 6);
        for (const auto& policy : {PrecisionPolicy::dp(), PrecisionPolicy::mp(1), PrecisionPolicy::mp(2),
                                   PrecisionPolicy::dst(2)}) {
            const CholeskyFactor f = factor_of(pr.ds, 20, policy);
            const FactorStats counted = count_flops(TileMatrix(160, 20), policy);
            CHECK(f.stats().dp_flops == counted.dp_flops);
            CHECK(f.stats().sp_flops == counted.sp_flops);
        }
    }
    SUBCASE("a ten percent band executes most flops in single precision") {
        const std::size_t p = 20, nb = 16;
        const PrecisionPolicy policy = PolicySpec::parse("mp:10").resolve(p);
        CHECK(policy.diag_thick == 2);
        const FactorStats s = count_flops(TileMatrix(p * nb, nb), policy);
        CHECK(s.dp_fraction() < 0.3);
        CHECK(count_flops(TileMatrix(p * nb, nb), PolicySpec::parse("mp:100").resolve(p)).dp_fraction() == 1.0);
    }
}

TEST_CASE("factorization is independent of the task schedule") {
    const Problem pr = problem(300, 21);
    for (const auto& policy : {PrecisionPolicy::dp(), PrecisionPolicy::mp(2), PrecisionPolicy::dst(3)}) {
        const ts::Dense base = factor_of(pr.ds, 32, policy, FactorOptions::with_threads(1)).to_dense();
        for (std::size_t threads : {2u, 4u}) CHECK(factor_of(pr.ds, 32, policy, FactorOptions::with_threads(threads)).to_dense() == base);
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            FactorOptions o;
            o.threads = 1;
            o.shuffle_seed = seed;
            CHECK(factor_of(pr.ds, 32, policy, o).to_dense() == base);
        }
    }
}

TEST_CASE("a matrix that is not positive definite is reported with its pivot") {
    const std::size_t n = 40;
    const GeoDataset ds = ts::random_dataset(n, 5);
    TileMatrix a = assemble_covariance(ds, kTheta, 8, PrecisionPolicy::dp());
    // A zero diagonal entry makes pivot 21 negative.
    Tile& t = a.tile(2, 2);
    t.dp[5 + 5 * t.rows] = 0.0;
    const FactorResult res = try_cholesky(a, PrecisionPolicy::dp());
    REQUIRE(std::holds_alternative<NotPositiveDefinite>(res));
    const auto& bad = std::get<NotPositiveDefinite>(res);
    CHECK(bad.global_index == 21);
    CHECK(bad.tile == 2);
    CHECK(bad.pivot == 5);
    CHECK_THROWS_AS(cholesky(a, PrecisionPolicy::dp()), NotPositiveDefiniteError);
}

TEST_CASE("single-precision input tiles are widened for double precision") {
    const Problem pr = problem(64, 2);
    TileMatrix a = assemble_covariance(pr.ds, kTheta, 16, PrecisionPolicy::mp(1));
    const CholeskyFactor f = cholesky(a, PrecisionPolicy::dp());
    ts::Dense rounded = pr.dense;
    for (std::size_t j = 0; j < 64; ++j)
        for (std::size_t i = 0; i < 64; ++i)
            if (i / 16 != j / 16) rounded[i + j * 64] = static_cast<float>(rounded[i + j * 64]);
    CHECK(ts::max_abs_diff(f.to_dense(), ts::dense_cholesky(rounded, 64)) < 1e-12);
}
