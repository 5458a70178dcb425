#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "mixtile/errors.hpp"
#include "mixtile/geodata.hpp"
#include "support.hpp"

using namespace mixtile;

TEST_CASE("dataset construction validates its inputs") {
    CHECK_THROWS_AS(GeoDataset({}, {}), DomainError);
    CHECK_THROWS_AS(GeoDataset({{0, 0}, {1, 1}}, {1.0}), DimensionError);
    CHECK_THROWS_AS(GeoDataset({{0, INFINITY}}, {1.0}), DomainError);
    const GeoDataset ds({{0, 0}, {1, 1}, {2, 2}}, {1, 2, 3});
    const std::vector<std::size_t> idx{2, 0};
    const GeoDataset sub = ds.subset(idx);
    CHECK(sub.size() == 2);
    CHECK(sub.z() == std::vector<double>{3, 1});
    CHECK(sub.locations()[0] == Location{2, 2});
    const std::vector<std::size_t> bad{5};
    CHECK_THROWS_AS(ds.subset(bad), DimensionError);
}

TEST_CASE("generated locations are distinct, inside the unit square and reproducible") {
    for (std::size_t n : {1u, 2u, 17u, 400u, 1000u}) {
        const auto a = generate_locations(n, 42);
        const auto b = generate_locations(n, 42);
        CHECK(a == b);
        REQUIRE(a.size() == n);
        std::set<std::pair<double, double>> seen;
        for (const auto& l : a) {
            CHECK(l.x > 0.0);
            CHECK(l.x < 1.0);
            CHECK(l.y > 0.0);
            CHECK(l.y < 1.0);
            seen.insert({l.x, l.y});
        }
        CHECK(seen.size() == n);
    }
    CHECK(generate_locations(100, 1) != generate_locations(100, 2));
    CHECK_THROWS_AS(generate_locations(0, 1), DomainError);
}

TEST_CASE("generated field is reproducible and has roughly unit variance") {
    const MaternParams theta0{1.0, 0.1, 0.5};
    const GeoDataset a = generate_field(generate_locations(400, 9), theta0, DistanceMetric::euclidean(), 9, 64);
    CHECK(generate_field(generate_locations(400, 9), theta0, DistanceMetric::euclidean(), 9, 64) == a);
    // Another tile size only changes rounding.
    const GeoDataset b = generate_field(generate_locations(400, 9), theta0, DistanceMetric::euclidean(), 9, 128);
    CHECK(testsupport::max_abs_diff(a.z(), b.z()) < 1e-10);
    double ss = 0.0;
    for (double v : a.z()) ss += v * v;
    const double var = ss / static_cast<double>(a.size());
    CHECK(var > 0.3);
    CHECK(var < 3.0);
}

TEST_CASE("generate_field rejects a covariance that does not factor") {
    // Two coincident points give a singular covariance.
    std::vector<Location> loc{{0.5, 0.5}, {0.5, 0.5}, {0.1, 0.2}};
    CHECK_THROWS_AS(generate_field(loc, {1.0, 0.1, 0.5}, DistanceMetric::euclidean(), 1), GenerationError);
    CHECK_THROWS_AS(generate_field(loc, {1.0, -0.1, 0.5}, DistanceMetric::euclidean(), 1), DomainError);
}

TEST_CASE("k-fold split partitions the indices into balanced folds") {
    for (std::size_t n : {10u, 100u, 101u, 399u}) {
        for (std::size_t k : {2u, 3u, 10u}) {
            const FoldAssignment f = kfold_split(n, k, 7);
            CHECK(f.k == k);
            const auto sizes = f.sizes();
            CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
            std::size_t total = 0;
            for (std::size_t fold = 0; fold < k; ++fold) {
                const auto m = f.members(fold);
                const auto c = f.complement(fold);
                CHECK(m.size() + c.size() == n);
                total += m.size();
            }
            CHECK(total == n);
            CHECK(kfold_split(n, k, 7).fold_of == f.fold_of);
        }
    }
    CHECK(kfold_split(100, 10, 1).fold_of != kfold_split(100, 10, 2).fold_of);
    CHECK_THROWS_AS(kfold_split(5, 1, 0), DomainError);
    CHECK_THROWS_AS(kfold_split(5, 6, 0), DomainError);
}

TEST_CASE("morton order is a permutation that keeps neighbours close") {
    const auto loc = generate_locations(1024, 3);
    const auto order = morton_order(loc);
    std::vector<std::size_t> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);

    auto path = [&](const std::vector<std::size_t>& o) {
        double s = 0.0;
        for (std::size_t i = 1; i < o.size(); ++i) s += distance(loc[o[i - 1]], loc[o[i]], DistanceMetric::euclidean());
        return s;
    };
    std::vector<std::size_t> identity(loc.size());
    for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
    CHECK(path(order) < 0.25 * path(identity));

    // The four quadrant corners come out in Z order.
    const std::vector<Location> corners{{0.9, 0.9}, {0.1, 0.9}, {0.9, 0.1}, {0.1, 0.1}};
    CHECK(morton_order(corners) == std::vector<std::size_t>{3, 2, 1, 0});
}

TEST_CASE("dataset CSV round trip is exact") {
    const GeoDataset ds = testsupport::random_dataset(50, 4);
    std::stringstream ss;
    write_dataset(ds, ss);
    CHECK(read_dataset(ss) == ds);

    const GeoDataset gc({{-120.5, 33.25}, {10.0, -45.0}}, {0.1, -0.2}, DistanceMetric::great_circle(kEarthRadiusKm));
    std::stringstream s2;
    write_dataset(gc, s2);
    CHECK(s2.str().rfind("lon,lat,z\n", 0) == 0);
    CHECK(read_dataset(s2) == gc);
}

TEST_CASE("dataset reader accepts CRLF and comments and reports bad lines") {
    std::istringstream crlf("# produced elsewhere\r\nx,y,z\r\n0.1,0.2,0.3\r\n\r\n0.4,0.5,0.6\r\n");
    const GeoDataset ds = read_dataset(crlf);
    CHECK(ds.size() == 2);
    CHECK(ds.z()[1] == 0.6);

    auto line_of = [](const std::string& text) -> std::size_t {
        std::istringstream in(text);
        try {
            read_dataset(in);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("x,y,z\n1,2,3\n1,2\n") == 3);
    CHECK(line_of("x,y,z\n1,2,3\n1,abc,3\n") == 3);
    CHECK(line_of("a,b,c\n1,2,3\n") == 1);
    CHECK(line_of("x,y,z\n1,2,nan\n") == 2);
    CHECK(line_of("lon,lat,z\n1,95,3\n") == 2);
    CHECK(line_of("") == 1);
    CHECK(line_of("x,y,z\n") == 2);
}

TEST_CASE("reference cases") {
    CHECK(generate_locations(4, 7) == generate_locations(4, 7));

    const FoldAssignment hundred = kfold_split(100, 10, 3);
    CHECK(hundred.sizes() == std::vector<std::size_t>(10, 10));
    auto ten = kfold_split(10, 3, 3).sizes();
    std::sort(ten.begin(), ten.end());
    CHECK(ten == std::vector<std::size_t>{3, 3, 4});

    std::istringstream empty("");
    CHECK_THROWS_AS(read_dataset(empty), ParseError);
}

TEST_CASE("field variance follows the variance parameter") {
    const auto loc = generate_locations(30, 2);
    const GeoDataset tiny = generate_field(loc, {1e-10, 0.1, 0.5}, DistanceMetric::euclidean(), 4);
    double ss = 0.0;
    for (double v : tiny.z()) ss += v * v;
    CHECK(ss / 30.0 < 1e-8);

    // Pointwise Monte Carlo: Var Z(s_0) = theta1. With the mean known to be
    // zero, 100 replicates give a standard error of theta1 * sqrt(2 / 100).
    const double theta1 = 2.0;
    double sum_sq = 0.0;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
        const GeoDataset ds = generate_field(loc, {theta1, 0.1, 0.5}, DistanceMetric::euclidean(), 1000 + rep);
        sum_sq += ds.z()[0] * ds.z()[0];
    }
    const double var = sum_sq / 100.0;
    CHECK(std::abs(var - theta1) < 3.0 * theta1 * std::sqrt(2.0 / 100.0));
}
