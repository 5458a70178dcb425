#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "mixtile/covmath.hpp"

namespace mixtile {

// n spatial locations with one zero-mean measurement each.
class GeoDataset {
public:
    GeoDataset(std::vector<Location> locations, std::vector<double> z,
               DistanceMetric metric = DistanceMetric::euclidean());

    std::size_t size() const noexcept { return z_.size(); }
    const std::vector<Location>& locations() const noexcept { return locations_; }
    const std::vector<double>& z() const noexcept { return z_; }
    const DistanceMetric& metric() const noexcept { return metric_; }

    // Dataset restricted to `indices`, in the given order.
    GeoDataset subset(std::span<const std::size_t> indices) const;

    friend bool operator==(const GeoDataset&, const GeoDataset&) = default;

private:
    std::vector<Location> locations_;
    std::vector<double> z_;
    DistanceMetric metric_;
};

struct FoldAssignment {
    std::size_t k = 0;
    std::vector<std::size_t> fold_of;

    std::vector<std::size_t> members(std::size_t fold) const;
    std::vector<std::size_t> complement(std::size_t fold) const;
    std::vector<std::size_t> sizes() const;
};

// Irregular locations strictly inside the unit square: a random subset of
// the cells of a ceil(sqrt(n))^2 grid, each jittered within its cell.
std::vector<Location> generate_locations(std::size_t n, std::uint64_t seed);

// Z = L v with Sigma(theta0) = L L^T factored in full double precision and v
// standard normal from a sub-stream of `seed`.
GeoDataset generate_field(std::vector<Location> locations, const MaternParams& theta0,
                          const DistanceMetric& metric, std::uint64_t seed, std::size_t tile_size = 256,
                          std::size_t threads = 0);

FoldAssignment kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

// Permutation that sorts locations along a Z-order (Morton) curve over their
// bounding box.
std::vector<std::size_t> morton_order(std::span<const Location> locations);
GeoDataset morton_sorted(const GeoDataset& dataset);

// CSV with header `x,y,z` (Euclidean) or `lon,lat,z` (great circle). Lines
// starting with '#' are comments.
GeoDataset read_dataset(std::istream& in, double radius = kEarthRadiusKm);
GeoDataset read_dataset(const std::filesystem::path& path, double radius = kEarthRadiusKm);
void write_dataset(const GeoDataset& dataset, std::ostream& out);
void write_dataset(const GeoDataset& dataset, const std::filesystem::path& path);

}  // namespace mixtile
