#include "mixtile/geodata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "mixtile/errors.hpp"
#include "mixtile/factor.hpp"
#include "mixtile/rng.hpp"
#include "mixtile/tilestore.hpp"

namespace mixtile {

GeoDataset::GeoDataset(std::vector<Location> locations, std::vector<double> z, DistanceMetric metric)
    : locations_(std::move(locations)), z_(std::move(z)), metric_(metric) {
    if (locations_.empty()) throw DomainError("dataset must contain at least one location");
    if (locations_.size() != z_.size())
        throw DimensionError("dataset has " + std::to_string(locations_.size()) + " locations but " +
                             std::to_string(z_.size()) + " measurements");
    metric_.validate();
    for (const auto& l : locations_)
        if (!std::isfinite(l.x) || !std::isfinite(l.y)) throw DomainError("dataset coordinates must be finite");
}

GeoDataset GeoDataset::subset(std::span<const std::size_t> indices) const {
    std::vector<Location> loc;
    std::vector<double> z;
    loc.reserve(indices.size());
    z.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= size()) throw DimensionError("subset index out of range");
        loc.push_back(locations_[i]);
        z.push_back(z_[i]);
    }
    return GeoDataset(std::move(loc), std::move(z), metric_);
}

std::vector<std::size_t> FoldAssignment::members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldAssignment::complement(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] != fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldAssignment::sizes() const {
    std::vector<std::size_t> s(k, 0);
    for (std::size_t f : fold_of) ++s.at(f);
    return s;
}

namespace {

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

std::vector<Location> generate_locations(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw DomainError("generate_locations: n must be at least 1");
    Rng rng(seed);
    const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    std::vector<std::size_t> cells(side * side);
    std::iota(cells.begin(), cells.end(), std::size_t{0});
    shuffle(cells, rng);
    std::vector<Location> out;
    out.reserve(n);
    const double h = 1.0 / static_cast<double>(side);
    for (std::size_t c = 0; c < n; ++c) {
        const double cx = static_cast<double>(cells[c] % side);
        const double cy = static_cast<double>(cells[c] / side);
        // jitter stays within 40% of the cell half-width, so points are
        // distinct and strictly inside (0, 1)
        out.push_back({(cx + 0.5 + rng.uniform(-0.4, 0.4)) * h, (cy + 0.5 + rng.uniform(-0.4, 0.4)) * h});
    }
    return out;
}

GeoDataset generate_field(std::vector<Location> locations, const MaternParams& theta0, const DistanceMetric& metric,
                          std::uint64_t seed, std::size_t tile_size, std::size_t threads) {
    theta0.validate();
    std::vector<double> zeros(locations.size(), 0.0);
    GeoDataset shape(std::move(locations), std::move(zeros), metric);
    TileMatrix sigma = assemble_covariance(shape, theta0, tile_size, PrecisionPolicy::dp(), threads);
    FactorResult result = try_cholesky(std::move(sigma), PrecisionPolicy::dp(), FactorOptions::with_threads(threads));
    if (auto* failure = std::get_if<NotPositiveDefinite>(&result))
        throw GenerationError("covariance of theta0 is not positive definite (pivot " +
                              std::to_string(failure->global_index) + ")");
    Rng rng(derive_seed(seed, 1));
    std::vector<double> v(shape.size());
    for (double& x : v) x = rng.normal();
    std::vector<double> z = lower_multiply(std::get<CholeskyFactor>(result), v);
    return GeoDataset(shape.locations(), std::move(z), metric);
}

FoldAssignment kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2 || k > n) throw DomainError("kfold_split: need 2 <= k <= n");
    Rng rng(seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, rng);
    FoldAssignment folds{k, std::vector<std::size_t>(n)};
    for (std::size_t pos = 0; pos < n; ++pos) folds.fold_of[order[pos]] = pos % k;
    return folds;
}

namespace {

std::uint32_t spread_bits(std::uint32_t v) {
    v &= 0xFFFF;
    v = (v | (v << 8)) & 0x00FF00FF;
    v = (v | (v << 4)) & 0x0F0F0F0F;
    v = (v | (v << 2)) & 0x33333333;
    v = (v | (v << 1)) & 0x55555555;
    return v;
}

}  // namespace

std::vector<std::size_t> morton_order(std::span<const Location> locations) {
    const std::size_t n = locations.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (n < 2) return order;
    double xmin = locations[0].x, xmax = xmin, ymin = locations[0].y, ymax = ymin;
    for (const auto& l : locations) {
        xmin = std::min(xmin, l.x);
        xmax = std::max(xmax, l.x);
        ymin = std::min(ymin, l.y);
        ymax = std::max(ymax, l.y);
    }
    auto quantize = [](double v, double lo, double hi) -> std::uint32_t {
        if (!(hi > lo)) return 0;
        const double t = (v - lo) / (hi - lo);
        return static_cast<std::uint32_t>(std::min(65535.0, std::floor(t * 65536.0)));
    };
    std::vector<std::uint32_t> keys(n);
    for (std::size_t i = 0; i < n; ++i) {
        keys[i] = spread_bits(quantize(locations[i].x, xmin, xmax)) |
                  (spread_bits(quantize(locations[i].y, ymin, ymax)) << 1);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    return order;
}

GeoDataset morton_sorted(const GeoDataset& dataset) {
    const std::vector<std::size_t> order = morton_order(dataset.locations());
    return dataset.subset(order);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        std::string_view tok = line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos);
        while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
        while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.remove_suffix(1);
        out.push_back(tok);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

double parse_number(std::string_view tok, std::size_t line) {
    double v = 0.0;
    auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc{} || end != tok.data() + tok.size())
        throw ParseError(line, "malformed number '" + std::string(tok) + "'");
    if (!std::isfinite(v)) throw ParseError(line, "non-finite value '" + std::string(tok) + "'");
    return v;
}

}  // namespace

GeoDataset read_dataset(std::istream& in, double radius) {
    std::string raw;
    std::size_t line_no = 0;
    DistanceMetric metric;
    bool have_header = false;
    std::vector<Location> loc;
    std::vector<double> z;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split_fields(line);
        if (!have_header) {
            if (fields.size() == 3 && fields[0] == "x" && fields[1] == "y" && fields[2] == "z") {
                metric = DistanceMetric::euclidean();
            } else if (fields.size() == 3 && fields[0] == "lon" && fields[1] == "lat" && fields[2] == "z") {
                metric = DistanceMetric::great_circle(radius);
            } else {
                throw ParseError(line_no, "expected header 'x,y,z' or 'lon,lat,z'");
            }
            have_header = true;
            continue;
        }
        if (fields.size() != 3)
            throw ParseError(line_no, "expected 3 columns, found " + std::to_string(fields.size()));
        const double a = parse_number(fields[0], line_no);
        const double b = parse_number(fields[1], line_no);
        const double c = parse_number(fields[2], line_no);
        if (metric.is_great_circle() && std::abs(b) > 90.0)
            throw ParseError(line_no, "latitude outside [-90, 90]");
        loc.push_back({a, b});
        z.push_back(c);
    }
    if (!have_header) throw ParseError(line_no == 0 ? 1 : line_no, "empty dataset file");
    if (loc.empty()) throw ParseError(line_no + 1, "dataset has no rows");
    return GeoDataset(std::move(loc), std::move(z), metric);
}

GeoDataset read_dataset(const std::filesystem::path& path, double radius) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_dataset(in, radius);
}

void write_dataset(const GeoDataset& dataset, std::ostream& out) {
    out << (dataset.metric().is_great_circle() ? "lon,lat,z\n" : "x,y,z\n");
    char buf[96];
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& l = dataset.locations()[i];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", l.x, l.y, dataset.z()[i]);
        out << buf;
    }
}

void write_dataset(const GeoDataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_dataset(dataset, out);
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace mixtile
