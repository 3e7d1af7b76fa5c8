#include "ldwr/neighborhood.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ldwr {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += a[c] * b[c];
    return s;
}

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

/// Divides in long double and rounds once, so collinear descriptors map to
/// the same unit vector and tie exactly.
void to_unit(std::span<const float> x, std::span<double> out) {
    long double sq = 0.0L;
    for (float v : x) sq += static_cast<long double>(v) * v;
    if (sq == 0.0L) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    const long double norm = std::sqrt(sq);
    for (std::size_t c = 0; c < x.size(); ++c) out[c] = static_cast<double>(x[c] / norm);
}

void require_pool(std::size_t available, std::size_t k) {
    if (k == 0) throw ConfigError("neighbor count k must be at least 1");
    if (available < k) {
        throw ConfigError("k-NN needs " + std::to_string(k) + " candidate descriptors, only " +
                          std::to_string(available) + " available");
    }
}

}  // namespace

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        ab += static_cast<double>(a[c]) * b[c];
        aa += static_cast<double>(a[c]) * a[c];
        bb += static_cast<double>(b[c]) * b[c];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return clamp_unit(ab / (std::sqrt(aa) * std::sqrt(bb)));
}

UnitVectors::UnitVectors(const DescriptorMatrix& descriptors)
    : dim_(descriptors.dim()), count_(descriptors.size()), units_(dim_ * count_) {
    for (std::size_t i = 0; i < count_; ++i) {
        to_unit(descriptors.row(i), {units_.data() + i * dim_, dim_});
    }
}

void UnitVectors::similarities(std::span<const double> query, std::span<double> out) const {
    for (std::size_t j = 0; j < count_; ++j) out[j] = clamp_unit(dot(query, row(j)));
}

std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k,
                                       std::optional<std::size_t> exclude) {
    std::vector<std::size_t> order;
    order.reserve(scores.size());
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (j != exclude) order.push_back(j);
    }
    k = std::min(k, order.size());
    auto better = [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      better);
    order.resize(k);
    return order;
}

std::vector<std::size_t> knn_indices(std::span<const float> q, const DescriptorMatrix& pool,
                                     const NeighborhoodConfig& cfg,
                                     std::optional<std::size_t> self_index) {
    const bool skip_self = !cfg.include_self && self_index.has_value() && *self_index < pool.size();
    require_pool(pool.size() - (skip_self ? 1 : 0), cfg.k_neighbors);

    const UnitVectors units(pool);
    std::vector<double> q_unit(q.size());
    to_unit(q, q_unit);
    std::vector<double> sims(pool.size());
    units.similarities(q_unit, sims);
    return top_k_indices(sims, cfg.k_neighbors,
                         skip_self ? self_index : std::optional<std::size_t>{});
}

std::vector<std::vector<std::size_t>> neighborhood_indices(const DescriptorMatrix& descriptors,
                                                           const NeighborhoodConfig& cfg) {
    const std::size_t n = descriptors.size();
    require_pool(cfg.include_self ? n : (n == 0 ? 0 : n - 1), cfg.k_neighbors);

    // Symmetric similarity matrix, upper triangle computed once.
    const UnitVectors units(descriptors);
    std::vector<double> gram(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        auto ui = units.row(i);
        for (std::size_t j = i; j < n; ++j) {
            const double s = clamp_unit(dot(ui, units.row(j)));
            gram[i * n + j] = s;
            gram[j * n + i] = s;
        }
    }

    std::vector<std::vector<std::size_t>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::span<const double> row(gram.data() + i * n, n);
        out[i] = top_k_indices(row, cfg.k_neighbors,
                               cfg.include_self ? std::optional<std::size_t>{} : i);
    }
    return out;
}

DescriptorMatrix neighborhood_representation(const DescriptorMatrix& descriptors,
                                             const NeighborhoodConfig& cfg) {
    const auto neighbors = neighborhood_indices(descriptors, cfg);
    const std::size_t dim = descriptors.dim();
    DescriptorMatrix out(dim, descriptors.size());
    std::vector<double> acc(dim);
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t j : neighbors[i]) {
            auto x = descriptors.row(j);
            for (std::size_t c = 0; c < dim; ++c) acc[c] += x[c];
        }
        const double inv_k = 1.0 / static_cast<double>(neighbors[i].size());
        auto y = out.row(i);
        for (std::size_t c = 0; c < dim; ++c) y[c] = static_cast<float>(acc[c] * inv_k);
    }
    return out;
}

}  // namespace ldwr
