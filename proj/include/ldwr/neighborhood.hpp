#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ldwr/descriptor_model.hpp"

namespace ldwr {

struct NeighborhoodConfig {
    std::size_t k_neighbors = 10;
    bool include_self = false;

    bool operator==(const NeighborhoodConfig&) const = default;
};

/// Cosine similarity clamped to [-1, 1]; 0 when either vector is zero.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

/**
 * Descriptors pre-scaled to unit length (in double precision) so that cosine
 * similarity reduces to a dot product. Zero descriptors stay zero and thus
 * score 0 against everything.
 */
class UnitVectors {
public:
    UnitVectors() = default;
    explicit UnitVectors(const DescriptorMatrix& descriptors);

    std::size_t size() const noexcept { return count_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> row(std::size_t i) const { return {units_.data() + i * dim_, dim_}; }

    /// out[j] = cos(query, row j); `query` must already be unit (or zero).
    void similarities(std::span<const double> query, std::span<double> out) const;

private:
    std::size_t dim_ = 0;
    std::size_t count_ = 0;
    std::vector<double> units_;
};

/// Positions of the k largest entries of `scores`, in descending score order
/// with ties broken by ascending index. `exclude` is never selected.
std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k,
                                       std::optional<std::size_t> exclude = std::nullopt);

/**
 * The k pool entries most cosine-similar to `q`. When `cfg.include_self` is
 * false and `self_index` names q's own slot in the pool, that slot is skipped.
 * Throws ConfigError when fewer than k candidates remain.
 */
std::vector<std::size_t> knn_indices(std::span<const float> q, const DescriptorMatrix& pool,
                                     const NeighborhoodConfig& cfg,
                                     std::optional<std::size_t> self_index = std::nullopt);

/// Per descriptor, the mean of its k nearest peers within the same pool.
DescriptorMatrix neighborhood_representation(const DescriptorMatrix& descriptors,
                                             const NeighborhoodConfig& cfg);

/// Neighbor index lists behind neighborhood_representation, one per descriptor.
std::vector<std::vector<std::size_t>> neighborhood_indices(const DescriptorMatrix& descriptors,
                                                           const NeighborhoodConfig& cfg);

}  // namespace ldwr
