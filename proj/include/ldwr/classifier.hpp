#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ldwr/descriptor_model.hpp"
#include "ldwr/neighborhood.hpp"

namespace ldwr {

struct ClassifierConfig {
    /// Neighbors per query descriptor; clamps to the class pool size.
    std::size_t k_bar = 3;

    bool operator==(const ClassifierConfig&) const = default;
};

struct ClassScores {
    std::vector<double> scores;
    std::vector<double> probabilities;
    std::size_t predicted = 0;
};

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> scores);

/// Index of the largest value, lowest index on ties.
std::size_t argmax(std::span<const double> values);

/**
 * Image-to-class similarity: for each query descriptor, the sum of cosine
 * similarities to its min(k_bar, |pool|) nearest pool descriptors, summed
 * over the query descriptors.
 */
double image_to_class_score(const DescriptorMatrix& query_kept, const DescriptorMatrix& class_pool,
                            const ClassifierConfig& cfg);
double image_to_class_score(const UnitVectors& query_kept, const UnitVectors& class_pool,
                            const ClassifierConfig& cfg);

ClassScores classify(const DescriptorMatrix& query_kept,
                     std::span<const DescriptorMatrix> class_pools, const ClassifierConfig& cfg);
ClassScores classify(const UnitVectors& query_kept, std::span<const UnitVectors> class_pools,
                     const ClassifierConfig& cfg);

}  // namespace ldwr
