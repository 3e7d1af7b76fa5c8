#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ldwr/descriptor_model.hpp"

namespace ldwr {

/// Labeled descriptor sets with a shared shape and a class table.
struct DescriptorDataset {
    std::vector<std::string> classes;
    std::vector<LabeledSample> samples;
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::string source;

    /// Throws ConfigError on unknown labels, mixed shapes or an empty class table.
    void validate() const;

    /// Sample positions per class, in class-table order.
    std::vector<std::vector<std::size_t>> samples_by_class() const;

    bool operator==(const DescriptorDataset&) const = default;
};

/**
 * Draws an episode: n_way classes uniformly without replacement among the
 * classes that have at least k_shot + n_query_per_class samples, then k_shot
 * support and n_query_per_class query samples per class, disjoint.
 * Deterministic in `seed`.
 */
Episode sample_episode(const DescriptorDataset& ds, std::size_t n_way, std::size_t k_shot,
                       std::size_t n_query_per_class, std::uint64_t seed);

/// Parameters of the planted-background generator.
struct SyntheticSpec {
    std::size_t n_classes = 20;
    std::size_t samples_per_class = 20;
    std::size_t channels = 32;
    std::size_t height = 6;
    std::size_t width = 6;
    /// Fraction of positions per image carrying the class direction.
    double foreground_fraction = 0.5;
    /// Magnitude of the class direction against unit-variance noise.
    double signal_to_noise = 4.0;
    /// Squared weight of a direction shared by every class's foreground
    /// (fine-grained categories); 0 gives independent class directions.
    double class_overlap = 0.6;
    /// Number of background directions shared by every class; each image
    /// draws one of them.
    std::size_t background_modes = 8;
    /// Magnitude of the background direction against unit-variance noise.
    double background_strength = 3.0;
    std::uint64_t seed = 7;

    void validate() const;

    bool operator==(const SyntheticSpec&) const = default;
};

struct SyntheticDataset {
    DescriptorDataset dataset;
    /// masks[s][i] is 1 when descriptor i of sample s is foreground.
    std::vector<std::vector<std::uint8_t>> masks;
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace ldwr
