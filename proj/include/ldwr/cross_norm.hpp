#pragma once

#include <string>
#include <vector>

#include "ldwr/descriptor_model.hpp"

namespace ldwr {

/**
 * Parameters of cross normalization.
 *
 * The spatial branch modulates each standardized descriptor by two scalar
 * affine maps of that position's channel mean (1x1 single-channel
 * convolutions over the mean map). The channel branch is a per-channel
 * standardization with scale `gamma` and shift `beta`. The branches are fused
 * with weights omega1 / (omega1 + omega2) and omega2 / (omega1 + omega2).
 *
 * Empty `gamma` / `beta` mean "all ones" / "all zeros" for any channel count.
 */
struct CrossNormParams {
    double a1 = 0.0;
    double b1 = 1.0;
    double a2 = 0.0;
    double b2 = 0.0;
    std::vector<double> gamma;
    std::vector<double> beta;
    double omega1 = 1.0;
    double omega2 = 1.0;
    double epsilon = 1e-5;

    /// Throws ConfigError naming the broken field.
    void validate(std::size_t channels) const;

    double gamma_at(std::size_t c) const { return gamma.empty() ? 1.0 : gamma[c]; }
    double beta_at(std::size_t c) const { return beta.empty() ? 0.0 : beta[c]; }

    bool operator==(const CrossNormParams&) const = default;
};

enum class NormalizationMode { cross, l2, none };

std::string to_string(NormalizationMode mode);
NormalizationMode parse_normalization_mode(const std::string& text);

/// Mixing coefficients of the fusion step; they sum to one.
struct FusionWeights {
    double spatial;
    double channel;
};
FusionWeights fusion_weights(double omega1, double omega2);

DescriptorSet spatial_normalize(const DescriptorSet& d, const CrossNormParams& p);
DescriptorSet channel_normalize(const DescriptorSet& d, const CrossNormParams& p);
DescriptorSet cross_normalize(const DescriptorSet& d, const CrossNormParams& p);

/// Unit Euclidean norm per descriptor; zero descriptors pass through.
DescriptorSet l2_normalize(const DescriptorSet& d);

DescriptorSet normalize(const DescriptorSet& d, NormalizationMode mode, const CrossNormParams& p);

}  // namespace ldwr
