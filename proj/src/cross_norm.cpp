#include "ldwr/cross_norm.hpp"

#include <cmath>

namespace ldwr {

void CrossNormParams::validate(std::size_t channels) const {
    if (!(omega1 > 0.0) || !(omega2 > 0.0)) {
        throw ConfigError("cross-norm fusion weights omega1, omega2 must be positive");
    }
    if (!(epsilon > 0.0)) throw ConfigError("cross-norm epsilon must be positive");
    if (!gamma.empty() && gamma.size() != channels) {
        throw ConfigError("cross-norm gamma has " + std::to_string(gamma.size()) +
                          " entries for " + std::to_string(channels) + " channels");
    }
    if (!beta.empty() && beta.size() != channels) {
        throw ConfigError("cross-norm beta has " + std::to_string(beta.size()) + " entries for " +
                          std::to_string(channels) + " channels");
    }
}

std::string to_string(NormalizationMode mode) {
    switch (mode) {
        case NormalizationMode::cross: return "cn";
        case NormalizationMode::l2: return "l2";
        case NormalizationMode::none: return "none";
    }
    return "none";
}

NormalizationMode parse_normalization_mode(const std::string& text) {
    if (text == "cn") return NormalizationMode::cross;
    if (text == "l2") return NormalizationMode::l2;
    if (text == "none") return NormalizationMode::none;
    throw ConfigError("unknown normalization mode '" + text + "' (expected cn, l2 or none)");
}

FusionWeights fusion_weights(double omega1, double omega2) {
    const double spatial = omega1 / (omega1 + omega2);
    return {spatial, 1.0 - spatial};
}

DescriptorSet spatial_normalize(const DescriptorSet& d, const CrossNormParams& p) {
    p.validate(d.channels());
    const std::size_t channels = d.channels();
    DescriptorMatrix out(channels, d.count());
    for (std::size_t n = 0; n < d.count(); ++n) {
        auto x = d.descriptor(n);
        double mean = 0.0;
        for (float v : x) mean += v;
        mean /= static_cast<double>(channels);
        double var = 0.0;
        for (float v : x) var += (v - mean) * (v - mean);
        var /= static_cast<double>(channels);

        const double inv_std = 1.0 / std::sqrt(var + p.epsilon);
        const double scale = p.a1 * mean + p.b1;
        const double shift = p.a2 * mean + p.b2;
        auto y = out.row(n);
        for (std::size_t c = 0; c < channels; ++c) {
            y[c] = static_cast<float>((x[c] - mean) * inv_std * scale + shift);
        }
    }
    return DescriptorSet(channels, d.height(), d.width(), std::move(out));
}

DescriptorSet channel_normalize(const DescriptorSet& d, const CrossNormParams& p) {
    p.validate(d.channels());
    const std::size_t channels = d.channels();
    const std::size_t n = d.count();

    std::vector<double> mean(channels, 0.0);
    std::vector<double> var(channels, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = d.descriptor(i);
        for (std::size_t c = 0; c < channels; ++c) mean[c] += x[c];
    }
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = d.descriptor(i);
        for (std::size_t c = 0; c < channels; ++c) var[c] += (x[c] - mean[c]) * (x[c] - mean[c]);
    }

    std::vector<double> scale(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        scale[c] = p.gamma_at(c) / std::sqrt(var[c] / static_cast<double>(n) + p.epsilon);
    }

    DescriptorMatrix out(channels, n);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = d.descriptor(i);
        auto y = out.row(i);
        for (std::size_t c = 0; c < channels; ++c) {
            y[c] = static_cast<float>((x[c] - mean[c]) * scale[c] + p.beta_at(c));
        }
    }
    return DescriptorSet(channels, d.height(), d.width(), std::move(out));
}

DescriptorSet cross_normalize(const DescriptorSet& d, const CrossNormParams& p) {
    const DescriptorSet xs = spatial_normalize(d, p);
    const DescriptorSet xc = channel_normalize(d, p);
    const FusionWeights w = fusion_weights(p.omega1, p.omega2);

    DescriptorMatrix out(d.channels(), d.count());
    auto s = xs.matrix().values();
    auto c = xc.matrix().values();
    auto y = out.values();
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = static_cast<float>(w.spatial * s[i] + w.channel * c[i]);
    }
    return DescriptorSet(d.channels(), d.height(), d.width(), std::move(out));
}

DescriptorSet l2_normalize(const DescriptorSet& d) {
    DescriptorMatrix out = d.matrix();
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto x = out.row(i);
        double sq = 0.0;
        for (float v : x) sq += static_cast<double>(v) * v;
        if (sq == 0.0) continue;
        const double inv = 1.0 / std::sqrt(sq);
        for (float& v : x) v = static_cast<float>(v * inv);
    }
    return DescriptorSet(d.channels(), d.height(), d.width(), std::move(out));
}

DescriptorSet normalize(const DescriptorSet& d, NormalizationMode mode, const CrossNormParams& p) {
    switch (mode) {
        case NormalizationMode::cross: return cross_normalize(d, p);
        case NormalizationMode::l2: return l2_normalize(d);
        case NormalizationMode::none: return d;
    }
    return d;
}

}  // namespace ldwr
