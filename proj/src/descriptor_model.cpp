#include "ldwr/descriptor_model.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace ldwr {

DescriptorMatrix::DescriptorMatrix(std::size_t dim, std::size_t count)
    : dim_(dim), values_(dim * count, 0.0f) {}

DescriptorMatrix::DescriptorMatrix(std::size_t dim, std::vector<float> values)
    : dim_(dim), values_(std::move(values)) {
    if (dim_ == 0 ? !values_.empty() : values_.size() % dim_ != 0) {
        throw ConfigError("descriptor buffer of " + std::to_string(values_.size()) +
                          " values is not a multiple of dimension " + std::to_string(dim_));
    }
}

DescriptorMatrix DescriptorMatrix::from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) return {};
    DescriptorMatrix m(rows.front().size());
    m.values_.reserve(rows.size() * m.dim_);
    for (const auto& r : rows) m.append(r);
    return m;
}

void DescriptorMatrix::append(std::span<const float> v) {
    if (dim_ == 0 && values_.empty()) dim_ = v.size();
    if (v.size() != dim_) {
        throw ConfigError("descriptor of dimension " + std::to_string(v.size()) +
                          " appended to matrix of dimension " + std::to_string(dim_));
    }
    values_.insert(values_.end(), v.begin(), v.end());
}

std::vector<Vector> DescriptorMatrix::rows() const {
    std::vector<Vector> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
        auto r = row(i);
        out.emplace_back(r.begin(), r.end());
    }
    return out;
}

DescriptorSet::DescriptorSet(std::size_t channels, std::size_t height, std::size_t width,
                             DescriptorMatrix descriptors)
    : channels_(channels), height_(height), width_(width), descriptors_(std::move(descriptors)) {
    if (channels_ == 0 || height_ == 0 || width_ == 0) {
        throw ConfigError("descriptor set dimensions must be positive");
    }
    if (descriptors_.dim() != channels_ || descriptors_.size() != height_ * width_) {
        throw ConfigError("descriptor set expects " + std::to_string(height_ * width_) +
                          " descriptors of dimension " + std::to_string(channels_) + ", got " +
                          std::to_string(descriptors_.size()) + " of dimension " +
                          std::to_string(descriptors_.dim()));
    }
    const auto vals = descriptors_.values();
    if (!std::all_of(vals.begin(), vals.end(), [](float v) { return std::isfinite(v); })) {
        throw ConfigError("descriptor set contains non-finite values");
    }
}

DescriptorSet DescriptorSet::from_channel_major(std::size_t channels, std::size_t height,
                                                std::size_t width, std::span<const float> chw) {
    const std::size_t n = height * width;
    if (chw.size() != channels * n) {
        throw ConfigError("channel-major buffer has " + std::to_string(chw.size()) +
                          " values, expected " + std::to_string(channels * n));
    }
    DescriptorMatrix m(channels, n);
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < n; ++i) m.row(i)[c] = chw[c * n + i];
    }
    return DescriptorSet(channels, height, width, std::move(m));
}

std::vector<float> DescriptorSet::to_channel_major() const {
    const std::size_t n = count();
    std::vector<float> out(channels_ * n);
    for (std::size_t i = 0; i < n; ++i) {
        auto d = descriptor(i);
        for (std::size_t c = 0; c < channels_; ++c) out[c * n + i] = d[c];
    }
    return out;
}

std::vector<Vector> flatten(const DescriptorSet& d) { return d.matrix().rows(); }

DescriptorSet unflatten(std::size_t channels, std::size_t height, std::size_t width,
                        const std::vector<Vector>& descriptors) {
    return DescriptorSet(channels, height, width, DescriptorMatrix::from_rows(descriptors));
}

std::size_t Episode::class_index(const std::string& label) const {
    auto it = std::find(class_labels.begin(), class_labels.end(), label);
    return static_cast<std::size_t>(it - class_labels.begin());
}

namespace {

EpisodeValidation violation(std::string invariant, std::string detail) {
    return {false, std::move(invariant), std::move(detail)};
}

}  // namespace

EpisodeValidation validate_episode(const Episode& e) {
    if (e.n_way == 0) return violation("n_way", "n_way must be positive");
    if (e.k_shot == 0) return violation("k_shot", "k_shot must be positive");

    std::unordered_set<std::string> distinct(e.class_labels.begin(), e.class_labels.end());
    if (e.class_labels.size() != e.n_way || distinct.size() != e.n_way) {
        return violation("class count", "expected " + std::to_string(e.n_way) +
                                            " distinct classes, found " +
                                            std::to_string(distinct.size()));
    }
    if (e.support.size() != e.n_way * e.k_shot) {
        return violation("shots per class", "expected " + std::to_string(e.n_way * e.k_shot) +
                                                " support samples, found " +
                                                std::to_string(e.support.size()));
    }
    for (std::size_t i = 0; i < e.support.size(); ++i) {
        const auto& expected = e.class_labels[e.support_class(i)];
        if (e.support[i].label != expected) {
            return violation("shots per class", "support sample " + std::to_string(i) +
                                                    " has label '" + e.support[i].label +
                                                    "', expected '" + expected + "'");
        }
    }
    if (e.query.empty()) return violation("empty query", "query set is empty");
    for (std::size_t i = 0; i < e.query.size(); ++i) {
        if (!distinct.contains(e.query[i].label)) {
            return violation("query label", "query sample " + std::to_string(i) + " has label '" +
                                                e.query[i].label + "' outside the support classes");
        }
    }

    const DescriptorSet& ref = e.support.front().descriptors;
    auto check_shape = [&](const LabeledSample& s) { return s.descriptors.same_shape(ref); };
    if (!std::all_of(e.support.begin(), e.support.end(), check_shape) ||
        !std::all_of(e.query.begin(), e.query.end(), check_shape)) {
        return violation("shape", "descriptor sets differ in C, H or W");
    }

    std::unordered_set<std::uint64_t> ids;
    for (const auto& s : e.support) ids.insert(s.sample_id);
    for (const auto& q : e.query) {
        if (ids.contains(q.sample_id)) {
            return violation("disjoint",
                             "sample " + std::to_string(q.sample_id) + " is in support and query");
        }
    }
    return {};
}

}  // namespace ldwr
