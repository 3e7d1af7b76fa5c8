#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ldwr/errors.hpp"

/**
 * @file descriptor_model.hpp
 *
 * Core value types: descriptor matrices, per-image descriptor sets, labeled
 * samples and N-way K-shot episodes.
 *
 * Storage is descriptor-major: the C values of one local descriptor are
 * contiguous, and descriptors follow row-major spatial order, so the
 * descriptor at spatial position (h, w) is number h * W + w.
 */

namespace ldwr {

using Vector = std::vector<float>;

/// A list of equal-length descriptor vectors stored contiguously.
class DescriptorMatrix {
public:
    DescriptorMatrix() = default;
    explicit DescriptorMatrix(std::size_t dim, std::size_t count = 0);
    DescriptorMatrix(std::size_t dim, std::vector<float> values);

    static DescriptorMatrix from_rows(const std::vector<Vector>& rows);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return dim_ == 0 ? 0 : values_.size() / dim_; }
    bool empty() const noexcept { return values_.empty(); }

    std::span<const float> row(std::size_t i) const {
        return {values_.data() + i * dim_, dim_};
    }
    std::span<float> row(std::size_t i) { return {values_.data() + i * dim_, dim_}; }

    void append(std::span<const float> v);

    std::span<const float> values() const noexcept { return values_; }
    std::span<float> values() noexcept { return values_; }

    std::vector<Vector> rows() const;

    bool operator==(const DescriptorMatrix&) const = default;

private:
    std::size_t dim_ = 0;
    std::vector<float> values_;
};

/// One image's local descriptors: a C x N matrix with N = H * W.
class DescriptorSet {
public:
    DescriptorSet() = default;

    /// `descriptors` holds N rows of dimension C in row-major spatial order.
    DescriptorSet(std::size_t channels, std::size_t height, std::size_t width,
                  DescriptorMatrix descriptors);

    /// Builds from a C x H x W channel-major buffer (the on-disk layout).
    static DescriptorSet from_channel_major(std::size_t channels, std::size_t height,
                                            std::size_t width, std::span<const float> chw);

    std::size_t channels() const noexcept { return channels_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t count() const noexcept { return height_ * width_; }

    std::span<const float> descriptor(std::size_t i) const { return descriptors_.row(i); }
    float at(std::size_t channel, std::size_t position) const {
        return descriptors_.row(position)[channel];
    }
    const DescriptorMatrix& matrix() const noexcept { return descriptors_; }

    /// C x H x W channel-major copy of the data.
    std::vector<float> to_channel_major() const;

    bool same_shape(const DescriptorSet& other) const noexcept {
        return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
    }

    bool operator==(const DescriptorSet&) const = default;

private:
    std::size_t channels_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    DescriptorMatrix descriptors_;
};

/// Columns of the C x N matrix in spatial order.
std::vector<Vector> flatten(const DescriptorSet& d);

DescriptorSet unflatten(std::size_t channels, std::size_t height, std::size_t width,
                        const std::vector<Vector>& descriptors);

struct LabeledSample {
    DescriptorSet descriptors;
    std::string label;
    std::uint64_t sample_id = 0;

    bool operator==(const LabeledSample&) const = default;
};

/// An N-way K-shot task. Support samples are grouped by class: episode-local
/// class i owns support[i * k_shot, (i + 1) * k_shot), and class_labels[i] is
/// its dataset label.
struct Episode {
    std::size_t n_way = 0;
    std::size_t k_shot = 0;
    std::vector<std::string> class_labels;
    std::vector<LabeledSample> support;
    std::vector<LabeledSample> query;

    /// Episode-local index of a label, or n_way when absent.
    std::size_t class_index(const std::string& label) const;

    std::size_t support_class(std::size_t support_pos) const { return support_pos / k_shot; }

    bool operator==(const Episode&) const = default;
};

struct EpisodeValidation {
    bool ok = true;
    std::string invariant;  // empty when ok
    std::string detail;
};

/// Checks every Episode invariant and reports the first one violated.
/// Invariant names: "n_way", "k_shot", "class count", "shots per class",
/// "empty query", "query label", "shape", "disjoint".
EpisodeValidation validate_episode(const Episode& e);

}  // namespace ldwr
