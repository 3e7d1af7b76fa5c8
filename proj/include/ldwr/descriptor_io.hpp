#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ldwr/cross_norm.hpp"
#include "ldwr/episode_engine.hpp"

/**
 * @file descriptor_io.hpp
 *
 * Binary descriptor files (byte layout in FORMAT.md) and the small
 * `key = value` text documents used for cross-norm parameters and synthetic
 * generator specs.
 */

namespace ldwr {

inline constexpr char kDescriptorMagic[4] = {'L', 'D', 'W', 'R'};
inline constexpr std::uint32_t kDescriptorFormatVersion = 1;
inline constexpr std::size_t kDescriptorHeaderBytes = 32;
inline constexpr std::size_t kRecordHeaderBytes = 12;

/// Canonical file bytes for a dataset. Throws ConfigError for invalid datasets.
std::vector<std::uint8_t> encode_dataset(const DescriptorDataset& ds);

/// Parses and fully validates file bytes. Throws ParseError with the offending offset.
DescriptorDataset decode_dataset(const std::vector<std::uint8_t>& bytes, std::string source = {});

DescriptorDataset read_dataset(const std::filesystem::path& path);
void write_dataset(const DescriptorDataset& ds, const std::filesystem::path& path);

/// Ordered `key = value` pairs; '#' starts a comment.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

double parse_real(const std::string& text, const std::string& key);
std::uint64_t parse_unsigned(const std::string& text, const std::string& key);
/// Whitespace- or comma-separated reals, optionally wrapped in [ ].
std::vector<double> parse_real_list(const std::string& text, const std::string& key);

/// Keys a1, b1, a2, b2, gamma, beta, omega1, omega2, epsilon; missing keys keep defaults.
CrossNormParams parse_cn_params(const std::string& text);
CrossNormParams load_cn_params(const std::filesystem::path& path);
std::string format_cn_params(const CrossNormParams& p);

/// Keys n_classes, samples_per_class, channels, height, width,
/// foreground_fraction, signal_to_noise, class_overlap, background_modes,
/// background_strength, seed; missing keys keep defaults.
SyntheticSpec parse_synthetic_spec(const std::string& text);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);
std::string format_synthetic_spec(const SyntheticSpec& s);

}  // namespace ldwr
