#include "ldwr/episode_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <unordered_map>

namespace ldwr {

void DescriptorDataset::validate() const {
    if (classes.empty()) throw ConfigError("dataset has an empty class table");
    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& c : classes) {
        if (!seen.emplace(c, seen.size()).second) {
            throw ConfigError("dataset class table repeats '" + c + "'");
        }
    }
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto& d = samples[s].descriptors;
        if (!seen.contains(samples[s].label)) {
            throw ConfigError("sample " + std::to_string(s) + " has unknown label '" +
                              samples[s].label + "'");
        }
        if (d.channels() != channels || d.height() != height || d.width() != width) {
            throw ConfigError("sample " + std::to_string(s) + " shape differs from dataset shape");
        }
    }
}

std::vector<std::vector<std::size_t>> DescriptorDataset::samples_by_class() const {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t c = 0; c < classes.size(); ++c) index.emplace(classes[c], c);
    std::vector<std::vector<std::size_t>> out(classes.size());
    for (std::size_t s = 0; s < samples.size(); ++s) out.at(index.at(samples[s].label)).push_back(s);
    return out;
}

Episode sample_episode(const DescriptorDataset& ds, std::size_t n_way, std::size_t k_shot,
                       std::size_t n_query_per_class, std::uint64_t seed) {
    if (n_way == 0 || k_shot == 0 || n_query_per_class == 0) {
        throw ConfigError("n_way, k_shot and n_query must all be positive");
    }
    const auto by_class = ds.samples_by_class();
    const std::size_t need = k_shot + n_query_per_class;
    std::vector<std::size_t> eligible;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (by_class[c].size() >= need) eligible.push_back(c);
    }
    if (eligible.size() < n_way) {
        throw ConfigError("episode needs " + std::to_string(n_way) + " classes with at least " +
                          std::to_string(need) + " samples each; dataset has " +
                          std::to_string(eligible.size()) + " such classes out of " +
                          std::to_string(by_class.size()));
    }

    std::mt19937_64 rng(seed);
    std::shuffle(eligible.begin(), eligible.end(), rng);
    eligible.resize(n_way);

    Episode e;
    e.n_way = n_way;
    e.k_shot = k_shot;
    for (std::size_t c : eligible) {
        std::vector<std::size_t> members = by_class[c];
        std::shuffle(members.begin(), members.end(), rng);
        e.class_labels.push_back(ds.classes[c]);
        for (std::size_t j = 0; j < k_shot; ++j) e.support.push_back(ds.samples[members[j]]);
        for (std::size_t j = k_shot; j < need; ++j) e.query.push_back(ds.samples[members[j]]);
    }
    return e;
}

void SyntheticSpec::validate() const {
    if (n_classes == 0 || samples_per_class == 0 || channels == 0 || height == 0 || width == 0) {
        throw ConfigError("synthetic sizes must be positive");
    }
    if (!(foreground_fraction > 0.0 && foreground_fraction <= 1.0)) {
        throw ConfigError("synthetic foreground_fraction must lie in (0, 1]");
    }
    if (!(signal_to_noise >= 0.0) || !(background_strength >= 0.0)) {
        throw ConfigError("synthetic signal_to_noise and background_strength must be nonnegative");
    }
    if (!(class_overlap >= 0.0 && class_overlap < 1.0)) {
        throw ConfigError("synthetic class_overlap must lie in [0, 1)");
    }
    if (background_modes == 0 && foreground_fraction < 1.0) {
        throw ConfigError("synthetic background_modes must be positive when background exists");
    }
}

namespace {

std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    double sq = 0.0;
    do {
        sq = 0.0;
        for (auto& x : v) {
            x = normal(rng);
            sq += x * x;
        }
    } while (sq == 0.0);
    for (auto& x : v) x /= std::sqrt(sq);
    return v;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    const std::vector<double> shared = random_unit(spec.channels, rng);
    std::vector<std::vector<double>> class_dirs;
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        std::vector<double> dir = random_unit(spec.channels, rng);
        double sq = 0.0;
        for (std::size_t k = 0; k < dir.size(); ++k) {
            dir[k] = std::sqrt(spec.class_overlap) * shared[k] + std::sqrt(1.0 - spec.class_overlap) * dir[k];
            sq += dir[k] * dir[k];
        }
        for (auto& x : dir) x /= std::sqrt(sq);
        class_dirs.push_back(std::move(dir));
    }
    std::vector<std::vector<double>> background_dirs;
    for (std::size_t b = 0; b < spec.background_modes; ++b) {
        background_dirs.push_back(random_unit(spec.channels, rng));
    }

    const std::size_t n = spec.height * spec.width;
    const auto fg_count = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(spec.foreground_fraction * static_cast<double>(n))),
        1, n);

    SyntheticDataset out;
    DescriptorDataset& ds = out.dataset;
    ds.channels = spec.channels;
    ds.height = spec.height;
    ds.width = spec.width;
    ds.source = "synthetic";
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        char name[32];
        std::snprintf(name, sizeof name, "class_%03zu", c);
        ds.classes.emplace_back(name);
    }

    std::vector<std::size_t> positions(n);
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            std::iota(positions.begin(), positions.end(), std::size_t{0});
            std::shuffle(positions.begin(), positions.end(), rng);
            std::vector<std::uint8_t> mask(n, 0);
            for (std::size_t j = 0; j < fg_count; ++j) mask[positions[j]] = 1;

            const std::vector<double>* background = nullptr;
            if (!background_dirs.empty()) {
                std::uniform_int_distribution<std::size_t> pick(0, background_dirs.size() - 1);
                background = &background_dirs[pick(rng)];
            }

            DescriptorMatrix m(spec.channels, n);
            for (std::size_t i = 0; i < n; ++i) {
                const bool fg = mask[i] != 0;
                const auto& dir = fg ? class_dirs[c] : *background;
                const double magnitude = fg ? spec.signal_to_noise : spec.background_strength;
                auto row = m.row(i);
                for (std::size_t k = 0; k < spec.channels; ++k) {
                    row[k] = static_cast<float>(magnitude * dir[k] + noise(rng));
                }
            }
            const std::uint64_t id = ds.samples.size();
            ds.samples.push_back({DescriptorSet(spec.channels, spec.height, spec.width, std::move(m)),
                                  ds.classes[c], id});
            out.masks.push_back(std::move(mask));
        }
    }
    return out;
}

}  // namespace ldwr
