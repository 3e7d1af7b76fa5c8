#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ldwr/descriptor_model.hpp"
#include "ldwr/prototype.hpp"

/**
 * @file ldwr_filter.hpp
 *
 * Dynamically weighted descriptor filtering.
 *
 * Each descriptor is weighted by the cosine similarity of its neighborhood
 * representation to every class prototype; the class average of those
 * similarities is its weight. Descriptors whose weight falls below
 * mean - stddev (statistics over the whole set being filtered) are dropped,
 * prototypes are recomputed from the survivors, and the process repeats
 * until the weight spread falls below the initial spread divided by
 * `c_stop`. The query set is then filtered once against the final
 * prototypes.
 */

namespace ldwr {

enum class FilterMode {
    averaged,   ///< keep iff class-averaged weight >= threshold
    per_class,  ///< keep iff some class similarity >= threshold
};

/// Which (mean, stddev) the query-side filter thresholds against.
enum class QueryStats { own, support };

std::string to_string(FilterMode mode);
FilterMode parse_filter_mode(const std::string& text);
std::string to_string(QueryStats stats);
QueryStats parse_query_stats(const std::string& text);

struct FilterConfig {
    double c_stop = 2.0;
    std::size_t max_iterations = 10;
    double min_keep_fraction = 0.1;
    FilterMode mode = FilterMode::averaged;

    void validate() const;
    bool operator==(const FilterConfig&) const = default;
};

/// Cosine similarities, classes x descriptors.
struct SimilarityMatrix {
    std::size_t classes = 0;
    std::size_t descriptors = 0;
    std::vector<double> values;

    double at(std::size_t c, std::size_t i) const { return values[c * descriptors + i]; }
};

struct ThresholdStats {
    double mean = 0.0;
    double stddev = 0.0;

    double threshold() const { return mean - stddev; }
};

/// Statistics and kept sets seen at the start of one filtering pass.
struct FilterIteration {
    ThresholdStats stats;
    KeptSets kept;
};

struct FilterResult {
    KeptSets kept;
    /// Class-averaged weight of every descriptor against the final prototypes.
    std::vector<std::vector<double>> weights;
    double mu_bar = 0.0;
    double sigma_bar = 0.0;
    double sigma_bar_0 = 0.0;
    std::size_t iterations = 0;
    std::vector<FilterIteration> trace;
};

SimilarityMatrix descriptor_weights(const DescriptorMatrix& neighborhoods,
                                    std::span<const ClassPrototype> prototypes);

/// Mean over classes, one weight per descriptor.
std::vector<double> aggregate_weights(const SimilarityMatrix& s);

/// Mean and population standard deviation, accumulated in long double.
/// Throws DegenerateStatisticsError for fewer than two values.
ThresholdStats threshold_stats(std::span<const double> weights);

/// Minimum number of descriptors a sample of `total` descriptors retains.
std::size_t keep_floor(std::size_t total, double min_keep_fraction);

/**
 * Filters one sample. `scores` is indexed by descriptor; only `candidates`
 * (ascending) are considered. Candidates scoring >= threshold survive; if
 * fewer than `floor` survive, the `floor` highest-scoring candidates are kept
 * instead (ties to the lower index). Returns ascending indices.
 */
std::vector<std::size_t> filter_sample(std::span<const double> scores,
                                       std::span<const std::size_t> candidates,
                                       double threshold, std::size_t floor);

/// One pass over full samples: weights[m][i] is the weight of descriptor i of sample m.
KeptSets filter_once(std::span<const std::vector<double>> weights, const ThresholdStats& stats,
                     const FilterConfig& cfg);

struct SupportFilterOutcome {
    FilterResult result;
    std::vector<ClassPrototype> prototypes;
};

/// Iterative support-side filtering; `nr_support[m]` are the neighborhood
/// representations of support sample m.
SupportFilterOutcome iterative_filter_support(const Episode& e,
                                              std::span<const DescriptorMatrix> nr_support,
                                              const FilterConfig& cfg);

/// Single-pass query-side filtering against fixed prototypes. Uses the query
/// set's own statistics unless `fixed_stats` is given.
FilterResult filter_query(std::span<const DescriptorMatrix> query_nr,
                          std::span<const ClassPrototype> prototypes, const FilterConfig& cfg,
                          std::optional<ThresholdStats> fixed_stats = std::nullopt);

}  // namespace ldwr
