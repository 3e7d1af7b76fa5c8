#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ldwr/classifier.hpp"
#include "ldwr/cross_norm.hpp"
#include "ldwr/descriptor_model.hpp"
#include "ldwr/episode_engine.hpp"
#include "ldwr/ldwr_filter.hpp"
#include "ldwr/neighborhood.hpp"

namespace ldwr {

/// Every toggle of the per-episode pipeline.
struct PipelineConfig {
    NormalizationMode normalization = NormalizationMode::cross;
    CrossNormParams cross_norm;
    bool use_neighborhood = true;
    NeighborhoodConfig neighborhood;
    bool use_filter = true;
    FilterConfig filter;
    QueryStats query_stats = QueryStats::own;
    ClassifierConfig classifier;

    bool operator==(const PipelineConfig&) const = default;
};

struct EpisodeSpec {
    std::size_t n_way = 5;
    std::size_t k_shot = 1;
    std::size_t n_query = 15;
    std::size_t episodes = 600;
    std::uint64_t seed = 42;

    bool operator==(const EpisodeSpec&) const = default;
};

/// Exactly one of the two is set.
struct DataSource {
    std::optional<std::string> data_path;
    std::optional<SyntheticSpec> synthetic;

    bool operator==(const DataSource&) const = default;
};

struct RunConfig {
    PipelineConfig pipeline;
    EpisodeSpec episodes;
    DataSource source;

    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

/// How a run executes; never affects results.
struct ExecutionOptions {
    std::size_t threads = 1;
    bool record_timing = false;
};

/// Foreground masks indexed by sample_id; empty when unknown.
using MaskTable = std::vector<std::vector<std::uint8_t>>;

/// Everything the pipeline computed for one episode.
struct EpisodeOutcome {
    Episode normalized;
    std::vector<DescriptorMatrix> support_nr;
    std::vector<DescriptorMatrix> query_nr;
    KeptSets support_kept;
    KeptSets query_kept;
    std::optional<FilterResult> support_filter;
    std::optional<FilterResult> query_filter;
    std::vector<ClassPrototype> prototypes;
    std::vector<DescriptorMatrix> class_pools;
    std::vector<ClassScores> query_scores;
    std::vector<std::size_t> query_truth;
};

/// Normalize, build neighborhoods, filter support then query, classify.
EpisodeOutcome run_pipeline(const Episode& e, const PipelineConfig& cfg);

struct QueryOutcome {
    std::size_t truth = 0;
    std::size_t predicted = 0;
    std::size_t kept = 0;
    std::vector<double> scores;
    std::vector<double> probabilities;

    bool operator==(const QueryOutcome&) const = default;
};

struct FilterDiagnostics {
    std::size_t iterations = 0;
    double mu_bar = 0.0;
    double sigma_bar = 0.0;
    double sigma_bar_0 = 0.0;
    double kept_fraction = 0.0;

    bool operator==(const FilterDiagnostics&) const = default;
};

/// Filter agreement with ground-truth foreground masks.
struct MaskAgreement {
    /// Share of background descriptors removed; empty when there is no background.
    std::optional<double> background_recall;
    /// Share of foreground descriptors kept; empty when there is no foreground.
    std::optional<double> foreground_retention;

    bool operator==(const MaskAgreement&) const = default;
};

struct EpisodeReport {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    std::vector<QueryOutcome> queries;
    std::optional<FilterDiagnostics> support_filter;
    std::optional<FilterDiagnostics> query_filter;
    std::optional<MaskAgreement> support_masks;
    std::optional<MaskAgreement> query_masks;

    bool operator==(const EpisodeReport&) const = default;
};

struct RunReport {
    RunConfig config;
    std::vector<EpisodeReport> episodes;
    double mean_accuracy = 0.0;
    /// 1.96 * sample stddev of per-episode accuracy / sqrt(episodes).
    double ci95 = 0.0;
    /// Episode means of the mask agreement fields; empty without masks.
    std::optional<MaskAgreement> support_masks;
    std::optional<MaskAgreement> query_masks;
    std::optional<double> wall_seconds;

    bool operator==(const RunReport&) const = default;
};

EpisodeReport report_episode(const EpisodeOutcome& outcome, const MaskTable* masks);

/// Seed of episode `index`, derived from the run seed.
std::uint64_t episode_seed(std::uint64_t run_seed, std::size_t index);

/// Runs against an already-loaded dataset.
RunReport run(const RunConfig& cfg, const DescriptorDataset& ds, const MaskTable* masks,
              const ExecutionOptions& exec = {});
/// Loads or generates the data named by cfg.source, then runs.
RunReport run(const RunConfig& cfg, const ExecutionOptions& exec = {});

/// Fills mean_accuracy, ci95 and the recall means from the episode list.
void summarize(RunReport& r);

std::string report_to_text(const RunReport& r);
RunReport report_from_text(const std::string& text);
void report_write(const RunReport& r, const std::filesystem::path& path);
RunReport report_read(const std::filesystem::path& path);

/// Paired difference b - a over episodes with identical seeds.
struct PairedComparison {
    std::size_t episodes = 0;
    double mean_difference = 0.0;
    double standard_error = 0.0;
    double z() const { return standard_error > 0.0 ? mean_difference / standard_error : 0.0; }
};

PairedComparison compare_paired(const RunReport& a, const RunReport& b);

}  // namespace ldwr
