#include "ldwr/eval_harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ldwr/descriptor_io.hpp"

namespace ldwr {

using nlohmann::json;

void RunConfig::validate() const {
    if (episodes.episodes < 1) throw ConfigError("episode count must be at least 1");
    if (episodes.n_way < 1 || episodes.k_shot < 1 || episodes.n_query < 1) {
        throw ConfigError("n_way, k_shot and n_query must all be positive");
    }
    if (source.data_path.has_value() == source.synthetic.has_value()) {
        throw ConfigError("exactly one data source (descriptor file or synthetic spec) is required");
    }
    if (source.synthetic) source.synthetic->validate();
    if (pipeline.use_filter) pipeline.filter.validate();
    if (pipeline.classifier.k_bar < 1) throw ConfigError("k_bar must be at least 1");
    if (pipeline.use_neighborhood && pipeline.neighborhood.k_neighbors < 1) {
        throw ConfigError("neighborhood k must be at least 1");
    }
}

namespace {

DescriptorMatrix gather(const DescriptorSet& d, const std::vector<std::size_t>& kept) {
    DescriptorMatrix m(d.channels());
    for (std::size_t i : kept) m.append(d.descriptor(i));
    return m;
}

std::vector<DescriptorMatrix> representations(const std::vector<LabeledSample>& samples,
                                              const PipelineConfig& cfg) {
    std::vector<DescriptorMatrix> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        out.push_back(cfg.use_neighborhood
                          ? neighborhood_representation(s.descriptors.matrix(), cfg.neighborhood)
                          : s.descriptors.matrix());
    }
    return out;
}

FilterDiagnostics diagnostics(const FilterResult& r, std::span<const LabeledSample> samples) {
    std::size_t kept = 0, total = 0;
    for (std::size_t m = 0; m < samples.size(); ++m) {
        kept += r.kept[m].size();
        total += samples[m].descriptors.count();
    }
    return {r.iterations, r.mu_bar, r.sigma_bar, r.sigma_bar_0,
            total == 0 ? 0.0 : static_cast<double>(kept) / static_cast<double>(total)};
}

}  // namespace

EpisodeOutcome run_pipeline(const Episode& e, const PipelineConfig& cfg) {
    if (const auto v = validate_episode(e); !v.ok) {
        throw ConfigError("invalid episode (" + v.invariant + "): " + v.detail);
    }
    if (cfg.normalization == NormalizationMode::cross) {
        cfg.cross_norm.validate(e.support.front().descriptors.channels());
    }

    EpisodeOutcome out;
    out.normalized = e;
    for (auto* set : {&out.normalized.support, &out.normalized.query}) {
        for (auto& s : *set) s.descriptors = normalize(s.descriptors, cfg.normalization, cfg.cross_norm);
    }
    const Episode& ne = out.normalized;

    if (cfg.use_filter) {
        out.support_nr = representations(ne.support, cfg);
        out.query_nr = representations(ne.query, cfg);
        auto support = iterative_filter_support(ne, out.support_nr, cfg.filter);
        std::optional<ThresholdStats> fixed;
        if (cfg.query_stats == QueryStats::support) {
            fixed = ThresholdStats{support.result.mu_bar, support.result.sigma_bar};
        }
        out.query_filter = filter_query(out.query_nr, support.prototypes, cfg.filter, fixed);
        out.prototypes = std::move(support.prototypes);
        out.support_kept = support.result.kept;
        out.query_kept = out.query_filter->kept;
        out.support_filter = std::move(support.result);
    } else {
        out.support_kept = keep_all(ne.support);
        out.query_kept = keep_all(ne.query);
        out.prototypes = all_prototypes(ne, out.support_kept);
    }

    out.class_pools = class_pools(ne, out.support_kept);
    std::vector<UnitVectors> pools;
    pools.reserve(out.class_pools.size());
    for (std::size_t c = 0; c < out.class_pools.size(); ++c) {
        if (out.class_pools[c].empty()) {
            throw DegenerateClassError("class " + std::to_string(c) + " ('" + ne.class_labels[c] +
                                       "') has no support descriptors left after filtering");
        }
        pools.emplace_back(out.class_pools[c]);
    }

    for (std::size_t q = 0; q < ne.query.size(); ++q) {
        const UnitVectors query(gather(ne.query[q].descriptors, out.query_kept[q]));
        out.query_scores.push_back(classify(query, pools, cfg.classifier));
        out.query_truth.push_back(ne.class_index(ne.query[q].label));
    }
    return out;
}

namespace {

MaskAgreement mask_agreement(const std::vector<LabeledSample>& samples, const KeptSets& kept,
                             const MaskTable& masks) {
    std::size_t bg_total = 0, bg_removed = 0, fg_total = 0, fg_kept = 0;
    for (std::size_t m = 0; m < samples.size(); ++m) {
        const auto& mask = masks.at(samples[m].sample_id);
        std::vector<std::uint8_t> is_kept(mask.size(), 0);
        for (std::size_t i : kept[m]) is_kept[i] = 1;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (mask[i]) {
                ++fg_total;
                fg_kept += is_kept[i];
            } else {
                ++bg_total;
                bg_removed += 1 - is_kept[i];
            }
        }
    }
    MaskAgreement a;
    if (bg_total > 0) a.background_recall = static_cast<double>(bg_removed) / static_cast<double>(bg_total);
    if (fg_total > 0) a.foreground_retention = static_cast<double>(fg_kept) / static_cast<double>(fg_total);
    return a;
}

}  // namespace

EpisodeReport report_episode(const EpisodeOutcome& outcome, const MaskTable* masks) {
    EpisodeReport r;
    const Episode& e = outcome.normalized;
    std::size_t correct = 0;
    for (std::size_t q = 0; q < outcome.query_scores.size(); ++q) {
        const auto& s = outcome.query_scores[q];
        r.queries.push_back({outcome.query_truth[q], s.predicted, outcome.query_kept[q].size(),
                             s.scores, s.probabilities});
        if (s.predicted == outcome.query_truth[q]) ++correct;
    }
    r.accuracy = r.queries.empty() ? 0.0
                                   : static_cast<double>(correct) / static_cast<double>(r.queries.size());
    if (outcome.support_filter) r.support_filter = diagnostics(*outcome.support_filter, e.support);
    if (outcome.query_filter) r.query_filter = diagnostics(*outcome.query_filter, e.query);

    if (masks != nullptr && !masks->empty()) {
        r.support_masks = mask_agreement(e.support, outcome.support_kept, *masks);
        r.query_masks = mask_agreement(e.query, outcome.query_kept, *masks);
    }
    return r;
}

std::uint64_t episode_seed(std::uint64_t run_seed, std::size_t index) {
    // splitmix64 over (seed, index)
    std::uint64_t z = run_seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void summarize(RunReport& r) {
    const std::size_t n = r.episodes.size();
    r.mean_accuracy = 0.0;
    r.ci95 = 0.0;
    r.support_masks.reset();
    r.query_masks.reset();
    if (n == 0) return;

    double sum = 0.0;
    for (const auto& e : r.episodes) sum += e.accuracy;
    r.mean_accuracy = sum / static_cast<double>(n);
    if (n > 1) {
        double sq = 0.0;
        for (const auto& e : r.episodes) sq += (e.accuracy - r.mean_accuracy) * (e.accuracy - r.mean_accuracy);
        r.ci95 = 1.96 * std::sqrt(sq / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
    }

    auto mean_of = [&](auto side) -> std::optional<MaskAgreement> {
        double recall = 0.0, retention = 0.0;
        std::size_t n_recall = 0, n_retention = 0, seen = 0;
        for (const auto& e : r.episodes) {
            const auto& a = e.*side;
            if (!a) continue;
            ++seen;
            if (a->background_recall) {
                recall += *a->background_recall;
                ++n_recall;
            }
            if (a->foreground_retention) {
                retention += *a->foreground_retention;
                ++n_retention;
            }
        }
        if (seen == 0) return std::nullopt;
        MaskAgreement m;
        if (n_recall > 0) m.background_recall = recall / static_cast<double>(n_recall);
        if (n_retention > 0) m.foreground_retention = retention / static_cast<double>(n_retention);
        return m;
    };
    r.support_masks = mean_of(&EpisodeReport::support_masks);
    r.query_masks = mean_of(&EpisodeReport::query_masks);
}

RunReport run(const RunConfig& cfg, const DescriptorDataset& ds, const MaskTable* masks,
              const ExecutionOptions& exec) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const std::size_t count = cfg.episodes.episodes;

    RunReport report;
    report.config = cfg;
    report.episodes.resize(count);
    std::vector<std::string> errors(count);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            const std::uint64_t seed = episode_seed(cfg.episodes.seed, i);
            try {
                const Episode e = sample_episode(ds, cfg.episodes.n_way, cfg.episodes.k_shot,
                                                 cfg.episodes.n_query, seed);
                EpisodeReport r = report_episode(run_pipeline(e, cfg.pipeline), masks);
                r.index = i;
                r.seed = seed;
                report.episodes[i] = std::move(r);
            } catch (const std::exception& ex) {
                errors[i] = ex.what();
            }
        }
    };

    const std::size_t threads = std::max<std::size_t>(1, std::min(exec.threads, count));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    for (std::size_t i = 0; i < count; ++i) {
        if (!errors[i].empty()) {
            throw std::runtime_error("episode " + std::to_string(i) + " (seed " +
                                     std::to_string(episode_seed(cfg.episodes.seed, i)) +
                                     "): " + errors[i]);
        }
    }
    summarize(report);
    if (exec.record_timing) {
        report.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return report;
}

RunReport run(const RunConfig& cfg, const ExecutionOptions& exec) {
    cfg.validate();
    if (cfg.source.synthetic) {
        const SyntheticDataset syn = generate_synthetic(*cfg.source.synthetic);
        return run(cfg, syn.dataset, &syn.masks, exec);
    }
    const DescriptorDataset ds = read_dataset(*cfg.source.data_path);
    return run(cfg, ds, nullptr, exec);
}

// ---------------------------------------------------------------------------
// Report serialization

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

json masks_to_json(const std::optional<MaskAgreement>& m) {
    if (!m) return nullptr;
    return {{"background_recall", optional_number(m->background_recall)},
            {"foreground_retention", optional_number(m->foreground_retention)}};
}

std::optional<MaskAgreement> masks_from_json(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    const json& m = j.at(key);
    return MaskAgreement{read_optional(m, "background_recall"), read_optional(m, "foreground_retention")};
}

json synthetic_to_json(const SyntheticSpec& s) {
    return {{"n_classes", s.n_classes},
            {"samples_per_class", s.samples_per_class},
            {"channels", s.channels},
            {"height", s.height},
            {"width", s.width},
            {"foreground_fraction", s.foreground_fraction},
            {"signal_to_noise", s.signal_to_noise},
            {"class_overlap", s.class_overlap},
            {"background_modes", s.background_modes},
            {"background_strength", s.background_strength},
            {"seed", s.seed}};
}

SyntheticSpec synthetic_from_json(const json& j) {
    SyntheticSpec s;
    s.n_classes = j.at("n_classes").get<std::size_t>();
    s.samples_per_class = j.at("samples_per_class").get<std::size_t>();
    s.channels = j.at("channels").get<std::size_t>();
    s.height = j.at("height").get<std::size_t>();
    s.width = j.at("width").get<std::size_t>();
    s.foreground_fraction = j.at("foreground_fraction").get<double>();
    s.signal_to_noise = j.at("signal_to_noise").get<double>();
    s.class_overlap = j.at("class_overlap").get<double>();
    s.background_modes = j.at("background_modes").get<std::size_t>();
    s.background_strength = j.at("background_strength").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

json config_to_json(const RunConfig& c) {
    const auto& p = c.pipeline;
    json data;
    if (c.source.data_path) data["path"] = *c.source.data_path;
    if (c.source.synthetic) data["synthetic"] = synthetic_to_json(*c.source.synthetic);
    return {
        {"normalize", to_string(p.normalization)},
        {"cn_params",
         {{"a1", p.cross_norm.a1},
          {"b1", p.cross_norm.b1},
          {"a2", p.cross_norm.a2},
          {"b2", p.cross_norm.b2},
          {"gamma", p.cross_norm.gamma},
          {"beta", p.cross_norm.beta},
          {"omega1", p.cross_norm.omega1},
          {"omega2", p.cross_norm.omega2},
          {"epsilon", p.cross_norm.epsilon}}},
        {"neighborhood",
         {{"enabled", p.use_neighborhood},
          {"k", p.neighborhood.k_neighbors},
          {"include_self", p.neighborhood.include_self}}},
        {"filter",
         {{"enabled", p.use_filter},
          {"c_stop", p.filter.c_stop},
          {"max_iterations", p.filter.max_iterations},
          {"min_keep_fraction", p.filter.min_keep_fraction},
          {"mode", to_string(p.filter.mode)},
          {"query_stats", to_string(p.query_stats)}}},
        {"classifier", {{"k_bar", p.classifier.k_bar}}},
        {"episodes",
         {{"n_way", c.episodes.n_way},
          {"k_shot", c.episodes.k_shot},
          {"n_query", c.episodes.n_query},
          {"count", c.episodes.episodes},
          {"seed", c.episodes.seed}}},
        {"data", data},
    };
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    auto& p = c.pipeline;
    p.normalization = parse_normalization_mode(j.at("normalize").get<std::string>());
    const json& cn = j.at("cn_params");
    p.cross_norm.a1 = cn.at("a1").get<double>();
    p.cross_norm.b1 = cn.at("b1").get<double>();
    p.cross_norm.a2 = cn.at("a2").get<double>();
    p.cross_norm.b2 = cn.at("b2").get<double>();
    p.cross_norm.gamma = cn.at("gamma").get<std::vector<double>>();
    p.cross_norm.beta = cn.at("beta").get<std::vector<double>>();
    p.cross_norm.omega1 = cn.at("omega1").get<double>();
    p.cross_norm.omega2 = cn.at("omega2").get<double>();
    p.cross_norm.epsilon = cn.at("epsilon").get<double>();
    const json& nr = j.at("neighborhood");
    p.use_neighborhood = nr.at("enabled").get<bool>();
    p.neighborhood.k_neighbors = nr.at("k").get<std::size_t>();
    p.neighborhood.include_self = nr.at("include_self").get<bool>();
    const json& f = j.at("filter");
    p.use_filter = f.at("enabled").get<bool>();
    p.filter.c_stop = f.at("c_stop").get<double>();
    p.filter.max_iterations = f.at("max_iterations").get<std::size_t>();
    p.filter.min_keep_fraction = f.at("min_keep_fraction").get<double>();
    p.filter.mode = parse_filter_mode(f.at("mode").get<std::string>());
    p.query_stats = parse_query_stats(f.at("query_stats").get<std::string>());
    p.classifier.k_bar = j.at("classifier").at("k_bar").get<std::size_t>();
    const json& e = j.at("episodes");
    c.episodes.n_way = e.at("n_way").get<std::size_t>();
    c.episodes.k_shot = e.at("k_shot").get<std::size_t>();
    c.episodes.n_query = e.at("n_query").get<std::size_t>();
    c.episodes.episodes = e.at("count").get<std::size_t>();
    c.episodes.seed = e.at("seed").get<std::uint64_t>();
    const json& d = j.at("data");
    if (d.contains("path")) c.source.data_path = d.at("path").get<std::string>();
    if (d.contains("synthetic")) c.source.synthetic = synthetic_from_json(d.at("synthetic"));
    return c;
}

json diagnostics_to_json(const std::optional<FilterDiagnostics>& d) {
    if (!d) return nullptr;
    return {{"iterations", d->iterations},
            {"mu_bar", d->mu_bar},
            {"sigma_bar", d->sigma_bar},
            {"sigma_bar_0", d->sigma_bar_0},
            {"kept_fraction", d->kept_fraction}};
}

std::optional<FilterDiagnostics> diagnostics_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return FilterDiagnostics{j.at("iterations").get<std::size_t>(), j.at("mu_bar").get<double>(),
                             j.at("sigma_bar").get<double>(), j.at("sigma_bar_0").get<double>(),
                             j.at("kept_fraction").get<double>()};
}

}  // namespace

std::string report_to_text(const RunReport& r) {
    json episodes = json::array();
    for (const auto& e : r.episodes) {
        json queries = json::array();
        for (const auto& q : e.queries) {
            queries.push_back({{"true", q.truth},
                               {"predicted", q.predicted},
                               {"kept", q.kept},
                               {"scores", q.scores},
                               {"probabilities", q.probabilities}});
        }
        episodes.push_back({{"index", e.index},
                            {"seed", e.seed},
                            {"accuracy", e.accuracy},
                            {"support_filter", diagnostics_to_json(e.support_filter)},
                            {"query_filter", diagnostics_to_json(e.query_filter)},
                            {"support_masks", masks_to_json(e.support_masks)},
                            {"query_masks", masks_to_json(e.query_masks)},
                            {"queries", queries}});
    }
    json summary = {{"episodes", r.episodes.size()},
                    {"mean_accuracy", r.mean_accuracy},
                    {"ci95", r.ci95},
                    {"support_masks", masks_to_json(r.support_masks)},
                    {"query_masks", masks_to_json(r.query_masks)}};
    if (r.wall_seconds) summary["wall_seconds"] = *r.wall_seconds;

    json doc = {{"format", "ldwr-report"},
                {"version", 1},
                {"config", config_to_json(r.config)},
                {"summary", summary},
                {"episodes", episodes}};
    return doc.dump(1) + "\n";
}

RunReport report_from_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("report is not valid JSON: ") + e.what(), e.byte);
    }
    try {
        if (doc.at("format") != "ldwr-report" || doc.at("version") != 1) {
            throw ParseError("not an ldwr-report version 1 document", 0);
        }
        RunReport r;
        r.config = config_from_json(doc.at("config"));
        for (const json& je : doc.at("episodes")) {
            EpisodeReport e;
            e.index = je.at("index").get<std::size_t>();
            e.seed = je.at("seed").get<std::uint64_t>();
            e.accuracy = je.at("accuracy").get<double>();
            e.support_filter = diagnostics_from_json(je.at("support_filter"));
            e.query_filter = diagnostics_from_json(je.at("query_filter"));
            e.support_masks = masks_from_json(je, "support_masks");
            e.query_masks = masks_from_json(je, "query_masks");
            for (const json& jq : je.at("queries")) {
                e.queries.push_back({jq.at("true").get<std::size_t>(),
                                     jq.at("predicted").get<std::size_t>(),
                                     jq.at("kept").get<std::size_t>(),
                                     jq.at("scores").get<std::vector<double>>(),
                                     jq.at("probabilities").get<std::vector<double>>()});
            }
            r.episodes.push_back(std::move(e));
        }
        const json& s = doc.at("summary");
        r.mean_accuracy = s.at("mean_accuracy").get<double>();
        r.ci95 = s.at("ci95").get<double>();
        r.support_masks = masks_from_json(s, "support_masks");
        r.query_masks = masks_from_json(s, "query_masks");
        r.wall_seconds = read_optional(s, "wall_seconds");
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed report: ") + e.what(), 0);
    }
}

void report_write(const RunReport& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open report " + path.string() + " for writing");
    out << report_to_text(r);
    if (!out) throw ConfigError("write failed for report " + path.string());
}

RunReport report_read(const std::filesystem::path& path) {
    return report_from_text(read_text_file(path));
}

PairedComparison compare_paired(const RunReport& a, const RunReport& b) {
    if (a.episodes.size() != b.episodes.size()) {
        throw ConfigError("paired comparison needs equal episode counts (" +
                          std::to_string(a.episodes.size()) + " vs " +
                          std::to_string(b.episodes.size()) + ")");
    }
    PairedComparison out;
    out.episodes = a.episodes.size();
    if (out.episodes == 0) return out;
    std::vector<double> diff(out.episodes);
    for (std::size_t i = 0; i < out.episodes; ++i) {
        if (a.episodes[i].seed != b.episodes[i].seed) {
            throw ConfigError("episode " + std::to_string(i) + " was drawn with different seeds");
        }
        diff[i] = b.episodes[i].accuracy - a.episodes[i].accuracy;
    }
    double sum = 0.0;
    for (double d : diff) sum += d;
    out.mean_difference = sum / static_cast<double>(out.episodes);
    if (out.episodes > 1) {
        double sq = 0.0;
        for (double d : diff) sq += (d - out.mean_difference) * (d - out.mean_difference);
        out.standard_error = std::sqrt(sq / static_cast<double>(out.episodes - 1)) /
                             std::sqrt(static_cast<double>(out.episodes));
    }
    return out;
}

}  // namespace ldwr
