#include "ldwr/ldwr_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ldwr/neighborhood.hpp"

namespace ldwr {

std::string to_string(FilterMode mode) {
    return mode == FilterMode::averaged ? "averaged" : "per-class";
}

FilterMode parse_filter_mode(const std::string& text) {
    if (text == "averaged") return FilterMode::averaged;
    if (text == "per-class") return FilterMode::per_class;
    throw ConfigError("unknown filter mode '" + text + "' (expected averaged or per-class)");
}

std::string to_string(QueryStats stats) { return stats == QueryStats::own ? "own" : "support"; }

QueryStats parse_query_stats(const std::string& text) {
    if (text == "own") return QueryStats::own;
    if (text == "support") return QueryStats::support;
    throw ConfigError("unknown query statistics source '" + text + "' (expected own or support)");
}

void FilterConfig::validate() const {
    if (!(c_stop > 1.0)) throw ConfigError("c_stop must be greater than 1");
    if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
    if (!(min_keep_fraction > 0.0 && min_keep_fraction <= 1.0)) {
        throw ConfigError("min_keep_fraction must lie in (0, 1]");
    }
}

namespace {

struct PrototypeUnits {
    std::size_t dim = 0;
    std::vector<double> units;  // classes x dim
    std::size_t classes() const { return dim == 0 ? 0 : units.size() / dim; }
};

PrototypeUnits unit_prototypes(std::span<const ClassPrototype> prototypes) {
    DescriptorMatrix m;
    for (const auto& p : prototypes) m.append(p.vector);
    const UnitVectors u(m);
    PrototypeUnits out{u.dim(), {}};
    out.units.reserve(u.size() * u.dim());
    for (std::size_t c = 0; c < u.size(); ++c) {
        auto r = u.row(c);
        out.units.insert(out.units.end(), r.begin(), r.end());
    }
    return out;
}

SimilarityMatrix similarity_matrix(const UnitVectors& nr, const PrototypeUnits& protos) {
    SimilarityMatrix s{protos.classes(), nr.size(), {}};
    s.values.resize(s.classes * s.descriptors);
    for (std::size_t c = 0; c < s.classes; ++c) {
        std::span<const double> p(protos.units.data() + c * protos.dim, protos.dim);
        nr.similarities(p, {s.values.data() + c * s.descriptors, s.descriptors});
    }
    return s;
}

/// Weights used for statistics (class average) and for the keep decision.
struct SampleWeights {
    std::vector<double> averaged;
    std::vector<double> decision;
};

SampleWeights sample_weights(const UnitVectors& nr, const PrototypeUnits& protos, FilterMode mode) {
    const SimilarityMatrix s = similarity_matrix(nr, protos);
    SampleWeights w{aggregate_weights(s), {}};
    if (mode == FilterMode::averaged) {
        w.decision = w.averaged;
    } else {
        w.decision.assign(s.descriptors, -std::numeric_limits<double>::infinity());
        for (std::size_t c = 0; c < s.classes; ++c) {
            for (std::size_t i = 0; i < s.descriptors; ++i) {
                w.decision[i] = std::max(w.decision[i], s.at(c, i));
            }
        }
    }
    return w;
}

ThresholdStats kept_stats(const std::vector<SampleWeights>& weights, const KeptSets& kept) {
    std::vector<double> pooled;
    for (std::size_t m = 0; m < weights.size(); ++m) {
        for (std::size_t i : kept[m]) pooled.push_back(weights[m].averaged[i]);
    }
    return threshold_stats(pooled);
}

std::vector<UnitVectors> unit_all(std::span<const DescriptorMatrix> nr) {
    std::vector<UnitVectors> out;
    out.reserve(nr.size());
    for (const auto& m : nr) out.emplace_back(m);
    return out;
}

}  // namespace

SimilarityMatrix descriptor_weights(const DescriptorMatrix& neighborhoods,
                                    std::span<const ClassPrototype> prototypes) {
    return similarity_matrix(UnitVectors(neighborhoods), unit_prototypes(prototypes));
}

std::vector<double> aggregate_weights(const SimilarityMatrix& s) {
    std::vector<double> out(s.descriptors, 0.0);
    if (s.classes == 0) return out;
    for (std::size_t c = 0; c < s.classes; ++c) {
        for (std::size_t i = 0; i < s.descriptors; ++i) out[i] += s.at(c, i);
    }
    for (auto& v : out) v /= static_cast<double>(s.classes);
    return out;
}

ThresholdStats threshold_stats(std::span<const double> weights) {
    if (weights.size() < 2) {
        throw DegenerateStatisticsError("threshold statistics need at least 2 weights, got " +
                                        std::to_string(weights.size()));
    }
    const auto n = static_cast<long double>(weights.size());
    long double sum = 0.0L;
    for (double w : weights) sum += w;
    const long double mean = sum / n;
    long double sq = 0.0L;
    for (double w : weights) sq += (w - mean) * (w - mean);
    return {static_cast<double>(mean), static_cast<double>(std::sqrt(sq / n))};
}

std::size_t keep_floor(std::size_t total, double min_keep_fraction) {
    // The small slack keeps 0.1 * 30 from rounding up to 4.
    const double raw = std::ceil(min_keep_fraction * static_cast<double>(total) - 1e-9);
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 0.0)), 1,
                                   std::max<std::size_t>(total, 1));
}

std::vector<std::size_t> filter_sample(std::span<const double> scores,
                                       std::span<const std::size_t> candidates,
                                       double threshold, std::size_t floor) {
    std::vector<std::size_t> kept;
    kept.reserve(candidates.size());
    for (std::size_t i : candidates) {
        if (scores[i] >= threshold) kept.push_back(i);
    }
    if (kept.size() >= floor || kept.size() == candidates.size()) return kept;

    std::vector<std::size_t> ranked(candidates.begin(), candidates.end());
    const std::size_t take = std::min(floor, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take),
                      ranked.end(), [&](std::size_t a, std::size_t b) {
                          return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                      });
    ranked.resize(take);
    std::sort(ranked.begin(), ranked.end());
    return ranked;
}

KeptSets filter_once(std::span<const std::vector<double>> weights, const ThresholdStats& stats,
                     const FilterConfig& cfg) {
    KeptSets kept(weights.size());
    for (std::size_t m = 0; m < weights.size(); ++m) {
        std::vector<std::size_t> all(weights[m].size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        kept[m] = filter_sample(weights[m], all, stats.threshold(),
                                keep_floor(weights[m].size(), cfg.min_keep_fraction));
    }
    return kept;
}

SupportFilterOutcome iterative_filter_support(const Episode& e,
                                              std::span<const DescriptorMatrix> nr_support,
                                              const FilterConfig& cfg) {
    cfg.validate();
    if (nr_support.size() != e.support.size()) {
        throw ConfigError("neighborhood representations given for " +
                          std::to_string(nr_support.size()) + " of " +
                          std::to_string(e.support.size()) + " support samples");
    }
    const auto nr_units = unit_all(nr_support);

    SupportFilterOutcome out;
    FilterResult& r = out.result;
    KeptSets kept = keep_all(e.support);
    std::vector<SampleWeights> weights(e.support.size());

    while (true) {
        out.prototypes = all_prototypes(e, kept);
        const PrototypeUnits protos = unit_prototypes(out.prototypes);
        for (std::size_t m = 0; m < weights.size(); ++m) {
            weights[m] = sample_weights(nr_units[m], protos, cfg.mode);
        }
        const ThresholdStats stats = kept_stats(weights, kept);
        r.trace.push_back({stats, kept});
        r.mu_bar = stats.mean;
        r.sigma_bar = stats.stddev;

        if (r.trace.size() == 1) {
            r.sigma_bar_0 = stats.stddev;
        } else if (stats.stddev < r.sigma_bar_0 / cfg.c_stop) {
            break;
        }
        if (r.iterations >= cfg.max_iterations) break;

        KeptSets next(kept.size());
        for (std::size_t m = 0; m < kept.size(); ++m) {
            const std::size_t floor =
                keep_floor(e.support[m].descriptors.count(), cfg.min_keep_fraction);
            next[m] = filter_sample(weights[m].decision, kept[m], stats.threshold(), floor);
        }
        ++r.iterations;
        if (next == kept) break;
        kept = std::move(next);
    }

    r.kept = std::move(kept);
    r.weights.reserve(weights.size());
    for (auto& w : weights) r.weights.push_back(std::move(w.averaged));
    return out;
}

FilterResult filter_query(std::span<const DescriptorMatrix> query_nr,
                          std::span<const ClassPrototype> prototypes, const FilterConfig& cfg,
                          std::optional<ThresholdStats> fixed_stats) {
    cfg.validate();
    const PrototypeUnits protos = unit_prototypes(prototypes);
    std::vector<SampleWeights> weights;
    weights.reserve(query_nr.size());
    for (const auto& nr : query_nr) weights.push_back(sample_weights(UnitVectors(nr), protos, cfg.mode));

    FilterResult r;
    r.kept.resize(query_nr.size());
    const KeptSets all = [&] {
        KeptSets k(query_nr.size());
        for (std::size_t m = 0; m < k.size(); ++m) {
            k[m].resize(query_nr[m].size());
            std::iota(k[m].begin(), k[m].end(), std::size_t{0});
        }
        return k;
    }();
    const ThresholdStats stats = fixed_stats ? *fixed_stats : kept_stats(weights, all);
    r.trace.push_back({stats, all});
    for (std::size_t m = 0; m < query_nr.size(); ++m) {
        r.kept[m] = filter_sample(weights[m].decision, all[m], stats.threshold(),
                                  keep_floor(query_nr[m].size(), cfg.min_keep_fraction));
    }
    r.mu_bar = stats.mean;
    r.sigma_bar = stats.stddev;
    r.sigma_bar_0 = stats.stddev;
    r.iterations = 1;
    for (auto& w : weights) r.weights.push_back(std::move(w.averaged));
    return r;
}

}  // namespace ldwr
