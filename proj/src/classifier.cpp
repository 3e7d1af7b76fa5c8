#include "ldwr/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace ldwr {

std::vector<double> softmax(std::span<const double> scores) {
    std::vector<double> p(scores.size());
    if (scores.empty()) return p;
    const double top = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp(scores[i] - top);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

std::size_t argmax(std::span<const double> values) {
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) -
                                    values.begin());
}

double image_to_class_score(const UnitVectors& query_kept, const UnitVectors& class_pool,
                            const ClassifierConfig& cfg) {
    if (class_pool.size() == 0) {
        throw DegenerateClassError("image-to-class score against an empty class pool");
    }
    if (query_kept.size() == 0) throw ConfigError("image-to-class score for a query with no descriptors");
    if (cfg.k_bar == 0) throw ConfigError("k_bar must be at least 1");

    const std::size_t k = std::min(cfg.k_bar, class_pool.size());
    std::vector<double> sims(class_pool.size());
    double total = 0.0;
    for (std::size_t l = 0; l < query_kept.size(); ++l) {
        class_pool.similarities(query_kept.row(l), sims);
        std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(k), sims.end(),
                          std::greater<>());
        for (std::size_t j = 0; j < k; ++j) total += sims[j];
    }
    return total;
}

double image_to_class_score(const DescriptorMatrix& query_kept, const DescriptorMatrix& class_pool,
                            const ClassifierConfig& cfg) {
    return image_to_class_score(UnitVectors(query_kept), UnitVectors(class_pool), cfg);
}

ClassScores classify(const UnitVectors& query_kept, std::span<const UnitVectors> class_pools,
                     const ClassifierConfig& cfg) {
    ClassScores out;
    out.scores.reserve(class_pools.size());
    for (const auto& pool : class_pools) {
        out.scores.push_back(image_to_class_score(query_kept, pool, cfg));
    }
    out.probabilities = softmax(out.scores);
    out.predicted = argmax(out.scores);
    return out;
}

ClassScores classify(const DescriptorMatrix& query_kept,
                     std::span<const DescriptorMatrix> class_pools, const ClassifierConfig& cfg) {
    std::vector<UnitVectors> pools;
    pools.reserve(class_pools.size());
    for (const auto& p : class_pools) pools.emplace_back(p);
    return classify(UnitVectors(query_kept), pools, cfg);
}

}  // namespace ldwr
