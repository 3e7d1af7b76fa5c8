#include "ldwr/prototype.hpp"

#include <numeric>

namespace ldwr {

KeptSets keep_all(std::span<const LabeledSample> samples) {
    KeptSets kept(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s) {
        kept[s].resize(samples[s].descriptors.count());
        std::iota(kept[s].begin(), kept[s].end(), std::size_t{0});
    }
    return kept;
}

ClassPrototype class_prototype(const DescriptorMatrix& support_descriptors,
                               std::size_t class_index) {
    if (support_descriptors.empty()) {
        throw DegenerateClassError("class " + std::to_string(class_index) +
                                   " has no support descriptors to average");
    }
    const std::size_t dim = support_descriptors.dim();
    std::vector<double> acc(dim, 0.0);
    for (std::size_t i = 0; i < support_descriptors.size(); ++i) {
        auto x = support_descriptors.row(i);
        for (std::size_t c = 0; c < dim; ++c) acc[c] += x[c];
    }
    ClassPrototype p{class_index, Vector(dim), support_descriptors.size()};
    const double n = static_cast<double>(support_descriptors.size());
    for (std::size_t c = 0; c < dim; ++c) p.vector[c] = static_cast<float>(acc[c] / n);
    return p;
}

std::vector<DescriptorMatrix> class_pools(const Episode& e, const KeptSets& kept) {
    if (kept.size() != e.support.size()) {
        throw ConfigError("kept sets cover " + std::to_string(kept.size()) + " samples, support has " +
                          std::to_string(e.support.size()));
    }
    const std::size_t dim = e.support.empty() ? 0 : e.support.front().descriptors.channels();
    std::vector<DescriptorMatrix> pools(e.n_way, DescriptorMatrix(dim));
    for (std::size_t s = 0; s < e.support.size(); ++s) {
        const auto& d = e.support[s].descriptors;
        auto& pool = pools[e.support_class(s)];
        for (std::size_t i : kept[s]) pool.append(d.descriptor(i));
    }
    return pools;
}

std::vector<ClassPrototype> all_prototypes(const Episode& e, const KeptSets& kept) {
    const auto pools = class_pools(e, kept);
    std::vector<ClassPrototype> out;
    out.reserve(pools.size());
    for (std::size_t c = 0; c < pools.size(); ++c) out.push_back(class_prototype(pools[c], c));
    return out;
}

}  // namespace ldwr
