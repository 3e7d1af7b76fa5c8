#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ldwr/descriptor_model.hpp"

namespace ldwr {

/// Per support sample, the ascending list of retained descriptor indices.
using KeptSets = std::vector<std::vector<std::size_t>>;

/// Every index of every sample kept.
KeptSets keep_all(std::span<const LabeledSample> samples);

struct ClassPrototype {
    std::size_t class_index = 0;
    Vector vector;
    std::size_t source_count = 0;
};

/// Mean over all descriptors of one class. Throws DegenerateClassError when empty.
ClassPrototype class_prototype(const DescriptorMatrix& support_descriptors,
                               std::size_t class_index);

/// Concatenation of each class's kept support descriptors, one pool per class.
std::vector<DescriptorMatrix> class_pools(const Episode& e, const KeptSets& kept);

/// One prototype per class over kept support descriptors only.
std::vector<ClassPrototype> all_prototypes(const Episode& e, const KeptSets& kept);

}  // namespace ldwr
