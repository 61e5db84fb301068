#ifndef CEAUDIT_SAMPLER_HPP
#define CEAUDIT_SAMPLER_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ceaudit/scm.hpp"

namespace ceaudit {

// One factual observation: feature values, numeric outcome, binary class.
struct Unit {
    ValueMap values;  // features only, outcome excluded
    double y = 0.0;
    int label = 0;

    // Feature values plus the outcome, keyed by node name.
    ValueMap full_values(const NodeId& outcome) const;
};

struct Dataset {
    std::vector<Unit> units;
    double threshold = 0.0;  // y mean used at labeling time
    std::uint64_t seed = 0;
    std::string scm_digest;
    std::vector<NodeId> feature_order;

    std::size_t size() const { return units.size(); }
    // Content hash over rows, threshold, seed and scm digest.
    std::string digest() const;
};

// class = 1 iff y >= threshold
int label(double y, double threshold);

// Ancestral sampling: n units, each node's noise drawn from its NoiseSpec on
// a stream derived from (seed, unit index, node index), nodes evaluated in
// topological order. threshold = mean(y) over the generated units.
Dataset sample_dataset(const Scm& scm, std::size_t n, std::uint64_t seed);

// CSV with header x1,..,x7,y,class (reals at 17 significant digits) plus a
// sidecar JSON <csv>.meta.json recording seed, n, threshold and scm digest.
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& csv_path);
Dataset read_dataset_csv(const std::filesystem::path& csv_path);

}  // namespace ceaudit

#endif  // CEAUDIT_SAMPLER_HPP
