#ifndef CEAUDIT_PCM_HPP
#define CEAUDIT_PCM_HPP

#include <filesystem>
#include <map>
#include <vector>

#include "ceaudit/ce_search.hpp"
#include "ceaudit/sampler.hpp"
#include "ceaudit/scm.hpp"

namespace ceaudit {

// Per-node exogenous values recovered by abduction.
using NoiseAssignment = std::map<NodeId, double>;

// Nodes forced to constants by the do-operator. Never contains the outcome.
using InterventionSet = std::map<NodeId, double>;

struct Verdict {
    double pcm_y = 0.0;
    int pcm_class = 0;
    int ce_class = 0;
    double factual_y = 0.0;
    int factual_class = 0;
    bool conflict = false;  // pcm_class != ce_class
    InterventionSet interventions;
};

// Abduction: u = observed - (intercept + sum coeff * observed parent), node
// by node. Exact and unique for linear-additive equations.
NoiseAssignment abduct(const Scm& scm, const Unit& unit);

// Features whose counterfactual value differs from the factual by more
// than eps, mapped to the counterfactual value.
InterventionSet detect_interventions(const Unit& unit, const Counterfactual& ce, double eps);

// Action: replace each intervened node's equation with a constant (no
// parents, no noise term). Throws ConfigError on an outcome intervention.
Scm mutilate(const Scm& scm, const InterventionSet& iv);

// Prediction: evaluate every node in topological order, constants for
// intervened nodes, abducted noise elsewhere.
ValueMap predict_full(const Scm& mutilated, const NoiseAssignment& noise);

// abduct -> detect_interventions -> mutilate -> predict_full -> label.
Verdict validate_ce(const Scm& scm, const Unit& unit, const Counterfactual& ce, double threshold,
                    double eps = 1e-6);

struct VerdictRecord {
    std::size_t unit_id = 0;
    std::size_t ce_id = 0;
    Verdict verdict;
};

// CSV: unit_id, ce_id, intervened_features, factual_y, factual_class,
//      ce_class, pcm_y, pcm_class, conflict
void write_verdicts_csv(const std::vector<VerdictRecord>& records,
                        const std::filesystem::path& path);
std::vector<VerdictRecord> read_verdicts_csv(const std::filesystem::path& path);

}  // namespace ceaudit

#endif  // CEAUDIT_PCM_HPP
