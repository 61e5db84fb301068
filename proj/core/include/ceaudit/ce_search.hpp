#ifndef CEAUDIT_CE_SEARCH_HPP
#define CEAUDIT_CE_SEARCH_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "ceaudit/classifier.hpp"
#include "ceaudit/sampler.hpp"
#include "ceaudit/scm.hpp"

namespace ceaudit {

struct SearchBudget {
    int restarts = 8;
    int max_iters = 2000;
    double step = 0.05;  // in standardized space
};

struct CeRequest {
    Unit unit;
    int desired_class = 1;  // conventionally 1 - unit.label
    int k = 1;
    double lambda = 0.5;   // balance term of the single-CE objective
    double lambda1 = 0.5;  // distance weight of the diverse objective
    double lambda2 = 1.0;  // diversity weight of the diverse objective
    std::map<NodeId, std::pair<double, double>> feature_bounds;
    std::set<NodeId> immutable_features;
    std::set<NodeId> binary_features;
    std::map<NodeId, double> mad;  // per-feature distance normalizer
    std::uint64_t seed = 0;
    SearchBudget budget;
};

struct Counterfactual {
    ValueMap values;
    int predicted_class = 0;
    double predicted_proba = 0.0;
    double objective = 0.0;  // value of the generating objective at `values`
    bool converged = false;  // predicted_class == desired_class
};

// Mean MAD-normalized L1 distance over the shared feature set.
double dist(const ValueMap& a, const ValueMap& b, const std::map<NodeId, double>& mad);

// Squared gap between predicted probability and the desired class.
double yloss(double proba, int desired_class);

// det(K) with K_ij = 1 / (1 + dist(c_i, c_j)). Raises ConfigError if the
// determinant comes out below -1e-9; tiny negative noise is clamped to 0.
double dpp_diversity(const std::vector<Counterfactual>& ces, const std::map<NodeId, double>& mad);

// Median absolute deviation per feature; exact zeros are replaced by 1.0.
std::map<NodeId, double> mad_of(const Dataset& ds);

// Observed [min, max] per feature.
std::map<NodeId, std::pair<double, double>> bounds_of(const Dataset& ds);

// Features whose observed values all lie in {0, 1}.
std::set<NodeId> binary_features_of(const Dataset& ds);

// Request with mad/bounds/binary domains taken from the dataset and
// desired_class = 1 - unit.label.
CeRequest make_request(const Dataset& ds, const Unit& unit, int k = 1, std::uint64_t seed = 0);

// Objective values at explicit candidate points (also used by gradient checks).
double wachter_objective(const LogisticModel& model, const CeRequest& req, const ValueMap& c);
double dice_objective(const LogisticModel& model, const CeRequest& req,
                      const std::vector<ValueMap>& cs);

// Analytic objective gradients w.r.t. every coordinate of every candidate,
// for verification against finite differences. Away from the L1 kinks the
// subgradient is the gradient.
ValueMap wachter_gradient(const LogisticModel& model, const CeRequest& req, const ValueMap& c);
std::vector<ValueMap> dice_gradient(const LogisticModel& model, const CeRequest& req,
                                    const std::vector<ValueMap>& cs);

// Single counterfactual minimizing lambda * yloss + dist via multi-start
// projected gradient descent, binary features enumerated exhaustively.
Counterfactual wachter_generate(const LogisticModel& model, const CeRequest& req);

// k counterfactuals jointly minimizing
// mean yloss + (lambda1/k) * sum dist - lambda2 * dpp_diversity.
std::vector<Counterfactual> dice_generate(const LogisticModel& model, const CeRequest& req);

struct CeRecord {
    std::size_t unit_id = 0;
    std::size_t ce_id = 0;
    Counterfactual ce;
};

// CSV: unit_id, ce_id, x1..x7, predicted_class, objective, converged
void write_ces_csv(const std::vector<CeRecord>& records, const std::vector<NodeId>& feature_order,
                   const std::filesystem::path& path);
std::vector<CeRecord> read_ces_csv(const std::filesystem::path& path);

}  // namespace ceaudit

#endif  // CEAUDIT_CE_SEARCH_HPP
