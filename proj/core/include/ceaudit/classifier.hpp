#ifndef CEAUDIT_CLASSIFIER_HPP
#define CEAUDIT_CLASSIFIER_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "ceaudit/sampler.hpp"
#include "ceaudit/scm.hpp"

namespace ceaudit {

struct TrainConfig {
    double learning_rate = 0.05;
    int max_epochs = 5000;
    double convergence_tol = 1e-8;
    double l2_penalty = 1e-4;
};

// Logistic regression over z-scored features. Raw feature values cross the
// API; standardization constants live inside the model.
struct LogisticModel {
    std::vector<double> weights;  // one per feature, standardized space
    double bias = 0.0;
    std::vector<NodeId> feature_order;
    std::vector<double> feature_means;
    std::vector<double> feature_scales;  // > 0
    TrainConfig train_config;
    std::string dataset_digest;

    // Features ordered and z-scored; throws ConfigError naming any missing one.
    std::vector<double> standardize(const ValueMap& features) const;

    double predict_proba(const ValueMap& features) const;
    // 1 iff predict_proba >= 0.5
    int predict_class(const ValueMap& features) const;

    std::string to_json() const;
    static LogisticModel from_json(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static LogisticModel load(const std::filesystem::path& path);
};

// Full-batch gradient descent on the regularized log-loss. Throws
// DegenerateLabelsError when only one class is present.
LogisticModel fit(const Dataset& ds, const TrainConfig& cfg = {});

double accuracy(const LogisticModel& model, const Dataset& ds);

// Training objective over an already-standardized design matrix; exposed so
// the analytic gradient can be checked against finite differences.
double logistic_loss(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                     const std::vector<double>& w, double b, double l2);
void logistic_gradient(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                       const std::vector<double>& w, double b, double l2,
                       std::vector<double>& grad_w, double& grad_b);

}  // namespace ceaudit

#endif  // CEAUDIT_CLASSIFIER_HPP
