#include "ceaudit/classifier.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "ceaudit/errors.hpp"
#include "text_util.hpp"

namespace ceaudit {

using nlohmann::json;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + exp(m)) - y*m without overflow
double xlog1pexp(double m, int y) {
    const double stable = std::max(m, 0.0) + std::log1p(std::exp(-std::abs(m)));
    return stable - y * m;
}

}  // namespace

std::vector<double> LogisticModel::standardize(const ValueMap& features) const {
    std::vector<double> z(feature_order.size());
    for (std::size_t j = 0; j < feature_order.size(); ++j) {
        auto it = features.find(feature_order[j]);
        if (it == features.end()) throw ConfigError("missing feature '" + feature_order[j] + "'");
        z[j] = (it->second - feature_means[j]) / feature_scales[j];
    }
    return z;
}

double LogisticModel::predict_proba(const ValueMap& features) const {
    const auto z = standardize(features);
    double m = bias;
    for (std::size_t j = 0; j < z.size(); ++j) m += weights[j] * z[j];
    return sigmoid(m);
}

int LogisticModel::predict_class(const ValueMap& features) const {
    return predict_proba(features) >= 0.5 ? 1 : 0;
}

double logistic_loss(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                     const std::vector<double>& w, double b, double l2) {
    const double n = static_cast<double>(X.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        double m = b;
        for (std::size_t j = 0; j < w.size(); ++j) m += w[j] * X[i][j];
        loss += xlog1pexp(m, y[i]);
    }
    loss /= n;
    for (double wj : w) loss += 0.5 * l2 * wj * wj;  // bias unpenalized
    return loss;
}

void logistic_gradient(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                       const std::vector<double>& w, double b, double l2,
                       std::vector<double>& grad_w, double& grad_b) {
    const double n = static_cast<double>(X.size());
    grad_w.assign(w.size(), 0.0);
    grad_b = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        double m = b;
        for (std::size_t j = 0; j < w.size(); ++j) m += w[j] * X[i][j];
        const double err = sigmoid(m) - y[i];
        for (std::size_t j = 0; j < w.size(); ++j) grad_w[j] += err * X[i][j];
        grad_b += err;
    }
    for (std::size_t j = 0; j < w.size(); ++j) grad_w[j] = grad_w[j] / n + l2 * w[j];
    grad_b /= n;
}

LogisticModel fit(const Dataset& ds, const TrainConfig& cfg) {
    if (ds.units.empty()) throw ConfigError("cannot fit on an empty dataset");
    if (cfg.learning_rate <= 0 || cfg.max_epochs <= 0 || cfg.convergence_tol <= 0 ||
        cfg.l2_penalty < 0) {
        throw ConfigError("invalid train config");
    }

    bool has0 = false, has1 = false;
    for (const Unit& u : ds.units) (u.label ? has1 : has0) = true;
    if (!has0 || !has1) throw DegenerateLabelsError("degenerate labels: only one class present");

    LogisticModel model;
    model.feature_order = ds.feature_order;
    model.train_config = cfg;
    model.dataset_digest = ds.digest();

    const std::size_t m = ds.feature_order.size();
    const double n = static_cast<double>(ds.units.size());

    model.feature_means.assign(m, 0.0);
    model.feature_scales.assign(m, 0.0);
    for (const Unit& u : ds.units) {
        for (std::size_t j = 0; j < m; ++j) model.feature_means[j] += u.values.at(ds.feature_order[j]);
    }
    for (std::size_t j = 0; j < m; ++j) model.feature_means[j] /= n;
    for (const Unit& u : ds.units) {
        for (std::size_t j = 0; j < m; ++j) {
            const double d = u.values.at(ds.feature_order[j]) - model.feature_means[j];
            model.feature_scales[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < m; ++j) {
        const double sd = std::sqrt(model.feature_scales[j] / n);
        model.feature_scales[j] = sd > 0 ? sd : 1.0;  // constant feature guard
    }

    std::vector<std::vector<double>> X(ds.units.size(), std::vector<double>(m));
    std::vector<int> y(ds.units.size());
    for (std::size_t i = 0; i < ds.units.size(); ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            X[i][j] = (ds.units[i].values.at(ds.feature_order[j]) - model.feature_means[j]) /
                      model.feature_scales[j];
        }
        y[i] = ds.units[i].label;
    }

    model.weights.assign(m, 0.0);
    model.bias = 0.0;

    std::vector<double> grad_w;
    double grad_b = 0.0;
    double prev_loss = logistic_loss(X, y, model.weights, model.bias, cfg.l2_penalty);
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        logistic_gradient(X, y, model.weights, model.bias, cfg.l2_penalty, grad_w, grad_b);
        for (std::size_t j = 0; j < m; ++j) model.weights[j] -= cfg.learning_rate * grad_w[j];
        model.bias -= cfg.learning_rate * grad_b;

        const double loss = logistic_loss(X, y, model.weights, model.bias, cfg.l2_penalty);
        if (prev_loss - loss < cfg.convergence_tol) break;
        prev_loss = loss;
    }
    return model;
}

double accuracy(const LogisticModel& model, const Dataset& ds) {
    if (ds.units.empty()) throw ConfigError("accuracy of an empty dataset");
    std::size_t hits = 0;
    for (const Unit& u : ds.units) {
        if (model.predict_class(u.values) == u.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ds.units.size());
}

std::string LogisticModel::to_json() const {
    json j;
    j["weights"] = weights;
    j["bias"] = bias;
    j["feature_order"] = feature_order;
    j["feature_means"] = feature_means;
    j["feature_scales"] = feature_scales;
    j["train_config"] = {{"learning_rate", train_config.learning_rate},
                         {"max_epochs", train_config.max_epochs},
                         {"convergence_tol", train_config.convergence_tol},
                         {"l2_penalty", train_config.l2_penalty}};
    j["dataset_digest"] = dataset_digest;
    return j.dump(2);
}

LogisticModel LogisticModel::from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        LogisticModel model;
        model.weights = j.at("weights").get<std::vector<double>>();
        model.bias = j.at("bias").get<double>();
        model.feature_order = j.at("feature_order").get<std::vector<NodeId>>();
        model.feature_means = j.at("feature_means").get<std::vector<double>>();
        model.feature_scales = j.at("feature_scales").get<std::vector<double>>();
        const json& tc = j.at("train_config");
        model.train_config.learning_rate = tc.at("learning_rate").get<double>();
        model.train_config.max_epochs = tc.at("max_epochs").get<int>();
        model.train_config.convergence_tol = tc.at("convergence_tol").get<double>();
        model.train_config.l2_penalty = tc.at("l2_penalty").get<double>();
        model.dataset_digest = j.at("dataset_digest").get<std::string>();
        if (model.weights.size() != model.feature_order.size()) {
            throw ConfigError("model weights do not match feature order");
        }
        return model;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid model JSON: ") + e.what());
    }
}

void LogisticModel::save(const std::filesystem::path& path) const {
    detail::write_file(path, to_json() + "\n");
}

LogisticModel LogisticModel::load(const std::filesystem::path& path) {
    return from_json(detail::read_file(path));
}

}  // namespace ceaudit
