#ifndef CEAUDIT_SCM_HPP
#define CEAUDIT_SCM_HPP

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ceaudit {

using NodeId = std::string;
using ValueMap = std::map<NodeId, double>;

// Exogenous noise distribution of one node. The noise enters the structural
// equation additively with a fixed coefficient of 1.
struct NoiseSpec {
    enum class Kind { Gaussian, Bernoulli };

    Kind kind = Kind::Gaussian;
    double mu = 0.0;     // gaussian
    double sigma = 1.0;  // gaussian, > 0
    double p = 0.5;      // bernoulli, in [0, 1]

    static NoiseSpec gaussian(double mu, double sigma) {
        return NoiseSpec{Kind::Gaussian, mu, sigma, 0.0};
    }
    static NoiseSpec bernoulli(double p) { return NoiseSpec{Kind::Bernoulli, 0.0, 1.0, p}; }
};

// value = intercept + sum(coeff * parent) + noise
struct StructuralEquation {
    double intercept = 0.0;
    std::vector<std::pair<NodeId, double>> parent_terms;
};

struct ScmNode {
    NodeId name;
    NoiseSpec noise;
    StructuralEquation equation;
    // Set by do-operator surgery: the node is pinned to equation.intercept,
    // with no parents and no noise term.
    bool intervened = false;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

enum class StructureKind { Chain, Fork, Collider };

StructureKind parse_structure(std::string_view name);
std::string to_string(StructureKind kind);

// A linear-additive structural causal model over a DAG. Immutable after
// construction; safe to share across threads.
class Scm {
public:
    Scm(std::vector<ScmNode> nodes, NodeId outcome);

    const std::vector<ScmNode>& nodes() const { return nodes_; }
    const NodeId& outcome() const { return outcome_; }

    bool contains(const NodeId& id) const;
    const ScmNode& node(const NodeId& id) const;  // throws ConfigError if unknown
    std::size_t index_of(const NodeId& id) const;

    // Non-outcome nodes in declaration order.
    std::vector<NodeId> feature_names() const;

    ValidationReport validate() const;

    // Kahn's algorithm; ties broken by declaration order.
    // Throws ConfigError("not a DAG") on a cycle.
    std::vector<NodeId> topo_order() const;

    std::string to_json() const;
    static Scm from_json(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static Scm load(const std::filesystem::path& path);

    // Stable identifier of the model (hash of its canonical JSON form).
    std::string digest() const;

private:
    std::vector<ScmNode> nodes_;
    NodeId outcome_;
    std::map<NodeId, std::size_t> index_;
};

double eval_node(const StructuralEquation& eq, const ValueMap& parent_values, double noise);

// The three seven-feature teaching models (chain, fork, collider), outcome y.
Scm preset(StructureKind kind);

}  // namespace ceaudit

#endif  // CEAUDIT_SCM_HPP
