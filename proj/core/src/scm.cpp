#include "ceaudit/scm.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "ceaudit/errors.hpp"
#include "text_util.hpp"

namespace ceaudit {

using nlohmann::json;

StructureKind parse_structure(std::string_view name) {
    if (name == "chain") return StructureKind::Chain;
    if (name == "fork") return StructureKind::Fork;
    if (name == "collider") return StructureKind::Collider;
    throw ConfigError("unknown structure '" + std::string(name) + "' (expected chain|fork|collider)");
}

std::string to_string(StructureKind kind) {
    switch (kind) {
        case StructureKind::Chain: return "chain";
        case StructureKind::Fork: return "fork";
        case StructureKind::Collider: return "collider";
    }
    return "?";
}

Scm::Scm(std::vector<ScmNode> nodes, NodeId outcome)
    : nodes_(std::move(nodes)), outcome_(std::move(outcome)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        index_.emplace(nodes_[i].name, i);  // first declaration wins on duplicates
    }
}

bool Scm::contains(const NodeId& id) const { return index_.count(id) > 0; }

const ScmNode& Scm::node(const NodeId& id) const { return nodes_[index_of(id)]; }

std::size_t Scm::index_of(const NodeId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw ConfigError("unknown node '" + id + "'");
    return it->second;
}

std::vector<NodeId> Scm::feature_names() const {
    std::vector<NodeId> out;
    for (const auto& n : nodes_) {
        if (n.name != outcome_) out.push_back(n.name);
    }
    return out;
}

ValidationReport Scm::validate() const {
    ValidationReport report;
    auto flag = [&](std::string msg) { report.violations.push_back(std::move(msg)); };

    std::set<NodeId> seen;
    for (const auto& n : nodes_) {
        if (n.name.empty()) flag("empty node name");
        if (!seen.insert(n.name).second) flag("duplicate node '" + n.name + "'");

        switch (n.noise.kind) {
            case NoiseSpec::Kind::Gaussian:
                if (!(n.noise.sigma > 0)) flag("node '" + n.name + "': sigma must be > 0");
                break;
            case NoiseSpec::Kind::Bernoulli:
                if (n.noise.p < 0 || n.noise.p > 1) flag("node '" + n.name + "': p must be in [0, 1]");
                break;
        }

        std::set<NodeId> parents;
        for (const auto& [parent, coeff] : n.equation.parent_terms) {
            (void)coeff;
            if (!parents.insert(parent).second) {
                flag("node '" + n.name + "': duplicate parent '" + parent + "'");
            }
            if (parent == n.name) flag("node '" + n.name + "': self-parent");
            if (!contains(parent)) {
                flag("node '" + n.name + "': unknown parent '" + parent + "'");
            }
        }
    }

    if (!contains(outcome_)) flag("outcome node '" + outcome_ + "' not declared");

    // Kahn's algorithm over declared parents only; anything left over sits on
    // a cycle.
    std::vector<bool> placed(nodes_.size(), false);
    std::size_t placed_count = 0;
    bool progress = true;
    while (progress) {
        progress = false;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (placed[i]) continue;
            bool ready = true;
            for (const auto& [parent, coeff] : nodes_[i].equation.parent_terms) {
                (void)coeff;
                auto it = index_.find(parent);
                if (it != index_.end() && it->second != i && !placed[it->second]) {
                    ready = false;
                    break;
                }
            }
            if (ready) {
                placed[i] = true;
                ++placed_count;
                progress = true;
            }
        }
    }
    if (placed_count != nodes_.size()) {
        std::vector<std::string> cyclic;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (!placed[i]) cyclic.push_back(nodes_[i].name);
        }
        flag("cycle detected among {" + detail::join(cyclic, ", ") + "}");
    }

    return report;
}

std::vector<NodeId> Scm::topo_order() const {
    std::vector<NodeId> order;
    order.reserve(nodes_.size());
    std::vector<bool> placed(nodes_.size(), false);

    // O(n^2) scan keeps ties in declaration order; node counts are tiny.
    for (std::size_t step = 0; step < nodes_.size(); ++step) {
        bool found = false;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (placed[i]) continue;
            bool ready = true;
            for (const auto& [parent, coeff] : nodes_[i].equation.parent_terms) {
                (void)coeff;
                auto it = index_.find(parent);
                if (it == index_.end()) {
                    throw ConfigError("node '" + nodes_[i].name + "' references unknown parent '" +
                                      parent + "'");
                }
                if (!placed[it->second]) {
                    ready = false;
                    break;
                }
            }
            if (ready) {
                placed[i] = true;
                order.push_back(nodes_[i].name);
                found = true;
                break;
            }
        }
        if (!found) throw ConfigError("not a DAG");
    }
    return order;
}

double eval_node(const StructuralEquation& eq, const ValueMap& parent_values, double noise) {
    double v = eq.intercept;
    for (const auto& [parent, coeff] : eq.parent_terms) {
        auto it = parent_values.find(parent);
        if (it == parent_values.end()) throw ConfigError("missing value for parent '" + parent + "'");
        v += coeff * it->second;
    }
    return v + noise;
}

namespace {

json noise_to_json(const NoiseSpec& noise) {
    json j;
    switch (noise.kind) {
        case NoiseSpec::Kind::Gaussian:
            j["kind"] = "gaussian";
            j["mu"] = noise.mu;
            j["sigma"] = noise.sigma;
            break;
        case NoiseSpec::Kind::Bernoulli:
            j["kind"] = "bernoulli";
            j["p"] = noise.p;
            break;
    }
    return j;
}

NoiseSpec noise_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gaussian") {
        return NoiseSpec::gaussian(j.at("mu").get<double>(), j.at("sigma").get<double>());
    }
    if (kind == "bernoulli") {
        return NoiseSpec::bernoulli(j.at("p").get<double>());
    }
    throw ConfigError("unknown noise kind '" + kind + "'");
}

}  // namespace

std::string Scm::to_json() const {
    json j;
    j["outcome"] = outcome_;
    json nodes = json::array();
    for (const auto& n : nodes_) {
        json nj;
        nj["name"] = n.name;
        nj["noise"] = noise_to_json(n.noise);
        nj["intercept"] = n.equation.intercept;
        json parents = json::array();
        for (const auto& [parent, coeff] : n.equation.parent_terms) {
            parents.push_back(json{{"name", parent}, {"coeff", coeff}});
        }
        nj["parents"] = parents;
        if (n.intervened) nj["intervened"] = true;
        nodes.push_back(nj);
    }
    j["nodes"] = nodes;
    return j.dump(2);
}

Scm Scm::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid SCM JSON: ") + e.what());
    }
    try {
        std::vector<ScmNode> nodes;
        for (const auto& nj : j.at("nodes")) {
            ScmNode n;
            n.name = nj.at("name").get<std::string>();
            n.noise = noise_from_json(nj.at("noise"));
            n.equation.intercept = nj.at("intercept").get<double>();
            for (const auto& pj : nj.at("parents")) {
                n.equation.parent_terms.emplace_back(pj.at("name").get<std::string>(),
                                                     pj.at("coeff").get<double>());
            }
            n.intervened = nj.value("intervened", false);
            nodes.push_back(std::move(n));
        }
        return Scm(std::move(nodes), j.at("outcome").get<std::string>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid SCM JSON: ") + e.what());
    }
}

void Scm::save(const std::filesystem::path& path) const { detail::write_file(path, to_json() + "\n"); }

Scm Scm::load(const std::filesystem::path& path) { return from_json(detail::read_file(path)); }

std::string Scm::digest() const { return detail::hex64(detail::fnv1a64(to_json())); }

namespace {

// y keeps the same coefficients in every structure; the collider just drops
// the x3 term.
StructuralEquation outcome_equation(bool include_x3) {
    StructuralEquation eq;
    eq.intercept = 0.4;
    eq.parent_terms = {{"x1", 0.6}, {"x2", 0.4}};
    if (include_x3) eq.parent_terms.emplace_back("x3", 0.6);
    eq.parent_terms.emplace_back("x4", 0.7);
    eq.parent_terms.emplace_back("x5", 0.4);
    eq.parent_terms.emplace_back("x6", 0.4);
    return eq;
}

ScmNode root(NodeId name, NoiseSpec noise) { return ScmNode{std::move(name), noise, {}, false}; }

ScmNode derived(NodeId name, std::vector<std::pair<NodeId, double>> parents) {
    ScmNode n;
    n.name = std::move(name);
    n.noise = NoiseSpec::gaussian(0.0, 1.0);
    n.equation.parent_terms = std::move(parents);
    return n;
}

}  // namespace

Scm preset(StructureKind kind) {
    std::vector<ScmNode> nodes;
    nodes.push_back(root("x1", NoiseSpec::gaussian(50.0, 5.0)));
    nodes.push_back(root("x2", NoiseSpec::gaussian(20.0, 1.0)));

    switch (kind) {
        case StructureKind::Chain:
            nodes.push_back(derived("x3", {{"x7", 0.4}}));
            break;
        case StructureKind::Fork:
            nodes.push_back(root("x3", NoiseSpec::gaussian(45.0, 6.0)));
            break;
        case StructureKind::Collider:
            nodes.push_back(derived("x3", {{"x7", 0.4}, {"y", 0.6}}));
            break;
    }

    nodes.push_back(root("x4", NoiseSpec::bernoulli(0.6)));
    nodes.push_back(root("x5", NoiseSpec::bernoulli(0.3)));
    nodes.push_back(root("x6", NoiseSpec::gaussian(70.0, 5.0)));

    if (kind == StructureKind::Fork) {
        nodes.push_back(derived("x7", {{"x3", 0.4}}));
    } else {
        nodes.push_back(root("x7", NoiseSpec::gaussian(50.0, 5.0)));
    }

    ScmNode y;
    y.name = "y";
    y.noise = NoiseSpec::gaussian(0.0, 1.0);
    y.equation = outcome_equation(kind != StructureKind::Collider);
    nodes.push_back(std::move(y));

    return Scm(std::move(nodes), "y");
}

}  // namespace ceaudit
