#include "ceaudit/pcm.hpp"

#include <cmath>

#include "ceaudit/errors.hpp"
#include "text_util.hpp"

namespace ceaudit {

NoiseAssignment abduct(const Scm& scm, const Unit& unit) {
    const ValueMap observed = unit.full_values(scm.outcome());
    NoiseAssignment noise;
    for (const NodeId& name : scm.topo_order()) {
        const ScmNode& node = scm.node(name);
        auto it = observed.find(name);
        if (it == observed.end()) throw ConfigError("unit has no observed value for '" + name + "'");
        // Linear-additive with unit noise coefficient: u is exact and unique.
        noise[name] = it->second - eval_node(node.equation, observed, 0.0);
    }
    return noise;
}

InterventionSet detect_interventions(const Unit& unit, const Counterfactual& ce, double eps) {
    if (!(eps > 0)) throw ConfigError("detect_interventions: eps must be > 0");
    InterventionSet iv;
    for (const auto& [name, cf_value] : ce.values) {
        auto it = unit.values.find(name);
        if (it == unit.values.end()) {
            throw ConfigError("counterfactual feature '" + name + "' not present in unit");
        }
        if (std::abs(cf_value - it->second) > eps) iv[name] = cf_value;
    }
    return iv;
}

Scm mutilate(const Scm& scm, const InterventionSet& iv) {
    for (const auto& [name, value] : iv) {
        (void)value;
        if (name == scm.outcome()) throw ConfigError("outcome intervention unsupported");
        if (!scm.contains(name)) throw ConfigError("intervention on unknown node '" + name + "'");
    }
    std::vector<ScmNode> nodes = scm.nodes();
    for (ScmNode& node : nodes) {
        auto it = iv.find(node.name);
        if (it == iv.end()) continue;
        node.equation.intercept = it->second;
        node.equation.parent_terms.clear();
        node.intervened = true;
    }
    return Scm(std::move(nodes), scm.outcome());
}

ValueMap predict_full(const Scm& mutilated, const NoiseAssignment& noise) {
    ValueMap values;
    for (const NodeId& name : mutilated.topo_order()) {
        const ScmNode& node = mutilated.node(name);
        if (node.intervened) {
            values[name] = node.equation.intercept;
            continue;
        }
        auto it = noise.find(name);
        if (it == noise.end()) throw ConfigError("no abducted noise for node '" + name + "'");
        values[name] = eval_node(node.equation, values, it->second);
    }
    return values;
}

Verdict validate_ce(const Scm& scm, const Unit& unit, const Counterfactual& ce, double threshold,
                    double eps) {
    Verdict v;
    v.factual_y = unit.y;
    v.factual_class = label(unit.y, threshold);
    v.ce_class = ce.predicted_class;

    const NoiseAssignment noise = abduct(scm, unit);
    v.interventions = detect_interventions(unit, ce, eps);
    const ValueMap counterfactual = predict_full(mutilate(scm, v.interventions), noise);

    v.pcm_y = counterfactual.at(scm.outcome());
    v.pcm_class = label(v.pcm_y, threshold);
    v.conflict = v.pcm_class != v.ce_class;
    return v;
}

namespace {

std::string interventions_cell(const InterventionSet& iv) {
    std::vector<std::string> parts;
    for (const auto& [name, value] : iv) parts.push_back(name + "=" + detail::fmt_g17(value));
    return detail::join(parts, ";");
}

InterventionSet parse_interventions_cell(const std::string& cell, const std::string& ctx) {
    InterventionSet iv;
    if (cell.empty()) return iv;
    for (const std::string& part : detail::split(cell, ';')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw ConfigError(ctx + ": bad intervention '" + part + "'");
        iv[part.substr(0, eq)] = detail::parse_double(part.substr(eq + 1), ctx);
    }
    return iv;
}

}  // namespace

void write_verdicts_csv(const std::vector<VerdictRecord>& records,
                        const std::filesystem::path& path) {
    std::string csv =
        "unit_id,ce_id,intervened_features,factual_y,factual_class,ce_class,pcm_y,pcm_class,"
        "conflict\n";
    for (const VerdictRecord& r : records) {
        const Verdict& v = r.verdict;
        std::vector<std::string> cells = {std::to_string(r.unit_id),
                                          std::to_string(r.ce_id),
                                          interventions_cell(v.interventions),
                                          detail::fmt_g17(v.factual_y),
                                          std::to_string(v.factual_class),
                                          std::to_string(v.ce_class),
                                          detail::fmt_g17(v.pcm_y),
                                          std::to_string(v.pcm_class),
                                          v.conflict ? "1" : "0"};
        csv += detail::join(cells, ",") + "\n";
    }
    detail::write_file(path, csv);
}

std::vector<VerdictRecord> read_verdicts_csv(const std::filesystem::path& path) {
    const std::string text = detail::read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty verdict CSV " + path.string());
    if (detail::split(line, ',').size() != 9) {
        throw ConfigError("unexpected verdict CSV header in " + path.string());
    }

    std::vector<VerdictRecord> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split(line, ',');
        if (cells.size() != 9) {
            throw ConfigError("verdict CSV row " + std::to_string(row) + ": wrong cell count");
        }
        const std::string ctx = "verdict CSV row " + std::to_string(row);
        VerdictRecord r;
        r.unit_id = static_cast<std::size_t>(detail::parse_int(cells[0], ctx));
        r.ce_id = static_cast<std::size_t>(detail::parse_int(cells[1], ctx));
        r.verdict.interventions = parse_interventions_cell(cells[2], ctx);
        r.verdict.factual_y = detail::parse_double(cells[3], ctx);
        r.verdict.factual_class = static_cast<int>(detail::parse_int(cells[4], ctx));
        r.verdict.ce_class = static_cast<int>(detail::parse_int(cells[5], ctx));
        r.verdict.pcm_y = detail::parse_double(cells[6], ctx);
        r.verdict.pcm_class = static_cast<int>(detail::parse_int(cells[7], ctx));
        r.verdict.conflict = detail::parse_int(cells[8], ctx) != 0;
        out.push_back(std::move(r));
        ++row;
    }
    return out;
}

}  // namespace ceaudit
