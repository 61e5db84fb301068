#include "ceaudit/sampler.hpp"

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ceaudit/errors.hpp"
#include "ceaudit/rng.hpp"
#include "text_util.hpp"

namespace ceaudit {

using nlohmann::json;

ValueMap Unit::full_values(const NodeId& outcome) const {
    ValueMap all = values;
    all[outcome] = y;
    return all;
}

int label(double y, double threshold) { return y >= threshold ? 1 : 0; }

namespace {

double draw_noise(const NoiseSpec& spec, rng::SplitMix64& stream) {
    switch (spec.kind) {
        case NoiseSpec::Kind::Gaussian: return rng::gaussian(stream, spec.mu, spec.sigma);
        case NoiseSpec::Kind::Bernoulli: return rng::bernoulli(stream, spec.p);
    }
    return 0.0;
}

}  // namespace

Dataset sample_dataset(const Scm& scm, std::size_t n, std::uint64_t seed) {
    if (n < 2) throw ConfigError("need n >= 2 to define a mean threshold");
    const auto report = scm.validate();
    if (!report.ok()) {
        throw ConfigError("invalid SCM: " + detail::join(report.violations, "; "));
    }

    const auto order = scm.topo_order();
    const NodeId& outcome = scm.outcome();

    Dataset ds;
    ds.seed = seed;
    ds.scm_digest = scm.digest();
    ds.feature_order = scm.feature_names();
    ds.units.resize(n);

    double y_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ValueMap values;
        for (const NodeId& name : order) {
            const ScmNode& node = scm.node(name);
            double v;
            if (node.intervened) {
                v = node.equation.intercept;
            } else {
                // Stream keyed by declaration index, not topo position, so the
                // same node always sees the same draws.
                auto stream = rng::derive_stream(seed, i, scm.index_of(name));
                v = eval_node(node.equation, values, draw_noise(node.noise, stream));
            }
            values[name] = v;
        }
        Unit& u = ds.units[i];
        u.y = values[outcome];
        values.erase(outcome);
        u.values = std::move(values);
        y_sum += u.y;
    }

    ds.threshold = y_sum / static_cast<double>(n);
    for (Unit& u : ds.units) u.label = label(u.y, ds.threshold);
    return ds;
}

namespace {

std::string unit_row(const Unit& u, const std::vector<NodeId>& order) {
    std::vector<std::string> cells;
    cells.reserve(order.size() + 2);
    for (const NodeId& f : order) {
        auto it = u.values.find(f);
        if (it == u.values.end()) throw ConfigError("unit missing feature '" + f + "'");
        cells.push_back(detail::fmt_g17(it->second));
    }
    cells.push_back(detail::fmt_g17(u.y));
    cells.push_back(std::to_string(u.label));
    return detail::join(cells, ",");
}

}  // namespace

std::string Dataset::digest() const {
    std::string blob = scm_digest + "|" + std::to_string(seed) + "|" + detail::fmt_g17(threshold);
    for (const Unit& u : units) blob += "\n" + unit_row(u, feature_order);
    return detail::hex64(detail::fnv1a64(blob));
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p += ".meta.json";
    return p;
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& csv_path) {
    std::vector<std::string> header(ds.feature_order.begin(), ds.feature_order.end());
    header.push_back("y");
    header.push_back("class");

    std::string csv = detail::join(header, ",") + "\n";
    for (const Unit& u : ds.units) csv += unit_row(u, ds.feature_order) + "\n";
    detail::write_file(csv_path, csv);

    json meta;
    meta["seed"] = ds.seed;
    meta["n"] = ds.units.size();
    meta["threshold"] = ds.threshold;
    meta["scm_digest"] = ds.scm_digest;
    detail::write_file(sidecar_path(csv_path), meta.dump(2) + "\n");
}

Dataset read_dataset_csv(const std::filesystem::path& csv_path) {
    const std::string text = detail::read_file(csv_path);

    json meta;
    try {
        meta = json::parse(detail::read_file(sidecar_path(csv_path)));
    } catch (const json::exception& e) {
        throw ConfigError("invalid dataset sidecar: " + std::string(e.what()));
    }

    Dataset ds;
    ds.seed = meta.at("seed").get<std::uint64_t>();
    ds.threshold = meta.at("threshold").get<double>();
    ds.scm_digest = meta.at("scm_digest").get<std::string>();

    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty dataset CSV " + csv_path.string());
    auto header = detail::split(line, ',');
    if (header.size() < 3 || header[header.size() - 2] != "y" || header.back() != "class") {
        throw ConfigError("dataset CSV must end with columns y,class");
    }
    ds.feature_order.assign(header.begin(), header.end() - 2);

    std::size_t row = 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = detail::split(line, ',');
        if (cells.size() != header.size()) {
            throw ConfigError("dataset CSV row " + std::to_string(row) + ": expected " +
                              std::to_string(header.size()) + " cells");
        }
        Unit u;
        for (std::size_t i = 0; i < ds.feature_order.size(); ++i) {
            u.values[ds.feature_order[i]] =
                detail::parse_double(cells[i], "dataset row " + std::to_string(row));
        }
        u.y = detail::parse_double(cells[cells.size() - 2], "dataset row " + std::to_string(row));
        u.label = static_cast<int>(
            detail::parse_int(cells.back(), "dataset row " + std::to_string(row)));
        if (u.label != label(u.y, ds.threshold)) {
            throw ConfigError("dataset row " + std::to_string(row) +
                              ": class inconsistent with threshold");
        }
        ds.units.push_back(std::move(u));
        ++row;
    }
    if (meta.at("n").get<std::size_t>() != ds.units.size()) {
        throw ConfigError("dataset sidecar n does not match row count");
    }
    return ds;
}

}  // namespace ceaudit
