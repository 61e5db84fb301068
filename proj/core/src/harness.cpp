#include "ceaudit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#include "ceaudit/errors.hpp"
#include "ceaudit/rng.hpp"
#include "text_util.hpp"

namespace ceaudit {

using nlohmann::json;

CeMethod parse_method(std::string_view name) {
    if (name == "dice") return CeMethod::Dice;
    if (name == "wachter") return CeMethod::Wachter;
    throw ConfigError("unknown method '" + std::string(name) + "' (expected dice|wachter)");
}

std::string to_string(CeMethod method) {
    return method == CeMethod::Dice ? "dice" : "wachter";
}

Scm ExperimentConfig::resolve_scm() const {
    if (structure) return preset(*structure);
    if (!scm_file.empty()) return Scm::load(scm_file);
    throw ConfigError("experiment config needs either a structure or an SCM file");
}

void ExperimentConfig::check() const {
    if (!structure && scm_file.empty()) {
        throw ConfigError("experiment config needs either a structure or an SCM file");
    }
    if (n_samples < 2) throw ConfigError("n_samples must be >= 2");
    if (n_units > n_samples) throw ConfigError("n_units must be <= n_samples");
    if (k_per_unit < 1) throw ConfigError("k_per_unit must be >= 1");
    if (!(eps > 0)) throw ConfigError("eps must be > 0");
    if (threads < 1) throw ConfigError("threads must be >= 1");
}

void ExperimentConfig::apply_scale(std::string_view scale) {
    if (scale == "paper") {
        n_samples = 1000;
        n_units = 5;
        k_per_unit = 2;
    } else if (scale == "large") {
        n_samples = 2000;
        n_units = 500;
        k_per_unit = 1;
    } else {
        throw ConfigError("unknown scale '" + std::string(scale) + "' (expected paper|large)");
    }
}

std::string ExperimentConfig::to_json() const {
    json j;
    if (structure) j["structure"] = ceaudit::to_string(*structure);
    if (!scm_file.empty()) j["scm_file"] = scm_file;
    j["n_samples"] = n_samples;
    j["n_units"] = n_units;
    j["k_per_unit"] = k_per_unit;
    j["method"] = ceaudit::to_string(method);
    j["seed"] = seed;
    j["train"] = {{"learning_rate", train.learning_rate},
                  {"max_epochs", train.max_epochs},
                  {"convergence_tol", train.convergence_tol},
                  {"l2_penalty", train.l2_penalty}};
    j["lambda"] = lambda;
    j["lambda1"] = lambda1;
    j["lambda2"] = lambda2;
    j["budget"] = {{"restarts", budget.restarts},
                   {"max_iters", budget.max_iters},
                   {"step", budget.step}};
    j["eps"] = eps;
    if (!out_dir.empty()) j["out_dir"] = out_dir;
    j["threads"] = threads;
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid experiment config JSON: ") + e.what());
    }
    try {
        ExperimentConfig cfg;
        if (j.contains("scale")) cfg.apply_scale(j.at("scale").get<std::string>());
        if (j.contains("structure")) cfg.structure = parse_structure(j.at("structure").get<std::string>());
        cfg.scm_file = j.value("scm_file", std::string{});
        cfg.n_samples = j.value("n_samples", cfg.n_samples);
        cfg.n_units = j.value("n_units", cfg.n_units);
        cfg.k_per_unit = j.value("k_per_unit", cfg.k_per_unit);
        if (j.contains("method")) cfg.method = parse_method(j.at("method").get<std::string>());
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("train")) {
            const json& t = j.at("train");
            cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
            cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
            cfg.train.convergence_tol = t.value("convergence_tol", cfg.train.convergence_tol);
            cfg.train.l2_penalty = t.value("l2_penalty", cfg.train.l2_penalty);
        }
        cfg.lambda = j.value("lambda", cfg.lambda);
        cfg.lambda1 = j.value("lambda1", cfg.lambda1);
        cfg.lambda2 = j.value("lambda2", cfg.lambda2);
        if (j.contains("budget")) {
            const json& b = j.at("budget");
            cfg.budget.restarts = b.value("restarts", cfg.budget.restarts);
            cfg.budget.max_iters = b.value("max_iters", cfg.budget.max_iters);
            cfg.budget.step = b.value("step", cfg.budget.step);
        }
        cfg.eps = j.value("eps", cfg.eps);
        cfg.out_dir = j.value("out_dir", cfg.out_dir);
        cfg.threads = j.value("threads", cfg.threads);
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid experiment config JSON: ") + e.what());
    }
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    return from_json(detail::read_file(path));
}

void ExperimentReport::recompute_summary() {
    conflict_count = 0;
    total_ces = 0;
    non_converged = 0;
    for (const UnitBlock& block : units) {
        for (const CeRow& row : block.ces) {
            if (!row.ce.converged) {
                ++non_converged;
                continue;
            }
            ++total_ces;
            if (row.verdict.conflict) ++conflict_count;
        }
    }
    if (total_ces > 0) {
        conflict_rate = static_cast<double>(conflict_count) / static_cast<double>(total_ces);
    } else {
        conflict_rate.reset();
    }
}

namespace {

std::uint64_t unit_seed(std::uint64_t master, std::size_t unit_id) {
    return rng::derive_stream(master, unit_id, 0xce5eedULL).next();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.check();
    const auto t_start = std::chrono::steady_clock::now();

    const Scm scm = cfg.resolve_scm();
    const auto validation = scm.validate();
    if (!validation.ok()) {
        throw ConfigError("invalid SCM: " + detail::join(validation.violations, "; "));
    }

    ExperimentReport report;
    report.config = cfg;
    report.structure_name =
        cfg.structure ? to_string(*cfg.structure) : "scm:" + scm.digest().substr(0, 8);
    report.scm_digest = scm.digest();

    auto t0 = std::chrono::steady_clock::now();
    const Dataset ds = sample_dataset(scm, cfg.n_samples, cfg.seed);
    report.timings.sample_s = seconds_since(t0);
    report.threshold = ds.threshold;
    report.feature_order = ds.feature_order;

    t0 = std::chrono::steady_clock::now();
    const LogisticModel model = fit(ds, cfg.train);
    report.timings.fit_s = seconds_since(t0);
    report.train_accuracy = accuracy(model, ds);

    t0 = std::chrono::steady_clock::now();
    report.units.resize(cfg.n_units);

    // Per-unit work is independent and seeded per unit, so any schedule
    // produces the same blocks.
    auto process_unit = [&](std::size_t i) {
        const Unit& unit = ds.units[i];
        UnitBlock block;
        block.unit_id = i;
        block.unit = unit;
        block.noise = abduct(scm, unit);

        CeRequest req = make_request(ds, unit, cfg.k_per_unit, unit_seed(cfg.seed, i));
        req.lambda = cfg.lambda;
        req.lambda1 = cfg.lambda1;
        req.lambda2 = cfg.lambda2;
        req.budget = cfg.budget;

        std::vector<Counterfactual> ces;
        if (cfg.method == CeMethod::Dice) {
            ces = dice_generate(model, req);
        } else {
            for (int j = 0; j < cfg.k_per_unit; ++j) {
                CeRequest single = req;
                single.k = 1;
                single.seed = rng::derive_stream(req.seed, static_cast<std::uint64_t>(j), 0).next();
                ces.push_back(wachter_generate(model, single));
            }
        }

        for (std::size_t j = 0; j < ces.size(); ++j) {
            CeRow row;
            row.ce_id = j;
            row.ce = ces[j];
            row.verdict = validate_ce(scm, unit, ces[j], ds.threshold, cfg.eps);
            for (const auto& [name, value] : row.verdict.interventions) {
                (void)value;
                row.changed.push_back(name);
            }
            block.ces.push_back(std::move(row));
        }
        report.units[i] = std::move(block);
    };

    if (cfg.threads <= 1 || cfg.n_units < 2) {
        for (std::size_t i = 0; i < cfg.n_units; ++i) process_unit(i);
    } else {
        std::atomic<std::size_t> next{0};
        const std::size_t hw = std::min<std::size_t>(cfg.threads, cfg.n_units);
        std::vector<std::thread> pool;
        pool.reserve(hw);
        for (std::size_t t = 0; t < hw; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < cfg.n_units; i = next.fetch_add(1)) {
                    process_unit(i);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    report.timings.explain_s = seconds_since(t0);

    report.recompute_summary();
    report.timings.total_s = seconds_since(t_start);

    if (!cfg.out_dir.empty()) {
        const std::filesystem::path dir(cfg.out_dir);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create output directory " + dir.string());

        scm.save(dir / "scm.json");
        write_dataset_csv(ds, dir / "dataset.csv");
        model.save(dir / "model.json");

        std::vector<CeRecord> ce_records;
        std::vector<VerdictRecord> verdict_records;
        for (const UnitBlock& block : report.units) {
            for (const CeRow& row : block.ces) {
                ce_records.push_back({block.unit_id, row.ce_id, row.ce});
                verdict_records.push_back({block.unit_id, row.ce_id, row.verdict});
            }
        }
        write_ces_csv(ce_records, ds.feature_order, dir / "ces.csv");
        write_verdicts_csv(verdict_records, dir / "verdicts.csv");
    }

    return report;
}

ConflictSummary conflict_summary(const std::vector<ExperimentReport>& reports) {
    ConflictSummary summary;
    summary.pooled.name = "pooled";
    for (const ExperimentReport& r : reports) {
        ConflictSummary::Row row;
        row.name = r.structure_name;
        row.conflicts = r.conflict_count;
        row.total = r.total_ces;
        if (row.total > 0) {
            row.rate = static_cast<double>(row.conflicts) / static_cast<double>(row.total);
        }
        summary.pooled.conflicts += row.conflicts;
        summary.pooled.total += row.total;
        summary.per_structure.push_back(std::move(row));
    }
    if (summary.pooled.total > 0) {
        summary.pooled.rate = static_cast<double>(summary.pooled.conflicts) /
                              static_cast<double>(summary.pooled.total);
    }
    return summary;
}

ReportFormat parse_format(std::string_view name) {
    if (name == "markdown" || name == "md") return ReportFormat::Markdown;
    if (name == "csv") return ReportFormat::Csv;
    if (name == "json") return ReportFormat::Json;
    throw ConfigError("unknown format '" + std::string(name) + "' (expected markdown|csv|json)");
}

namespace {

json value_map_to_json(const ValueMap& m) {
    json j = json::object();
    for (const auto& [k, v] : m) j[k] = v;
    return j;
}

ValueMap value_map_from_json(const json& j) {
    ValueMap m;
    for (auto it = j.begin(); it != j.end(); ++it) m[it.key()] = it.value().get<double>();
    return m;
}

json report_to_json(const ExperimentReport& r) {
    json j;
    j["structure"] = r.structure_name;
    j["scm_digest"] = r.scm_digest;
    j["threshold"] = r.threshold;
    j["train_accuracy"] = r.train_accuracy;
    j["feature_order"] = r.feature_order;

    json units = json::array();
    for (const UnitBlock& block : r.units) {
        json bj;
        bj["unit_id"] = block.unit_id;
        bj["features"] = value_map_to_json(block.unit.values);
        bj["y"] = block.unit.y;
        bj["class"] = block.unit.label;
        bj["noise"] = value_map_to_json(block.noise);
        json ces = json::array();
        for (const CeRow& row : block.ces) {
            json cj;
            cj["ce_id"] = row.ce_id;
            cj["values"] = value_map_to_json(row.ce.values);
            cj["predicted_class"] = row.ce.predicted_class;
            cj["predicted_proba"] = row.ce.predicted_proba;
            cj["objective"] = row.ce.objective;
            cj["converged"] = row.ce.converged;
            cj["changed"] = row.changed;
            cj["verdict"] = {{"pcm_y", row.verdict.pcm_y},
                             {"pcm_class", row.verdict.pcm_class},
                             {"ce_class", row.verdict.ce_class},
                             {"factual_y", row.verdict.factual_y},
                             {"factual_class", row.verdict.factual_class},
                             {"conflict", row.verdict.conflict},
                             {"interventions", value_map_to_json(row.verdict.interventions)}};
            ces.push_back(std::move(cj));
        }
        bj["ces"] = std::move(ces);
        units.push_back(std::move(bj));
    }
    j["units"] = std::move(units);

    json summary;
    summary["conflict_count"] = r.conflict_count;
    summary["total_ces"] = r.total_ces;
    summary["non_converged"] = r.non_converged;
    if (r.conflict_rate) {
        summary["conflict_rate"] = *r.conflict_rate;
    } else {
        summary["conflict_rate"] = nullptr;
    }
    j["summary"] = std::move(summary);
    j["config"] = json::parse(r.config.to_json());
    return j;
}

ExperimentReport report_from_json(const json& j) {
    ExperimentReport r;
    r.structure_name = j.at("structure").get<std::string>();
    r.scm_digest = j.at("scm_digest").get<std::string>();
    r.threshold = j.at("threshold").get<double>();
    r.train_accuracy = j.at("train_accuracy").get<double>();
    r.feature_order = j.at("feature_order").get<std::vector<NodeId>>();
    r.config = ExperimentConfig::from_json(j.at("config").dump());

    for (const json& bj : j.at("units")) {
        UnitBlock block;
        block.unit_id = bj.at("unit_id").get<std::size_t>();
        block.unit.values = value_map_from_json(bj.at("features"));
        block.unit.y = bj.at("y").get<double>();
        block.unit.label = bj.at("class").get<int>();
        block.noise = value_map_from_json(bj.at("noise"));
        for (const json& cj : bj.at("ces")) {
            CeRow row;
            row.ce_id = cj.at("ce_id").get<std::size_t>();
            row.ce.values = value_map_from_json(cj.at("values"));
            row.ce.predicted_class = cj.at("predicted_class").get<int>();
            row.ce.predicted_proba = cj.at("predicted_proba").get<double>();
            row.ce.objective = cj.at("objective").get<double>();
            row.ce.converged = cj.at("converged").get<bool>();
            row.changed = cj.at("changed").get<std::vector<NodeId>>();
            const json& vj = cj.at("verdict");
            row.verdict.pcm_y = vj.at("pcm_y").get<double>();
            row.verdict.pcm_class = vj.at("pcm_class").get<int>();
            row.verdict.ce_class = vj.at("ce_class").get<int>();
            row.verdict.factual_y = vj.at("factual_y").get<double>();
            row.verdict.factual_class = vj.at("factual_class").get<int>();
            row.verdict.conflict = vj.at("conflict").get<bool>();
            row.verdict.interventions = value_map_from_json(vj.at("interventions"));
            block.ces.push_back(std::move(row));
        }
        r.units.push_back(std::move(block));
    }
    r.recompute_summary();
    return r;
}

std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string render_markdown(const ExperimentReport& r) {
    std::string md;
    md += "# Counterfactual audit: " + r.structure_name + "\n\n";
    md += "- SCM digest: `" + r.scm_digest + "`\n";
    md += "- labeling threshold (mean y): " + short_num(r.threshold) + "\n";
    md += "- training accuracy: " + short_num(r.train_accuracy) + "\n";
    md += "- method: " + to_string(r.config.method) + ", seed " + std::to_string(r.config.seed) +
          ", " + std::to_string(r.config.n_samples) + " samples, " +
          std::to_string(r.units.size()) + " units x " + std::to_string(r.config.k_per_unit) +
          " CEs\n\n";

    for (const UnitBlock& block : r.units) {
        md += "## Unit " + std::to_string(block.unit_id) + "\n\n";
        md += "| Item |";
        for (const NodeId& f : r.feature_order) md += " " + f + " |";
        md += " y | class | class (PCM) | y (PCM) |\n";
        md += "|---|";
        for (std::size_t i = 0; i < r.feature_order.size() + 4; ++i) md += "---|";
        md += "\n";

        md += "| unit |";
        for (const NodeId& f : r.feature_order) md += " " + short_num(block.unit.values.at(f)) + " |";
        md += " " + short_num(block.unit.y) + " | " + std::to_string(block.unit.label) +
              " | - | - |\n";

        md += "| U |";
        for (const NodeId& f : r.feature_order) {
            auto it = block.noise.find(f);
            md += it == block.noise.end() ? " - |" : " " + short_num(it->second) + " |";
        }
        // outcome noise lands in the y column
        double u_y = 0.0;
        for (const auto& [name, value] : block.noise) {
            if (!block.unit.values.count(name)) u_y = value;
        }
        md += " " + short_num(u_y) + " | - | - | - |\n";

        for (const CeRow& row : block.ces) {
            std::string item = "CE" + std::to_string(row.ce_id);
            if (!row.ce.converged) item += " (not converged)";
            if (row.ce.converged && row.verdict.conflict) item += " **CONFLICT**";
            md += "| " + item + " |";
            for (const NodeId& f : r.feature_order) {
                const bool changed =
                    std::find(row.changed.begin(), row.changed.end(), f) != row.changed.end();
                const std::string cell = short_num(row.ce.values.at(f));
                md += changed ? " **" + cell + "** |" : " " + cell + " |";
            }
            md += " - | " + std::to_string(row.ce.predicted_class) + " | " +
                  std::to_string(row.verdict.pcm_class) + " | " + short_num(row.verdict.pcm_y) +
                  " |\n";
        }
        md += "\n";
    }

    md += "## Summary\n\n";
    md += "- converged CEs: " + std::to_string(r.total_ces) + "\n";
    md += "- non-converged CEs: " + std::to_string(r.non_converged) + "\n";
    md += "- conflicts: " + std::to_string(r.conflict_count) + "\n";
    md += "- conflict rate: " + (r.conflict_rate ? short_num(*r.conflict_rate) : "n/a") + "\n\n";
    md += "## Config\n\n```json\n" + r.config.to_json() + "\n```\n";
    return md;
}

// The outcome node is whichever noise key is not a feature.
std::string outcome_name_of(const ExperimentReport& r) {
    for (const UnitBlock& block : r.units) {
        for (const auto& [name, value] : block.noise) {
            (void)value;
            if (!block.unit.values.count(name)) return name;
        }
    }
    return "y";
}

std::string render_csv(const ExperimentReport& r) {
    json meta;
    meta["structure"] = r.structure_name;
    meta["scm_digest"] = r.scm_digest;
    meta["threshold"] = r.threshold;
    meta["train_accuracy"] = r.train_accuracy;
    meta["feature_order"] = r.feature_order;
    meta["outcome"] = outcome_name_of(r);
    meta["config"] = json::parse(r.config.to_json());

    std::string csv = "# meta " + meta.dump() + "\n";
    std::vector<std::string> header = {"unit_id", "row", "ce_id"};
    header.insert(header.end(), r.feature_order.begin(), r.feature_order.end());
    for (const char* c : {"y", "class", "proba", "objective", "converged", "pcm_y", "pcm_class",
                          "conflict", "changed"}) {
        header.push_back(c);
    }
    csv += detail::join(header, ",") + "\n";

    auto row_cells = [&](std::size_t unit_id, const std::string& kind, const std::string& ce_id) {
        std::vector<std::string> cells(header.size());
        cells[0] = std::to_string(unit_id);
        cells[1] = kind;
        cells[2] = ce_id;
        return cells;
    };
    const std::size_t base = 3;
    const std::size_t m = r.feature_order.size();

    for (const UnitBlock& block : r.units) {
        auto cells = row_cells(block.unit_id, "unit", "");
        for (std::size_t j = 0; j < m; ++j) {
            cells[base + j] = detail::fmt_g17(block.unit.values.at(r.feature_order[j]));
        }
        cells[base + m] = detail::fmt_g17(block.unit.y);
        cells[base + m + 1] = std::to_string(block.unit.label);
        csv += detail::join(cells, ",") + "\n";

        cells = row_cells(block.unit_id, "noise", "");
        for (std::size_t j = 0; j < m; ++j) {
            auto it = block.noise.find(r.feature_order[j]);
            if (it != block.noise.end()) cells[base + j] = detail::fmt_g17(it->second);
        }
        for (const auto& [name, value] : block.noise) {
            if (!block.unit.values.count(name)) cells[base + m] = detail::fmt_g17(value);
        }
        csv += detail::join(cells, ",") + "\n";

        for (const CeRow& row : block.ces) {
            cells = row_cells(block.unit_id, "ce", std::to_string(row.ce_id));
            for (std::size_t j = 0; j < m; ++j) {
                cells[base + j] = detail::fmt_g17(row.ce.values.at(r.feature_order[j]));
            }
            cells[base + m + 1] = std::to_string(row.ce.predicted_class);
            cells[base + m + 2] = detail::fmt_g17(row.ce.predicted_proba);
            cells[base + m + 3] = detail::fmt_g17(row.ce.objective);
            cells[base + m + 4] = row.ce.converged ? "1" : "0";
            cells[base + m + 5] = detail::fmt_g17(row.verdict.pcm_y);
            cells[base + m + 6] = std::to_string(row.verdict.pcm_class);
            cells[base + m + 7] = row.verdict.conflict ? "1" : "0";
            std::vector<std::string> changed(row.changed.begin(), row.changed.end());
            cells[base + m + 8] = detail::join(changed, ";");
            csv += detail::join(cells, ",") + "\n";
        }
    }
    return csv;
}

ExperimentReport report_from_csv_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# meta ", 0) != 0) {
        throw ConfigError("report CSV must start with a '# meta' line");
    }
    json meta;
    try {
        meta = json::parse(line.substr(7));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid report CSV meta: ") + e.what());
    }

    ExperimentReport r;
    r.structure_name = meta.at("structure").get<std::string>();
    r.scm_digest = meta.at("scm_digest").get<std::string>();
    r.threshold = meta.at("threshold").get<double>();
    r.train_accuracy = meta.at("train_accuracy").get<double>();
    r.feature_order = meta.at("feature_order").get<std::vector<NodeId>>();
    const std::string outcome = meta.value("outcome", std::string("y"));
    r.config = ExperimentConfig::from_json(meta.at("config").dump());

    if (!std::getline(in, line)) throw ConfigError("report CSV missing header");
    const auto header = detail::split(line, ',');
    const std::size_t m = r.feature_order.size();
    if (header.size() != 3 + m + 9) throw ConfigError("report CSV header has wrong width");

    const std::size_t base = 3;
    std::size_t rowno = 2;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split(line, ',');
        if (cells.size() != header.size()) {
            throw ConfigError("report CSV row " + std::to_string(rowno) + ": wrong cell count");
        }
        const std::string ctx = "report CSV row " + std::to_string(rowno);
        const std::size_t unit_id = static_cast<std::size_t>(detail::parse_int(cells[0], ctx));
        const std::string& kind = cells[1];

        if (kind == "unit") {
            UnitBlock block;
            block.unit_id = unit_id;
            for (std::size_t j = 0; j < m; ++j) {
                block.unit.values[r.feature_order[j]] = detail::parse_double(cells[base + j], ctx);
            }
            block.unit.y = detail::parse_double(cells[base + m], ctx);
            block.unit.label = static_cast<int>(detail::parse_int(cells[base + m + 1], ctx));
            r.units.push_back(std::move(block));
        } else if (kind == "noise") {
            if (r.units.empty() || r.units.back().unit_id != unit_id) {
                throw ConfigError(ctx + ": noise row without its unit row");
            }
            UnitBlock& block = r.units.back();
            for (std::size_t j = 0; j < m; ++j) {
                if (!cells[base + j].empty()) {
                    block.noise[r.feature_order[j]] = detail::parse_double(cells[base + j], ctx);
                }
            }
            // the outcome's noise sits in the y column
            block.noise[outcome] = detail::parse_double(cells[base + m], ctx);
        } else if (kind == "ce") {
            if (r.units.empty() || r.units.back().unit_id != unit_id) {
                throw ConfigError(ctx + ": ce row without its unit row");
            }
            UnitBlock& block = r.units.back();
            CeRow row;
            row.ce_id = static_cast<std::size_t>(detail::parse_int(cells[2], ctx));
            for (std::size_t j = 0; j < m; ++j) {
                row.ce.values[r.feature_order[j]] = detail::parse_double(cells[base + j], ctx);
            }
            row.ce.predicted_class = static_cast<int>(detail::parse_int(cells[base + m + 1], ctx));
            row.ce.predicted_proba = detail::parse_double(cells[base + m + 2], ctx);
            row.ce.objective = detail::parse_double(cells[base + m + 3], ctx);
            row.ce.converged = detail::parse_int(cells[base + m + 4], ctx) != 0;
            row.verdict.pcm_y = detail::parse_double(cells[base + m + 5], ctx);
            row.verdict.pcm_class = static_cast<int>(detail::parse_int(cells[base + m + 6], ctx));
            row.verdict.conflict = detail::parse_int(cells[base + m + 7], ctx) != 0;
            if (!cells[base + m + 8].empty()) {
                for (const std::string& f : detail::split(cells[base + m + 8], ';')) {
                    row.changed.push_back(f);
                }
            }
            row.verdict.ce_class = row.ce.predicted_class;
            row.verdict.factual_y = block.unit.y;
            row.verdict.factual_class = block.unit.label;
            for (const NodeId& f : row.changed) {
                row.verdict.interventions[f] = row.ce.values.at(f);
            }
            block.ces.push_back(std::move(row));
        } else {
            throw ConfigError(ctx + ": unknown row kind '" + kind + "'");
        }
        ++rowno;
    }
    r.recompute_summary();
    return r;
}

}  // namespace

std::string render_report(const ExperimentReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::Markdown: return render_markdown(report);
        case ReportFormat::Csv: return render_csv(report);
        case ReportFormat::Json: return report_to_json(report).dump(2) + "\n";
    }
    throw ConfigError("unknown report format");
}

void emit_report(const ExperimentReport& report, ReportFormat format,
                 const std::filesystem::path& path) {
    detail::write_file(path, render_report(report, format));
}

ExperimentReport read_report_json(const std::filesystem::path& path) {
    try {
        return report_from_json(json::parse(detail::read_file(path)));
    } catch (const json::exception& e) {
        throw ConfigError("invalid report JSON in " + path.string() + ": " + e.what());
    }
}

ExperimentReport read_report_csv(const std::filesystem::path& path) {
    return report_from_csv_text(detail::read_file(path));
}

ExperimentReport read_report(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".json") return read_report_json(path);
    if (ext == ".csv") return read_report_csv(path);
    throw ConfigError("cannot infer report format from extension '" + ext + "'");
}

}  // namespace ceaudit
