#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ceaudit/ce_search.hpp"
#include "ceaudit/classifier.hpp"
#include "ceaudit/errors.hpp"
#include "ceaudit/harness.hpp"
#include "ceaudit/pcm.hpp"
#include "ceaudit/rng.hpp"
#include "ceaudit/sampler.hpp"
#include "ceaudit/scm.hpp"

namespace fs = std::filesystem;
using namespace ceaudit;

namespace {

Scm resolve_scm_arg(const std::string& structure, const std::string& scm_file) {
    if (!structure.empty() && !scm_file.empty()) {
        throw ConfigError("give either --structure or --scm, not both");
    }
    if (!structure.empty()) return preset(parse_structure(structure));
    if (!scm_file.empty()) {
        Scm scm = Scm::load(scm_file);
        const auto report = scm.validate();
        if (!report.ok()) {
            std::string msg = "SCM file " + scm_file + " is invalid:";
            for (const auto& v : report.violations) msg += "\n  - " + v;
            throw ConfigError(msg);
        }
        return scm;
    }
    throw ConfigError("one of --structure or --scm is required");
}

void cmd_generate(const std::string& structure, const std::string& scm_file, std::size_t n,
                  std::uint64_t seed, const std::string& out_dir) {
    const Scm scm = resolve_scm_arg(structure, scm_file);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir);

    const Dataset ds = sample_dataset(scm, n, seed);
    scm.save(fs::path(out_dir) / "scm.json");
    write_dataset_csv(ds, fs::path(out_dir) / "dataset.csv");
    std::cerr << "wrote " << ds.size() << " units, threshold " << ds.threshold << "\n";
}

void cmd_train(const std::string& data, const std::string& out, const TrainConfig& cfg) {
    const Dataset ds = read_dataset_csv(data);
    const LogisticModel model = fit(ds, cfg);
    model.save(out);
    std::cerr << "training accuracy " << accuracy(model, ds) << "\n";
}

void cmd_explain(const std::string& model_path, const std::string& data, std::size_t units, int k,
                 const std::string& method_name, std::uint64_t seed, double lambda, double lambda1,
                 double lambda2, const SearchBudget& budget, const std::string& out) {
    const LogisticModel model = LogisticModel::load(model_path);
    const Dataset ds = read_dataset_csv(data);
    const CeMethod method = parse_method(method_name);
    if (units > ds.size()) throw ConfigError("--units exceeds dataset size");

    std::vector<CeRecord> records;
    for (std::size_t i = 0; i < units; ++i) {
        CeRequest req = make_request(ds, ds.units[i], k,
                                     rng::derive_stream(seed, i, 0xce5eedULL).next());
        req.lambda = lambda;
        req.lambda1 = lambda1;
        req.lambda2 = lambda2;
        req.budget = budget;

        std::vector<Counterfactual> ces;
        if (method == CeMethod::Dice) {
            ces = dice_generate(model, req);
        } else {
            for (int j = 0; j < k; ++j) {
                CeRequest single = req;
                single.k = 1;
                single.seed = rng::derive_stream(req.seed, static_cast<std::uint64_t>(j), 0).next();
                ces.push_back(wachter_generate(model, single));
            }
        }
        for (std::size_t j = 0; j < ces.size(); ++j) records.push_back({i, j, ces[j]});
    }
    write_ces_csv(records, ds.feature_order, out);
    std::cerr << "wrote " << records.size() << " counterfactuals\n";
}

void cmd_validate(const std::string& scm_file, const std::string& data, const std::string& ces,
                  double eps, const std::string& out) {
    const Scm scm = resolve_scm_arg("", scm_file);
    const Dataset ds = read_dataset_csv(data);
    if (ds.scm_digest != scm.digest()) {
        std::cerr << "warning: dataset was generated from a different SCM (digest mismatch)\n";
    }
    const auto records = read_ces_csv(ces);

    std::vector<VerdictRecord> verdicts;
    for (const CeRecord& r : records) {
        if (r.unit_id >= ds.size()) {
            throw ConfigError("CE references unit " + std::to_string(r.unit_id) +
                              " beyond dataset size");
        }
        verdicts.push_back(
            {r.unit_id, r.ce_id, validate_ce(scm, ds.units[r.unit_id], r.ce, ds.threshold, eps)});
    }
    write_verdicts_csv(verdicts, out);

    std::size_t conflicts = 0;
    for (const auto& v : verdicts) conflicts += v.verdict.conflict ? 1 : 0;
    std::cerr << conflicts << "/" << verdicts.size() << " verdicts conflict\n";
}

void cmd_experiment(const std::string& config_path, const std::string& scale,
                    const std::string& out_dir, int threads) {
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    if (!scale.empty()) cfg.apply_scale(scale);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (threads > 0) cfg.threads = threads;

    const ExperimentReport report = run_experiment(cfg);

    if (!cfg.out_dir.empty()) {
        const fs::path dir(cfg.out_dir);
        emit_report(report, ReportFormat::Json, dir / "report.json");
        emit_report(report, ReportFormat::Csv, dir / "report.csv");
        emit_report(report, ReportFormat::Markdown, dir / "report.md");
    } else {
        std::cout << render_report(report, ReportFormat::Markdown);
    }

    std::fprintf(stderr,
                 "%s: %zu converged CEs, %zu conflicts, %zu non-converged (%.1fs total: "
                 "sample %.2fs, fit %.2fs, explain+validate %.2fs)\n",
                 report.structure_name.c_str(), report.total_ces, report.conflict_count,
                 report.non_converged, report.timings.total_s, report.timings.sample_s,
                 report.timings.fit_s, report.timings.explain_s);
}

void cmd_report(const std::string& in, const std::string& format, const std::string& out) {
    const ExperimentReport report = read_report(in);
    const ReportFormat fmt = parse_format(format);
    if (out.empty()) {
        std::cout << render_report(report, fmt);
    } else {
        emit_report(report, fmt, out);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generate counterfactual explanations and audit them against a ground-truth "
                 "structural causal model"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Sample a labeled dataset from an SCM");
    std::string g_structure, g_scm, g_out;
    std::size_t g_n = 1000;
    std::uint64_t g_seed = 0;
    gen->add_option("--structure", g_structure, "chain|fork|collider");
    gen->add_option("--scm", g_scm, "SCM JSON file");
    gen->add_option("--n", g_n, "number of units")->default_val(1000);
    gen->add_option("--seed", g_seed, "master seed")->default_val(0);
    gen->add_option("--out", g_out, "output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "Fit the logistic classifier on a dataset CSV");
    std::string t_data, t_out;
    TrainConfig t_cfg;
    train->add_option("--data", t_data, "dataset CSV")->required();
    train->add_option("--out", t_out, "model JSON output")->required();
    train->add_option("--learning-rate", t_cfg.learning_rate)->default_val(t_cfg.learning_rate);
    train->add_option("--max-epochs", t_cfg.max_epochs)->default_val(t_cfg.max_epochs);
    train->add_option("--tol", t_cfg.convergence_tol)->default_val(t_cfg.convergence_tol);
    train->add_option("--l2", t_cfg.l2_penalty)->default_val(t_cfg.l2_penalty);

    // explain
    auto* explain = app.add_subcommand("explain", "Generate counterfactual explanations");
    std::string e_model, e_data, e_method = "dice", e_out;
    std::size_t e_units = 5;
    int e_k = 2;
    std::uint64_t e_seed = 0;
    double e_lambda = 0.5, e_lambda1 = 0.5, e_lambda2 = 1.0;
    SearchBudget e_budget;
    explain->add_option("--model", e_model, "model JSON")->required();
    explain->add_option("--data", e_data, "dataset CSV")->required();
    explain->add_option("--units", e_units, "explain the first K units")->default_val(5);
    explain->add_option("--k", e_k, "counterfactuals per unit")->default_val(2);
    explain->add_option("--method", e_method, "dice|wachter")->default_val("dice");
    explain->add_option("--seed", e_seed, "search seed")->default_val(0);
    explain->add_option("--lambda", e_lambda)->default_val(0.5);
    explain->add_option("--lambda1", e_lambda1)->default_val(0.5);
    explain->add_option("--lambda2", e_lambda2)->default_val(1.0);
    explain->add_option("--restarts", e_budget.restarts)->default_val(e_budget.restarts);
    explain->add_option("--max-iters", e_budget.max_iters)->default_val(e_budget.max_iters);
    explain->add_option("--step", e_budget.step)->default_val(e_budget.step);
    explain->add_option("--out", e_out, "CE CSV output")->required();

    // validate
    auto* validate = app.add_subcommand("validate", "Audit counterfactuals with the three-step "
                                                    "counterfactual method");
    std::string v_scm, v_data, v_ces, v_out;
    double v_eps = 1e-6;
    validate->add_option("--scm", v_scm, "SCM JSON file")->required();
    validate->add_option("--data", v_data, "dataset CSV")->required();
    validate->add_option("--ces", v_ces, "CE CSV")->required();
    validate->add_option("--eps", v_eps, "intervention-detection tolerance")->default_val(1e-6);
    validate->add_option("--out", v_out, "verdict CSV output")->required();

    // experiment
    auto* experiment = app.add_subcommand("experiment", "Run the full pipeline from a JSON config");
    std::string x_config, x_scale, x_out;
    int x_threads = 0;
    experiment->add_option("--config", x_config, "experiment config JSON")->required();
    experiment->add_option("--scale", x_scale, "paper|large preset override");
    experiment->add_option("--out", x_out, "output directory override");
    experiment->add_option("--threads", x_threads, "worker thread override");

    // report
    auto* report = app.add_subcommand("report", "Convert a report between formats");
    std::string r_in, r_format = "markdown", r_out;
    report->add_option("--in", r_in, "report.json or report.csv")->required();
    report->add_option("--format", r_format, "markdown|csv|json")->default_val("markdown");
    report->add_option("--out", r_out, "output file (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (gen->parsed()) cmd_generate(g_structure, g_scm, g_n, g_seed, g_out);
        if (train->parsed()) cmd_train(t_data, t_out, t_cfg);
        if (explain->parsed()) {
            cmd_explain(e_model, e_data, e_units, e_k, e_method, e_seed, e_lambda, e_lambda1,
                        e_lambda2, e_budget, e_out);
        }
        if (validate->parsed()) cmd_validate(v_scm, v_data, v_ces, v_eps, v_out);
        if (experiment->parsed()) cmd_experiment(x_config, x_scale, x_out, x_threads);
        if (report->parsed()) cmd_report(r_in, r_format, r_out);
    } catch (const DegenerateLabelsError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
