#ifndef CEAUDIT_HARNESS_HPP
#define CEAUDIT_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ceaudit/ce_search.hpp"
#include "ceaudit/classifier.hpp"
#include "ceaudit/pcm.hpp"
#include "ceaudit/sampler.hpp"
#include "ceaudit/scm.hpp"

namespace ceaudit {

enum class CeMethod { Dice, Wachter };

CeMethod parse_method(std::string_view name);
std::string to_string(CeMethod method);

struct ExperimentConfig {
    // Either a preset structure or a path to an SCM JSON file.
    std::optional<StructureKind> structure;
    std::string scm_file;

    std::size_t n_samples = 1000;
    std::size_t n_units = 5;
    int k_per_unit = 2;
    CeMethod method = CeMethod::Dice;
    std::uint64_t seed = 0;
    TrainConfig train;
    double lambda = 0.5;
    double lambda1 = 0.5;
    double lambda2 = 1.0;
    SearchBudget budget;
    double eps = 1e-6;  // intervention-detection tolerance
    std::string out_dir;
    int threads = 1;

    Scm resolve_scm() const;
    void check() const;  // throws ConfigError on violated invariants

    // "paper": 5 units x 2 CEs; "large": 500 units x 1 CE on 2000 samples.
    void apply_scale(std::string_view scale);

    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
    static ExperimentConfig load(const std::filesystem::path& path);
};

struct CeRow {
    std::size_t ce_id = 0;
    Counterfactual ce;
    Verdict verdict;
    std::vector<NodeId> changed;  // features replaced by the do-operator
};

struct UnitBlock {
    std::size_t unit_id = 0;
    Unit unit;
    NoiseAssignment noise;
    std::vector<CeRow> ces;
};

struct Timings {
    double sample_s = 0, fit_s = 0, explain_s = 0, validate_s = 0, total_s = 0;
};

struct ExperimentReport {
    std::string structure_name;
    std::string scm_digest;
    double threshold = 0.0;
    double train_accuracy = 0.0;
    std::vector<NodeId> feature_order;
    std::vector<UnitBlock> units;

    // Conflict accounting over converged CEs only.
    std::size_t conflict_count = 0;
    std::size_t total_ces = 0;      // converged CEs
    std::size_t non_converged = 0;  // excluded from the rate
    std::optional<double> conflict_rate;

    ExperimentConfig config;
    // Wall-clock only; intentionally absent from serialized reports so that
    // identical configs produce byte-identical files.
    Timings timings;

    void recompute_summary();
};

// sample -> fit -> generate CEs for the first n_units units -> validate each
// against the ground-truth SCM. Deterministic for a given config, including
// across thread counts.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

struct ConflictSummary {
    struct Row {
        std::string name;
        std::size_t conflicts = 0;
        std::size_t total = 0;
        std::optional<double> rate;
    };
    std::vector<Row> per_structure;
    Row pooled;
};

ConflictSummary conflict_summary(const std::vector<ExperimentReport>& reports);

enum class ReportFormat { Markdown, Csv, Json };
ReportFormat parse_format(std::string_view name);

std::string render_report(const ExperimentReport& report, ReportFormat format);
void emit_report(const ExperimentReport& report, ReportFormat format,
                 const std::filesystem::path& path);

ExperimentReport read_report_json(const std::filesystem::path& path);
ExperimentReport read_report_csv(const std::filesystem::path& path);
// Dispatches on extension: .json / .csv
ExperimentReport read_report(const std::filesystem::path& path);

}  // namespace ceaudit

#endif  // CEAUDIT_HARNESS_HPP
