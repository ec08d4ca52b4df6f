#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sharplab/dataset.hpp"
#include "sharplab/metrics.hpp"
#include "sharplab/objective.hpp"
#include "sharplab/sam.hpp"
#include "sharplab/sampler.hpp"

namespace sharplab {

/// Environment variable that relocates relative output directories.
inline constexpr const char* kOutputRootEnv = "SHARPLAB_OUTPUT_ROOT";

struct DatasetSpec {
    DatasetKind kind = DatasetKind::moons;
    std::size_t n = 2000;
    double noise = 0.2;
    std::uint64_t seed = 0;
    /// Held-out split: round(train_fraction * n) rows train, the rest evaluate.
    double train_fraction = 0.8;
};

/// Starting point. `seeded` draws from init_params with a per-seed stream;
/// `point` is fixed; `disc` is uniform in a disc (2-D objectives).
struct InitSpec {
    enum class Kind { seeded, point, disc };
    Kind kind = Kind::seeded;
    std::vector<double> values;  ///< point, or disc centre
    double radius = 0.0;         ///< disc only
};

struct ExperimentConfig {
    std::string name = "experiment";
    ObjectiveSpec objective;
    std::optional<DatasetSpec> dataset;
    Method method = Method::vsam;
    OptimizerConfig optimizer;
    SamplerConfig sampler;
    std::int64_t k = 5;
    std::optional<std::int64_t> iterations;
    std::optional<std::int64_t> epochs;
    std::size_t batch_size = 32;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    InitSpec init;
    std::filesystem::path output_dir;

    /// Throws ConfigError before any compute.
    void validate() const;
    /// Method name as it appears in reports, e.g. "sam_k(5)".
    std::string label() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Resolved output directory, honouring kOutputRootEnv for relative paths.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

struct PreparedData {
    std::optional<Dataset> train;
    std::optional<Dataset> test;
};
PreparedData prepare_data(const ExperimentConfig& config);
ParamVector initial_params(const ExperimentConfig& config, std::uint64_t seed);
/// Iteration horizon: `iterations`, or epochs * batches per epoch.
std::int64_t horizon(const ExperimentConfig& config, const PreparedData& data);

/// Runs one seed in memory (no files).
RunResult run_single(const ExperimentConfig& config, const PreparedData& data, std::uint64_t seed,
                     RunOptions options = {});

struct RunSummary {
    std::string method;
    std::uint64_t seed = 0;
    std::int64_t iterations = 0;
    std::int64_t sampling_number = 0;
    std::int64_t grad_evals = 0;
    double final_train_loss = 0.0;
    double final_eval_loss = 0.0;
    double final_accuracy = 0.0;
    /// D: examples per epoch.
    double examples_per_epoch = 0.0;
    std::int64_t batches_per_epoch = 1;
    /// E: epochs completed (fractional).
    double epochs = 0.0;
    double wall_seconds = 0.0;
    double ais = 0.0;
    bool stopped_by_budget = false;
};

nlohmann::json summary_to_json(const RunSummary& s);
RunSummary summary_from_json(const nlohmann::json& j);

/// Rebuilds a summary from a metrics stream plus the run's epoch geometry.
RunSummary summarize(const std::vector<MetricsRecord>& records, const std::string& method, std::uint64_t seed,
                     double examples_per_epoch, std::int64_t batches_per_epoch, bool stopped_by_budget);

/// D * E / T. Throws ConfigError unless all inputs are positive.
double compute_ais(double examples_per_epoch, double epochs, double seconds);

/// Gradient evaluations of a over b. Throws ConfigError when iteration counts differ.
double grad_eval_ratio(const RunSummary& a, const RunSummary& b);

struct ExperimentResult {
    std::filesystem::path directory;
    std::vector<std::filesystem::path> run_dirs;
    std::vector<RunSummary> summaries;
};

/// One subdirectory per seed (config.json, metrics.csv, norms.csv, summary.json)
/// plus config.json and aggregate.json at the top. A numeric failure leaves the
/// partial metrics and an error.txt marker, then rethrows.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  ///< population
};
MeanStd mean_std(const std::vector<double>& values);

struct ReportRow {
    std::string method;
    std::size_t runs = 0;
    MeanStd accuracy_pct;
    MeanStd sampling_number;
    MeanStd grad_evals;
    MeanStd ais;
    /// Mean grad evals relative to the SAM group; NaN without a comparable SAM group.
    double grad_eval_ratio_vs_sam = 0.0;
    std::string marks;
    std::string warning;
};

struct Report {
    std::vector<ReportRow> rows;
};

const std::vector<std::string>& report_columns();
/// Groups completed runs by method. Each path is a seed directory or an
/// experiment directory holding seed_* subdirectories.
Report compare_report(const std::vector<std::filesystem::path>& dirs);
void write_report_text(std::ostream& out, const Report& report);
void write_report_csv(std::ostream& out, const Report& report);

struct VerifyResult {
    std::vector<std::string> passed;
    std::vector<std::string> failed;
    bool ok() const { return failed.empty(); }
};

/// Re-derives accounting and summary fields from the metrics stream.
VerifyResult verify_runs(const std::filesystem::path& dir);

/// Sweep of the PSF norm bound over random SPD matrices; writes one CSV row per case.
/// Returns the number of violated cases.
std::size_t check_bounds(std::ostream& csv, std::size_t cases, std::uint64_t seed, std::size_t min_dim = 2,
                         std::size_t max_dim = 8);

/// Compact invariant suite; prints one line per check. Returns true when all pass.
bool run_selfcheck(std::ostream& out);

}  // namespace sharplab
