#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace sharplab {

/// One row of a training trace. Fields that do not apply to an iteration
/// (evaluation metrics off the epoch boundary, sampler statistics for non-vSAM
/// methods, PSF norms before the first sample) hold NaN.
struct MetricsRecord {
    std::int64_t iteration = 0;
    std::int64_t epoch = 0;
    double learning_rate = 0.0;
    double train_loss = 0.0;
    double eval_loss = 0.0;
    double eval_accuracy = 0.0;
    double l2_sgd = 0.0;
    double l2_psf = 0.0;
    double l2_sgd_subset = 0.0;
    double l2_psf_subset = 0.0;
    /// Iterations since the PSF in use was sampled; 0 when fresh, -1 when none exists.
    std::int64_t psf_staleness = -1;
    bool sampled = false;
    double reuse_coefficient = 0.0;
    double p = 0.0;
    double s = 0.0;
    double v = 0.0;
    bool v_fallback = false;
    double r = 0.0;
    double c_var = 0.0;
    double c_norm = 0.0;
    /// ||applied update direction||^2, i.e. ||g_sgd + coef * psf||^2.
    double update_norm_sq = 0.0;
    std::int64_t cumulative_grad_evals = 0;
    double wall_clock_seconds = 0.0;

    friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

/// Column names of the metrics CSV, in file order.
const std::vector<std::string>& metrics_columns();
/// Columns whose values depend on the host clock.
bool is_wall_clock_column(const std::string& name);

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRecord& rec);
std::vector<MetricsRecord> read_metrics(std::istream& in);
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

}  // namespace sharplab
