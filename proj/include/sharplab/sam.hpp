#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sharplab/dataset.hpp"
#include "sharplab/metrics.hpp"
#include "sharplab/objective.hpp"
#include "sharplab/param_vector.hpp"
#include "sharplab/sampler.hpp"

namespace sharplab {

enum class LrSchedule { constant, cosine, inverse_t };

std::string to_string(LrSchedule schedule);
LrSchedule parse_lr_schedule(const std::string& name);

struct OptimizerConfig {
    double eta0 = 0.05;
    double rho = 0.05;
    /// Decay applied per iteration of PSF staleness on reuse steps.
    double gamma = 0.9;
    double momentum = 0.0;
    LrSchedule lr_schedule = LrSchedule::cosine;
    /// Stop once cumulative gradient evaluations reach this count.
    std::optional<std::int64_t> grad_eval_budget;

    void validate() const;
    /// Learning rate for 1-based iteration i of a run with horizon T.
    double learning_rate(std::int64_t i, std::int64_t horizon) const;
};

/// Gradient norms at or below this are treated as zero (no perturbation).
inline constexpr double kDegenerateGradNorm = 1e-12;
/// Reuse coefficients gamma^k below this drop the PSF term.
inline constexpr double kReuseCutoff = 1e-12;

/// SGD gradient, SAM gradient at the perturbed point, and their difference.
struct GradientTriple {
    double loss = 0.0;
    std::vector<double> g_sgd;
    std::vector<double> g_sam;
    std::vector<double> psf;
    double l2_sgd = 0.0;
    double l2_psf = 0.0;
    double l2_sgd_subset = 0.0;
    double l2_psf_subset = 0.0;
};

struct PsfCache {
    std::vector<double> psf;
    std::int64_t sampled_at = 0;
    bool valid = false;
    double l2 = 0.0;
    double l2_subset = 0.0;
};

/// Heavy-ball buffer: v <- mu*v + d, w <- w - eta*v. With mu = 0 the buffer is unused.
struct MomentumState {
    double momentum = 0.0;
    std::vector<double> velocity;
};

/// rho * g / ||g||, or zeros when ||g|| < kDegenerateGradNorm.
std::vector<double> perturbation(std::span<const double> g, double rho);

/// Two gradient evaluations on the same batch: at w and at w + perturbation.
GradientTriple sam_gradient(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch, double rho,
                            const IndexRanges& subset);
GradientTriple sam_gradient(const ObjectiveSpec& spec, const ParamVector& w, const Batch& batch, double rho);

/// Completes a triple from an already evaluated SGD gradient (one more evaluation).
GradientTriple complete_sam_gradient(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch,
                                     double rho, LossGrad sgd, const IndexRanges& subset);

/// gamma^staleness, or 0 once it falls below kReuseCutoff. Equals 1 at staleness 0.
double reuse_coefficient(double gamma, std::int64_t staleness);

void step_sgd(std::span<double> w, std::span<const double> g_sgd, double eta, MomentumState& momentum);

/// Steps along g_sam and stores the PSF in the cache as sampled at `iteration`.
void step_sampling(std::span<double> w, const GradientTriple& triple, double eta, MomentumState& momentum,
                   PsfCache& cache, std::int64_t iteration);

/// Steps along g_sgd + gamma^(i - i*) * cached PSF. Returns the coefficient used.
/// Throws ContractError if the cache is empty or not older than `iteration`.
double step_reuse(std::span<double> w, std::span<const double> g_sgd, const PsfCache& cache, std::int64_t iteration,
                  double eta, double gamma, MomentumState& momentum);

// ---- training runs ----------------------------------------------------------

enum class Method { sgd, sam, sam_k, vsam };

std::string to_string(Method method);
Method parse_method(const std::string& name);

/// What to optimize. `train` / `test` are required for data-driven objectives only.
struct TrainingProblem {
    ObjectiveSpec objective;
    ParamVector initial;
    const Dataset* train = nullptr;
    const Dataset* test = nullptr;
};

struct RunOptions {
    /// Horizon T: the run covers iterations first_iteration..T.
    std::int64_t iterations = 100;
    std::int64_t first_iteration = 1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    /// Velocity to resume from; empty means zeros.
    std::vector<double> initial_velocity;
    bool record_trajectory = false;
    bool measure_wall_clock = true;
    /// Called once per completed iteration, in order.
    std::function<void(const MetricsRecord&)> on_record;
};

struct RunResult {
    std::vector<MetricsRecord> records;
    /// Parameters after each iteration, when requested.
    std::vector<std::vector<double>> trajectory;
    ParamVector final_params;
    std::vector<double> final_velocity;
    std::int64_t iterations_run = 0;
    std::int64_t sampling_number = 0;
    std::int64_t grad_evals = 0;
    bool stopped_by_budget = false;
};

RunResult run_sgd(const TrainingProblem& problem, const OptimizerConfig& opt, const RunOptions& options);
RunResult run_sam(const TrainingProblem& problem, const OptimizerConfig& opt, const RunOptions& options);
/// SAM step when i mod k == 0, SGD step otherwise.
RunResult run_sam_k(const TrainingProblem& problem, const OptimizerConfig& opt, std::int64_t k,
                    const RunOptions& options);
RunResult run_vsam(const TrainingProblem& problem, const OptimizerConfig& opt, const SamplerConfig& sampler,
                   const RunOptions& options);

}  // namespace sharplab
