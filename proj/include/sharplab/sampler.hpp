#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sharplab/random.hpp"
#include "sharplab/ring_buffer.hpp"

namespace sharplab {

/// `adaptive` is the variation-driven controller; `always`/`never` pin the
/// post-warmup decision (used for the SAM and SGD equivalence checks).
enum class SamplingMode { adaptive, always, never };

std::string to_string(SamplingMode mode);
SamplingMode parse_sampling_mode(const std::string& name);

struct SamplerConfig {
    std::size_t window = 50;          ///< N: iterations between rate updates, and buffer capacity
    std::size_t slices = 5;           ///< M: slices of the sorted norm buffer
    double alpha = 0.13;              ///< gain on both change rates
    double initial_budget = 25.0;     ///< s_1: expected samples per window at start
    std::int64_t warmup = 250;        ///< I_start: iterations that always sample
    double max_rate = 0.8;            ///< p_max
    std::vector<std::string> subset_segments;  ///< empty: last two parameter segments
    double eps = 1e-12;
    SamplingMode mode = SamplingMode::adaptive;

    /// floor(max_rate * window): hard per-window sample cap.
    std::size_t sample_cap() const;
    /// Throws ConfigError on violated invariants.
    void validate() const;
};

struct SlicedVariance {
    double value = 0.0;
    /// Fewer values than slices: population variance of everything was returned.
    bool fallback = false;
};

/// Mean of the population variances of M contiguous slices of the sorted values.
/// Slice j covers sorted positions [j*n/M, (j+1)*n/M).
SlicedVariance sliced_variance(std::span<const double> values, std::size_t slices);

/// Mean of consecutive relative changes (h[k] - h[k-1]) / h[k-1]. A term whose
/// denominator is smaller than eps in magnitude contributes 0 but still counts.
/// Returns 0 for fewer than two entries.
double change_rate_series(std::span<const double> history, double eps);

/// psf / max(sgd, eps).
double norm_ratio(double l2_psf, double l2_sgd, double eps);

/// s * (1 + alpha*c_var + alpha*c_norm) clamped to [1, s_max].
double next_budget(double s, double c_var, double c_norm, double alpha, double s_max);

struct SamplerState {
    RingBuffer<double> gnorm;      ///< sampled subset L2-PSF values
    RingBuffer<double> v_history;  ///< sliced variance after each sample
    RingBuffer<double> r_history;  ///< PSF/SGD norm ratio after each sample
    double s = 0.0;
    double p = 0.0;
    std::size_t window_iter = 0;
    std::size_t window_samples = 0;
    bool window_open = false;

    // Most recent statistics, for logging.
    double last_v = 0.0;
    double last_r = 0.0;
    bool last_v_fallback = false;
    double c_var = 0.0;
    double c_norm = 0.0;
    std::size_t updates = 0;
};

/// Adaptive sampling-rate controller.
///
/// Buffers hold sampled iterations only; the window clock counts every
/// post-warmup iteration. Call order per iteration: should_sample(i), then
/// record_sample(...) if it fired, then update_rate() when rate_update_due().
class AdaptiveSampler {
public:
    AdaptiveSampler(SamplerConfig config, std::uint64_t seed);

    const SamplerConfig& config() const noexcept { return config_; }
    const SamplerState& state() const noexcept { return state_; }

    /// Warmup iterations always fire; afterwards the window cap applies,
    /// then a Bernoulli(p) draw. Advances the window clock after warmup.
    bool should_sample(std::int64_t iteration);

    /// Pushes the subset norms and recomputes v and r.
    void record_sample(double l2_psf_subset, double l2_sgd_subset);

    bool rate_update_due() const noexcept { return state_.window_open && state_.window_iter == config_.window; }

    /// Recomputes s and p from the v and r change rates and opens a new window.
    void update_rate();

private:
    SamplerConfig config_;
    SamplerState state_;
    Rng rng_;
};

}  // namespace sharplab
