#include "sharplab/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "sharplab/error.hpp"

namespace sharplab {

namespace {

double population_variance(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(xs.size());
}

}  // namespace

std::string to_string(SamplingMode mode) {
    switch (mode) {
        case SamplingMode::adaptive: return "adaptive";
        case SamplingMode::always: return "always";
        case SamplingMode::never: return "never";
    }
    return "?";
}

SamplingMode parse_sampling_mode(const std::string& name) {
    if (name == "adaptive") return SamplingMode::adaptive;
    if (name == "always") return SamplingMode::always;
    if (name == "never") return SamplingMode::never;
    throw ConfigError("unknown sampling mode '" + name + "'");
}

std::size_t SamplerConfig::sample_cap() const {
    return static_cast<std::size_t>(std::floor(max_rate * static_cast<double>(window)));
}

void SamplerConfig::validate() const {
    if (slices < 2) throw ConfigError("sampler: slices (M) must be >= 2");
    if (window == 0 || window % slices != 0) throw ConfigError("sampler: window (N) must be a positive multiple of slices (M)");
    if (!(max_rate > 0.0 && max_rate <= 1.0)) throw ConfigError("sampler: max_rate must lie in (0, 1]");
    if (!(initial_budget >= 1.0 && initial_budget <= max_rate * static_cast<double>(window)))
        throw ConfigError("sampler: initial_budget must lie in [1, max_rate * window]");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("sampler: alpha must be >= 0");
    if (warmup < 0) throw ConfigError("sampler: warmup must be >= 0");
    if (!(eps > 0.0)) throw ConfigError("sampler: eps must be > 0");
}

SlicedVariance sliced_variance(std::span<const double> values, std::size_t slices) {
    if (values.empty()) throw ConfigError("sliced_variance: no values");
    if (slices == 0) throw ConfigError("sliced_variance: need at least one slice");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    if (n < slices) return {population_variance(sorted), true};

    double total = 0.0;
    for (std::size_t j = 0; j < slices; ++j) {
        const std::size_t begin = j * n / slices;
        const std::size_t end = (j + 1) * n / slices;
        total += population_variance(std::span<const double>(sorted).subspan(begin, end - begin));
    }
    return {total / static_cast<double>(slices), false};
}

double change_rate_series(std::span<const double> history, double eps) {
    if (history.size() < 2) return 0.0;
    double total = 0.0;
    for (std::size_t k = 1; k < history.size(); ++k) {
        const double prev = history[k - 1];
        if (std::abs(prev) < eps) continue;
        total += (history[k] - prev) / prev;
    }
    return total / static_cast<double>(history.size() - 1);
}

double norm_ratio(double l2_psf, double l2_sgd, double eps) { return l2_psf / std::max(l2_sgd, eps); }

double next_budget(double s, double c_var, double c_norm, double alpha, double s_max) {
    const double proposed = s * (1.0 + alpha * c_var + alpha * c_norm);
    if (std::isnan(proposed)) return s;
    return std::clamp(proposed, 1.0, s_max);
}

AdaptiveSampler::AdaptiveSampler(SamplerConfig config, std::uint64_t seed)
    : config_(std::move(config)), rng_(seed) {
    config_.validate();
    state_.gnorm = RingBuffer<double>(config_.window);
    state_.v_history = RingBuffer<double>(config_.window);
    state_.r_history = RingBuffer<double>(config_.window);
    state_.s = config_.initial_budget;
    state_.p = state_.s / static_cast<double>(config_.window);
}

bool AdaptiveSampler::should_sample(std::int64_t iteration) {
    if (iteration <= config_.warmup) return true;
    if (!state_.window_open) {
        state_.window_open = true;
        state_.window_iter = 0;
        state_.window_samples = 0;
    }
    ++state_.window_iter;
    switch (config_.mode) {
        case SamplingMode::always: return true;
        case SamplingMode::never: return false;
        case SamplingMode::adaptive: break;
    }
    if (state_.window_samples >= config_.sample_cap()) return false;
    return rng_.uniform() < state_.p;
}

void AdaptiveSampler::record_sample(double l2_psf_subset, double l2_sgd_subset) {
    state_.gnorm.push(l2_psf_subset);
    const auto buffer = state_.gnorm.to_vector();
    const auto sv = sliced_variance(buffer, config_.slices);
    state_.last_v = sv.value;
    state_.last_v_fallback = sv.fallback;
    state_.v_history.push(sv.value);
    state_.last_r = norm_ratio(l2_psf_subset, l2_sgd_subset, config_.eps);
    state_.r_history.push(state_.last_r);
    if (state_.window_open) ++state_.window_samples;
}

void AdaptiveSampler::update_rate() {
    state_.c_var = change_rate_series(state_.v_history.to_vector(), config_.eps);
    state_.c_norm = change_rate_series(state_.r_history.to_vector(), config_.eps);
    const double n = static_cast<double>(config_.window);
    state_.s = next_budget(state_.s, state_.c_var, state_.c_norm, config_.alpha, config_.max_rate * n);
    state_.p = state_.s / n;
    state_.window_iter = 0;
    state_.window_samples = 0;
    ++state_.updates;
}

}  // namespace sharplab
