#include "sharplab/sam.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "sharplab/error.hpp"
#include "sharplab/linalg.hpp"

namespace sharplab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kSamplerStream = 101;

void apply_update(std::span<double> w, std::span<const double> direction, double eta, MomentumState& m) {
    if (w.size() != direction.size()) throw ConfigError("update direction has wrong length");
    if (m.momentum == 0.0) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eta * direction[i];
        return;
    }
    if (m.velocity.empty()) m.velocity.assign(w.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
        m.velocity[i] = m.momentum * m.velocity[i] + direction[i];
        w[i] -= eta * m.velocity[i];
    }
}

double squared_norm_combined(std::span<const double> g, std::span<const double> psf, double coef) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = coef == 0.0 ? g[i] : g[i] + coef * psf[i];
        acc += d * d;
    }
    return acc;
}

// Maps an iteration to its mini-batch. Analytic objectives get an empty batch
// and treat every iteration as one full-data epoch.
class BatchSource {
public:
    BatchSource(const Dataset* data, std::size_t batch_size, std::uint64_t seed)
        : data_(data), batch_size_(batch_size), seed_(seed) {
        if (data_) {
            if (batch_size_ < 1 || batch_size_ > data_->size())
                throw ConfigError("batch_size must lie in [1, training set size]");
            per_epoch_ = (data_->size() + batch_size_ - 1) / batch_size_;
        }
    }

    std::int64_t batches_per_epoch() const { return static_cast<std::int64_t>(per_epoch_); }
    std::int64_t epoch_of(std::int64_t i) const { return (i - 1) / batches_per_epoch() + 1; }
    bool epoch_ends_at(std::int64_t i) const { return i % batches_per_epoch() == 0; }

    const Batch& batch_for(std::int64_t i) {
        if (!data_) return empty_;
        const auto epoch = static_cast<std::size_t>(epoch_of(i) - 1);
        if (!have_perm_ || epoch != cached_epoch_) {
            perm_ = epoch_permutation(data_->size(), seed_, epoch);
            cached_epoch_ = epoch;
            have_perm_ = true;
        }
        const auto k = static_cast<std::size_t>((i - 1) % batches_per_epoch());
        const std::size_t start = k * batch_size_;
        const std::size_t len = std::min(batch_size_, perm_.size() - start);
        current_ = gather(*data_, std::span<const std::size_t>(perm_).subspan(start, len));
        return current_;
    }

private:
    const Dataset* data_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    std::size_t per_epoch_ = 1;
    std::vector<std::size_t> perm_;
    std::size_t cached_epoch_ = 0;
    bool have_perm_ = false;
    Batch current_;
    Batch empty_;
};

struct Schedule {
    Method method;
    std::int64_t k = 1;
};

RunResult train(const TrainingProblem& problem, const OptimizerConfig& opt, const Schedule& schedule,
                const SamplerConfig* sampler_config, const RunOptions& options) {
    opt.validate();
    problem.objective.validate();
    const auto& spec = problem.objective;
    if (problem.initial.size() != spec.parameter_count())
        throw ConfigError("initial parameters do not match the objective's parameter count");
    if (spec.uses_data() && !problem.train) throw ConfigError("objective needs a training set");
    if (options.iterations < 1) throw ConfigError("iterations must be >= 1");
    if (options.first_iteration < 1) throw ConfigError("first_iteration must be >= 1");
    if (schedule.method == Method::sam_k && schedule.k < 1) throw ConfigError("sam_k: k must be >= 1");

    std::optional<AdaptiveSampler> sampler;
    if (schedule.method == Method::vsam) {
        if (!sampler_config) throw ConfigError("vsam needs a sampler configuration");
        if (sampler_config->warmup < 1) throw ConfigError("vsam: warmup must be >= 1 so the PSF cache is filled");
        sampler.emplace(*sampler_config, derive_seed(options.seed, kSamplerStream));
    }
    const IndexRanges subset =
        problem.initial.select(sampler_config ? sampler_config->subset_segments : std::vector<std::string>{});

    BatchSource batches(spec.uses_data() ? problem.train : nullptr, options.batch_size, options.seed);
    const Batch eval_batch = (spec.uses_data() && problem.test) ? full_batch(*problem.test) : Batch{};

    std::vector<double> w(problem.initial.values().begin(), problem.initial.values().end());
    MomentumState momentum{opt.momentum, options.initial_velocity};
    if (!momentum.velocity.empty() && momentum.velocity.size() != w.size())
        throw ConfigError("initial velocity has wrong length");
    PsfCache cache;

    RunResult result;
    const auto t0 = std::chrono::steady_clock::now();

    for (std::int64_t i = options.first_iteration; i <= options.iterations; ++i) {
        if (opt.grad_eval_budget && result.grad_evals >= *opt.grad_eval_budget) {
            result.stopped_by_budget = true;
            break;
        }
        MetricsRecord rec;
        rec.iteration = i;
        rec.epoch = batches.epoch_of(i);
        rec.learning_rate = opt.learning_rate(i, options.iterations);
        rec.eval_loss = kNaN;
        rec.eval_accuracy = kNaN;

        try {
            const Batch& batch = batches.batch_for(i);
            LossGrad sgd = eval_grad(spec, w, batch);
            ++result.grad_evals;
            rec.train_loss = sgd.loss;

            bool sample = false;
            switch (schedule.method) {
                case Method::sgd: sample = false; break;
                case Method::sam: sample = true; break;
                case Method::sam_k: sample = i % schedule.k == 0; break;
                case Method::vsam: sample = sampler->should_sample(i); break;
            }

            if (sample) {
                GradientTriple triple = complete_sam_gradient(spec, w, batch, opt.rho, std::move(sgd), subset);
                ++result.grad_evals;
                ++result.sampling_number;
                step_sampling(w, triple, rec.learning_rate, momentum, cache, i);
                if (sampler) sampler->record_sample(triple.l2_psf_subset, triple.l2_sgd_subset);
                rec.sampled = true;
                rec.l2_sgd = triple.l2_sgd;
                rec.l2_sgd_subset = triple.l2_sgd_subset;
                rec.l2_psf = triple.l2_psf;
                rec.l2_psf_subset = triple.l2_psf_subset;
                rec.psf_staleness = 0;
                rec.reuse_coefficient = 1.0;
                rec.update_norm_sq = squared_norm_combined(triple.g_sgd, triple.psf, 1.0);
            } else {
                rec.l2_sgd = norm2(sgd.grad);
                rec.l2_sgd_subset = subset.norm(sgd.grad);
                if (schedule.method == Method::vsam) {
                    rec.reuse_coefficient = step_reuse(w, sgd.grad, cache, i, rec.learning_rate, opt.gamma, momentum);
                    rec.update_norm_sq = squared_norm_combined(sgd.grad, cache.psf, rec.reuse_coefficient);
                } else {
                    step_sgd(w, sgd.grad, rec.learning_rate, momentum);
                    rec.reuse_coefficient = 0.0;
                    rec.update_norm_sq = squared_norm_combined(sgd.grad, {}, 0.0);
                }
                rec.l2_psf = cache.valid ? cache.l2 : kNaN;
                rec.l2_psf_subset = cache.valid ? cache.l2_subset : kNaN;
                rec.psf_staleness = cache.valid ? i - cache.sampled_at : -1;
            }

            if (sampler && i > sampler->config().warmup && sampler->rate_update_due()) sampler->update_rate();

            for (double x : w)
                if (!std::isfinite(x)) throw NumericError("non-finite parameter after update");

            if (!eval_batch.empty() && (batches.epoch_ends_at(i) || i == options.iterations)) {
                rec.eval_loss = eval_loss(spec, w, eval_batch);
                rec.eval_accuracy = accuracy(spec, w, eval_batch);
            }
        } catch (const NumericError& e) {
            throw e.at_iteration(i);
        }

        if (sampler) {
            const auto& st = sampler->state();
            rec.p = st.p;
            rec.s = st.s;
            rec.v = st.last_v;
            rec.v_fallback = st.last_v_fallback;
            rec.r = st.last_r;
            rec.c_var = st.c_var;
            rec.c_norm = st.c_norm;
        } else {
            rec.p = schedule.method == Method::sgd ? 0.0
                    : schedule.method == Method::sam ? 1.0
                                                      : 1.0 / static_cast<double>(schedule.k);
            rec.s = rec.v = rec.r = rec.c_var = rec.c_norm = kNaN;
        }
        rec.cumulative_grad_evals = result.grad_evals;
        rec.wall_clock_seconds =
            options.measure_wall_clock
                ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                : 0.0;

        ++result.iterations_run;
        if (options.record_trajectory) result.trajectory.push_back(w);
        if (options.on_record) options.on_record(rec);
        result.records.push_back(rec);
    }

    result.final_params = ParamVector(std::move(w), problem.initial.segments());
    result.final_velocity = std::move(momentum.velocity);
    return result;
}

}  // namespace

std::string to_string(LrSchedule schedule) {
    switch (schedule) {
        case LrSchedule::constant: return "constant";
        case LrSchedule::cosine: return "cosine";
        case LrSchedule::inverse_t: return "inverse_t";
    }
    return "?";
}

LrSchedule parse_lr_schedule(const std::string& name) {
    if (name == "constant") return LrSchedule::constant;
    if (name == "cosine") return LrSchedule::cosine;
    if (name == "inverse_t") return LrSchedule::inverse_t;
    throw ConfigError("unknown lr_schedule '" + name + "'");
}

std::string to_string(Method method) {
    switch (method) {
        case Method::sgd: return "sgd";
        case Method::sam: return "sam";
        case Method::sam_k: return "sam_k";
        case Method::vsam: return "vsam";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    if (name == "sgd") return Method::sgd;
    if (name == "sam") return Method::sam;
    if (name == "sam_k") return Method::sam_k;
    if (name == "vsam") return Method::vsam;
    throw ConfigError("unknown optimizer '" + name + "'");
}

void OptimizerConfig::validate() const {
    if (!(eta0 > 0.0) || !std::isfinite(eta0)) throw ConfigError("optimizer: eta0 must be > 0");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("optimizer: rho must be > 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("optimizer: gamma must lie in (0, 1]");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer: momentum must lie in [0, 1)");
    if (grad_eval_budget && *grad_eval_budget < 1) throw ConfigError("optimizer: grad_eval_budget must be >= 1");
}

double OptimizerConfig::learning_rate(std::int64_t i, std::int64_t horizon) const {
    switch (lr_schedule) {
        case LrSchedule::constant: return eta0;
        case LrSchedule::cosine:
            return eta0 * 0.5 *
                   (1.0 + std::cos(std::numbers::pi * static_cast<double>(i - 1) / static_cast<double>(horizon)));
        case LrSchedule::inverse_t: return eta0 / static_cast<double>(i);
    }
    return eta0;
}

std::vector<double> perturbation(std::span<const double> g, double rho) {
    std::vector<double> eps(g.size(), 0.0);
    const double n = norm2(g);
    if (n < kDegenerateGradNorm) return eps;
    const double scale = rho / n;
    for (std::size_t i = 0; i < g.size(); ++i) eps[i] = scale * g[i];
    return eps;
}

GradientTriple complete_sam_gradient(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch,
                                     double rho, LossGrad sgd, const IndexRanges& subset) {
    GradientTriple t;
    t.loss = sgd.loss;
    t.g_sgd = std::move(sgd.grad);
    const auto eps = perturbation(t.g_sgd, rho);
    std::vector<double> shifted(w.begin(), w.end());
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += eps[i];
    t.g_sam = eval_grad(spec, shifted, batch).grad;
    t.psf.resize(t.g_sam.size());
    for (std::size_t i = 0; i < t.psf.size(); ++i) t.psf[i] = t.g_sam[i] - t.g_sgd[i];
    t.l2_sgd = norm2(t.g_sgd);
    t.l2_psf = norm2(t.psf);
    t.l2_sgd_subset = subset.norm(t.g_sgd);
    t.l2_psf_subset = subset.norm(t.psf);
    return t;
}

GradientTriple sam_gradient(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch, double rho,
                            const IndexRanges& subset) {
    if (!(rho > 0.0)) throw ConfigError("sam_gradient: rho must be > 0");
    return complete_sam_gradient(spec, w, batch, rho, eval_grad(spec, w, batch), subset);
}

GradientTriple sam_gradient(const ObjectiveSpec& spec, const ParamVector& w, const Batch& batch, double rho) {
    return sam_gradient(spec, w.values(), batch, rho, w.select({}));
}

double reuse_coefficient(double gamma, std::int64_t staleness) {
    if (staleness <= 0) return 1.0;
    const double c = std::pow(gamma, static_cast<double>(staleness));
    return c < kReuseCutoff ? 0.0 : c;
}

void step_sgd(std::span<double> w, std::span<const double> g_sgd, double eta, MomentumState& momentum) {
    apply_update(w, g_sgd, eta, momentum);
}

void step_sampling(std::span<double> w, const GradientTriple& triple, double eta, MomentumState& momentum,
                   PsfCache& cache, std::int64_t iteration) {
    apply_update(w, triple.g_sam, eta, momentum);
    cache.psf = triple.psf;
    cache.sampled_at = iteration;
    cache.valid = true;
    cache.l2 = triple.l2_psf;
    cache.l2_subset = triple.l2_psf_subset;
}

double step_reuse(std::span<double> w, std::span<const double> g_sgd, const PsfCache& cache, std::int64_t iteration,
                  double eta, double gamma, MomentumState& momentum) {
    if (!cache.valid) throw ContractError("step_reuse: no PSF has been sampled yet");
    if (iteration <= cache.sampled_at) throw ContractError("step_reuse: iteration must follow the cached sample");
    if (cache.psf.size() != g_sgd.size()) throw ContractError("step_reuse: cached PSF has wrong length");
    const double coef = reuse_coefficient(gamma, iteration - cache.sampled_at);
    if (coef == 0.0) {
        apply_update(w, g_sgd, eta, momentum);
        return coef;
    }
    std::vector<double> direction(g_sgd.size());
    for (std::size_t i = 0; i < direction.size(); ++i) direction[i] = g_sgd[i] + coef * cache.psf[i];
    apply_update(w, direction, eta, momentum);
    return coef;
}

RunResult run_sgd(const TrainingProblem& problem, const OptimizerConfig& opt, const RunOptions& options) {
    return train(problem, opt, {Method::sgd}, nullptr, options);
}

RunResult run_sam(const TrainingProblem& problem, const OptimizerConfig& opt, const RunOptions& options) {
    return train(problem, opt, {Method::sam}, nullptr, options);
}

RunResult run_sam_k(const TrainingProblem& problem, const OptimizerConfig& opt, std::int64_t k,
                    const RunOptions& options) {
    return train(problem, opt, {Method::sam_k, k}, nullptr, options);
}

RunResult run_vsam(const TrainingProblem& problem, const OptimizerConfig& opt, const SamplerConfig& sampler,
                   const RunOptions& options) {
    return train(problem, opt, {Method::vsam}, &sampler, options);
}

}  // namespace sharplab
