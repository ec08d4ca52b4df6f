#include <cmath>

#include <gtest/gtest.h>

#include "sharplab/dataset.hpp"
#include "sharplab/error.hpp"
#include "sharplab/random.hpp"
#include "sharplab/sam.hpp"

using namespace sharplab;

namespace {

const Batch kNoBatch;

ObjectiveSpec diag_quadratic() { return make_quadratic(Matrix::diagonal(std::vector<double>{1.0, 10.0}), {0.0, 0.0}); }

OptimizerConfig constant_lr(double eta, double rho) {
    OptimizerConfig o;
    o.eta0 = eta;
    o.rho = rho;
    o.lr_schedule = LrSchedule::constant;
    return o;
}

RunOptions trajectory_options(std::int64_t iterations, std::size_t batch = 16) {
    RunOptions r;
    r.iterations = iterations;
    r.batch_size = batch;
    r.seed = 3;
    r.record_trajectory = true;
    r.measure_wall_clock = false;
    return r;
}

}  // namespace

TEST(Perturbation, ScalesUnitGradient) {
    const auto e = perturbation(std::vector<double>{3.0, 4.0}, 0.05);
    EXPECT_DOUBLE_EQ(e[0], 0.03);
    EXPECT_DOUBLE_EQ(e[1], 0.04);
}

TEST(Perturbation, ZeroGradientGivesZero) {
    EXPECT_EQ(perturbation(std::vector<double>{0.0, 0.0, 0.0}, 0.3), (std::vector<double>{0.0, 0.0, 0.0}));
    EXPECT_EQ(perturbation(std::vector<double>{1e-13, 0.0}, 0.3), (std::vector<double>{0.0, 0.0}));
}

TEST(Perturbation, NormIsRho) {
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> g(100);
        for (auto& x : g) x = rng.normal();
        const auto e = perturbation(g, 0.1);
        double ss = 0.0;
        for (double x : e) ss += x * x;
        EXPECT_NEAR(std::sqrt(ss), 0.1, 1e-12);
    }
}

TEST(SamGradient, QuadraticClosedForm) {
    const auto spec = diag_quadratic();
    const auto t = sam_gradient(spec, ParamVector(std::vector<double>{1.0, 1.0}), kNoBatch, 0.1);
    const double s = std::sqrt(101.0);
    EXPECT_NEAR(t.psf[0], 0.1 / s, 1e-12);
    EXPECT_NEAR(t.psf[1], 10.0 / s, 1e-12);
    EXPECT_NEAR(t.psf[0], 0.009950, 1e-6);
    EXPECT_NEAR(t.psf[1], 0.995037, 1e-6);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(t.psf[i], t.g_sam[i] - t.g_sgd[i]);
    EXPECT_DOUBLE_EQ(t.l2_sgd, s);
    EXPECT_DOUBLE_EQ(t.l2_psf, std::hypot(t.psf[0], t.psf[1]));
}

TEST(SamGradient, PsfLinearInRho) {
    const auto spec = diag_quadratic();
    const ParamVector w(std::vector<double>{0.4, -0.2});
    const double a = sam_gradient(spec, w, kNoBatch, 0.01).l2_psf;
    const double b = sam_gradient(spec, w, kNoBatch, 0.001).l2_psf;
    EXPECT_NEAR(a / b, 10.0, 1e-9);
}

TEST(SamGradient, ZeroGradientPointHasNoPsf) {
    const auto spec = make_rosenbrock(3);
    const auto t = sam_gradient(spec, ParamVector(std::vector<double>{1.0, 1.0, 1.0}), kNoBatch, 0.5);
    EXPECT_EQ(t.g_sam, t.g_sgd);
    for (double x : t.psf) EXPECT_EQ(x, 0.0);
}

TEST(SamGradient, SubsetNormsUseLastSegments) {
    const auto data = generate_dataset(DatasetKind::moons, 32, 0.1, 0);
    const auto spec = make_mlp({2, 5, 2}, Activation::tanh);
    const auto p = init_params(spec, 0);
    const auto t = sam_gradient(spec, p, full_batch(data), 0.05);
    const auto& seg = p.segments();
    double ss = 0.0;
    for (std::size_t k = seg[2].start; k < p.size(); ++k) ss += t.psf[k] * t.psf[k];
    EXPECT_NEAR(t.l2_psf_subset, std::sqrt(ss), 1e-15);
    EXPECT_LT(t.l2_psf_subset, t.l2_psf);
}

TEST(Steps, SgdSubstitution) {
    std::vector<double> w{1.0, 1.0};
    MomentumState m;
    step_sgd(w, std::vector<double>{1.0, 10.0}, 0.1, m);
    EXPECT_DOUBLE_EQ(w[0], 0.9);
    EXPECT_DOUBLE_EQ(w[1], 0.0);
    step_sgd(w, std::vector<double>{5.0, 5.0}, 0.0, m);
    EXPECT_DOUBLE_EQ(w[0], 0.9);
}

TEST(Steps, MomentumRecurrence) {
    const double mu = 0.9, eta = 0.1;
    const std::vector<double> g{1.0, -2.0};
    std::vector<double> w{0.0, 0.0};
    MomentumState m{mu, {}};
    step_sgd(w, g, eta, m);
    step_sgd(w, g, eta, m);
    // v1 = g, v2 = mu g + g; w2 = -eta (v1 + v2)
    for (std::size_t i = 0; i < 2; ++i) EXPECT_DOUBLE_EQ(w[i], -eta * (g[i] + (mu * g[i] + g[i])));
}

TEST(Steps, SamplingStepSubstitution) {
    std::vector<double> w{1.0, 1.0};
    GradientTriple t;
    t.g_sgd = {1.0, 1.0};
    t.g_sam = {2.0, 2.0};
    t.psf = {1.0, 1.0};
    MomentumState m;
    PsfCache cache;
    step_sampling(w, t, 0.5, m, cache, 7);
    EXPECT_EQ(w, (std::vector<double>{0.0, 0.0}));
    EXPECT_TRUE(cache.valid);
    EXPECT_EQ(cache.sampled_at, 7);
    EXPECT_EQ(cache.psf, t.psf);
}

TEST(Steps, SamStepMatchesClosedForm) {
    const auto spec = diag_quadratic();
    const double rho = 0.1, eta = 0.01;
    std::vector<double> w{1.0, 1.0};
    const auto t = sam_gradient(spec, ParamVector(w), kNoBatch, rho);
    MomentumState m;
    PsfCache cache;
    step_sampling(w, t, eta, m, cache, 1);
    // w - eta A (w + rho A w / ||A w||) with A = diag(1, 10), w = (1, 1)
    const double n = std::sqrt(101.0);
    EXPECT_NEAR(w[0], 1.0 - eta * 1.0 * (1.0 + rho * 1.0 / n), 1e-15);
    EXPECT_NEAR(w[1], 1.0 - eta * 10.0 * (1.0 + rho * 10.0 / n), 1e-15);
}

TEST(Steps, ReuseDecaysPsf) {
    std::vector<double> w{0.0, 0.0};
    PsfCache cache{{0.0, 1.0}, 3, true, 1.0, 1.0};
    MomentumState m;
    const double coef = step_reuse(w, std::vector<double>{1.0, 0.0}, cache, 5, 1.0, 0.7, m);
    EXPECT_DOUBLE_EQ(coef, 0.49);
    EXPECT_DOUBLE_EQ(w[0], -1.0);
    EXPECT_DOUBLE_EQ(w[1], -0.49);
}

TEST(Steps, ReuseWithoutDecay) {
    std::vector<double> a{0.5, 0.5}, b{0.5, 0.5};
    PsfCache cache{{0.3, -0.2}, 1, true, 0.0, 0.0};
    MomentumState m1, m2;
    step_reuse(a, std::vector<double>{1.0, 2.0}, cache, 2, 0.1, 1.0, m1);
    step_sgd(b, std::vector<double>{1.0 + 0.3, 2.0 - 0.2}, 0.1, m2);
    EXPECT_EQ(a, b);
}

TEST(Steps, ReuseUnderflowIsSgd) {
    std::vector<double> a{0.5, 0.5}, b{0.5, 0.5};
    PsfCache cache{{1e6, 1e6}, 1, true, 0.0, 0.0};
    MomentumState m1, m2;
    EXPECT_EQ(step_reuse(a, std::vector<double>{1.0, 2.0}, cache, 1001, 0.1, 0.7, m1), 0.0);
    step_sgd(b, std::vector<double>{1.0, 2.0}, 0.1, m2);
    EXPECT_EQ(a, b);
}

TEST(Steps, ReuseNeedsValidCache) {
    std::vector<double> w{0.0};
    MomentumState m;
    EXPECT_THROW(step_reuse(w, std::vector<double>{1.0}, PsfCache{}, 1, 0.1, 0.9, m), ContractError);
    PsfCache cache{{1.0}, 5, true, 1.0, 1.0};
    EXPECT_THROW(step_reuse(w, std::vector<double>{1.0}, cache, 5, 0.1, 0.9, m), ContractError);
}

TEST(Steps, ReuseCoefficientMonotone) {
    EXPECT_EQ(reuse_coefficient(0.9, 0), 1.0);
    double prev = 1.0;
    for (int k = 1; k < 400; ++k) {
        const double c = reuse_coefficient(0.9, k);
        EXPECT_LE(c, prev);
        prev = c;
    }
    EXPECT_EQ(prev, 0.0);
}

TEST(Config, Validation) {
    OptimizerConfig o;
    EXPECT_NO_THROW(o.validate());
    o.rho = 0.0;
    EXPECT_THROW(o.validate(), ConfigError);
    o = {};
    o.gamma = 1.5;
    EXPECT_THROW(o.validate(), ConfigError);
    o = {};
    o.eta0 = -1;
    EXPECT_THROW(o.validate(), ConfigError);
}

TEST(Config, Schedules) {
    OptimizerConfig o;
    o.eta0 = 0.2;
    o.lr_schedule = LrSchedule::cosine;
    EXPECT_DOUBLE_EQ(o.learning_rate(1, 100), 0.2);
    EXPECT_NEAR(o.learning_rate(51, 100), 0.1, 1e-15);
    o.lr_schedule = LrSchedule::inverse_t;
    EXPECT_DOUBLE_EQ(o.learning_rate(4, 100), 0.05);
    o.lr_schedule = LrSchedule::constant;
    EXPECT_EQ(o.learning_rate(77, 100), 0.2);
}

TEST(Runs, SamKOneIsSam) {
    const auto spec = diag_quadratic();
    const TrainingProblem p{spec, ParamVector(std::vector<double>{1.0, -1.0}), nullptr, nullptr};
    const auto a = run_sam(p, constant_lr(0.01, 0.05), trajectory_options(100));
    const auto b = run_sam_k(p, constant_lr(0.01, 0.05), 1, trajectory_options(100));
    EXPECT_EQ(a.trajectory, b.trajectory);
}

TEST(Runs, SamKFiveCounts) {
    const auto spec = diag_quadratic();
    const TrainingProblem p{spec, ParamVector(std::vector<double>{1.0, -1.0}), nullptr, nullptr};
    const auto r = run_sam_k(p, constant_lr(0.01, 0.05), 5, trajectory_options(100));
    EXPECT_EQ(r.sampling_number, 20);
    EXPECT_EQ(r.grad_evals, 120);
    for (const auto& rec : r.records) EXPECT_EQ(rec.sampled, rec.iteration % 5 == 0);
}

TEST(Runs, AlwaysSamplingVsamIsSamOnMlp) {
    const auto data = generate_dataset(DatasetKind::moons, 200, 0.2, 1);
    const auto spec = make_mlp({2, 8, 2}, Activation::tanh, 1e-4);
    const TrainingProblem p{spec, init_params(spec, 2), &data, nullptr};
    SamplerConfig sc;
    sc.mode = SamplingMode::always;
    sc.warmup = 20;
    auto opt = constant_lr(0.1, 0.05);
    opt.momentum = 0.9;
    const auto a = run_sam(p, opt, trajectory_options(300));
    const auto b = run_vsam(p, opt, sc, trajectory_options(300));
    EXPECT_EQ(a.trajectory, b.trajectory);
    EXPECT_EQ(b.grad_evals, 600);
}

TEST(Runs, NeverSamplingVsamIsSgdAfterWarmup) {
    const auto data = generate_dataset(DatasetKind::moons, 200, 0.2, 1);
    const auto spec = make_mlp({2, 8, 2}, Activation::tanh, 1e-4);
    const TrainingProblem p{spec, init_params(spec, 2), &data, nullptr};
    SamplerConfig sc;
    sc.mode = SamplingMode::never;
    sc.warmup = 40;
    auto opt = constant_lr(0.1, 0.05);
    opt.gamma = 1e-13;
    const auto v = run_vsam(p, opt, sc, trajectory_options(300));

    TrainingProblem resumed = p;
    resumed.initial = ParamVector(v.trajectory[39], spec.layout());
    auto ro = trajectory_options(300);
    ro.first_iteration = 41;
    const auto s = run_sgd(resumed, opt, ro);
    ASSERT_EQ(s.trajectory.size(), 260u);
    for (std::size_t k = 0; k < s.trajectory.size(); ++k) ASSERT_EQ(s.trajectory[k], v.trajectory[40 + k]) << k;
    EXPECT_EQ(v.sampling_number, 40);
}

TEST(Runs, AccountingMatchesDecisionLog) {
    const auto spec = make_rosenbrock(2);
    const TrainingProblem p{spec, ParamVector(std::vector<double>{-1.0, 1.5}), nullptr, nullptr};
    SamplerConfig sc;
    sc.warmup = 50;
    const auto r = run_vsam(p, constant_lr(1e-3, 0.01), sc, trajectory_options(1000));
    std::int64_t sampled = 0, prev = 0;
    for (const auto& rec : r.records) {
        sampled += rec.sampled;
        EXPECT_EQ(rec.cumulative_grad_evals - prev, rec.sampled ? 2 : 1);
        prev = rec.cumulative_grad_evals;
    }
    EXPECT_EQ(sampled, r.sampling_number);
    EXPECT_EQ(r.grad_evals, 1000 + sampled);
    EXPECT_LT(sampled, 1000);
}

TEST(Runs, BudgetStopsEarly) {
    const auto spec = diag_quadratic();
    const TrainingProblem p{spec, ParamVector(std::vector<double>{1.0, -1.0}), nullptr, nullptr};
    auto opt = constant_lr(0.01, 0.05);
    opt.grad_eval_budget = 51;
    const auto r = run_sam(p, opt, trajectory_options(100));
    EXPECT_TRUE(r.stopped_by_budget);
    EXPECT_LE(r.grad_evals, 52);
    EXPECT_LT(r.iterations_run, 100);
}

TEST(Runs, DivergenceCarriesIteration) {
    const auto spec = diag_quadratic();
    const TrainingProblem p{spec, ParamVector(std::vector<double>{1.0, 1.0}), nullptr, nullptr};
    try {
        run_sgd(p, constant_lr(1.0, 0.05), trajectory_options(2000));
        FAIL() << "expected divergence";
    } catch (const NumericError& e) {
        EXPECT_GT(e.iteration(), 1);
    }
}

TEST(Runs, VsamNeedsWarmup) {
    const auto spec = diag_quadratic();
    const TrainingProblem p{spec, ParamVector(std::vector<double>{1.0, 1.0}), nullptr, nullptr};
    SamplerConfig sc;
    sc.warmup = 0;
    EXPECT_THROW(run_vsam(p, constant_lr(0.01, 0.05), sc, trajectory_options(10)), ConfigError);
}

TEST(Runs, StalenessColumn) {
    const auto spec = diag_quadratic();
    const TrainingProblem p{spec, ParamVector(std::vector<double>{1.0, 1.0}), nullptr, nullptr};
    const auto r = run_sam_k(p, constant_lr(0.01, 0.05), 4, trajectory_options(12));
    EXPECT_EQ(r.records[0].psf_staleness, -1);
    EXPECT_TRUE(std::isnan(r.records[0].l2_psf));
    EXPECT_EQ(r.records[3].psf_staleness, 0);
    EXPECT_EQ(r.records[5].psf_staleness, 2);
    EXPECT_EQ(r.records[5].l2_psf, r.records[3].l2_psf);
}
