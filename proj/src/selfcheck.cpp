#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>

#include "sharplab/diagnostics.hpp"
#include "sharplab/error.hpp"
#include "sharplab/format.hpp"
#include "sharplab/harness.hpp"

namespace sharplab {

std::size_t check_bounds(std::ostream& csv, std::size_t cases, std::uint64_t seed, std::size_t min_dim,
                         std::size_t max_dim) {
    if (min_dim < 1 || max_dim < min_dim) throw ConfigError("check_bounds: invalid dimension range");
    Rng rng(seed);
    csv << "case,dim,aligned,lhs,rhs,slack,satisfied\n";
    std::size_t violations = 0;
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t n = min_dim + rng.below(max_dim - min_dim + 1);
        const Matrix a = random_spd(n, rng);
        // Every fifth case points g along an eigenvector, where the bound is tight.
        const bool aligned = c % 5 == 4;
        std::vector<double> g(n);
        if (aligned) {
            const auto eig = symmetric_eigen(a);
            const std::size_t k = rng.below(n);
            const double scale = rng.uniform(0.1, 10.0);
            for (std::size_t i = 0; i < n; ++i) g[i] = scale * eig.eigenvectors(i, k);
        } else {
            for (auto& x : g) x = rng.normal();
        }
        const double rho = rng.uniform(0.01, 1.0);
        const auto r = psf_bound_check(a, g, rho);
        bool ok = r.satisfied;
        if (aligned) ok = ok && std::abs(r.lhs - r.rhs) <= 1e-10;
        violations += ok ? 0 : 1;
        csv << c << ',' << n << ',' << (aligned ? 1 : 0) << ',' << format_real(r.lhs) << ',' << format_real(r.rhs)
            << ',' << format_real(r.slack) << ',' << (ok ? 1 : 0) << '\n';
    }
    return violations;
}

namespace {

struct Checker {
    std::ostream& out;
    bool all = true;

    void operator()(const std::string& name, const std::function<bool()>& body) {
        bool ok = false;
        std::string detail;
        try {
            ok = body();
        } catch (const std::exception& e) {
            detail = std::string(" (") + e.what() + ")";
        }
        all = all && ok;
        out << (ok ? "PASS " : "FAIL ") << name << detail << '\n';
    }
};

ObjectiveSpec small_quadratic() {
    return make_quadratic(Matrix{{3.0, 0.5}, {0.5, 1.0}}, {1.0, -1.0});
}

}  // namespace

bool run_selfcheck(std::ostream& out) {
    Checker check{out};
    const Batch none;

    check("quadratic gradient matches finite differences", [&] {
        const auto spec = small_quadratic();
        const std::vector<double> w{0.3, -0.7};
        return max_relative_error(eval_grad(spec, w, none).grad, fd_gradient(spec, w, none, 1e-5)) <= 1e-5;
    });
    check("rosenbrock gradient matches finite differences", [&] {
        const auto spec = make_rosenbrock(4);
        const std::vector<double> w{-0.5, 0.8, 1.1, 0.2};
        return max_relative_error(eval_grad(spec, w, none).grad, fd_gradient(spec, w, none, 1e-5)) <= 1e-5;
    });
    check("mlp gradient matches finite differences", [&] {
        const auto spec = make_mlp({2, 6, 2}, Activation::tanh, 1e-3);
        const auto data = generate_dataset(DatasetKind::moons, 32, 0.1, 3);
        const auto w = init_params(spec, 5);
        const auto batch = full_batch(data);
        return max_relative_error(eval_grad(spec, w.values(), batch).grad,
                                  fd_gradient(spec, w.values(), batch, 1e-5)) <= 1e-5;
    });
    check("psf equals rho*A*g/|g| on a quadratic", [&] {
        const auto spec = small_quadratic();
        const std::vector<double> w{0.9, 0.4};
        const double rho = 0.05;
        const auto t = sam_gradient(spec, ParamVector(w), none, rho);
        const auto& q = std::get<QuadraticModel>(spec.model);
        auto hg = matvec(q.a, t.g_sgd);
        for (double& x : hg) x *= rho / t.l2_sgd;
        return max_abs_diff(t.psf, hg) <= 1e-9;
    });
    check("psf norm bound sweep (200 cases)", [&] {
        std::ostringstream sink;
        return check_bounds(sink, 200, 17) == 0;
    });
    check("eigendecomposition reconstructs its input", [&] {
        Rng rng(9);
        const Matrix a = random_spd(6, rng);
        const auto e = symmetric_eigen(a);
        const Matrix r = matmul(matmul(e.eigenvectors, Matrix::diagonal(e.eigenvalues)), transpose(e.eigenvectors));
        return max_abs_diff(r, a) <= 1e-9;
    });
    check("sliced variance of 1..10 in 5 slices is 0.25", [&] {
        const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
        return std::abs(sliced_variance(v, 5).value - 0.25) <= 1e-15;
    });
    check("budget clamps to [1, 0.8 N]", [&] {
        return next_budget(39.0, 10.0, 10.0, 0.13, 40.0) == 40.0 && next_budget(2.0, -10.0, -10.0, 0.13, 40.0) == 1.0;
    });

    const auto spec = small_quadratic();
    const ParamVector w0(std::vector<double>{2.0, -1.5});
    const TrainingProblem problem{spec, w0, nullptr, nullptr};
    OptimizerConfig opt;
    opt.eta0 = 0.05;
    opt.rho = 0.05;
    opt.lr_schedule = LrSchedule::constant;
    RunOptions ro;
    ro.iterations = 300;
    ro.record_trajectory = true;
    ro.measure_wall_clock = false;

    check("vsam with sampling always on equals sam bit for bit", [&] {
        SamplerConfig sc;
        sc.mode = SamplingMode::always;
        sc.warmup = 10;
        const auto a = run_sam(problem, opt, ro);
        const auto b = run_vsam(problem, opt, sc, ro);
        return a.trajectory == b.trajectory;
    });
    check("vsam accounting: grad evals = iterations + samples", [&] {
        SamplerConfig sc;
        sc.warmup = 50;
        const auto r = run_vsam(problem, opt, sc, ro);
        return r.grad_evals == r.iterations_run + r.sampling_number && r.sampling_number < r.iterations_run;
    });
    check("runs are deterministic", [&] {
        SamplerConfig sc;
        sc.warmup = 50;
        const auto a = run_vsam(problem, opt, sc, ro);
        const auto b = run_vsam(problem, opt, sc, ro);
        return a.trajectory == b.trajectory;
    });
    check("ais is D*E/T", [&] { return compute_ais(1000, 10, 20) == 500.0; });
    check("metrics header round-trips", [&] {
        std::stringstream s;
        write_metrics_header(s);
        MetricsRecord r;
        r.iteration = 1;
        r.cumulative_grad_evals = 2;
        r.sampled = true;
        write_metrics_row(s, r);
        const auto back = read_metrics(s);
        return back.size() == 1 && back[0].iteration == 1 && back[0].cumulative_grad_evals == 2 && back[0].sampled;
    });
    return check.all;
}

}  // namespace sharplab
