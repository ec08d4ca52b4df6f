#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "sharplab/error.hpp"
#include "sharplab/format.hpp"
#include "sharplab/harness.hpp"

using namespace sharplab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const char* root = std::getenv(kOutputRootEnv);
    fs::path p = fs::path(root ? root : fs::temp_directory_path().string()) / ("unit_" + name);
    fs::remove_all(p);
    return p;
}

json quadratic_config(const std::string& method, const fs::path& out) {
    return {{"name", "q"},
            {"objective", {{"kind", "quadratic"}, {"a", {{3.0, 0.5}, {0.5, 1.0}}}, {"b", {1.0, -1.0}}}},
            {"optimizer", {{"method", method}, {"eta0", 0.05}, {"rho", 0.05}, {"lr_schedule", "constant"}}},
            {"sampler", {{"window", 10}, {"slices", 5}, {"initial_budget", 5}, {"warmup", 20}}},
            {"iterations", 200},
            {"seeds", {0, 1, 2}},
            {"output_dir", out.string()}};
}

json mlp_config(const std::string& method, const fs::path& out) {
    return {{"name", "m"},
            {"dataset", {{"kind", "moons"}, {"n", 200}, {"noise", 0.2}, {"seed", 1}}},
            {"objective", {{"kind", "mlp_classifier"}, {"hidden", {6}}, {"activation", "tanh"}}},
            {"optimizer", {{"method", method}, {"eta0", 0.2}, {"rho", 0.05}}},
            {"sampler", {{"window", 10}, {"slices", 5}, {"initial_budget", 5}, {"warmup", 30}}},
            {"epochs", 3},
            {"batch_size", 16},
            {"seeds", {0, 1}},
            {"output_dir", out.string()}};
}

std::string strip_wall_clock(const fs::path& metrics) {
    std::ifstream in(metrics);
    std::string line, out;
    std::getline(in, line);
    const auto cols = split(line, ',');
    out += line + "\n";
    while (std::getline(in, line)) {
        const auto f = split(line, ',');
        for (std::size_t k = 0; k < f.size(); ++k)
            if (!is_wall_clock_column(cols[k])) out += f[k] + ",";
        out += "\n";
    }
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

RunSummary fake_summary(std::int64_t iterations, std::int64_t evals) {
    RunSummary s;
    s.iterations = iterations;
    s.grad_evals = evals;
    return s;
}

}  // namespace

TEST(Ais, Substitution) {
    EXPECT_EQ(compute_ais(1000, 10, 20), 500.0);
    EXPECT_EQ(compute_ais(1000, 10, 40), 250.0);
    EXPECT_THROW(compute_ais(0, 10, 20), ConfigError);
    EXPECT_THROW(compute_ais(1000, 10, -1), ConfigError);
}

TEST(GradEvalRatio, Arithmetic) {
    EXPECT_DOUBLE_EQ(grad_eval_ratio(fake_summary(1000, 1300), fake_summary(1000, 2000)), 0.65);
    EXPECT_EQ(grad_eval_ratio(fake_summary(1000, 2000), fake_summary(1000, 2000)), 1.0);
    EXPECT_DOUBLE_EQ(grad_eval_ratio(fake_summary(100, 120), fake_summary(100, 200)), 0.6);
    EXPECT_THROW(grad_eval_ratio(fake_summary(100, 120), fake_summary(101, 200)), ConfigError);
}

TEST(MeanStdTest, PopulationDeviation) {
    const auto m = mean_std({96.5, 96.7, 96.6});
    EXPECT_NEAR(m.mean, 96.6, 1e-12);
    EXPECT_NEAR(m.std, std::sqrt(0.02 / 3.0), 1e-12);
    EXPECT_NEAR(m.std, 0.0816, 1e-4);
    EXPECT_EQ(mean_std({3.0, 3.0}).std, 0.0);
}

TEST(Config, ParsesAndRoundTrips) {
    const auto c = parse_config(mlp_config("sam_k", "out"));
    EXPECT_EQ(c.method, Method::sam_k);
    EXPECT_EQ(c.label(), "sam_k(5)");
    EXPECT_EQ(c.sampler.window, 10u);
    EXPECT_EQ(*c.epochs, 3);
    const auto again = parse_config(config_to_json(c));
    EXPECT_EQ(config_to_json(again), config_to_json(c));
}

TEST(Config, UnknownKeysAreErrors) {
    auto j = quadratic_config("sam", "out");
    j["optimiser"] = json::object();
    EXPECT_THROW(parse_config(j), ConfigError);
    j = quadratic_config("sam", "out");
    j["sampler"]["windw"] = 3;
    EXPECT_THROW(parse_config(j), ConfigError);
    j = quadratic_config("sam", "out");
    j["objective"]["c"] = 1;
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, InvalidValuesFailBeforeCompute) {
    auto j = quadratic_config("sam", "out");
    j["seeds"] = json::array();
    EXPECT_THROW(parse_config(j).validate(), ConfigError);
    j = quadratic_config("sam", "out");
    j["iterations"] = 0;
    EXPECT_THROW(parse_config(j).validate(), ConfigError);
    j = quadratic_config("vsam", "out");
    j["sampler"]["window"] = 12;
    EXPECT_THROW(parse_config(j).validate(), ConfigError);
    j = quadratic_config("sam", "out");
    j["epochs"] = 2;
    EXPECT_THROW(parse_config(j).validate(), ConfigError);
    j = quadratic_config("sam", "out");
    j["optimizer"]["method"] = "adam";
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, OutputRootOverride) {
    auto c = parse_config(quadratic_config("sam", "runs/x"));
    const char* before = std::getenv(kOutputRootEnv);
    const std::string saved = before ? before : "";
    setenv(kOutputRootEnv, "/tmp/elsewhere", 1);
    EXPECT_EQ(resolve_output_dir(c), fs::path("/tmp/elsewhere/runs/x"));
    c.output_dir = "/abs/path";
    EXPECT_EQ(resolve_output_dir(c), fs::path("/abs/path"));
    if (before)
        setenv(kOutputRootEnv, saved.c_str(), 1);
    else
        unsetenv(kOutputRootEnv);
}

TEST(Experiment, FansOutOverSeeds) {
    const auto dir = scratch("fanout");
    const auto result = run_experiment(parse_config(quadratic_config("vsam", dir)));
    ASSERT_EQ(result.run_dirs.size(), 3u);
    for (int s = 0; s < 3; ++s) {
        const auto d = dir / ("seed_" + std::to_string(s));
        for (const char* f : {"config.json", "metrics.csv", "norms.csv", "summary.json"})
            EXPECT_TRUE(fs::exists(d / f)) << d / f;
    }
    EXPECT_TRUE(fs::exists(dir / "aggregate.json"));
    EXPECT_TRUE(fs::exists(dir / "config.json"));
    const auto agg = json::parse(slurp(dir / "aggregate.json"));
    EXPECT_EQ(agg["seeds"].size(), 3u);
}

TEST(Experiment, MetricsHeaderIsFixed) {
    const auto dir = scratch("header");
    run_experiment(parse_config(quadratic_config("sgd", dir)));
    std::ifstream in(dir / "seed_0" / "metrics.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(split(line, ','), metrics_columns());
    EXPECT_EQ(metrics_columns().front(), "iteration");
    EXPECT_EQ(metrics_columns().back(), "wall_clock_seconds");
}

TEST(Experiment, ForcedFullRateSamplesEveryIteration) {
    const auto dir = scratch("fullrate");
    auto j = quadratic_config("vsam", dir);
    j["sampler"] = {{"window", 10}, {"slices", 5}, {"initial_budget", 10}, {"max_rate", 1.0}, {"alpha", 0.0}, {"warmup", 5}};
    const auto r = run_experiment(parse_config(j));
    for (const auto& s : r.summaries) {
        EXPECT_EQ(s.sampling_number, s.iterations);
        EXPECT_EQ(s.grad_evals, 2 * s.iterations);
    }
}

TEST(Experiment, DeterministicModuloWallClock) {
    const auto a = scratch("det_a"), b = scratch("det_b");
    run_experiment(parse_config(mlp_config("vsam", a)));
    run_experiment(parse_config(mlp_config("vsam", b)));
    for (const char* s : {"seed_0", "seed_1"}) {
        EXPECT_EQ(strip_wall_clock(a / s / "metrics.csv"), strip_wall_clock(b / s / "metrics.csv"));
        EXPECT_EQ(slurp(a / s / "norms.csv"), slurp(b / s / "norms.csv"));
    }
    EXPECT_NE(strip_wall_clock(a / "seed_0" / "metrics.csv"), strip_wall_clock(a / "seed_1" / "metrics.csv"));
}

TEST(Experiment, EvalEachEpoch) {
    const auto dir = scratch("epochs");
    run_experiment(parse_config(mlp_config("sgd", dir)));
    const auto rows = read_metrics(dir / "seed_0" / "metrics.csv");
    // 160 training rows, batch 16: 10 iterations per epoch.
    ASSERT_EQ(rows.size(), 30u);
    for (const auto& r : rows) EXPECT_EQ(std::isnan(r.eval_accuracy), r.iteration % 10 != 0) << r.iteration;
    EXPECT_EQ(rows.back().epoch, 3);
}

TEST(Experiment, NumericFailureLeavesMarker) {
    const auto dir = scratch("diverge");
    auto j = quadratic_config("sgd", dir);
    j["optimizer"]["eta0"] = 1.0;
    j["iterations"] = 5000;
    j["seeds"] = {0};
    EXPECT_THROW(run_experiment(parse_config(j)), NumericError);
    EXPECT_TRUE(fs::exists(dir / "seed_0" / "error.txt"));
    EXPECT_FALSE(read_metrics(dir / "seed_0" / "metrics.csv").empty());
    EXPECT_FALSE(verify_runs(dir).ok());
}

TEST(Verify, AcceptsCleanRunsAndCatchesTampering) {
    const auto dir = scratch("verify");
    run_experiment(parse_config(quadratic_config("vsam", dir)));
    const auto ok = verify_runs(dir);
    EXPECT_TRUE(ok.ok()) << (ok.failed.empty() ? "" : ok.failed.front());
    EXPECT_GT(ok.passed.size(), 10u);

    auto s = json::parse(slurp(dir / "seed_1" / "summary.json"));
    s["grad_evals"] = s["grad_evals"].get<int>() + 1;
    std::ofstream(dir / "seed_1" / "summary.json") << s.dump(2);
    EXPECT_FALSE(verify_runs(dir).ok());
    EXPECT_TRUE(verify_runs(dir / "seed_0").ok());

    std::string m = slurp(dir / "seed_2" / "metrics.csv");
    const auto pos = m.rfind(',');
    m.replace(m.rfind(',', pos - 1) + 1, pos - m.rfind(',', pos - 1) - 1, "1");
    std::ofstream(dir / "seed_2" / "metrics.csv") << m;
    EXPECT_FALSE(verify_runs(dir / "seed_2").ok());
}

TEST(Report, GroupsMethodsAndMarksBest) {
    const auto sam = scratch("rep_sam"), vsam = scratch("rep_vsam"), sgd = scratch("rep_sgd");
    run_experiment(parse_config(mlp_config("sam", sam)));
    run_experiment(parse_config(mlp_config("vsam", vsam)));
    run_experiment(parse_config(mlp_config("sgd", sgd)));
    const auto report = compare_report({sam, vsam, sgd});
    ASSERT_EQ(report.rows.size(), 3u);
    EXPECT_EQ(report.rows[0].method, "sam");
    EXPECT_EQ(report.rows[0].runs, 2u);
    EXPECT_EQ(report.rows[0].grad_eval_ratio_vs_sam, 1.0);
    EXPECT_DOUBLE_EQ(report.rows[2].grad_eval_ratio_vs_sam, 0.5);
    EXPECT_EQ(report.rows[0].sampling_number.std, 0.0);
    EXPECT_NE(report.rows[2].marks.find("sampling"), std::string::npos);

    std::ostringstream csv;
    write_report_csv(csv, report);
    std::istringstream in(csv.str());
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(split(header, ','), report_columns());
    std::ostringstream text;
    write_report_text(text, report);
    EXPECT_NE(text.str().find("population"), std::string::npos);
}

TEST(Report, IdenticalRunsHaveZeroSpread) {
    const auto a = scratch("same_a"), b = scratch("same_b");
    auto ja = quadratic_config("sam", a);
    ja["seeds"] = {4};
    auto jb = quadratic_config("sam", b);
    jb["seeds"] = {4};
    run_experiment(parse_config(ja));
    run_experiment(parse_config(jb));
    const auto r = compare_report({a, b});
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.rows[0].grad_evals.std, 0.0);
    EXPECT_EQ(r.rows[0].sampling_number.std, 0.0);
}

TEST(Report, IncompleteRunBecomesWarning) {
    const auto a = scratch("inc");
    run_experiment(parse_config(quadratic_config("sam", a)));
    fs::remove(a / "seed_2" / "summary.json");
    const auto r = compare_report({a});
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_EQ(r.rows[0].runs, 2u);
    EXPECT_FALSE(r.rows[1].warning.empty());
    const auto lonely = scratch("lonely");
    auto j = quadratic_config("sam", lonely);
    j["seeds"] = {0};
    run_experiment(parse_config(j));
    EXPECT_THROW(compare_report({lonely}), ConfigError);
}

TEST(Selfcheck, AllInvariantsPass) {
    std::ostringstream out;
    EXPECT_TRUE(run_selfcheck(out)) << out.str();
}
