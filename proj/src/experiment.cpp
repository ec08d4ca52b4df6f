#include <cmath>
#include <fstream>
#include <limits>

#include "sharplab/diagnostics.hpp"
#include "sharplab/error.hpp"
#include "sharplab/format.hpp"
#include "sharplab/harness.hpp"

namespace sharplab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// NaN-safe JSON number: NaN is stored as null.
json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
double number_from(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    return json::parse(in);
}

fs::path seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

}  // namespace

double compute_ais(double examples_per_epoch, double epochs, double seconds) {
    if (!(examples_per_epoch > 0.0) || !(epochs > 0.0) || !(seconds > 0.0))
        throw ConfigError("compute_ais: all inputs must be positive");
    return examples_per_epoch * epochs / seconds;
}

double grad_eval_ratio(const RunSummary& a, const RunSummary& b) {
    if (a.iterations != b.iterations)
        throw ConfigError("grad_eval_ratio: runs have different iteration counts (" + std::to_string(a.iterations) +
                          " vs " + std::to_string(b.iterations) + ")");
    if (b.grad_evals <= 0) throw ConfigError("grad_eval_ratio: reference run has no gradient evaluations");
    return static_cast<double>(a.grad_evals) / static_cast<double>(b.grad_evals);
}

json summary_to_json(const RunSummary& s) {
    return {{"method", s.method},
            {"seed", s.seed},
            {"iterations", s.iterations},
            {"sampling_number", s.sampling_number},
            {"grad_evals", s.grad_evals},
            {"final_train_loss", number(s.final_train_loss)},
            {"final_eval_loss", number(s.final_eval_loss)},
            {"final_accuracy", number(s.final_accuracy)},
            {"examples_per_epoch", s.examples_per_epoch},
            {"batches_per_epoch", s.batches_per_epoch},
            {"epochs", s.epochs},
            {"wall_seconds", s.wall_seconds},
            {"ais", s.ais},
            {"stopped_by_budget", s.stopped_by_budget}};
}

RunSummary summary_from_json(const json& j) {
    RunSummary s;
    s.method = j.at("method").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.iterations = j.at("iterations").get<std::int64_t>();
    s.sampling_number = j.at("sampling_number").get<std::int64_t>();
    s.grad_evals = j.at("grad_evals").get<std::int64_t>();
    s.final_train_loss = number_from(j.at("final_train_loss"));
    s.final_eval_loss = number_from(j.at("final_eval_loss"));
    s.final_accuracy = number_from(j.at("final_accuracy"));
    s.examples_per_epoch = j.at("examples_per_epoch").get<double>();
    s.batches_per_epoch = j.at("batches_per_epoch").get<std::int64_t>();
    s.epochs = j.at("epochs").get<double>();
    s.wall_seconds = j.at("wall_seconds").get<double>();
    s.ais = j.at("ais").get<double>();
    s.stopped_by_budget = j.at("stopped_by_budget").get<bool>();
    return s;
}

RunSummary summarize(const std::vector<MetricsRecord>& records, const std::string& method, std::uint64_t seed,
                     double examples_per_epoch, std::int64_t batches_per_epoch, bool stopped_by_budget) {
    if (records.empty()) throw ConfigError("summarize: empty metrics stream");
    RunSummary s;
    s.method = method;
    s.seed = seed;
    s.iterations = static_cast<std::int64_t>(records.size());
    for (const auto& r : records) s.sampling_number += r.sampled ? 1 : 0;
    s.grad_evals = records.back().cumulative_grad_evals;
    s.final_train_loss = records.back().train_loss;
    s.final_eval_loss = kNaN;
    s.final_accuracy = kNaN;
    for (auto it = records.rbegin(); it != records.rend(); ++it)
        if (!std::isnan(it->eval_accuracy) || !std::isnan(it->eval_loss)) {
            s.final_eval_loss = it->eval_loss;
            s.final_accuracy = it->eval_accuracy;
            break;
        }
    s.examples_per_epoch = examples_per_epoch;
    s.batches_per_epoch = batches_per_epoch;
    s.epochs = static_cast<double>(s.iterations) / static_cast<double>(batches_per_epoch);
    // A zero-length clock reading (clock disabled or too coarse) is floored at 1 ns.
    s.wall_seconds = std::max(records.back().wall_clock_seconds, 1e-9);
    s.ais = compute_ais(examples_per_epoch, s.epochs, s.wall_seconds);
    s.stopped_by_budget = stopped_by_budget;
    return s;
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    if (values.empty()) return {kNaN, kNaN};
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size()));
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const PreparedData data = prepare_data(config);
    const fs::path root = resolve_output_dir(config);
    fs::create_directories(root);
    write_json(root / "config.json", config_to_json(config));

    const double examples_per_epoch = data.train ? static_cast<double>(data.train->size()) : 1.0;
    const std::int64_t batches_per_epoch =
        data.train && config.objective.uses_data()
            ? static_cast<std::int64_t>((data.train->size() + config.batch_size - 1) / config.batch_size)
            : 1;

    ExperimentResult result;
    result.directory = root;
    for (std::uint64_t seed : config.seeds) {
        const fs::path dir = root / seed_dir_name(seed);
        fs::create_directories(dir);
        fs::remove(dir / "error.txt");
        json snapshot = config_to_json(config);
        snapshot["seeds"] = json::array({seed});
        write_json(dir / "config.json", snapshot);

        std::ofstream metrics(dir / "metrics.csv");
        if (!metrics) throw ConfigError("cannot write " + (dir / "metrics.csv").string());
        write_metrics_header(metrics);

        RunOptions options;
        options.on_record = [&metrics](const MetricsRecord& rec) { write_metrics_row(metrics, rec); };

        RunResult run;
        try {
            run = run_single(config, data, seed, options);
        } catch (const Error& e) {
            metrics.flush();
            std::ofstream err(dir / "error.txt");
            err << e.what() << '\n';
            throw;
        }
        metrics.close();

        save_norm_trace(dir / "norms.csv", norm_trace(run.records));
        const RunSummary summary = summarize(run.records, config.label(), seed, examples_per_epoch, batches_per_epoch,
                                             run.stopped_by_budget);
        write_json(dir / "summary.json", summary_to_json(summary));
        result.run_dirs.push_back(dir);
        result.summaries.push_back(summary);
    }

    std::vector<double> acc, samples, evals, ais;
    for (const auto& s : result.summaries) {
        acc.push_back(s.final_accuracy);
        samples.push_back(static_cast<double>(s.sampling_number));
        evals.push_back(static_cast<double>(s.grad_evals));
        ais.push_back(s.ais);
    }
    auto pair = [](const MeanStd& m) { return json{{"mean", number(m.mean)}, {"std", number(m.std)}}; };
    write_json(root / "aggregate.json", {{"method", config.label()},
                                         {"seeds", config.seeds},
                                         {"final_accuracy", pair(mean_std(acc))},
                                         {"sampling_number", pair(mean_std(samples))},
                                         {"grad_evals", pair(mean_std(evals))},
                                         {"ais", pair(mean_std(ais))}});
    return result;
}

namespace {

void verify_one(const fs::path& dir, VerifyResult& out) {
    const std::string tag = dir.filename().string() + ": ";
    auto check = [&](bool ok, const std::string& what) { (ok ? out.passed : out.failed).push_back(tag + what); };

    if (fs::exists(dir / "error.txt")) {
        check(false, "run ended with an error marker");
        return;
    }
    std::vector<MetricsRecord> rows;
    try {
        rows = read_metrics(dir / "metrics.csv");
        check(true, "metrics header matches the schema");
    } catch (const Error& e) {
        check(false, std::string("metrics unreadable: ") + e.what());
        return;
    }
    if (rows.empty()) {
        check(false, "metrics stream is empty");
        return;
    }

    bool increments_ok = true;
    bool order_ok = true;
    std::int64_t prev_evals = 0;
    std::int64_t sampled = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        const std::int64_t expected = prev_evals + (r.sampled ? 2 : 1);
        if (r.cumulative_grad_evals != expected) increments_ok = false;
        if (k > 0 && r.iteration != rows[k - 1].iteration + 1) order_ok = false;
        prev_evals = r.cumulative_grad_evals;
        sampled += r.sampled ? 1 : 0;
    }
    check(order_ok, "iterations are consecutive");
    check(increments_ok, "grad-eval increments are 2 on sampled iterations and 1 otherwise");
    const auto iterations = static_cast<std::int64_t>(rows.size());
    check(rows.back().cumulative_grad_evals == iterations + sampled,
          "total grad evals (" + std::to_string(rows.back().cumulative_grad_evals) + ") = iterations (" +
              std::to_string(iterations) + ") + sampling number (" + std::to_string(sampled) + ")");

    try {
        const auto norms = load_norm_trace(dir / "norms.csv");
        const auto expected = norm_trace(rows);
        bool same = norms.size() == expected.size();
        for (std::size_t k = 0; same && k < norms.size(); ++k) {
            const auto& a = norms[k];
            const auto& b = expected[k];
            same = a.iteration == b.iteration && format_real(a.l2_sgd) == format_real(b.l2_sgd) &&
                   format_real(a.l2_psf) == format_real(b.l2_psf) && a.stale == b.stale && a.staleness == b.staleness;
        }
        check(same, "norm trace matches the metrics stream");
    } catch (const Error& e) {
        check(false, std::string("norm trace unreadable: ") + e.what());
    }

    try {
        const RunSummary stored = summary_from_json(read_json(dir / "summary.json"));
        const RunSummary fresh = summarize(rows, stored.method, stored.seed, stored.examples_per_epoch,
                                           stored.batches_per_epoch, stored.stopped_by_budget);
        check(stored.iterations == fresh.iterations, "summary iterations");
        check(stored.sampling_number == fresh.sampling_number, "summary sampling number");
        check(stored.grad_evals == fresh.grad_evals, "summary grad evals");
        check(format_real(stored.final_train_loss) == format_real(fresh.final_train_loss), "summary final train loss");
        check(format_real(stored.final_accuracy) == format_real(fresh.final_accuracy), "summary final accuracy");
        check(format_real(stored.final_eval_loss) == format_real(fresh.final_eval_loss), "summary final eval loss");
        check(std::abs(stored.ais - fresh.ais) <= 1e-9 * std::max(1.0, std::abs(fresh.ais)), "summary AIS");
        check(stored.sampling_number <= stored.iterations && stored.ais > 0.0, "summary bounds");
    } catch (const std::exception& e) {
        check(false, std::string("summary unreadable: ") + e.what());
    }
}

}  // namespace

VerifyResult verify_runs(const fs::path& dir) {
    VerifyResult out;
    if (!fs::is_directory(dir)) {
        out.failed.push_back(dir.string() + ": not a directory");
        return out;
    }
    if (fs::exists(dir / "metrics.csv")) {
        verify_one(dir, out);
        return out;
    }
    std::vector<fs::path> seeds;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory() && entry.path().filename().string().rfind("seed_", 0) == 0) seeds.push_back(entry.path());
    std::sort(seeds.begin(), seeds.end());
    if (seeds.empty()) out.failed.push_back(dir.string() + ": no run directories found");
    for (const auto& s : seeds) verify_one(s, out);
    return out;
}

}  // namespace sharplab
