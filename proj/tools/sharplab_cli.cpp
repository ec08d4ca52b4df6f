#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sharplab/dataset.hpp"
#include "sharplab/error.hpp"
#include "sharplab/format.hpp"
#include "sharplab/harness.hpp"

namespace fs = std::filesystem;
using namespace sharplab;

namespace {

int cmd_run(const fs::path& config_path) {
    const auto config = load_config(config_path);
    const auto result = run_experiment(config);
    for (const auto& s : result.summaries)
        std::cout << s.method << " seed=" << s.seed << " iterations=" << s.iterations
                  << " sampling_number=" << s.sampling_number << " grad_evals=" << s.grad_evals
                  << " accuracy=" << format_real(s.final_accuracy) << " train_loss=" << format_real(s.final_train_loss)
                  << '\n';
    std::cout << "wrote " << result.directory.string() << '\n';
    return 0;
}

int cmd_report(const std::vector<fs::path>& dirs, const std::string& csv_path) {
    const auto report = compare_report(dirs);
    write_report_text(std::cout, report);
    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        if (!out) throw ConfigError("cannot write " + csv_path);
        write_report_csv(out, report);
    }
    return 0;
}

int cmd_verify(const fs::path& dir) {
    const auto r = verify_runs(dir);
    for (const auto& line : r.passed) std::cout << "ok   " << line << '\n';
    for (const auto& line : r.failed) std::cout << "FAIL " << line << '\n';
    std::cout << r.passed.size() << " checks passed, " << r.failed.size() << " failed\n";
    return r.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sharplab: sharpness-aware optimization experiments"};
    app.require_subcommand(1);

    fs::path config_path;
    auto* run = app.add_subcommand("run", "run every seed of an experiment config");
    run->add_option("config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);

    std::vector<fs::path> report_dirs;
    std::string report_csv;
    auto* report = app.add_subcommand("report", "compare completed runs");
    report->add_option("dirs", report_dirs, "experiment or seed directories")->required();
    report->add_option("--csv", report_csv, "also write the table as CSV");

    fs::path verify_dir;
    auto* verify = app.add_subcommand("verify", "recompute accounting and summaries from metrics streams");
    verify->add_option("dir", verify_dir, "experiment or seed directory")->required();

    std::string kind;
    std::size_t n = 2000;
    double noise = 0.2;
    std::uint64_t seed = 0;
    std::string output;
    auto* gen = app.add_subcommand("gen-data", "write a generated dataset");
    gen->add_option("kind", kind, "blobs | moons | xor")->required();
    gen->add_option("--n", n, "number of rows");
    gen->add_option("--noise", noise, "noise level");
    gen->add_option("--seed", seed, "generator seed");
    gen->add_option("-o,--output", output, "output file (default: stdout)");

    std::size_t cases = 1000;
    std::uint64_t bound_seed = 0;
    std::size_t min_dim = 2, max_dim = 8;
    std::string bounds_out;
    auto* bounds = app.add_subcommand("check-bounds", "random sweep of the PSF norm bound on PD quadratics");
    bounds->add_option("--cases", cases, "number of random matrices");
    bounds->add_option("--seed", bound_seed, "sweep seed");
    bounds->add_option("--min-dim", min_dim, "smallest dimension");
    bounds->add_option("--max-dim", max_dim, "largest dimension");
    bounds->add_option("-o,--output", bounds_out, "CSV of all cases (default: stdout)");

    auto* self = app.add_subcommand("selfcheck", "run the built-in invariant suite");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path);
        if (report->parsed()) return cmd_report(report_dirs, report_csv);
        if (verify->parsed()) return cmd_verify(verify_dir);
        if (gen->parsed()) {
            const auto data = generate_dataset(parse_dataset_kind(kind), n, noise, seed);
            if (output.empty())
                write_dataset(std::cout, data);
            else
                save_dataset(output, data);
            std::cerr << "checksum " << dataset_checksum(data) << '\n';
            return 0;
        }
        if (bounds->parsed()) {
            std::size_t violations = 0;
            if (bounds_out.empty()) {
                violations = check_bounds(std::cout, cases, bound_seed, min_dim, max_dim);
            } else {
                std::ofstream out(bounds_out);
                if (!out) throw ConfigError("cannot write " + bounds_out);
                violations = check_bounds(out, cases, bound_seed, min_dim, max_dim);
            }
            std::cerr << cases << " cases, " << violations << " violations\n";
            return violations == 0 ? 0 : 1;
        }
        if (self->parsed()) return run_selfcheck(std::cout) ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
