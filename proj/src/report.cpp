#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "sharplab/error.hpp"
#include "sharplab/format.hpp"
#include "sharplab/harness.hpp"

namespace sharplab {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Group {
    std::vector<RunSummary> runs;
};

bool complete(const fs::path& dir, std::string& why) {
    if (fs::exists(dir / "error.txt")) {
        why = "run ended with an error";
        return false;
    }
    for (const char* f : {"metrics.csv", "summary.json"})
        if (!fs::exists(dir / f)) {
            why = std::string("missing ") + f;
            return false;
        }
    return true;
}

std::vector<fs::path> expand(const fs::path& p) {
    if (fs::exists(p / "metrics.csv") || fs::exists(p / "summary.json") || fs::exists(p / "error.txt")) return {p};
    std::vector<fs::path> out;
    if (fs::is_directory(p))
        for (const auto& e : fs::directory_iterator(p))
            if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) out.push_back(p);
    return out;
}

std::string pm(const MeanStd& m, int precision) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(precision);
    s << m.mean << " +- " << m.std;
    return s.str();
}

}  // namespace

const std::vector<std::string>& report_columns() {
    static const std::vector<std::string> cols = {"method",
                                                  "runs",
                                                  "accuracy_pct_mean",
                                                  "accuracy_pct_std",
                                                  "sampling_number_mean",
                                                  "sampling_number_std",
                                                  "grad_evals_mean",
                                                  "grad_evals_std",
                                                  "ais_mean",
                                                  "ais_std",
                                                  "grad_eval_ratio_vs_sam",
                                                  "best",
                                                  "warning"};
    return cols;
}

Report compare_report(const std::vector<fs::path>& dirs) {
    std::vector<std::string> order;
    std::map<std::string, Group> groups;
    std::vector<ReportRow> warnings;
    std::size_t completed = 0;

    for (const auto& d : dirs)
        for (const auto& run : expand(d)) {
            std::string why;
            RunSummary s;
            bool ok = complete(run, why);
            if (ok) try {
                    std::ifstream in(run / "summary.json");
                    s = summary_from_json(nlohmann::json::parse(in));
                } catch (const std::exception& e) {
                    ok = false;
                    why = std::string("unreadable summary: ") + e.what();
                }
            if (!ok) {
                ReportRow w;
                w.method = run.string();
                w.accuracy_pct = w.sampling_number = w.grad_evals = w.ais = {kNaN, kNaN};
                w.grad_eval_ratio_vs_sam = kNaN;
                w.warning = "excluded: " + why;
                warnings.push_back(w);
                continue;
            }
            ++completed;
            if (!groups.count(s.method)) order.push_back(s.method);
            groups[s.method].runs.push_back(s);
        }
    if (completed < 2) throw ConfigError("report needs at least two completed runs");

    Report report;
    for (const auto& name : order) {
        const auto& g = groups[name];
        std::vector<double> acc, samples, evals, ais;
        for (const auto& s : g.runs) {
            acc.push_back(100.0 * s.final_accuracy);
            samples.push_back(static_cast<double>(s.sampling_number));
            evals.push_back(static_cast<double>(s.grad_evals));
            ais.push_back(s.ais);
        }
        ReportRow row;
        row.method = name;
        row.runs = g.runs.size();
        row.accuracy_pct = mean_std(acc);
        row.sampling_number = mean_std(samples);
        row.grad_evals = mean_std(evals);
        row.ais = mean_std(ais);
        row.grad_eval_ratio_vs_sam = kNaN;
        report.rows.push_back(row);
    }

    // Ratio against the SAM group, only when iteration counts line up.
    if (groups.count("sam")) {
        const auto& sam = groups["sam"].runs;
        const double sam_evals = mean_std([&] {
                                     std::vector<double> v;
                                     for (const auto& s : sam) v.push_back(static_cast<double>(s.grad_evals));
                                     return v;
                                 }())
                                     .mean;
        for (auto& row : report.rows) {
            const auto& runs = groups[row.method].runs;
            const bool aligned = std::all_of(runs.begin(), runs.end(), [&](const RunSummary& s) {
                return std::all_of(sam.begin(), sam.end(),
                                   [&](const RunSummary& t) { return t.iterations == s.iterations; });
            });
            if (aligned && sam_evals > 0.0) row.grad_eval_ratio_vs_sam = row.grad_evals.mean / sam_evals;
        }
    }

    auto mark_best = [&](auto field, bool higher, const char* tag) {
        double best = higher ? -INFINITY : INFINITY;
        for (const auto& r : report.rows) {
            const double v = field(r);
            if (std::isnan(v)) continue;
            best = higher ? std::max(best, v) : std::min(best, v);
        }
        for (auto& r : report.rows)
            if (field(r) == best) r.marks += (r.marks.empty() ? "" : " ") + std::string(tag);
    };
    mark_best([](const ReportRow& r) { return r.accuracy_pct.mean; }, true, "accuracy");
    mark_best([](const ReportRow& r) { return r.sampling_number.mean; }, false, "sampling");
    mark_best([](const ReportRow& r) { return r.ais.mean; }, true, "ais");

    for (auto& w : warnings) report.rows.push_back(w);
    return report;
}

void write_report_text(std::ostream& out, const Report& report) {
    out << "method               runs  accuracy (%)       sampling number        grad evals             "
           "AIS (examples/s)       evals/SAM  best\n";
    out << "(mean +- population std over seeds; the best column names where the method leads)\n";
    for (const auto& r : report.rows) {
        if (!r.warning.empty()) {
            out << "WARNING " << r.method << ": " << r.warning << '\n';
            continue;
        }
        char buf[512];
        std::snprintf(buf, sizeof buf, "%-20s %5zu  %-18s %-22s %-22s %-22s %-10s %s\n", r.method.c_str(), r.runs,
                      pm(r.accuracy_pct, 2).c_str(), pm(r.sampling_number, 1).c_str(), pm(r.grad_evals, 1).c_str(),
                      pm(r.ais, 1).c_str(),
                      std::isnan(r.grad_eval_ratio_vs_sam) ? "-" : format_real(r.grad_eval_ratio_vs_sam).substr(0, 6).c_str(),
                      r.marks.c_str());
        out << buf;
    }
}

void write_report_csv(std::ostream& out, const Report& report) {
    const auto& cols = report_columns();
    for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
    out << '\n';
    for (const auto& r : report.rows) {
        out << r.method << ',' << r.runs << ',' << format_real(r.accuracy_pct.mean) << ','
            << format_real(r.accuracy_pct.std) << ',' << format_real(r.sampling_number.mean) << ','
            << format_real(r.sampling_number.std) << ',' << format_real(r.grad_evals.mean) << ','
            << format_real(r.grad_evals.std) << ',' << format_real(r.ais.mean) << ',' << format_real(r.ais.std) << ','
            << format_real(r.grad_eval_ratio_vs_sam) << ',' << r.marks << ',' << r.warning << '\n';
    }
}

}  // namespace sharplab
