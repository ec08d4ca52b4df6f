#include "sharplab/metrics.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "sharplab/error.hpp"
#include "sharplab/format.hpp"

namespace sharplab {

const std::vector<std::string>& metrics_columns() {
    static const std::vector<std::string> columns = {
        "iteration",     "epoch",       "learning_rate",     "train_loss",    "eval_loss",
        "eval_accuracy", "l2_sgd",      "l2_psf",            "l2_sgd_subset", "l2_psf_subset",
        "psf_staleness", "sampled",     "reuse_coefficient", "p",             "s",
        "v",             "v_fallback",  "r",                 "c_var",         "c_norm",
        "update_norm_sq", "cumulative_grad_evals", "wall_clock_seconds"};
    return columns;
}

bool is_wall_clock_column(const std::string& name) { return name == "wall_clock_seconds"; }

void write_metrics_header(std::ostream& out) {
    const auto& cols = metrics_columns();
    for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
    out << '\n';
}

void write_metrics_row(std::ostream& out, const MetricsRecord& r) {
    out << r.iteration << ',' << r.epoch << ',' << format_real(r.learning_rate) << ',' << format_real(r.train_loss)
        << ',' << format_real(r.eval_loss) << ',' << format_real(r.eval_accuracy) << ',' << format_real(r.l2_sgd)
        << ',' << format_real(r.l2_psf) << ',' << format_real(r.l2_sgd_subset) << ','
        << format_real(r.l2_psf_subset) << ',' << r.psf_staleness << ',' << (r.sampled ? 1 : 0) << ','
        << format_real(r.reuse_coefficient) << ',' << format_real(r.p) << ',' << format_real(r.s) << ','
        << format_real(r.v) << ',' << (r.v_fallback ? 1 : 0) << ',' << format_real(r.r) << ','
        << format_real(r.c_var) << ',' << format_real(r.c_norm) << ',' << format_real(r.update_norm_sq) << ','
        << r.cumulative_grad_evals << ',' << format_real(r.wall_clock_seconds) << '\n';
}

std::vector<MetricsRecord> read_metrics(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("metrics: empty file");
    if (split(line, ',') != metrics_columns()) throw ConfigError("metrics: header does not match the schema");

    std::vector<MetricsRecord> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != metrics_columns().size())
            throw ConfigError("metrics: wrong field count on line " + std::to_string(lineno));
        MetricsRecord r;
        std::size_t k = 0;
        r.iteration = std::stoll(f[k++]);
        r.epoch = std::stoll(f[k++]);
        r.learning_rate = parse_real(f[k++]);
        r.train_loss = parse_real(f[k++]);
        r.eval_loss = parse_real(f[k++]);
        r.eval_accuracy = parse_real(f[k++]);
        r.l2_sgd = parse_real(f[k++]);
        r.l2_psf = parse_real(f[k++]);
        r.l2_sgd_subset = parse_real(f[k++]);
        r.l2_psf_subset = parse_real(f[k++]);
        r.psf_staleness = std::stoll(f[k++]);
        r.sampled = f[k++] == "1";
        r.reuse_coefficient = parse_real(f[k++]);
        r.p = parse_real(f[k++]);
        r.s = parse_real(f[k++]);
        r.v = parse_real(f[k++]);
        r.v_fallback = f[k++] == "1";
        r.r = parse_real(f[k++]);
        r.c_var = parse_real(f[k++]);
        r.c_norm = parse_real(f[k++]);
        r.update_norm_sq = parse_real(f[k++]);
        r.cumulative_grad_evals = std::stoll(f[k++]);
        r.wall_clock_seconds = parse_real(f[k++]);
        rows.push_back(r);
    }
    return rows;
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    return read_metrics(in);
}

}  // namespace sharplab
