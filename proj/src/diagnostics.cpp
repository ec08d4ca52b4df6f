#include "sharplab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <variant>

#include "sharplab/error.hpp"
#include "sharplab/format.hpp"
#include "sharplab/random.hpp"
#include "sharplab/sam.hpp"

namespace sharplab {

namespace {

double frobenius(const Matrix& a) { return norm2(a.data()); }

double max_off_diagonal(const Matrix& a) {
    double m = 0.0;
    for (std::size_t p = 0; p < a.rows(); ++p)
        for (std::size_t q = p + 1; q < a.cols(); ++q) m = std::max(m, std::abs(a(p, q)));
    return m;
}

// Zeroes a(p, q) with a similarity rotation and accumulates it into v.
void jacobi_rotate(Matrix& a, Matrix& v, std::size_t p, std::size_t q) {
    const double apq = a(p, q);
    if (apq == 0.0) return;
    const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
    double t;
    if (std::abs(theta) > 1e150)
        t = 1.0 / (2.0 * theta);
    else
        t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    const double s = t * c;
    const std::size_t n = a.rows();

    for (std::size_t k = 0; k < n; ++k) {
        const double akp = a(k, p);
        const double akq = a(k, q);
        a(k, p) = c * akp - s * akq;
        a(k, q) = s * akp + c * akq;
    }
    for (std::size_t k = 0; k < n; ++k) {
        const double apk = a(p, k);
        const double aqk = a(q, k);
        a(p, k) = c * apk - s * aqk;
        a(q, k) = s * apk + c * aqk;
    }
    a(p, q) = 0.0;
    a(q, p) = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double vkp = v(k, p);
        const double vkq = v(k, q);
        v(k, p) = c * vkp - s * vkq;
        v(k, q) = s * vkp + c * vkq;
    }
}

}  // namespace

EigenDecomposition symmetric_eigen(const Matrix& input, int max_sweeps) {
    if (!input.square() || input.rows() == 0) throw ConfigError("symmetric_eigen: matrix must be square and non-empty");
    const double scale = std::max(1.0, frobenius(input));
    if (!input.is_symmetric(1e-12 * scale)) throw ConfigError("symmetric_eigen: matrix is not symmetric");
    const std::size_t n = input.rows();
    const double tol = 1e-12 * scale;

    Matrix a = input;
    Matrix v = Matrix::identity(n);
    int sweeps = 0;
    while (max_off_diagonal(a) >= tol) {
        if (sweeps == max_sweeps) throw NumericError("symmetric_eigen: no convergence within the sweep budget");
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) jacobi_rotate(a, v, p, q);
        ++sweeps;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    EigenDecomposition out;
    out.sweeps = sweeps;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        out.eigenvalues[k] = a(src, src);
        double sign = 1.0;
        for (std::size_t r = 0; r < n; ++r)
            if (std::abs(v(r, src)) > 1e-12) {
                sign = v(r, src) < 0.0 ? -1.0 : 1.0;
                break;
            }
        for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = sign * v(r, src);
    }
    return out;
}

BoundCheckResult psf_bound_check(const Matrix& a, std::span<const double> g, double rho) {
    if (a.rows() != g.size()) throw ConfigError("psf_bound_check: dimension mismatch");
    const double gnorm = norm2(g);
    if (!(gnorm > 0.0)) throw ConfigError("psf_bound_check: gradient must be nonzero");
    const auto eig = symmetric_eigen(a);
    for (double d : eig.eigenvalues)
        if (!(d > 0.0)) throw ConfigError("psf_bound_check: matrix is not positive definite");

    BoundCheckResult r;
    r.lhs = rho * norm2(matvec(a, g)) / gnorm;
    double sum = 0.0;
    for (std::size_t k = 0; k < eig.eigenvalues.size(); ++k) {
        double proj = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) proj += eig.eigenvectors(i, k) * g[i];
        sum += eig.eigenvalues[k] * std::abs(proj / gnorm);
    }
    r.rhs = rho * sum;
    r.slack = r.rhs - r.lhs;
    r.satisfied = r.lhs <= r.rhs + kBoundTolerance;
    return r;
}

std::vector<double> hessian_vector_product(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch,
                                           std::span<const double> v, double h) {
    if (v.size() != w.size()) throw ConfigError("hessian_vector_product: dimension mismatch");
    if (const auto* q = std::get_if<QuadraticModel>(&spec.model)) {
        auto hv = matvec(q->a, v);
        for (std::size_t i = 0; i < hv.size(); ++i) hv[i] += 2.0 * spec.weight_decay * v[i];
        return hv;
    }
    std::vector<double> up(w.begin(), w.end());
    std::vector<double> down(w.begin(), w.end());
    for (std::size_t i = 0; i < w.size(); ++i) {
        up[i] += h * v[i];
        down[i] -= h * v[i];
    }
    const auto gu = eval_grad(spec, up, batch).grad;
    const auto gd = eval_grad(spec, down, batch).grad;
    std::vector<double> hv(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) hv[i] = (gu[i] - gd[i]) / (2.0 * h);
    return hv;
}

double decomposition_residual(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch, double rho) {
    IndexRanges all;
    all.ranges.emplace_back(0, w.size());
    const auto triple = sam_gradient(spec, w, batch, rho, all);
    if (triple.l2_sgd < kDegenerateGradNorm) return 0.0;
    std::vector<double> u(triple.g_sgd);
    for (double& x : u) x /= triple.l2_sgd;
    const auto hu = hessian_vector_product(spec, w, batch, u);
    double acc = 0.0;
    for (std::size_t i = 0; i < hu.size(); ++i) {
        const double d = triple.psf[i] - rho * hu[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

double convergence_term(std::span<const double> g_sgd, std::span<const double> psf, double gamma) {
    if (g_sgd.size() != psf.size()) throw ConfigError("convergence_term: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < g_sgd.size(); ++i) {
        const double d = g_sgd[i] + gamma * psf[i];
        acc += d * d;
    }
    return acc;
}

ConvergenceSeries convergence_metric(std::span<const MetricsRecord> trace) {
    ConvergenceSeries out;
    double total = 0.0;
    for (std::size_t t = 0; t < trace.size(); ++t) {
        total += trace[t].update_norm_sq;
        out.iteration.push_back(trace[t].iteration);
        out.term.push_back(trace[t].update_norm_sq);
        out.running_mean.push_back(total / static_cast<double>(t + 1));
    }
    return out;
}

const std::vector<std::string>& norm_trace_columns() {
    static const std::vector<std::string> cols = {"iteration",     "l2_sgd", "l2_psf",   "l2_sgd_subset",
                                                  "l2_psf_subset", "stale",  "staleness"};
    return cols;
}

std::vector<NormTraceRow> norm_trace(std::span<const MetricsRecord> trace) {
    if (trace.empty()) throw ConfigError("norm_trace: empty trace");
    std::vector<NormTraceRow> rows;
    rows.reserve(trace.size());
    for (const auto& r : trace)
        rows.push_back({r.iteration, r.l2_sgd, r.l2_psf, r.l2_sgd_subset, r.l2_psf_subset, r.psf_staleness != 0,
                        r.psf_staleness});
    return rows;
}

void write_norm_trace(std::ostream& out, std::span<const NormTraceRow> rows) {
    const auto& cols = norm_trace_columns();
    for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
    out << '\n';
    for (const auto& r : rows)
        out << r.iteration << ',' << format_real(r.l2_sgd) << ',' << format_real(r.l2_psf) << ','
            << format_real(r.l2_sgd_subset) << ',' << format_real(r.l2_psf_subset) << ',' << (r.stale ? 1 : 0) << ','
            << r.staleness << '\n';
}

std::vector<NormTraceRow> read_norm_trace(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || split(line, ',') != norm_trace_columns())
        throw ConfigError("norm trace: header does not match the schema");
    std::vector<NormTraceRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != norm_trace_columns().size()) throw ConfigError("norm trace: wrong field count");
        rows.push_back({std::stoll(f[0]), parse_real(f[1]), parse_real(f[2]), parse_real(f[3]), parse_real(f[4]),
                        f[5] == "1", std::stoll(f[6])});
    }
    return rows;
}

void save_norm_trace(const std::filesystem::path& path, std::span<const NormTraceRow> rows) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    write_norm_trace(out, rows);
}

std::vector<NormTraceRow> load_norm_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    return read_norm_trace(in);
}

Matrix random_spd(std::size_t n, Rng& rng, double lo, double hi) {
    // Orthonormal basis by Gram-Schmidt on a Gaussian matrix.
    Matrix q(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        std::vector<double> col(n);
        double len = 0.0;
        do {
            for (auto& x : col) x = rng.normal();
            for (std::size_t prev = 0; prev < c; ++prev) {
                double proj = 0.0;
                for (std::size_t r = 0; r < n; ++r) proj += q(r, prev) * col[r];
                for (std::size_t r = 0; r < n; ++r) col[r] -= proj * q(r, prev);
            }
            len = norm2(col);
        } while (len < 1e-8);
        for (std::size_t r = 0; r < n; ++r) q(r, c) = col[r] / len;
    }
    std::vector<double> d(n);
    for (auto& x : d) x = rng.uniform(lo, hi);
    Matrix out = matmul(matmul(q, Matrix::diagonal(d)), transpose(q));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double avg = 0.5 * (out(i, j) + out(j, i));
            out(i, j) = avg;
            out(j, i) = avg;
        }
    return out;
}

}  // namespace sharplab
