#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "sharplab/dataset.hpp"
#include "sharplab/linalg.hpp"
#include "sharplab/metrics.hpp"
#include "sharplab/objective.hpp"
#include "sharplab/random.hpp"

namespace sharplab {

struct EigenDecomposition {
    /// Descending.
    std::vector<double> eigenvalues;
    /// Orthonormal; column k pairs with eigenvalues[k].
    Matrix eigenvectors;
    int sweeps = 0;
};

/// Cyclic Jacobi rotations until every off-diagonal magnitude is below
/// 1e-12 * max(1, ||A||_F). Eigenvector signs are fixed so the first
/// non-negligible component is positive.
EigenDecomposition symmetric_eigen(const Matrix& a, int max_sweeps = 100);

/// Both sides of the PSF-norm bound for a quadratic with PD Hessian A and gradient g:
///   lhs = rho * ||A g|| / ||g||,  rhs = rho * sum_i delta_i |cos theta_i|.
struct BoundCheckResult {
    double lhs = 0.0;
    double rhs = 0.0;
    bool satisfied = false;
    double slack = 0.0;
};

inline constexpr double kBoundTolerance = 1e-12;

BoundCheckResult psf_bound_check(const Matrix& a, std::span<const double> g, double rho);

/// Step used for finite-difference Hessian-vector products.
inline constexpr double kHvpStep = 1e-4;

/// H v: exact for quadratics (A + 2 lambda I), central difference of the gradient otherwise.
std::vector<double> hessian_vector_product(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch,
                                           std::span<const double> v, double h = kHvpStep);

/// || (g_sam - g_sgd) - rho * H g/||g|| ||; zero at degenerate-gradient points.
double decomposition_residual(const ObjectiveSpec& spec, std::span<const double> w, const Batch& batch, double rho);

/// ||g_sgd + gamma * psf||^2.
double convergence_term(std::span<const double> g_sgd, std::span<const double> psf, double gamma);

struct ConvergenceSeries {
    std::vector<std::int64_t> iteration;
    std::vector<double> term;
    std::vector<double> running_mean;
};

/// Per-iteration update_norm_sq and its running mean (1/T) sum_t.
ConvergenceSeries convergence_metric(std::span<const MetricsRecord> trace);

struct NormTraceRow {
    std::int64_t iteration = 0;
    double l2_sgd = 0.0;
    double l2_psf = 0.0;
    double l2_sgd_subset = 0.0;
    double l2_psf_subset = 0.0;
    /// l2_psf carries the last sampled value rather than a fresh one.
    bool stale = false;
    /// -1 when no PSF has been sampled yet.
    std::int64_t staleness = -1;

    friend bool operator==(const NormTraceRow&, const NormTraceRow&) = default;
};

const std::vector<std::string>& norm_trace_columns();
std::vector<NormTraceRow> norm_trace(std::span<const MetricsRecord> trace);
void write_norm_trace(std::ostream& out, std::span<const NormTraceRow> rows);
std::vector<NormTraceRow> read_norm_trace(std::istream& in);
void save_norm_trace(const std::filesystem::path& path, std::span<const NormTraceRow> rows);
std::vector<NormTraceRow> load_norm_trace(const std::filesystem::path& path);

/// Random symmetric positive definite matrix Q diag(d) Q' with eigenvalues in [lo, hi].
Matrix random_spd(std::size_t n, Rng& rng, double lo = 0.1, double hi = 10.0);

}  // namespace sharplab
