#include "sharplab/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "sharplab/error.hpp"

namespace sharplab {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
        if (row.size() != cols_) throw ConfigError("Matrix: ragged initializer");
        data_.insert(data_.end(), row.begin(), row.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

bool Matrix::is_symmetric(double tol) const {
    if (!square()) return false;
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = i + 1; j < cols_; ++j)
            if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    return true;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw ConfigError("matvec: dimension mismatch");
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) acc += a(r, c) * x[c];
        y[r] = acc;
    }
    return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ConfigError("matmul: dimension mismatch");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ConfigError("dot: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(std::span<const double> a) {
    double acc = 0.0;
    for (double x : a) acc += x * x;
    return std::sqrt(acc);
}

double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ConfigError("max_abs_diff: dimension mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ConfigError("max_abs_diff: shape mismatch");
    return max_abs_diff(a.data(), b.data());
}

}  // namespace sharplab
