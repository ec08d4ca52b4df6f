#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace sharplab {

/// Dense row-major matrix. Small (desk-scale) sizes only.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> d);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    bool is_symmetric(double tol = 0.0) const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

std::vector<double> matvec(const Matrix& a, std::span<const double> x);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double max_abs(std::span<const double> a);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace sharplab
