#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace cellrobust {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. Sized for desk-scale problems
/// (up to roughly 1000x1000); no sparse or blocked storage.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix diag(const Vector& d);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    Vector row(std::size_t i) const;
    Vector col(std::size_t j) const;
    void set_row(std::size_t i, const Vector& v);
    void set_col(std::size_t j, const Vector& v);

    Matrix transposed() const;
    Matrix cols_subset(const std::vector<std::size_t>& idx) const;

    bool all_finite() const;
    double frobenius_norm() const;
    double max_abs() const;
    double trace() const;

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Vector operator*(const Matrix& a, const Vector& x);

double dot(const Vector& a, const Vector& b);
double norm2(const Vector& a);

/// n x d boolean mask stored as bytes (std::vector<bool> proxies get in the way).
class BoolMat {
public:
    BoolMat() = default;
    BoolMat(std::size_t rows, std::size_t cols, bool fill = false)
        : rows_(rows), cols_(cols), data_(rows * cols, fill ? 1 : 0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    bool operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j] != 0; }
    void set(std::size_t i, std::size_t j, bool v) { data_[i * cols_ + j] = v ? 1 : 0; }

    std::size_t count() const;
    bool operator==(const BoolMat& o) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> data_;
};

}  // namespace cellrobust
