#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "crlsc/error.hpp"

namespace crlsc {

// Row-major dense matrix of doubles. Small on purpose: only what the
// training and retrieval paths need.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    std::vector<double> row_vec(std::size_t r) const {
        return {row(r), row(r) + cols_};
    }

    void set_row(std::size_t r, const std::vector<double>& v) {
        if (v.size() != cols_) throw ValidationError("set_row: length mismatch");
        for (std::size_t c = 0; c < cols_; ++c) (*this)(r, c) = v[c];
    }

    bool all_finite() const {
        for (double x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double squared_l2(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double norm2(const double* a, std::size_t n) {
    return std::sqrt(dot(a, a, n));
}

// In-place L2 normalization of every row. Zero rows are left untouched.
inline void l2_normalize_rows(Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double nrm = norm2(m.row(r), m.cols());
        if (nrm > 0.0)
            for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) /= nrm;
    }
}

inline std::vector<double> l2_normalized(const std::vector<double>& v) {
    double nrm = norm2(v.data(), v.size());
    std::vector<double> out = v;
    if (nrm > 0.0)
        for (double& x : out) x /= nrm;
    return out;
}

using Rng = std::mt19937_64;

inline Matrix random_gaussian(std::size_t rows, std::size_t cols, Rng& rng,
                              double mean = 0.0, double stddev = 1.0) {
    Matrix m(rows, cols);
    std::normal_distribution<double> dist(mean, stddev);
    for (double& x : m.data()) x = dist(rng);
    return m;
}

}  // namespace crlsc
