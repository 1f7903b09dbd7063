#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace shardnet {

// Dense row-major matrix of 32-bit reals; the carrier for batches,
// weights and feature tables throughout the library.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<float> values;

    Matrix() = default;
    Matrix(size_t r, size_t c, float fill = 0.0f);
    Matrix(size_t r, size_t c, std::vector<float> v);

    float& operator()(size_t r, size_t c) { return values[r * cols + c]; }
    float operator()(size_t r, size_t c) const { return values[r * cols + c]; }

    std::span<float> row(size_t r) { return {values.data() + r * cols, cols}; }
    std::span<const float> row(size_t r) const {
        return {values.data() + r * cols, cols};
    }

    size_t size() const { return rows * cols; }
    bool empty() const { return size() == 0; }
    bool all_finite() const;
    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }
};

// C = A(m x k) * B(k x n). Fixed i-k-j loop order; deterministic.
Matrix matmul(const Matrix& a, const Matrix& b);

// C = A(m x k) * B(n x k)^T.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// C = A(k x m)^T * B(k x n).
Matrix matmul_tn(const Matrix& a, const Matrix& b);

// Adds `v` to every row of `m`; v.size() must equal m.cols.
void add_row_vector(Matrix& m, std::span<const float> v);

// Column sums of `m` as a vector of length m.cols.
std::vector<float> column_sums(const Matrix& m);

// Elementwise logistic sigmoid.
void sigmoid_inplace(Matrix& m);

// Row-wise softmax with max subtraction.
void softmax_rows_inplace(Matrix& m);

// New matrix made of the given rows of `m`, in the given order.
Matrix gather_rows(const Matrix& m, std::span<const uint32_t> idx);

bool all_finite(std::span<const float> v);

} // namespace shardnet
