#include "shardnet/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shardnet/errors.hpp"

namespace shardnet {

Matrix::Matrix(size_t r, size_t c, float fill)
    : rows(r), cols(c), values(r * c, fill) {}

Matrix::Matrix(size_t r, size_t c, std::vector<float> v)
    : rows(r), cols(c), values(std::move(v)) {
    if (values.size() != rows * cols) {
        throw ShapeError("matrix value count " + std::to_string(values.size()) +
                         " does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
}

bool Matrix::all_finite() const { return shardnet::all_finite(values); }

bool all_finite(std::span<const float> v) {
    for (float x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw ShapeError(what);
}

} // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols == b.rows, "matmul: inner dimensions differ");
    Matrix c(a.rows, b.cols);
    const size_t n = b.cols;
    for (size_t i = 0; i < a.rows; ++i) {
        const float* arow = a.values.data() + i * a.cols;
        float* crow = c.values.data() + i * n;
        for (size_t k = 0; k < a.cols; ++k) {
            const float aik = arow[k];
            const float* brow = b.values.data() + k * n;
            for (size_t j = 0; j < n; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    require(a.cols == b.cols, "matmul_nt: inner dimensions differ");
    Matrix c(a.rows, b.rows);
    for (size_t i = 0; i < a.rows; ++i) {
        const float* arow = a.values.data() + i * a.cols;
        float* crow = c.values.data() + i * b.rows;
        for (size_t j = 0; j < b.rows; ++j) {
            const float* brow = b.values.data() + j * b.cols;
            float acc = 0.0f;
            for (size_t k = 0; k < a.cols; ++k) {
                acc += arow[k] * brow[k];
            }
            crow[j] = acc;
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    require(a.rows == b.rows, "matmul_tn: inner dimensions differ");
    Matrix c(a.cols, b.cols);
    for (size_t k = 0; k < a.rows; ++k) {
        const float* arow = a.values.data() + k * a.cols;
        const float* brow = b.values.data() + k * b.cols;
        for (size_t i = 0; i < a.cols; ++i) {
            const float aki = arow[i];
            float* crow = c.values.data() + i * b.cols;
            for (size_t j = 0; j < b.cols; ++j) {
                crow[j] += aki * brow[j];
            }
        }
    }
    return c;
}

void add_row_vector(Matrix& m, std::span<const float> v) {
    require(v.size() == m.cols, "add_row_vector: length does not match cols");
    for (size_t i = 0; i < m.rows; ++i) {
        float* row = m.values.data() + i * m.cols;
        for (size_t j = 0; j < m.cols; ++j) {
            row[j] += v[j];
        }
    }
}

std::vector<float> column_sums(const Matrix& m) {
    std::vector<float> s(m.cols, 0.0f);
    for (size_t i = 0; i < m.rows; ++i) {
        const float* row = m.values.data() + i * m.cols;
        for (size_t j = 0; j < m.cols; ++j) {
            s[j] += row[j];
        }
    }
    return s;
}

void sigmoid_inplace(Matrix& m) {
    for (float& x : m.values) {
        x = 1.0f / (1.0f + std::exp(-x));
    }
}

void softmax_rows_inplace(Matrix& m) {
    for (size_t i = 0; i < m.rows; ++i) {
        float* row = m.values.data() + i * m.cols;
        float mx = row[0];
        for (size_t j = 1; j < m.cols; ++j) mx = std::max(mx, row[j]);
        float sum = 0.0f;
        for (size_t j = 0; j < m.cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (size_t j = 0; j < m.cols; ++j) row[j] /= sum;
    }
}

Matrix gather_rows(const Matrix& m, std::span<const uint32_t> idx) {
    Matrix out(idx.size(), m.cols);
    for (size_t i = 0; i < idx.size(); ++i) {
        require(idx[i] < m.rows, "gather_rows: row index out of range");
        std::copy_n(m.values.data() + static_cast<size_t>(idx[i]) * m.cols,
                    m.cols, out.values.data() + i * m.cols);
    }
    return out;
}

} // namespace shardnet
