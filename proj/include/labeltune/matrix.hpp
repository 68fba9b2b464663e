#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "labeltune/errors.hpp"

namespace labeltune {

using Vector = std::vector<double>;

namespace detail {

[[noreturn]] void throw_non_finite(const char* what, std::size_t index);

}  // namespace detail

// Dense row-major matrix of finite 64-bit reals.
//
// The tag distinguishes embeddings (inputs X, labels Y), raw similarity scores
// and row-stochastic probabilities so they cannot be mixed up at call sites.
// Values are validated once on construction; mutation goes through set() or
// row_mut(), and callers that write through row_mut() own the finiteness
// invariant for what they write.
template <typename Tag>
class BasicMatrix {
public:
    BasicMatrix() = default;

    BasicMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
        Tag::check_shape(rows, cols);
    }

    BasicMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        Tag::check_shape(rows, cols);
        if (data_.size() != rows * cols) {
            throw InvalidArgument("matrix data length " + std::to_string(data_.size()) +
                                  " does not equal rows x cols = " + std::to_string(rows * cols));
        }
        for (std::size_t i = 0; i < data_.size(); ++i) {
            if (!std::isfinite(data_[i])) detail::throw_non_finite(Tag::name, i);
        }
        Tag::check_values(*this);
    }

    static BasicMatrix from_rows(const std::vector<Vector>& rows, std::size_t cols) {
        std::vector<double> data;
        data.reserve(rows.size() * cols);
        for (const auto& r : rows) {
            if (r.size() != cols) {
                throw InvalidArgument(std::string(Tag::name) + ": ragged rows (expected width " +
                                      std::to_string(cols) + ", got " + std::to_string(r.size()) + ")");
            }
            data.insert(data.end(), r.begin(), r.end());
        }
        return BasicMatrix(rows.size(), cols, std::move(data));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    void set(std::size_t r, std::size_t c, double v) {
        if (!std::isfinite(v)) detail::throw_non_finite(Tag::name, r * cols_ + c);
        data_[r * cols_ + c] = v;
    }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row_mut(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const BasicMatrix&, const BasicMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct EmbeddingTag {
    static constexpr const char* name = "EmbeddingMatrix";
    static void check_shape(std::size_t, std::size_t dim) {
        if (dim == 0) throw InvalidArgument("EmbeddingMatrix: dim must be at least 1");
    }
    template <typename M>
    static void check_values(const M&) {}
};

struct ScoreTag {
    static constexpr const char* name = "ScoreMatrix";
    static void check_shape(std::size_t, std::size_t) {}
    template <typename M>
    static void check_values(const M&) {}
};

struct ProbabilityTag {
    static constexpr const char* name = "ProbabilityMatrix";
    static constexpr double row_sum_tolerance = 1e-9;
    static void check_shape(std::size_t, std::size_t) {}
    template <typename M>
    static void check_values(const M& m) {
        for (std::size_t r = 0; r < m.rows(); ++r) {
            double sum = 0.0;
            for (double v : m.row(r)) {
                if (v < 0.0 || v > 1.0) throw InvalidArgument("ProbabilityMatrix: value outside [0,1]");
                sum += v;
            }
            if (m.cols() > 0 && std::abs(sum - 1.0) > row_sum_tolerance) {
                throw InvalidArgument("ProbabilityMatrix: row " + std::to_string(r) + " sums to " +
                                      std::to_string(sum));
            }
        }
    }
};

// X (N x d) and Y (K x d).
using EmbeddingMatrix = BasicMatrix<EmbeddingTag>;
// S = X Y^T (N x K).
using ScoreMatrix = BasicMatrix<ScoreTag>;
// Row-wise softmax of a ScoreMatrix.
using ProbabilityMatrix = BasicMatrix<ProbabilityTag>;

// Frobenius norm of A - B; shapes must match.
double frobenius_distance(const EmbeddingMatrix& a, const EmbeddingMatrix& b);

// Rows selected by index, in the given order.
EmbeddingMatrix select_rows(const EmbeddingMatrix& m, std::span<const std::size_t> indices);

}  // namespace labeltune
