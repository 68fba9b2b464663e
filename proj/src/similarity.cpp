#include "labeltune/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace labeltune {

double dot_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw InvalidArgument("dot_similarity: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ")");
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sum += a[k] * b[k];
    return sum;
}

ScoreMatrix score_matrix(const EmbeddingMatrix& x, const EmbeddingMatrix& y) {
    if (x.cols() != y.cols()) {
        throw InvalidArgument("score_matrix: dimension mismatch (" + std::to_string(x.cols()) + " vs " +
                              std::to_string(y.cols()) + ")");
    }
    std::vector<double> data(x.rows() * y.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto xi = x.row(i);
        for (std::size_t j = 0; j < y.rows(); ++j) data[i * y.rows() + j] = dot_similarity(xi, y.row(j));
    }
    return ScoreMatrix(x.rows(), y.rows(), std::move(data));
}

double log_sum_exp(std::span<const double> values) {
    if (values.empty()) throw EmptyInput("log_sum_exp: empty input");
    const double m = *std::max_element(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - m);
    return m + std::log(sum);
}

Vector softmax(std::span<const double> scores) {
    Vector out(scores.size());
    if (scores.empty()) return out;
    const double m = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        out[j] = std::exp(scores[j] - m);
        sum += out[j];
    }
    for (double& v : out) v /= sum;
    return out;
}

ProbabilityMatrix softmax_rows(const ScoreMatrix& scores) {
    std::vector<double> data;
    data.reserve(scores.rows() * scores.cols());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        const Vector p = softmax(scores.row(i));
        data.insert(data.end(), p.begin(), p.end());
    }
    return ProbabilityMatrix(scores.rows(), scores.cols(), std::move(data));
}

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw EmptyInput("argmax: empty input");
    std::size_t best = 0;
    for (std::size_t j = 1; j < values.size(); ++j) {
        if (values[j] > values[best]) best = j;
    }
    return best;
}

Vector mean_pool(std::span<const Vector> token_vectors) {
    if (token_vectors.empty()) throw EmptyInput("mean_pool: empty token sequence");
    const std::size_t dim = token_vectors.front().size();
    Vector sum(dim, 0.0);
    for (const auto& v : token_vectors) {
        if (v.size() != dim) throw InvalidArgument("mean_pool: token vectors differ in dimension");
        for (std::size_t k = 0; k < dim; ++k) sum[k] += v[k];
    }
    const auto n = static_cast<double>(token_vectors.size());
    for (double& s : sum) s /= n;
    return sum;
}

Vector normalized(std::span<const double> v) {
    const double norm = std::sqrt(dot_similarity(v, v));
    Vector out(v.begin(), v.end());
    if (norm > 0.0) {
        for (double& x : out) x /= norm;
    }
    return out;
}

EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m) {
    std::vector<double> data;
    data.reserve(m.data().size());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const Vector n = normalized(m.row(r));
        data.insert(data.end(), n.begin(), n.end());
    }
    return EmbeddingMatrix(m.rows(), m.cols(), std::move(data));
}

}  // namespace labeltune
