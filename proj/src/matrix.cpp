#include "labeltune/matrix.hpp"

#include <cmath>
#include <string>

namespace labeltune {

namespace detail {

void throw_non_finite(const char* what, std::size_t index) {
    throw InvalidArgument(std::string(what) + ": non-finite value at flat index " + std::to_string(index));
}

}  // namespace detail

double frobenius_distance(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw InvalidArgument("frobenius_distance: shape mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double diff = a.data()[i] - b.data()[i];
        sum += diff * diff;
    }
    return std::sqrt(sum);
}

EmbeddingMatrix select_rows(const EmbeddingMatrix& m, std::span<const std::size_t> indices) {
    std::vector<double> data;
    data.reserve(indices.size() * m.cols());
    for (std::size_t idx : indices) {
        if (idx >= m.rows()) throw InvalidArgument("select_rows: row index out of range");
        const auto r = m.row(idx);
        data.insert(data.end(), r.begin(), r.end());
    }
    return EmbeddingMatrix(indices.size(), m.cols(), std::move(data));
}

}  // namespace labeltune
