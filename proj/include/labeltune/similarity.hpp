#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "labeltune/matrix.hpp"

namespace labeltune {

// Sum of a_k * b_k, accumulated left to right in double precision.
double dot_similarity(std::span<const double> a, std::span<const double> b);

// S[i][j] = x_i . y_j for X (N x d) and Y (K x d).
ScoreMatrix score_matrix(const EmbeddingMatrix& x, const EmbeddingMatrix& y);

// Max-subtracted softmax of each row.
ProbabilityMatrix softmax_rows(const ScoreMatrix& scores);
Vector softmax(std::span<const double> scores);

// log(sum_j exp(v_j)) in the stable max-subtracted form; v must be non-empty.
double log_sum_exp(std::span<const double> values);

// Smallest index attaining the maximum; v must be non-empty.
std::size_t argmax(std::span<const double> values);

// Componentwise mean of equally sized vectors.
Vector mean_pool(std::span<const Vector> token_vectors);

// Copy of v scaled to unit Euclidean norm; the zero vector is returned unchanged.
Vector normalized(std::span<const double> v);
EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m);

}  // namespace labeltune
