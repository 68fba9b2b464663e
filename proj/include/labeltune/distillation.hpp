#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "labeltune/label_tuning.hpp"
#include "labeltune/matrix.hpp"

namespace labeltune {

// Unlabeled input embeddings with the teacher's label distribution for each.
class SilverSet {
public:
    static constexpr double row_sum_tolerance = 1e-6;

    SilverSet(EmbeddingMatrix x, ProbabilityMatrix teacher);

    const EmbeddingMatrix& x() const noexcept { return x_; }
    const ProbabilityMatrix& teacher() const noexcept { return teacher_; }
    std::size_t size() const noexcept { return x_.rows(); }
    std::size_t num_labels() const noexcept { return teacher_.cols(); }

    SilverSet subset(std::span<const std::size_t> indices) const;

private:
    EmbeddingMatrix x_;
    ProbabilityMatrix teacher_;
};

// Any classifier mapping a batch of input embeddings to label distributions.
using Teacher = std::function<ProbabilityMatrix(const EmbeddingMatrix&)>;

// Softmax over dot-product scores against fixed label embeddings.
Teacher label_embedding_teacher(EmbeddingMatrix teacher_labels);

inline constexpr std::size_t kDefaultSilverCap = 10000;

struct SilverOptions {
    std::size_t cap = kDefaultSilverCap;
    // Seeded uniform sample of `cap` rows instead of the first `cap`.
    std::optional<std::uint64_t> sample_seed;
};

SilverSet build_silver_set(const Teacher& teacher, const EmbeddingMatrix& unlabeled, const SilverOptions& options = {});

// -(1/M) sum_i sum_k P[i][k] log Q[i][k] + lambda * R(Y), Q = softmax(X Y~^T).
double distillation_objective(const EmbeddingMatrix& y, const SilverSet& silver, const EmbeddingMatrix& y0,
                              double lambda, const std::optional<DropoutMask>& mask = std::nullopt,
                              Regularizer regularizer = Regularizer::HalfSquaredFrobenius);

// ((Q - P)^T X / M) masked by r, plus the regularizer gradient.
EmbeddingMatrix distillation_gradient(const EmbeddingMatrix& y, const SilverSet& silver, const EmbeddingMatrix& y0,
                                      double lambda, const std::optional<DropoutMask>& mask = std::nullopt,
                                      Regularizer regularizer = Regularizer::HalfSquaredFrobenius);

// Label tuning against the teacher's soft targets.
TunedLabels distill_labels(const SilverSet& silver, const EmbeddingMatrix& y0, const TuningConfig& config);

struct DistillationSelection {
    TuningConfig best;
    std::size_t best_index = 0;
    std::vector<double> mean_agreement;  // NaN for configs that diverged
    TunedLabels model;                   // retrained on the full silver set
};

// k-fold selection by held-out agreement between student and teacher argmax.
DistillationSelection select_distillation_config(const SilverSet& silver, const EmbeddingMatrix& y0,
                                                 const std::vector<TuningConfig>& grid, std::size_t folds = 4,
                                                 std::uint64_t seed = 0);

// Argmax of each teacher row.
std::vector<std::size_t> teacher_argmax(const SilverSet& silver);

}  // namespace labeltune
