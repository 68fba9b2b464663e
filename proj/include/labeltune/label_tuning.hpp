#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "labeltune/matrix.hpp"
#include "labeltune/rng.hpp"

namespace labeltune {

// Penalty on drift from the initial label embeddings Y0.
enum class Regularizer {
    HalfSquaredFrobenius,  // 0.5 * ||Y0 - Y||_F^2, gradient (Y - Y0)
    Frobenius,             // ||Y0 - Y||_F, subgradient 0 at Y = Y0
};

struct TuningConfig {
    double learning_rate = 0.1;
    std::size_t epochs = 1000;
    double reg_coefficient = 0.01;
    double dropout_rate = 0.1;
    std::uint64_t seed = 0;
    Regularizer regularizer = Regularizer::HalfSquaredFrobenius;

    void validate() const;
    friend bool operator==(const TuningConfig&, const TuningConfig&) = default;
};

// learning rate x epochs x regularizer x dropout, each in a two-value set, in
// that nesting order (16 configs).
std::vector<TuningConfig> default_tuning_grid(std::uint64_t seed = 0);

// Input embeddings X (N x d) with reference label indices z.
class FewShotSet {
public:
    FewShotSet(EmbeddingMatrix x, std::vector<std::size_t> z, std::size_t num_labels);

    const EmbeddingMatrix& x() const noexcept { return x_; }
    const std::vector<std::size_t>& z() const noexcept { return z_; }
    std::size_t size() const noexcept { return z_.size(); }
    std::size_t num_labels() const noexcept { return num_labels_; }

    FewShotSet subset(std::span<const std::size_t> indices) const;

private:
    EmbeddingMatrix x_;
    std::vector<std::size_t> z_;
    std::size_t num_labels_;
};

// Per-dimension keep vector r in {0,1}^d shared by every label row.
class DropoutMask {
public:
    explicit DropoutMask(std::vector<double> keep);
    static DropoutMask all_ones(std::size_t dim) { return DropoutMask(std::vector<double>(dim, 1.0)); }

    std::size_t size() const noexcept { return keep_.size(); }
    double operator[](std::size_t k) const { return keep_[k]; }
    std::span<const double> values() const noexcept { return keep_; }

    friend bool operator==(const DropoutMask&, const DropoutMask&) = default;

private:
    std::vector<double> keep_;
};

// Each component is 0 with probability `rate`, else 1.
DropoutMask sample_dropout_mask(std::size_t dim, double rate, Rng& rng);

using Provenance = std::map<std::string, std::string>;

// Tuned label embeddings Y together with the frozen initialization Y0.
class TunedLabels {
public:
    TunedLabels(EmbeddingMatrix y, EmbeddingMatrix y0, std::optional<TuningConfig> config_used, Provenance provenance);

    const EmbeddingMatrix& y() const noexcept { return y_; }
    const EmbeddingMatrix& y0() const noexcept { return y0_; }
    const std::optional<TuningConfig>& config_used() const noexcept { return config_used_; }
    const Provenance& provenance() const noexcept { return provenance_; }

private:
    EmbeddingMatrix y_;
    EmbeddingMatrix y0_;
    std::optional<TuningConfig> config_used_;
    Provenance provenance_;
};

// J'(Y~) + lambda * R(Y), where Y~ is Y with each row masked by r (or Y itself)
// and J' = -(1/N) sum_i [S_{i,z_i} - log sum_j exp S_{i,j}] with S = X Y~^T.
double lt_objective(const EmbeddingMatrix& y, const FewShotSet& data, const EmbeddingMatrix& y0, double lambda,
                    const std::optional<DropoutMask>& mask = std::nullopt,
                    Regularizer regularizer = Regularizer::HalfSquaredFrobenius);

// Analytic gradient of lt_objective with respect to Y:
// ((P - E)^T X / N) masked by r, plus the regularizer gradient.
EmbeddingMatrix lt_gradient(const EmbeddingMatrix& y, const FewShotSet& data, const EmbeddingMatrix& y0, double lambda,
                            const std::optional<DropoutMask>& mask = std::nullopt,
                            Regularizer regularizer = Regularizer::HalfSquaredFrobenius);

// Full-batch gradient descent from Y0 with a fresh dropout mask every step.
// Throws DivergenceError if the objective stops being finite.
TunedLabels tune_labels(const FewShotSet& data, const EmbeddingMatrix& y0, const TuningConfig& config);

struct CrossValidationResult {
    TuningConfig best;
    std::size_t best_index = 0;
    std::vector<double> mean_f1;              // per grid entry; NaN when every fold diverged
    std::vector<std::size_t> flagged_labels;  // labels with fewer examples than folds
    std::vector<std::size_t> diverged_configs;
    std::size_t runs = 0;  // (config, fold) trainings performed
    TunedLabels model;     // retrained on the full set with `best`
};

struct FoldResult {
    std::size_t config_index;
    std::size_t fold;
    double macro_f1;
    bool diverged;
};

using FoldCallback = std::function<void(const FoldResult&)>;

// Stratified fold id per example: per label, seeded shuffle then round robin.
std::vector<std::size_t> stratified_folds(std::span<const std::size_t> z, std::size_t num_labels, std::size_t folds,
                                          std::uint64_t seed, std::vector<std::size_t>* flagged_labels = nullptr);

// k-fold model selection by mean held-out macro-F1; ties go to the earlier
// grid entry. A config that diverges on any fold is excluded. The callback
// sees fold results in (config, fold) order.
CrossValidationResult cross_validate(const FewShotSet& data, const EmbeddingMatrix& y0,
                                     const std::vector<TuningConfig>& grid, std::size_t folds = 4,
                                     std::uint64_t seed = 0, const FoldCallback& on_fold = {});

// Batch-softmax loss J with in-batch negatives: row i of `labels` is the
// positive for row i of `inputs` and every other row is a negative.
double batch_softmax_loss(const EmbeddingMatrix& inputs, const EmbeddingMatrix& labels);

// One epoch of batches for the batch-softmax objective: batch b holds one
// example index per label (position k has label k). The number of batches is
// the largest per-label count; smaller label queues are reshuffled and reused.
std::vector<std::vector<std::size_t>> build_label_batches(std::span<const std::size_t> z, std::size_t num_labels,
                                                          Rng& rng);

namespace detail {

struct LossAndGradient {
    double loss;
    EmbeddingMatrix gradient;
};

// Soft-target cross-entropy plus regularizer at Y with an optional mask.
// targets has the same shape as X Y^T and each row sums to 1.
LossAndGradient cross_entropy_step(const EmbeddingMatrix& x, const ProbabilityMatrix& targets,
                                   const EmbeddingMatrix& y, const EmbeddingMatrix& y0, double lambda,
                                   const DropoutMask* mask, Regularizer regularizer, bool want_gradient);

// Shared optimizer behind tune_labels and distill_labels.
TunedLabels descend(const EmbeddingMatrix& x, const ProbabilityMatrix& targets, const EmbeddingMatrix& y0,
                    const TuningConfig& config, Provenance provenance);

ProbabilityMatrix one_hot(std::span<const std::size_t> z, std::size_t num_labels);

}  // namespace detail

}  // namespace labeltune
