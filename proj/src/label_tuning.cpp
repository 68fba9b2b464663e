#include "labeltune/label_tuning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <thread>

#include "labeltune/metrics.hpp"
#include "labeltune/similarity.hpp"
#include "labeltune/zeroshot.hpp"

namespace labeltune {

namespace {

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void check_label_shapes(const EmbeddingMatrix& y, const EmbeddingMatrix& y0, std::size_t input_dim, const char* who) {
    if (y.rows() != y0.rows() || y.cols() != y0.cols()) {
        throw InvalidArgument(std::string(who) + ": Y and Y0 differ in shape");
    }
    if (y.cols() != input_dim) {
        throw InvalidArgument(std::string(who) + ": label dim " + std::to_string(y.cols()) + " does not match input dim " +
                              std::to_string(input_dim));
    }
    if (y.rows() == 0) throw InvalidArgument(std::string(who) + ": no labels");
}

EmbeddingMatrix apply_mask(const EmbeddingMatrix& y, const DropoutMask& mask) {
    if (mask.size() != y.cols()) {
        throw InvalidArgument("dropout mask has length " + std::to_string(mask.size()) + ", expected " +
                              std::to_string(y.cols()));
    }
    EmbeddingMatrix out = y;
    for (std::size_t k = 0; k < out.rows(); ++k) {
        auto row = out.row_mut(k);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] *= mask[c];
    }
    return out;
}

double regularizer_value(const EmbeddingMatrix& y, const EmbeddingMatrix& y0, Regularizer form) {
    const double dist = frobenius_distance(y, y0);
    return form == Regularizer::HalfSquaredFrobenius ? 0.5 * dist * dist : dist;
}

void add_regularizer_gradient(std::vector<double>& grad, const EmbeddingMatrix& y, const EmbeddingMatrix& y0,
                              double lambda, Regularizer form) {
    if (lambda == 0.0) return;
    double scale = lambda;
    if (form == Regularizer::Frobenius) {
        const double dist = frobenius_distance(y, y0);
        if (dist == 0.0) return;
        scale = lambda / dist;
    }
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += scale * (y.data()[i] - y0.data()[i]);
}

// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(n, std::max(1U, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

// ---- configuration and data --------------------------------------------------

void TuningConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw InvalidArgument("TuningConfig: learning rate must be finite and non-negative");
    }
    if (epochs == 0) throw InvalidArgument("TuningConfig: epochs must be positive");
    if (!(reg_coefficient >= 0.0) || !std::isfinite(reg_coefficient)) {
        throw InvalidArgument("TuningConfig: regularizer coefficient must be finite and non-negative");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InvalidArgument("TuningConfig: dropout rate must be in [0, 1)");
}

std::vector<TuningConfig> default_tuning_grid(std::uint64_t seed) {
    std::vector<TuningConfig> grid;
    for (double lr : {0.01, 0.1}) {
        for (std::size_t epochs : {std::size_t{1000}, std::size_t{2000}}) {
            for (double reg : {0.01, 0.1}) {
                for (double dropout : {0.01, 0.1}) {
                    grid.push_back({lr, epochs, reg, dropout, seed, Regularizer::HalfSquaredFrobenius});
                }
            }
        }
    }
    return grid;
}

FewShotSet::FewShotSet(EmbeddingMatrix x, std::vector<std::size_t> z, std::size_t num_labels)
    : x_(std::move(x)), z_(std::move(z)), num_labels_(num_labels) {
    if (z_.size() != x_.rows()) {
        throw InvalidArgument("FewShotSet: " + std::to_string(z_.size()) + " labels for " + std::to_string(x_.rows()) +
                              " inputs");
    }
    if (num_labels_ == 0) throw InvalidArgument("FewShotSet: empty label set");
    for (std::size_t i = 0; i < z_.size(); ++i) {
        if (z_[i] >= num_labels_) {
            throw InvalidArgument("FewShotSet: label index " + std::to_string(z_[i]) + " at example " +
                                  std::to_string(i) + " is out of range");
        }
    }
}

FewShotSet FewShotSet::subset(std::span<const std::size_t> indices) const {
    std::vector<std::size_t> z;
    z.reserve(indices.size());
    for (std::size_t i : indices) z.push_back(z_.at(i));
    return FewShotSet(select_rows(x_, indices), std::move(z), num_labels_);
}

DropoutMask::DropoutMask(std::vector<double> keep) : keep_(std::move(keep)) {
    for (double v : keep_) {
        if (v != 0.0 && v != 1.0) throw InvalidArgument("DropoutMask: components must be 0 or 1");
    }
}

DropoutMask sample_dropout_mask(std::size_t dim, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("sample_dropout_mask: rate must be in [0, 1)");
    std::vector<double> keep(dim);
    for (double& k : keep) k = rng.uniform() < rate ? 0.0 : 1.0;
    return DropoutMask(std::move(keep));
}

TunedLabels::TunedLabels(EmbeddingMatrix y, EmbeddingMatrix y0, std::optional<TuningConfig> config_used,
                         Provenance provenance)
    : y_(std::move(y)), y0_(std::move(y0)), config_used_(std::move(config_used)), provenance_(std::move(provenance)) {
    if (y_.rows() != y0_.rows() || y_.cols() != y0_.cols()) throw InvalidArgument("TunedLabels: Y and Y0 differ in shape");
}

// ---- objective and gradient --------------------------------------------------

double lt_objective(const EmbeddingMatrix& y, const FewShotSet& data, const EmbeddingMatrix& y0, double lambda,
                    const std::optional<DropoutMask>& mask, Regularizer regularizer) {
    check_label_shapes(y, y0, data.x().cols(), "lt_objective");
    if (y.rows() != data.num_labels()) throw InvalidArgument("lt_objective: Y rows do not match the label count");
    if (data.size() == 0) throw EmptyInput("lt_objective: no examples");
    const EmbeddingMatrix masked = mask ? apply_mask(y, *mask) : y;

    const ScoreMatrix s = score_matrix(data.x(), masked);
    double sum = 0.0;
    for (std::size_t i = 0; i < s.rows(); ++i) sum += s(i, data.z()[i]) - log_sum_exp(s.row(i));
    return -sum / static_cast<double>(data.size()) + lambda * regularizer_value(y, y0, regularizer);
}

EmbeddingMatrix lt_gradient(const EmbeddingMatrix& y, const FewShotSet& data, const EmbeddingMatrix& y0, double lambda,
                            const std::optional<DropoutMask>& mask, Regularizer regularizer) {
    if (y.rows() != data.num_labels()) throw InvalidArgument("lt_gradient: Y rows do not match the label count");
    const ProbabilityMatrix targets = detail::one_hot(data.z(), data.num_labels());
    return detail::cross_entropy_step(data.x(), targets, y, y0, lambda, mask ? &*mask : nullptr, regularizer, true)
        .gradient;
}

namespace detail {

ProbabilityMatrix one_hot(std::span<const std::size_t> z, std::size_t num_labels) {
    std::vector<double> data(z.size() * num_labels, 0.0);
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] >= num_labels) throw InvalidArgument("one_hot: label index out of range");
        data[i * num_labels + z[i]] = 1.0;
    }
    return ProbabilityMatrix(z.size(), num_labels, std::move(data));
}

LossAndGradient cross_entropy_step(const EmbeddingMatrix& x, const ProbabilityMatrix& targets,
                                   const EmbeddingMatrix& y, const EmbeddingMatrix& y0, double lambda,
                                   const DropoutMask* mask, Regularizer regularizer, bool want_gradient) {
    check_label_shapes(y, y0, x.cols(), "cross_entropy_step");
    if (targets.rows() != x.rows() || targets.cols() != y.rows()) {
        throw InvalidArgument("cross_entropy_step: target matrix shape does not match inputs x labels");
    }
    if (x.rows() == 0) throw EmptyInput("cross_entropy_step: no examples");

    const std::size_t n = x.rows();
    const std::size_t num_labels = y.rows();
    const std::size_t dim = y.cols();
    std::optional<EmbeddingMatrix> masked_storage;
    if (mask) masked_storage = apply_mask(y, *mask);
    const EmbeddingMatrix& forward = masked_storage ? *masked_storage : y;

    std::vector<double> grad(want_gradient ? num_labels * dim : 0, 0.0);
    Vector scores(num_labels);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = x.row(i);
        for (std::size_t k = 0; k < num_labels; ++k) scores[k] = dot_similarity(xi, forward.row(k));
        const double lse = log_sum_exp(scores);
        const auto t = targets.row(i);
        double row = 0.0;
        for (std::size_t k = 0; k < num_labels; ++k) row += t[k] * (scores[k] - lse);
        sum += row;
        if (!want_gradient) continue;
        const Vector q = softmax(scores);
        for (std::size_t k = 0; k < num_labels; ++k) {
            const double coeff = q[k] - t[k];
            if (coeff == 0.0) continue;
            double* g = grad.data() + k * dim;
            for (std::size_t c = 0; c < dim; ++c) g[c] += coeff * xi[c];
        }
    }
    const double loss =
        -sum / static_cast<double>(n) + (lambda == 0.0 ? 0.0 : lambda * regularizer_value(y, y0, regularizer));

    if (!want_gradient) return {loss, EmbeddingMatrix(num_labels, dim)};

    const auto count = static_cast<double>(n);
    for (std::size_t k = 0; k < num_labels; ++k) {
        for (std::size_t c = 0; c < dim; ++c) {
            double& g = grad[k * dim + c];
            g /= count;
            if (mask) g *= (*mask)[c];
        }
    }
    add_regularizer_gradient(grad, y, y0, lambda, regularizer);
    for (double g : grad) {
        if (!std::isfinite(g)) return {std::numeric_limits<double>::quiet_NaN(), EmbeddingMatrix(num_labels, dim)};
    }
    return {loss, EmbeddingMatrix(num_labels, dim, std::move(grad))};
}

TunedLabels descend(const EmbeddingMatrix& x, const ProbabilityMatrix& targets, const EmbeddingMatrix& y0,
                    const TuningConfig& config, Provenance provenance) {
    config.validate();
    if (x.rows() == 0) throw EmptyInput("label tuning needs at least one example");
    check_label_shapes(y0, y0, x.cols(), "descend");

    const double lambda = config.reg_coefficient;
    const double initial =
        cross_entropy_step(x, targets, y0, y0, lambda, nullptr, config.regularizer, false).loss;
    if (!std::isfinite(initial)) throw DivergenceError(0, config.learning_rate);

    Rng rng(config.seed);
    EmbeddingMatrix current = y0;
    for (std::size_t step = 0; step < config.epochs; ++step) {
        const DropoutMask mask = sample_dropout_mask(y0.cols(), config.dropout_rate, rng);
        const auto result = cross_entropy_step(x, targets, current, y0, lambda, &mask, config.regularizer, true);
        if (!std::isfinite(result.loss)) throw DivergenceError(step, config.learning_rate);
        for (std::size_t k = 0; k < current.rows(); ++k) {
            auto row = current.row_mut(k);
            const auto g = result.gradient.row(k);
            for (std::size_t c = 0; c < row.size(); ++c) {
                row[c] -= config.learning_rate * g[c];
                if (!std::isfinite(row[c])) throw DivergenceError(step, config.learning_rate);
            }
        }
    }

    const double final_objective =
        cross_entropy_step(x, targets, current, y0, lambda, nullptr, config.regularizer, false).loss;
    if (!std::isfinite(final_objective)) throw DivergenceError(config.epochs, config.learning_rate);
    provenance["initial_objective"] = format_real(initial);
    provenance["final_objective"] = format_real(final_objective);
    provenance["examples"] = std::to_string(x.rows());
    return TunedLabels(std::move(current), y0, config, std::move(provenance));
}

}  // namespace detail

TunedLabels tune_labels(const FewShotSet& data, const EmbeddingMatrix& y0, const TuningConfig& config) {
    if (y0.rows() != data.num_labels()) throw InvalidArgument("tune_labels: Y0 rows do not match the label count");
    return detail::descend(data.x(), detail::one_hot(data.z(), data.num_labels()), y0, config,
                           {{"method", "label-tuning"}});
}

// ---- model selection -----------------------------------------------------------

std::vector<std::size_t> stratified_folds(std::span<const std::size_t> z, std::size_t num_labels, std::size_t folds,
                                          std::uint64_t seed, std::vector<std::size_t>* flagged_labels) {
    if (folds < 2) throw InvalidArgument("stratified_folds: need at least 2 folds");
    std::vector<std::vector<std::size_t>> by_label(num_labels);
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] >= num_labels) throw InvalidArgument("stratified_folds: label index out of range");
        by_label[z[i]].push_back(i);
    }
    Rng rng(seed);
    std::vector<std::size_t> fold_of(z.size(), 0);
    for (std::size_t k = 0; k < num_labels; ++k) {
        auto& members = by_label[k];
        rng.shuffle(std::span<std::size_t>(members));
        for (std::size_t p = 0; p < members.size(); ++p) fold_of[members[p]] = p % folds;
        if (members.size() < folds && flagged_labels) flagged_labels->push_back(k);
    }
    return fold_of;
}

CrossValidationResult cross_validate(const FewShotSet& data, const EmbeddingMatrix& y0,
                                     const std::vector<TuningConfig>& grid, std::size_t folds, std::uint64_t seed,
                                     const FoldCallback& on_fold) {
    if (grid.empty()) throw InvalidArgument("cross_validate: empty grid");
    for (const auto& c : grid) c.validate();
    if (data.size() == 0) throw EmptyInput("cross_validate: no examples");
    if (y0.rows() != data.num_labels()) throw InvalidArgument("cross_validate: Y0 rows do not match the label count");

    std::vector<std::size_t> flagged;
    const auto fold_of = stratified_folds(data.z(), data.num_labels(), folds, seed, &flagged);

    struct Split {
        std::size_t fold;
        FewShotSet train;
        FewShotSet held_out;
    };
    std::vector<Split> splits;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, held_out;
        for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? held_out : train).push_back(i);
        if (train.empty() || held_out.empty()) continue;
        splits.push_back({f, data.subset(train), data.subset(held_out)});
    }
    if (splits.empty()) throw InvalidArgument("cross_validate: too few examples to form any train/held-out split");

    std::vector<FoldResult> results(grid.size() * splits.size());
    parallel_for(results.size(), [&](std::size_t job) {
        const std::size_t c = job / splits.size();
        const Split& split = splits[job % splits.size()];
        FoldResult r{c, split.fold, std::numeric_limits<double>::quiet_NaN(), false};
        try {
            const TunedLabels tuned = tune_labels(split.train, y0, grid[c]);
            const auto pred = predict_labels(split.held_out.x(), tuned.y());
            r.macro_f1 = macro_f1(split.held_out.z(), pred, data.num_labels()).macro_f1;
        } catch (const DivergenceError&) {
            r.diverged = true;
        }
        results[job] = r;
    });

    std::vector<double> mean_f1(grid.size(), 0.0);
    std::vector<std::size_t> diverged;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        bool any_diverged = false;
        for (std::size_t s = 0; s < splits.size(); ++s) {
            const FoldResult& r = results[c * splits.size() + s];
            if (on_fold) on_fold(r);
            any_diverged = any_diverged || r.diverged;
            mean_f1[c] += r.macro_f1;
        }
        if (any_diverged) {
            mean_f1[c] = std::numeric_limits<double>::quiet_NaN();
            diverged.push_back(c);
        } else {
            mean_f1[c] /= static_cast<double>(splits.size());
        }
    }

    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        if (std::isnan(mean_f1[c])) continue;
        if (!best || mean_f1[c] > mean_f1[*best]) best = c;
    }
    if (!best) throw DivergenceError(0, grid.front().learning_rate);

    TunedLabels model = tune_labels(data, y0, grid[*best]);
    return CrossValidationResult{grid[*best], *best, std::move(mean_f1), std::move(flagged), std::move(diverged),
                                 results.size(), std::move(model)};
}

// ---- batch softmax -------------------------------------------------------------

double batch_softmax_loss(const EmbeddingMatrix& inputs, const EmbeddingMatrix& labels) {
    if (inputs.rows() != labels.rows()) throw InvalidArgument("batch_softmax_loss: batch sizes differ");
    if (inputs.cols() != labels.cols()) throw InvalidArgument("batch_softmax_loss: dimension mismatch");
    if (inputs.rows() == 0) throw EmptyInput("batch_softmax_loss: empty batch");
    const ScoreMatrix s = score_matrix(inputs, labels);
    double sum = 0.0;
    for (std::size_t i = 0; i < s.rows(); ++i) sum += s(i, i) - log_sum_exp(s.row(i));
    return -sum / static_cast<double>(s.rows());
}

std::vector<std::vector<std::size_t>> build_label_batches(std::span<const std::size_t> z, std::size_t num_labels,
                                                          Rng& rng) {
    std::vector<std::vector<std::size_t>> queues(num_labels);
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] >= num_labels) throw InvalidArgument("build_label_batches: label index out of range");
        queues[z[i]].push_back(i);
    }
    std::size_t longest = 0;
    for (std::size_t k = 0; k < num_labels; ++k) {
        if (queues[k].empty()) throw InvalidArgument("build_label_batches: label " + std::to_string(k) + " has no examples");
        rng.shuffle(std::span<std::size_t>(queues[k]));
        longest = std::max(longest, queues[k].size());
    }

    std::vector<std::size_t> cursor(num_labels, 0);
    std::vector<std::vector<std::size_t>> batches;
    batches.reserve(longest);
    for (std::size_t b = 0; b < longest; ++b) {
        std::vector<std::size_t> batch(num_labels);
        for (std::size_t k = 0; k < num_labels; ++k) {
            if (cursor[k] == queues[k].size()) {
                rng.shuffle(std::span<std::size_t>(queues[k]));
                cursor[k] = 0;
            }
            batch[k] = queues[k][cursor[k]++];
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

}  // namespace labeltune
