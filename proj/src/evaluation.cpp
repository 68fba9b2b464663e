#include "labeltune/evaluation.hpp"

#include <algorithm>
#include <cstdio>

#include "labeltune/errors.hpp"
#include "labeltune/rng.hpp"

namespace labeltune {

Episode sample_episode(std::span<const std::size_t> labels, std::size_t num_labels, std::size_t n_per_label,
                       std::uint64_t seed) {
    if (labels.empty()) throw EmptyInput("sample_episode: empty dataset");
    std::vector<std::vector<std::size_t>> by_label(num_labels);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_labels) throw InvalidArgument("sample_episode: label index out of range");
        by_label[labels[i]].push_back(i);
    }

    Episode episode;
    episode.n_per_label = n_per_label;
    episode.seed = seed;
    Rng rng(seed);
    for (std::size_t k = 0; k < num_labels; ++k) {
        auto& members = by_label[k];
        if (members.empty()) throw InvalidArgument("sample_episode: label " + std::to_string(k) + " has no examples");
        rng.shuffle(std::span<std::size_t>(members));
        if (members.size() < n_per_label) episode.short_labels.push_back(k);
        const std::size_t take = std::min(n_per_label, members.size());
        episode.train_indices.insert(episode.train_indices.end(), members.begin(), members.begin() + take);
    }
    return episode;
}

double bootstrap_std(std::span<const std::size_t> gold, std::span<const std::size_t> pred, std::size_t num_labels,
                     std::size_t resamples, std::uint64_t seed) {
    if (resamples < 2) throw InvalidArgument("bootstrap_std: need at least 2 resamples");
    if (gold.size() != pred.size()) throw InvalidArgument("bootstrap_std: gold and pred differ in length");
    if (gold.empty()) throw EmptyInput("bootstrap_std: no examples");

    Rng rng(seed);
    const std::size_t n = gold.size();
    std::vector<std::size_t> g(n), p(n);
    std::vector<double> scores;
    scores.reserve(resamples);
    for (std::size_t r = 0; r < resamples; ++r) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto j = static_cast<std::size_t>(rng.below(n));
            g[i] = gold[j];
            p[i] = pred[j];
        }
        scores.push_back(macro_f1(g, p, num_labels).macro_f1);
    }
    return sample_std(scores);
}

RunSummary summarize_runs(std::span<const double> scores) { return {mean(scores), sample_std(scores)}; }

RunComparison compare_runs(std::span<const double> scores_a, std::span<const double> scores_b) {
    RunComparison out;
    out.verdict = welch_t_test(scores_a, scores_b);
    out.a = summarize_runs(scores_a);
    out.b = summarize_runs(scores_b);
    return out;
}

std::string format_mean_std(double mean, double std_dev) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f_{%.1f}", mean, std_dev);
    return buf;
}

}  // namespace labeltune
