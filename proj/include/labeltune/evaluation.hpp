#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "labeltune/metrics.hpp"
#include "labeltune/statistics.hpp"

namespace labeltune {

// Few-shot training sizes and number of seeds used by the evaluation protocol.
inline constexpr std::size_t kFewShotSizes[] = {8, 64, 512};
inline constexpr std::size_t kDefaultRuns = 5;
inline constexpr std::size_t kDefaultBootstrapResamples = 1000;

// One stratified few-shot training sample, evaluated on a fixed test split.
struct Episode {
    std::size_t n_per_label = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> train_indices;    // grouped by label, in label order
    std::vector<std::size_t> short_labels;     // labels with fewer than n_per_label examples
};

// Per label: seeded shuffle of that label's examples, then the first n.
// Throws InvalidArgument if a label has no examples.
Episode sample_episode(std::span<const std::size_t> labels, std::size_t num_labels, std::size_t n_per_label,
                       std::uint64_t seed);

// Sample standard deviation of macro-F1 over `resamples` bootstrap resamples
// of the (gold, pred) pairs.
double bootstrap_std(std::span<const std::size_t> gold, std::span<const std::size_t> pred, std::size_t num_labels,
                     std::size_t resamples = kDefaultBootstrapResamples, std::uint64_t seed = 0);

struct RunSummary {
    double mean = 0.0;
    double std_dev = 0.0;
};

struct RunComparison {
    RunSummary a;
    RunSummary b;
    SignificanceVerdict verdict;
};

RunSummary summarize_runs(std::span<const double> scores);

// Means, unbiased standard deviations and the Welch verdict.
RunComparison compare_runs(std::span<const double> scores_a, std::span<const double> scores_b);

// "62.9_{0.7}" style cell with one decimal for each number.
std::string format_mean_std(double mean, double std_dev);

}  // namespace labeltune
