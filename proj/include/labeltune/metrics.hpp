#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace labeltune {

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;  // gold count
};

struct EvalReport {
    std::vector<ClassScores> per_class;
    double macro_f1 = 0.0;
    std::optional<double> std_dev;
    std::size_t n_runs = 1;
};

// Per-class precision/recall/F1 and their unweighted mean over all K classes.
// Zero denominators yield 0, so a class absent from both gold and pred scores 0.
EvalReport macro_f1(std::span<const std::size_t> gold, std::span<const std::size_t> pred, std::size_t num_labels);

// Fraction of positions where a and b agree.
double agreement(std::span<const std::size_t> a, std::span<const std::size_t> b);

}  // namespace labeltune
