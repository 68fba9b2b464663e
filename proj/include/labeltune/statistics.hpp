#pragma once

#include <span>

namespace labeltune {

// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1],
// evaluated with Lentz's continued fraction to a relative tolerance of 1e-12.
double regularized_incomplete_beta(double x, double a, double b);

// P(|T| >= |t|) for Student's t with `df` > 0 degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct SignificanceVerdict {
    static constexpr double alpha = 0.05;

    double t_statistic = 0.0;
    double degrees_of_freedom = 0.0;
    double p_value = 1.0;
    bool significant = false;  // p_value < alpha
};

// Two-sided Welch's t-test with Welch-Satterthwaite degrees of freedom.
// Throws UndefinedTest when a sample has fewer than 2 values or both
// variances are zero.
SignificanceVerdict welch_t_test(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> values);
// Unbiased (n - 1) estimates; 0 for fewer than two values.
double sample_variance(std::span<const double> values);
double sample_std(std::span<const double> values);

}  // namespace labeltune
