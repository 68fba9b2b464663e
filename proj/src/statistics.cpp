#include "labeltune/statistics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "labeltune/errors.hpp"

namespace labeltune {

namespace {

constexpr double kTolerance = 1e-12;
constexpr int kMaxIterations = 10000;
constexpr double kTiny = 1e-300;

// Continued fraction for I_x(a, b), modified Lentz. Converges quickly for
// x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double x, double a, double b) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kTolerance) return h;
    }
    throw std::runtime_error("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("regularized_incomplete_beta: a and b must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("regularized_incomplete_beta: x must be in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(x, a, b) / a;
    return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double student_t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) throw InvalidArgument("student_t_two_sided_p: degrees of freedom must be positive");
    if (std::isinf(t)) return 0.0;
    return regularized_incomplete_beta(df / (df + t * t), 0.5 * df, 0.5);
}

double mean(std::span<const double> values) {
    if (values.empty()) throw EmptyInput("mean: no values");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return ss / static_cast<double>(values.size() - 1);
}

double sample_std(std::span<const double> values) { return std::sqrt(sample_variance(values)); }

SignificanceVerdict welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) {
        throw UndefinedTest("welch_t_test: each sample needs at least 2 values (got " + std::to_string(a.size()) +
                            " and " + std::to_string(b.size()) + ")");
    }
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = sample_variance(a);
    const double vb = sample_variance(b);
    const double se2 = va / na + vb / nb;
    if (!(se2 > 0.0)) throw UndefinedTest("welch_t_test: both samples have zero variance");

    SignificanceVerdict v;
    v.t_statistic = (mean(a) - mean(b)) / std::sqrt(se2);
    const double qa = va / na;
    const double qb = vb / nb;
    v.degrees_of_freedom = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    v.p_value = student_t_two_sided_p(v.t_statistic, v.degrees_of_freedom);
    v.significant = v.p_value < SignificanceVerdict::alpha;
    return v;
}

}  // namespace labeltune
