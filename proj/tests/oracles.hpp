#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library's numeric code: plain nested vectors and scalar loops,
// std::mt19937 with std:: distributions, and Boost.Math for special functions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

namespace oracle {

using Rows = std::vector<std::vector<double>>;

inline double log_sum_exp_naive(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += std::exp(x);
    return std::log(s);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline Rows masked(const Rows& y, const std::vector<double>* mask) {
    if (!mask) return y;
    Rows out = y;
    for (auto& row : out)
        for (std::size_t k = 0; k < row.size(); ++k) row[k] *= (*mask)[k];
    return out;
}

inline double half_sq_frobenius(const Rows& a, const Rows& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < a[i].size(); ++k) s += (a[i][k] - b[i][k]) * (a[i][k] - b[i][k]);
    return 0.5 * s;
}

inline double frobenius(const Rows& a, const Rows& b) { return std::sqrt(2.0 * half_sq_frobenius(a, b)); }

// J'(Y~) + lambda R(Y) with hard labels.
inline double lt_objective(const Rows& y, const Rows& x, const std::vector<std::size_t>& z, const Rows& y0,
                           double lambda, const std::vector<double>* mask = nullptr, bool unsquared = false) {
    const Rows ym = masked(y, mask);
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::vector<double> s;
        for (const auto& row : ym) s.push_back(dot(x[i], row));
        total += s[z[i]] - log_sum_exp_naive(s);
    }
    const double reg = unsquared ? frobenius(y0, y) : half_sq_frobenius(y0, y);
    return -total / static_cast<double>(x.size()) + lambda * reg;
}

// -(1/M) sum_i sum_k P_ik log Q_ik + lambda R(Y).
inline double soft_objective(const Rows& y, const Rows& x, const Rows& p, const Rows& y0, double lambda,
                             const std::vector<double>* mask = nullptr) {
    const Rows ym = masked(y, mask);
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::vector<double> s;
        for (const auto& row : ym) s.push_back(dot(x[i], row));
        const double lse = log_sum_exp_naive(s);
        for (std::size_t k = 0; k < s.size(); ++k) total += p[i][k] * (s[k] - lse);
    }
    return -total / static_cast<double>(x.size()) + lambda * half_sq_frobenius(y0, y);
}

inline double batch_softmax(const Rows& inputs, const Rows& labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        std::vector<double> s;
        for (const auto& l : labels) s.push_back(dot(inputs[i], l));
        total += s[i] - log_sum_exp_naive(s);
    }
    return -total / static_cast<double>(inputs.size());
}

// Central differences with step h on every entry of y.
inline Rows finite_difference(const std::function<double(const Rows&)>& f, const Rows& y, double h = 1e-5) {
    Rows g = y;
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (std::size_t k = 0; k < y[i].size(); ++k) {
            Rows plus = y, minus = y;
            plus[i][k] += h;
            minus[i][k] -= h;
            g[i][k] = (f(plus) - f(minus)) / (2.0 * h);
        }
    }
    return g;
}

// ||a - b||_F / max(||a||_F, ||b||_F, 1e-6).
inline double relative_error(const Rows& a, const Rows& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t k = 0; k < a[i].size(); ++k) {
            diff += (a[i][k] - b[i][k]) * (a[i][k] - b[i][k]);
            na += a[i][k] * a[i][k];
            nb += b[i][k] * b[i][k];
        }
    }
    const double scale = std::max(std::sqrt(std::max(na, nb)), 1e-6);
    return std::sqrt(diff) / scale;
}

// Macro-F1 from an explicit confusion matrix.
inline double macro_f1(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred, std::size_t k) {
    std::vector<std::vector<double>> cm(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < gold.size(); ++i) cm[gold[i]][pred[i]] += 1.0;
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        double col = 0.0, row = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            col += cm[j][c];
            row += cm[c][j];
        }
        const double p = col > 0 ? cm[c][c] / col : 0.0;
        const double r = row > 0 ? cm[c][c] / row : 0.0;
        sum += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    }
    return sum / static_cast<double>(k);
}

// High-resolution bootstrap with an unrelated generator.
inline double bootstrap_std(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred, std::size_t k,
                            std::size_t resamples, unsigned seed) {
    std::mt19937 gen(seed);
    std::uniform_int_distribution<std::size_t> pick(0, gold.size() - 1);
    std::vector<std::size_t> g(gold.size()), p(gold.size());
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < resamples; ++r) {
        for (std::size_t i = 0; i < gold.size(); ++i) {
            const auto j = pick(gen);
            g[i] = gold[j];
            p[i] = pred[j];
        }
        const double f = macro_f1(g, p, k);
        s1 += f;
        s2 += f * f;
    }
    const double n = static_cast<double>(resamples);
    return std::sqrt((s2 - s1 * s1 / n) / (n - 1.0));
}

inline double ibeta(double x, double a, double b) { return boost::math::ibeta(a, b, x); }

inline double student_t_two_sided(double t, double df) {
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

inline Rows random_rows(std::mt19937& gen, std::size_t rows, std::size_t cols, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Rows out(rows, std::vector<double>(cols));
    for (auto& r : out)
        for (auto& v : r) v = n(gen);
    return out;
}

}  // namespace oracle
