#include "labeltune/metrics.hpp"

#include <string>

#include "labeltune/errors.hpp"

namespace labeltune {

EvalReport macro_f1(std::span<const std::size_t> gold, std::span<const std::size_t> pred, std::size_t num_labels) {
    if (gold.size() != pred.size()) {
        throw InvalidArgument("macro_f1: gold has " + std::to_string(gold.size()) + " entries, pred has " +
                              std::to_string(pred.size()));
    }
    if (gold.empty()) throw EmptyInput("macro_f1: no examples");
    if (num_labels == 0) throw InvalidArgument("macro_f1: empty label set");

    std::vector<std::size_t> tp(num_labels, 0), fp(num_labels, 0), fn(num_labels, 0);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] >= num_labels || pred[i] >= num_labels) throw InvalidArgument("macro_f1: label index out of range");
        if (gold[i] == pred[i]) {
            ++tp[gold[i]];
        } else {
            ++fp[pred[i]];
            ++fn[gold[i]];
        }
    }

    EvalReport report;
    report.per_class.resize(num_labels);
    double sum = 0.0;
    for (std::size_t k = 0; k < num_labels; ++k) {
        ClassScores& c = report.per_class[k];
        c.support = tp[k] + fn[k];
        c.precision = tp[k] + fp[k] == 0 ? 0.0 : static_cast<double>(tp[k]) / static_cast<double>(tp[k] + fp[k]);
        c.recall = tp[k] + fn[k] == 0 ? 0.0 : static_cast<double>(tp[k]) / static_cast<double>(tp[k] + fn[k]);
        c.f1 = c.precision + c.recall == 0.0 ? 0.0 : 2.0 * c.precision * c.recall / (c.precision + c.recall);
        sum += c.f1;
    }
    report.macro_f1 = sum / static_cast<double>(num_labels);
    return report;
}

double agreement(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) throw InvalidArgument("agreement: length mismatch");
    if (a.empty()) throw EmptyInput("agreement: no entries");
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i] ? 1 : 0;
    return static_cast<double>(same) / static_cast<double>(a.size());
}

}  // namespace labeltune
