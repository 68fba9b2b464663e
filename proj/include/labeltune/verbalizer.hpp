#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace labeltune {

struct Label {
    std::size_t index = 0;
    std::string name;
    std::optional<std::string> hypothesis;
};

// Ordered label definitions of one task. Indices are 0..K-1 and names are
// unique and non-empty.
class LabelSet {
public:
    LabelSet() = default;
    explicit LabelSet(std::vector<Label> labels);
    static LabelSet from_names(const std::vector<std::string>& names);

    std::size_t size() const noexcept { return labels_.size(); }
    const Label& operator[](std::size_t i) const { return labels_.at(i); }
    const std::vector<Label>& labels() const noexcept { return labels_; }
    std::vector<std::string> names() const;

    bool contains(const std::string& name) const;
    // Throws InvalidArgument for unknown names.
    std::size_t index_of(const std::string& name) const;

private:
    std::vector<Label> labels_;
};

// A template with one "{}" placeholder plus optional per-label full hypotheses.
struct HypothesisPattern {
    std::string template_text;
    std::map<std::string, std::string> overrides;

    // Overrides-only pattern built from the labels' own hypothesis fields.
    static HypothesisPattern from_label_hypotheses(const LabelSet& labels);

    std::size_t placeholder_count() const;

    // Throws InvalidPattern unless the template has exactly one placeholder or
    // the overrides cover every label.
    void validate(const LabelSet& labels) const;
};

// Identity hypothesis (label names verbatim) without a pattern; otherwise each
// label's override or the template with the name substituted. Index order.
std::vector<std::string> render_hypotheses(const LabelSet& labels, const std::optional<HypothesisPattern>& pattern);

}  // namespace labeltune
