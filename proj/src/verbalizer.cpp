#include "labeltune/verbalizer.hpp"

#include <set>

#include "labeltune/errors.hpp"

namespace labeltune {

namespace {

constexpr std::string_view kPlaceholder = "{}";

}  // namespace

LabelSet::LabelSet(std::vector<Label> labels) : labels_(std::move(labels)) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        const Label& l = labels_[i];
        if (l.index != i) {
            throw InvalidArgument("LabelSet: label '" + l.name + "' has index " + std::to_string(l.index) +
                                  ", expected " + std::to_string(i));
        }
        if (l.name.empty()) throw InvalidArgument("LabelSet: empty label name at index " + std::to_string(i));
        if (!seen.insert(l.name).second) throw InvalidArgument("LabelSet: duplicate label name '" + l.name + "'");
    }
}

LabelSet LabelSet::from_names(const std::vector<std::string>& names) {
    std::vector<Label> labels;
    labels.reserve(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) labels.push_back({i, names[i], std::nullopt});
    return LabelSet(std::move(labels));
}

std::vector<std::string> LabelSet::names() const {
    std::vector<std::string> out;
    out.reserve(labels_.size());
    for (const auto& l : labels_) out.push_back(l.name);
    return out;
}

bool LabelSet::contains(const std::string& name) const {
    for (const auto& l : labels_) {
        if (l.name == name) return true;
    }
    return false;
}

std::size_t LabelSet::index_of(const std::string& name) const {
    for (const auto& l : labels_) {
        if (l.name == name) return l.index;
    }
    throw InvalidArgument("unknown label '" + name + "'");
}

HypothesisPattern HypothesisPattern::from_label_hypotheses(const LabelSet& labels) {
    HypothesisPattern p;
    for (const auto& l : labels.labels()) {
        if (l.hypothesis) p.overrides.emplace(l.name, *l.hypothesis);
    }
    return p;
}

std::size_t HypothesisPattern::placeholder_count() const {
    std::size_t count = 0;
    for (auto pos = template_text.find(kPlaceholder); pos != std::string::npos;
         pos = template_text.find(kPlaceholder, pos + kPlaceholder.size())) {
        ++count;
    }
    return count;
}

void HypothesisPattern::validate(const LabelSet& labels) const {
    for (const auto& entry : overrides) {
        if (!labels.contains(entry.first)) throw InvalidPattern("override for unknown label '" + entry.first + "'");
    }
    if (placeholder_count() == 1) return;
    for (const auto& l : labels.labels()) {
        if (!overrides.contains(l.name)) {
            throw InvalidPattern("pattern template '" + template_text + "' has " + std::to_string(placeholder_count()) +
                                 " placeholders and no override for label '" + l.name + "'");
        }
    }
}

std::vector<std::string> render_hypotheses(const LabelSet& labels, const std::optional<HypothesisPattern>& pattern) {
    if (!pattern) return labels.names();
    pattern->validate(labels);
    std::vector<std::string> out;
    out.reserve(labels.size());
    for (const auto& l : labels.labels()) {
        if (auto it = pattern->overrides.find(l.name); it != pattern->overrides.end()) {
            out.push_back(it->second);
            continue;
        }
        std::string text = pattern->template_text;
        text.replace(text.find(kPlaceholder), kPlaceholder.size(), l.name);
        out.push_back(std::move(text));
    }
    return out;
}

}  // namespace labeltune
