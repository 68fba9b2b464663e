#include "labeltune/zeroshot.hpp"

#include "labeltune/similarity.hpp"

namespace labeltune {

namespace {

Prediction score_against(std::span<const double> input, const EmbeddingMatrix& labels) {
    Prediction p;
    p.scores.reserve(labels.rows());
    for (std::size_t j = 0; j < labels.rows(); ++j) p.scores.push_back(dot_similarity(input, labels.row(j)));
    p.probabilities = softmax(p.scores);
    p.predicted = p.scores.empty() ? 0 : argmax(p.scores);
    return p;
}

}  // namespace

ZeroShotModel::ZeroShotModel(std::shared_ptr<const Encoder> encoder, LabelSet labels, EmbeddingMatrix label_embeddings,
                             Similarity similarity)
    : encoder_(std::move(encoder)),
      labels_(std::move(labels)),
      label_embeddings_(std::move(label_embeddings)),
      similarity_(similarity) {
    if (!encoder_) throw InvalidArgument("ZeroShotModel: null encoder");
    if (label_embeddings_.rows() != labels_.size()) {
        throw InvalidArgument("ZeroShotModel: " + std::to_string(label_embeddings_.rows()) + " label embeddings for " +
                              std::to_string(labels_.size()) + " labels");
    }
    if (labels_.size() == 0) throw InvalidArgument("ZeroShotModel: empty label set");
    if (label_embeddings_.cols() != encoder_->dim()) {
        throw InvalidArgument("ZeroShotModel: label embedding dim " + std::to_string(label_embeddings_.cols()) +
                              " does not match encoder dim " + std::to_string(encoder_->dim()));
    }
    scoring_labels_ = similarity_ == Similarity::Cosine ? normalize_rows(label_embeddings_) : label_embeddings_;
}

Prediction ZeroShotModel::score(std::span<const double> input_embedding) const {
    if (similarity_ == Similarity::Cosine) return score_against(normalized(input_embedding), scoring_labels_);
    return score_against(input_embedding, scoring_labels_);
}

ZeroShotModel build_zero_shot(std::shared_ptr<const Encoder> encoder, const LabelSet& labels,
                              const std::optional<HypothesisPattern>& pattern, Similarity similarity) {
    if (!encoder) throw InvalidArgument("build_zero_shot: null encoder");
    const auto texts = render_hypotheses(labels, pattern);
    EmbeddingMatrix y = encoder->encode_all(texts);
    return ZeroShotModel(std::move(encoder), labels, std::move(y), similarity);
}

Prediction classify(const ZeroShotModel& model, std::string_view input_text) {
    const Vector x = model.encoder().encode(input_text);
    return model.score(x);
}

std::vector<Prediction> classify_batch(const ZeroShotModel& model, const std::vector<std::string>& inputs) {
    std::vector<Prediction> out;
    out.reserve(inputs.size());
    for (const auto& text : inputs) out.push_back(classify(model, text));
    return out;
}

std::vector<Prediction> score_embeddings(const EmbeddingMatrix& x, const EmbeddingMatrix& y, Similarity similarity) {
    if (x.cols() != y.cols()) throw InvalidArgument("score_embeddings: dimension mismatch");
    const EmbeddingMatrix labels = similarity == Similarity::Cosine ? normalize_rows(y) : y;
    std::vector<Prediction> out;
    out.reserve(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        out.push_back(similarity == Similarity::Cosine ? score_against(normalized(x.row(i)), labels)
                                                       : score_against(x.row(i), labels));
    }
    return out;
}

std::vector<std::size_t> predict_labels(const EmbeddingMatrix& x, const EmbeddingMatrix& y, Similarity similarity) {
    if (x.cols() != y.cols()) throw InvalidArgument("predict_labels: dimension mismatch");
    if (y.rows() == 0) throw InvalidArgument("predict_labels: no labels");
    if (similarity == Similarity::Cosine) return predict_labels(normalize_rows(x), normalize_rows(y));
    const ScoreMatrix s = score_matrix(x, y);
    std::vector<std::size_t> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = argmax(s.row(i));
    return out;
}

}  // namespace labeltune
