#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "labeltune/encoders.hpp"
#include "labeltune/matrix.hpp"
#include "labeltune/verbalizer.hpp"

namespace labeltune {

enum class Similarity { Dot, Cosine };

struct Prediction {
    Vector scores;
    Vector probabilities;
    std::size_t predicted = 0;

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

// Label embeddings computed once, scored against any number of inputs.
class ZeroShotModel {
public:
    // Takes precomputed label embeddings (e.g. tuned ones); no encoder calls.
    ZeroShotModel(std::shared_ptr<const Encoder> encoder, LabelSet labels, EmbeddingMatrix label_embeddings,
                  Similarity similarity = Similarity::Dot);

    const Encoder& encoder() const { return *encoder_; }
    const LabelSet& labels() const noexcept { return labels_; }
    const EmbeddingMatrix& label_embeddings() const noexcept { return label_embeddings_; }
    Similarity similarity() const noexcept { return similarity_; }

    // Scores an already embedded input.
    Prediction score(std::span<const double> input_embedding) const;

private:
    std::shared_ptr<const Encoder> encoder_;
    LabelSet labels_;
    EmbeddingMatrix label_embeddings_;
    EmbeddingMatrix scoring_labels_;  // normalized copy in cosine mode
    Similarity similarity_;
};

// Renders the label texts and encodes each exactly once, in index order.
ZeroShotModel build_zero_shot(std::shared_ptr<const Encoder> encoder, const LabelSet& labels,
                              const std::optional<HypothesisPattern>& pattern,
                              Similarity similarity = Similarity::Dot);

// One encoder call; ties go to the lowest label index.
Prediction classify(const ZeroShotModel& model, std::string_view input_text);

// One encoder call per input.
std::vector<Prediction> classify_batch(const ZeroShotModel& model, const std::vector<std::string>& inputs);

// Argmax label per row of X against Y, without any encoder.
std::vector<std::size_t> predict_labels(const EmbeddingMatrix& x, const EmbeddingMatrix& y,
                                        Similarity similarity = Similarity::Dot);

// Full score/probability rows for pre-embedded inputs.
std::vector<Prediction> score_embeddings(const EmbeddingMatrix& x, const EmbeddingMatrix& y,
                                         Similarity similarity = Similarity::Dot);

}  // namespace labeltune
