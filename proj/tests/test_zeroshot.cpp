#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "labeltune/metrics.hpp"
#include "labeltune/similarity.hpp"
#include "labeltune/synthetic.hpp"
#include "labeltune/zeroshot.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace labeltune;

namespace {

std::shared_ptr<CountingEncoder> counting_toy(std::size_t dim = 32) {
    return std::make_shared<CountingEncoder>(std::make_shared<HashEncoder>(dim, 0));
}

LabelSet numbered_labels(std::size_t k) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < k; ++i) names.push_back("label " + std::to_string(i));
    return LabelSet::from_names(names);
}

std::vector<std::string> numbered_texts(std::size_t n) {
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < n; ++i) texts.push_back("input text number " + std::to_string(i));
    return texts;
}

}  // namespace

TEST_CASE("build makes exactly one encode call per label") {
    auto enc = counting_toy();
    const auto labels = LabelSet::from_names({"a", "b", "c"});
    const auto model = build_zero_shot(enc, labels, std::nullopt);
    CHECK(enc->calls() == 3);
    CHECK(model.label_embeddings().rows() == 3);
    CHECK(model.label_embeddings().cols() == 32);
    const auto again = build_zero_shot(enc, labels, std::nullopt);
    CHECK(again.label_embeddings() == model.label_embeddings());
}

TEST_CASE("pattern and identity hypothesis give different label embeddings") {
    auto enc = counting_toy();
    const auto labels = LabelSet::from_names({"terrible", "great"});
    const auto ih = build_zero_shot(enc, labels, std::nullopt);
    const auto pat = build_zero_shot(enc, labels, HypothesisPattern{"It was {}.", {}});
    CHECK(ih.label_embeddings() != pat.label_embeddings());
    CHECK(frobenius_distance(ih.label_embeddings(), pat.label_embeddings()) > 0.1);
}

TEST_CASE("axis-aligned classification and tie-break") {
    auto store = std::make_shared<EmbeddingStore>(2);
    store->add("five-one", {5, 1});
    store->add("nothing", {0, 0});
    auto enc = std::make_shared<CountingEncoder>(std::make_shared<FileBackedEncoder>(store));
    const ZeroShotModel model(enc, LabelSet::from_names({"x", "y"}), EmbeddingMatrix::from_rows({{1, 0}, {0, 1}}, 2));
    CHECK(enc->calls() == 0);

    const auto p = classify(model, "five-one");
    CHECK(p.predicted == 0);
    CHECK(p.scores == Vector{5, 1});
    CHECK(enc->calls() == 1);

    const auto z = classify(model, "nothing");
    CHECK(z.scores == Vector{0, 0});
    CHECK(z.predicted == 0);
    CHECK(z.probabilities == Vector{0.5, 0.5});
    CHECK_THROWS_AS(classify(model, "unknown"), MissingEmbedding);
}

TEST_CASE("model construction validates shapes") {
    auto enc = counting_toy(4);
    const auto labels = LabelSet::from_names({"a", "b"});
    CHECK_THROWS_AS(ZeroShotModel(enc, labels, EmbeddingMatrix(3, 4)), InvalidArgument);
    CHECK_THROWS_AS(ZeroShotModel(enc, labels, EmbeddingMatrix(2, 5)), InvalidArgument);
    CHECK_THROWS_AS(ZeroShotModel(enc, LabelSet{}, EmbeddingMatrix(0, 4)), InvalidArgument);
}

TEST_CASE("noiseless orthogonal clusters are classified perfectly") {
    ClusterSpec spec;
    spec.num_labels = 3;
    spec.dim = 3;
    spec.points_per_cluster = 100;
    const auto task = make_separable_task(spec);
    const auto pred = predict_labels(task.x, task.true_label_embeddings);
    CHECK(macro_f1(task.z, pred, 3).macro_f1 == 1.0);
}

TEST_CASE("classify_batch uses one call per input regardless of K") {
    const auto texts = numbered_texts(10);
    for (std::size_t k : {2u, 100u}) {
        auto enc = counting_toy();
        const auto model = build_zero_shot(enc, numbered_labels(k), std::nullopt);
        const std::size_t label_calls = enc->calls();
        CHECK(label_calls == k);
        const auto preds = classify_batch(model, texts);
        CHECK(preds.size() == 10);
        CHECK(enc->calls() - label_calls == 10);
    }
}

TEST_CASE("encoder calls are N + K for all N, K") {
    for (std::size_t k : {1u, 3u, 17u}) {
        for (std::size_t n : {0u, 1u, 5u, 40u}) {
            auto enc = counting_toy(16);
            const auto model = build_zero_shot(enc, numbered_labels(k), std::nullopt);
            (void)classify_batch(model, numbered_texts(n));
            CHECK(enc->calls() == n + k);
        }
    }
}

TEST_CASE("batch equals per-input classify and empty batch is empty") {
    auto enc = counting_toy();
    const auto model = build_zero_shot(enc, numbered_labels(5), HypothesisPattern{"about {}", {}});
    const auto texts = numbered_texts(20);
    const auto batch = classify_batch(model, texts);
    for (std::size_t i = 0; i < texts.size(); ++i) CHECK(batch[i] == classify(model, texts[i]));
    CHECK(classify_batch(model, {}).empty());
}

TEST_CASE("probabilities sum to one and argmax is scale invariant") {
    std::mt19937 gen(17);
    for (int trial = 0; trial < 30; ++trial) {
        const auto x = testsupport::to_matrix(oracle::random_rows(gen, 25, 6));
        const auto y = testsupport::to_matrix(oracle::random_rows(gen, 4, 6));
        const auto preds = score_embeddings(x, y);
        for (const auto& p : preds) {
            double s = 0.0;
            for (double v : p.probabilities) s += v;
            CHECK(std::abs(s - 1.0) < 1e-9);
            CHECK(p.predicted == argmax(p.scores));
        }
        for (double c : {0.001, 0.5, 3.0, 1000.0}) {
            std::vector<double> scaled = y.data();
            for (double& v : scaled) v *= c;
            CHECK(predict_labels(x, EmbeddingMatrix(4, 6, scaled)) == predict_labels(x, y));
        }
    }
}

TEST_CASE("cosine mode ignores label norms") {
    const auto y = EmbeddingMatrix::from_rows({{10, 0}, {0, 1}}, 2);
    const auto x = EmbeddingMatrix::from_rows({{0.5, 0.6}}, 2);
    CHECK(predict_labels(x, y, Similarity::Dot) == std::vector<std::size_t>{0});
    CHECK(predict_labels(x, y, Similarity::Cosine) == std::vector<std::size_t>{1});
    CHECK_THROWS_AS(predict_labels(EmbeddingMatrix(1, 3), y), InvalidArgument);
}
