#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cfloat>
#include <cmath>
#include <filesystem>
#include <random>

#include "labeltune/io.hpp"
#include "labeltune/synthetic.hpp"
#include "support.hpp"

using namespace labeltune;
using testsupport::slurp;
using testsupport::TempDir;
using testsupport::write_text;

namespace {

using Bytes = std::vector<unsigned char>;

Bytes file_bytes(const std::filesystem::path& p) {
    const std::string s = slurp(p);
    return Bytes(s.begin(), s.end());
}

void write_bytes(const std::filesystem::path& p, const Bytes& b) {
    write_text(p, std::string(b.begin(), b.end()));
}

TuningConfig config(double lr, std::size_t epochs, double reg, double dropout, std::uint64_t seed = 0) {
    TuningConfig c;
    c.learning_rate = lr;
    c.epochs = epochs;
    c.reg_coefficient = reg;
    c.dropout_rate = dropout;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("EMB1 byte layout") {
    const auto m = EmbeddingMatrix::from_rows({{1.0, -2.0}}, 2);
    const Bytes expected{'E', 'M', 'B', '1', 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0,
                         0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
    CHECK(encode_embedding_bytes(m) == expected);
    CHECK(decode_embedding_bytes(expected) == m);

    const auto empty = encode_embedding_bytes(EmbeddingMatrix(0, 3));
    CHECK(empty == Bytes{'E', 'M', 'B', '1', 1, 0, 0, 0, 0, 0, 0, 0, 3, 0, 0, 0});
    CHECK(decode_embedding_bytes(empty).rows() == 0);
}

TEST_CASE("EMB1 round trip through files") {
    TempDir tmp("emb");
    std::mt19937 gen(3);
    std::normal_distribution<float> n;
    for (std::size_t rows : {1u, 7u, 40u}) {
        for (std::size_t dim : {1u, 3u, 64u}) {
            // float-representable values survive exactly
            std::vector<double> data(rows * dim);
            for (double& v : data) v = n(gen);
            const EmbeddingMatrix m(rows, dim, data);
            const auto path = tmp / ("m" + std::to_string(rows) + "x" + std::to_string(dim) + ".emb");
            write_embedding_file(path, m);
            const auto back = read_embedding_file(path);
            CHECK(back.matrix == m);
            REQUIRE(back.ids.size() == rows);
            CHECK(back.ids.front() == "0");
            CHECK(file_bytes(path).size() == kEmbeddingHeaderBytes + 4 * rows * dim);
            const auto h = read_embedding_header(path);
            CHECK(h.count == rows);
            CHECK(h.dim == dim);
            CHECK(h.version == 1);
        }
    }
    write_embedding_file(tmp / "named.emb", EmbeddingMatrix::from_rows({{1}, {2}}, 1), {"first text", "zweiter Text ü"});
    CHECK(read_embedding_file(tmp / "named.emb").ids == std::vector<std::string>{"first text", "zweiter Text ü"});
    CHECK(slurp(sidecar_path(tmp / "named.emb")) == "first text\nzweiter Text ü\n");

    // doubles are narrowed to the nearest float
    write_embedding_file(tmp / "narrow.emb", EmbeddingMatrix(1, 1, {0.1}));
    CHECK(read_embedding_file(tmp / "narrow.emb").matrix(0, 0) == static_cast<double>(0.1f));

    // rewriting gives identical bytes
    const auto again = tmp / "again.emb";
    write_embedding_file(again, read_embedding_file(tmp / "named.emb").matrix, {"first text", "zweiter Text ü"});
    CHECK(file_bytes(again) == file_bytes(tmp / "named.emb"));
}

TEST_CASE("EMB1 rejects malformed input") {
    const Bytes good = encode_embedding_bytes(EmbeddingMatrix::from_rows({{1, 2}, {3, 4}}, 2));

    Bytes magic = good;
    magic[3] = '2';
    CHECK_THROWS_AS(decode_embedding_bytes(magic), FormatError);

    Bytes version = good;
    version[4] = 2;
    CHECK_THROWS_AS(decode_embedding_bytes(version), FormatError);

    Bytes zero_dim = good;
    zero_dim[12] = 0;
    CHECK_THROWS_AS(decode_embedding_bytes(zero_dim), FormatError);

    Bytes truncated(good.begin(), good.end() - 1);
    CHECK_THROWS_AS(decode_embedding_bytes(truncated), FormatError);
    Bytes extra = good;
    extra.push_back(0);
    CHECK_THROWS_AS(decode_embedding_bytes(extra), FormatError);
    CHECK_THROWS_AS(decode_embedding_bytes(Bytes(good.begin(), good.begin() + 10)), FormatError);

    Bytes nan = good;
    nan[16] = 0x00;
    nan[17] = 0x00;
    nan[18] = 0xc0;
    nan[19] = 0x7f;
    CHECK_THROWS_AS(decode_embedding_bytes(nan), FormatError);

    CHECK_THROWS_AS(encode_embedding_bytes(EmbeddingMatrix(1, 1, {1e300})), InvalidArgument);
    CHECK_NOTHROW(encode_embedding_bytes(EmbeddingMatrix(1, 1, {FLT_MAX})));
}

TEST_CASE("EMB1 sidecar checks") {
    TempDir tmp("side");
    const auto m = EmbeddingMatrix::from_rows({{1}, {2}}, 1);
    CHECK_THROWS_AS(write_embedding_file(tmp / "a.emb", m, {"one"}), InvalidArgument);
    CHECK_THROWS_AS(write_embedding_file(tmp / "b.emb", m, {"one", "two\nlines"}), InvalidArgument);

    write_embedding_file(tmp / "c.emb", m);
    write_text(sidecar_path(tmp / "c.emb"), "only one\n");
    CHECK_THROWS_AS(read_embedding_file(tmp / "c.emb"), FormatError);
    std::filesystem::remove(sidecar_path(tmp / "c.emb"));
    CHECK_THROWS_AS(read_embedding_file(tmp / "c.emb"), FormatError);
    CHECK_THROWS_AS(read_embedding_file(tmp / "missing.emb"), FormatError);

    write_bytes(tmp / "bad.emb", Bytes{'N', 'O', 'P', 'E'});
    CHECK_THROWS_AS(read_embedding_header(tmp / "bad.emb"), FormatError);
}

TEST_CASE("datasets") {
    TempDir tmp("data");
    write_text(tmp / "d.tsv", "great movie\tpositive\n\nawful\tnegative\ntab\tinside\tpositive\n");
    const auto d = read_dataset(tmp / "d.tsv");
    CHECK(d.texts == std::vector<std::string>{"great movie", "awful", "tab\tinside"});
    CHECK(d.label_names == std::vector<std::string>{"positive", "negative", "positive"});

    const auto labels = LabelSet::from_names({"negative", "positive"});
    CHECK(resolve_labels(d, labels) == std::vector<std::size_t>{1, 0, 1});
    CHECK_THROWS_AS(resolve_labels(d, LabelSet::from_names({"negative"})), FormatError);

    write_text(tmp / "bad.tsv", "no label here\n");
    CHECK_THROWS_AS(read_dataset(tmp / "bad.tsv"), FormatError);

    write_dataset(tmp / "out.tsv", Dataset{{"a b", "c"}, {"x", "y"}});
    CHECK(slurp(tmp / "out.tsv") == "a b\tx\nc\ty\n");
    CHECK_THROWS_AS(write_dataset(tmp / "out2.tsv", Dataset{{"a\tb"}, {"x"}}), InvalidArgument);

    write_text(tmp / "t.txt", "first\n\nsecond\tlabel\n");
    CHECK(read_texts(tmp / "t.txt") == std::vector<std::string>{"first", "second"});
    write_text(tmp / "empty.txt", "");
    CHECK(read_texts(tmp / "empty.txt").empty());
}

TEST_CASE("label set files") {
    TempDir tmp("labels");
    write_text(tmp / "plain.json", R"(["neg", "pos"])");
    CHECK(read_label_set(tmp / "plain.json").names() == std::vector<std::string>{"neg", "pos"});

    write_text(tmp / "objects.json", R"({"labels": [{"name": "neg", "hypothesis": "It was bad."}, {"name": "pos"}]})");
    const auto l = read_label_set(tmp / "objects.json");
    CHECK(l.size() == 2);
    CHECK(l[0].hypothesis == std::optional<std::string>("It was bad."));
    CHECK_FALSE(l[1].hypothesis.has_value());

    write_label_set(tmp / "out.json", l);
    const auto back = read_label_set(tmp / "out.json");
    CHECK(back.names() == l.names());
    CHECK(back[0].hypothesis == l[0].hypothesis);

    write_text(tmp / "broken.json", "{not json");
    CHECK_THROWS_AS(read_label_set(tmp / "broken.json"), FormatError);
    write_text(tmp / "dup.json", R"(["a", "a"])");
    CHECK_THROWS(read_label_set(tmp / "dup.json"));
    CHECK_THROWS_AS(read_label_set(tmp / "none.json"), FormatError);
}

TEST_CASE("pattern files") {
    const auto p = parse_pattern("# sentiment\n\nIt was {}.\nnoemo\tNo particular emotion.\n");
    CHECK(p.template_text == "It was {}.");
    CHECK(p.overrides.at("noemo") == "No particular emotion.");
    CHECK_THROWS_AS(parse_pattern("a {}\nb {}\n"), InvalidPattern);
    const auto only = parse_pattern("x\tX!\n");
    CHECK(only.template_text.empty());
}

TEST_CASE("tuning config strings") {
    const auto c = parse_tuning_config("lr=0.1,epochs=1000,reg=0.01,dropout=0.1");
    CHECK(c == config(0.1, 1000, 0.01, 0.1));
    CHECK(parse_tuning_config("learning_rate=0.5,reg_coefficient=2,dropout_rate=0,seed=7") ==
          config(0.5, 1000, 2.0, 0.0, 7));
    CHECK(format_tuning_config(c) == "lr=0.1,epochs=1000,reg=0.01,dropout=0.1,seed=0");

    auto f = config(0.123456789012345, 3, 1e-7, 0.25, 9);
    f.regularizer = Regularizer::Frobenius;
    const std::string text = format_tuning_config(f);
    CHECK(text.find("regularizer=frobenius") != std::string::npos);
    CHECK(parse_tuning_config(text) == f);

    CHECK_THROWS_AS(parse_tuning_config("lr"), InvalidArgument);
    CHECK_THROWS_AS(parse_tuning_config("lr=abc"), InvalidArgument);
    CHECK_THROWS_AS(parse_tuning_config("speed=3"), InvalidArgument);
    CHECK_THROWS_AS(parse_tuning_config("epochs=0"), InvalidArgument);
    CHECK_THROWS_AS(parse_tuning_config("dropout=1"), InvalidArgument);
    CHECK_THROWS_AS(parse_tuning_config("regularizer=l1"), InvalidArgument);
}

TEST_CASE("tuning grid files") {
    TempDir tmp("grid");
    write_text(tmp / "g.json", R"([{"learning_rate": 0.1, "epochs": 5, "reg_coefficient": 0.0, "dropout_rate": 0.0},
                                  {"learning_rate": 0.2, "epochs": 6, "reg_coefficient": 1.0, "dropout_rate": 0.5,
                                   "seed": 3, "regularizer": "frobenius"}])");
    const auto g = read_tuning_grid(tmp / "g.json");
    REQUIRE(g.size() == 2);
    CHECK(g[0] == config(0.1, 5, 0.0, 0.0));
    auto second = config(0.2, 6, 1.0, 0.5, 3);
    second.regularizer = Regularizer::Frobenius;
    CHECK(g[1] == second);

    write_text(tmp / "obj.json", "{}");
    CHECK_THROWS_AS(read_tuning_grid(tmp / "obj.json"), FormatError);
    write_text(tmp / "missing_key.json", R"([{"learning_rate": 0.1}])");
    CHECK_THROWS_AS(read_tuning_grid(tmp / "missing_key.json"), FormatError);
}

TEST_CASE("tuned label artifacts") {
    TempDir tmp("tuned");
    const auto y0 = EmbeddingMatrix::from_rows({{0.5, -1}, {2, 0.25}}, 2);
    const auto y = EmbeddingMatrix::from_rows({{0.75, -1.5}, {2, 0.125}}, 2);
    const TunedLabels t(y, y0, config(0.1, 10, 0.01, 0.1, 4), {{"method", "label-tuning"}});
    write_tuned_labels(tmp / "out", t, {"neg", "pos"}, "2024-01-01T00:00:00Z");

    const auto back = read_tuned_labels(tmp / "out");
    CHECK(back.labels.y() == y);
    CHECK(back.labels.y0() == y0);
    CHECK(back.labels.config_used() == t.config_used());
    CHECK(back.labels.provenance() == t.provenance());
    CHECK(back.label_names == std::vector<std::string>{"neg", "pos"});
    CHECK(back.created == "2024-01-01T00:00:00Z");
    CHECK(read_embedding_file(tmp / "out" / "Y.emb").ids == back.label_names);

    const std::string meta = slurp(tmp / "out" / "meta.json");
    CHECK(meta.find("\"format\": \"labeltune-tuned-labels\"") != std::string::npos);
    CHECK(meta.find("half_squared_frobenius") != std::string::npos);

    // identical inputs give identical bytes
    write_tuned_labels(tmp / "again", t, {"neg", "pos"}, "2024-01-01T00:00:00Z");
    for (const char* f : {"Y.emb", "Y.emb.ids", "Y0.emb", "meta.json"})
        CHECK(slurp(tmp / "again" / f) == slurp(tmp / "out" / f));

    const TunedLabels no_config(y, y0, std::nullopt, {});
    write_tuned_labels(tmp / "plain", no_config, {"neg", "pos"}, "x");
    CHECK_FALSE(read_tuned_labels(tmp / "plain").labels.config_used().has_value());

    CHECK_THROWS_AS(write_tuned_labels(tmp / "bad", t, {"only"}, "x"), InvalidArgument);
    CHECK_THROWS_AS(read_tuned_labels(tmp / "nowhere"), FormatError);
    write_embedding_file(tmp / "out" / "Y0.emb", EmbeddingMatrix(2, 3));
    CHECK_THROWS_AS(read_tuned_labels(tmp / "out"), FormatError);
}

TEST_CASE("label footprint of a 10-label, 768-dimensional model") {
    TempDir tmp("footprint");
    const auto y = random_matrix(10, 768, 0.05, 1);
    write_tuned_labels(tmp / "m", TunedLabels(y, y, std::nullopt, {}), [] {
        std::vector<std::string> names;
        for (int i = 0; i < 10; ++i) names.push_back("label" + std::to_string(i));
        return names;
    }(), "x");
    const auto h = read_embedding_header(tmp / "m" / "Y.emb");
    CHECK(static_cast<std::size_t>(h.count) * h.dim == 7680);
    CHECK(std::filesystem::file_size(tmp / "m" / "Y.emb") - kEmbeddingHeaderBytes == 30720);
}
