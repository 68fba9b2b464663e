#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "labeltune/label_tuning.hpp"
#include "labeltune/matrix.hpp"
#include "labeltune/verbalizer.hpp"

namespace labeltune {

// ---- EMB1 embedding files ----------------------------------------------------
//
//   offset 0   magic "EMB1"
//   offset 4   u32 version (= 1)
//   offset 8   u32 count
//   offset 12  u32 dim
//   offset 16  count * dim IEEE-754 binary32 values, row-major
//
// All integers and floats are little-endian. Row i is named by line i of the
// UTF-8 sidecar file "<path>.ids".

inline constexpr char kEmbeddingMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 16;

struct EmbeddingFileHeader {
    std::uint32_t version = kEmbeddingVersion;
    std::uint32_t count = 0;
    std::uint32_t dim = 0;
};

struct EmbeddingFile {
    EmbeddingMatrix matrix;
    std::vector<std::string> ids;
};

std::filesystem::path sidecar_path(const std::filesystem::path& path);

// Values are narrowed to binary32; throws InvalidArgument if one overflows.
// Without ids the sidecar lists row numbers.
void write_embedding_file(const std::filesystem::path& path, const EmbeddingMatrix& matrix,
                          const std::vector<std::string>& ids = {});

EmbeddingFileHeader read_embedding_header(const std::filesystem::path& path);

// Validates magic, version, payload length and sidecar line count.
EmbeddingFile read_embedding_file(const std::filesystem::path& path);

// Raw serialization used by the file functions above.
std::vector<unsigned char> encode_embedding_bytes(const EmbeddingMatrix& matrix);
EmbeddingMatrix decode_embedding_bytes(const std::vector<unsigned char>& bytes, const std::string& source = "<memory>");

// ---- datasets ------------------------------------------------------------------

// "text<TAB>label_name" per line, no header. Blank lines are skipped.
struct Dataset {
    std::vector<std::string> texts;
    std::vector<std::string> label_names;
};

Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);

// Label indices of each example; throws FormatError naming unknown labels.
std::vector<std::size_t> resolve_labels(const Dataset& dataset, const LabelSet& labels);

// One text per line; blank lines are skipped. Lines holding a tab are read as
// dataset rows and contribute only their text field.
std::vector<std::string> read_texts(const std::filesystem::path& path);

// ---- label sets and patterns -----------------------------------------------------

// JSON: ["a", "b"], [{"name": "a", "hypothesis": "..."}], or {"labels": [...]}.
LabelSet read_label_set(const std::filesystem::path& path);
void write_label_set(const std::filesystem::path& path, const LabelSet& labels);

// Lines starting with '#' and blank lines are ignored. A line containing a tab
// is an override "label<TAB>full hypothesis"; the first other line is the
// template, e.g. "It was {}.".
HypothesisPattern read_pattern(const std::filesystem::path& path);
HypothesisPattern parse_pattern(const std::string& text);

// ---- tuning configs ----------------------------------------------------------------

// "lr=0.1,epochs=1000,reg=0.01,dropout=0.1[,seed=N][,regularizer=frobenius]".
TuningConfig parse_tuning_config(const std::string& text, const TuningConfig& defaults = {});
std::string format_tuning_config(const TuningConfig& config);

// JSON array of {"learning_rate", "epochs", "reg_coefficient", "dropout_rate"[, "seed", "regularizer"]}.
std::vector<TuningConfig> read_tuning_grid(const std::filesystem::path& path);

// ---- tuned label artifacts -------------------------------------------------------
//
// A directory holding Y.emb (+ .ids), Y0.emb (+ .ids) and meta.json with the
// label names, the config used, provenance and a creation timestamp.

struct TunedLabelsArtifact {
    TunedLabels labels;
    std::vector<std::string> label_names;
    std::string created;
};

void write_tuned_labels(const std::filesystem::path& dir, const TunedLabels& labels,
                        const std::vector<std::string>& label_names, const std::string& created);
TunedLabelsArtifact read_tuned_labels(const std::filesystem::path& dir);

}  // namespace labeltune
