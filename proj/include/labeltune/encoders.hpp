#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "labeltune/matrix.hpp"

namespace labeltune {

// Text -> fixed-width embedding. Implementations must be deterministic and
// safe to call concurrently.
class Encoder {
public:
    virtual ~Encoder() = default;
    virtual std::size_t dim() const = 0;
    virtual Vector encode(std::string_view text) const = 0;

    // Encodes each text as one row.
    EmbeddingMatrix encode_all(const std::vector<std::string>& texts) const;
};

// Precomputed embeddings keyed by text id, in insertion order.
class EmbeddingStore {
public:
    explicit EmbeddingStore(std::size_t dim);

    // Re-adding an id with an identical vector is a no-op; a conflicting vector throws.
    void add(const std::string& id, Vector v);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool contains(const std::string& id) const { return index_.contains(id); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }

    // Throws MissingEmbedding naming the id.
    const Vector& at(const std::string& id) const;

    EmbeddingMatrix to_matrix() const;

    // EMB1 file plus its ".ids" sidecar.
    static EmbeddingStore load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::size_t dim_;
    std::vector<std::string> ids_;
    std::vector<Vector> vectors_;
    std::unordered_map<std::string, std::size_t> index_;
};

Vector file_backed_encode(const EmbeddingStore& store, const std::string& id);

class FileBackedEncoder final : public Encoder {
public:
    explicit FileBackedEncoder(std::shared_ptr<const EmbeddingStore> store);
    std::size_t dim() const override { return store_->dim(); }
    Vector encode(std::string_view text) const override;

private:
    std::shared_ptr<const EmbeddingStore> store_;
};

// word -> vector, read from the whitespace-separated "word v1 ... vd" text format.
class WordVectorTable {
public:
    explicit WordVectorTable(std::size_t dim);

    void add(const std::string& word, Vector v);
    const Vector* find(const std::string& word) const;
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return table_.size(); }

    static WordVectorTable load(const std::filesystem::path& path);

private:
    std::size_t dim_;
    std::unordered_map<std::string, Vector> table_;
};

using StopwordSet = std::unordered_set<std::string>;

// One word per line; blank lines are ignored.
StopwordSet load_stopwords(const std::filesystem::path& path);

// Lowercases ASCII letters and splits on every non-letter byte. Bytes >= 0x80
// count as letters so UTF-8 words stay whole.
std::vector<std::string> tokenize_alphabetic(std::string_view text);

// Mean of the in-vocabulary, non-stopword token vectors; zero vector if none survive.
Vector averaging_encode(const WordVectorTable& table, const StopwordSet& stopwords, std::string_view text);

class AveragingEncoder final : public Encoder {
public:
    AveragingEncoder(std::shared_ptr<const WordVectorTable> table, StopwordSet stopwords);
    std::size_t dim() const override { return table_->dim(); }
    Vector encode(std::string_view text) const override;

private:
    std::shared_ptr<const WordVectorTable> table_;
    StopwordSet stopwords_;
};

// Seeded 64-bit hash of a byte string (FNV-1a followed by a splitmix64 finalizer).
std::uint64_t seeded_hash(std::string_view bytes, std::uint64_t seed);

// Character 3-gram counts hashed into dim signed buckets, scaled to unit norm.
// The text is padded with one space on each side so short strings still
// produce a gram. Empty text maps to the zero vector.
Vector toy_hash_encode(std::size_t dim, std::uint64_t seed, std::string_view text);

class HashEncoder final : public Encoder {
public:
    HashEncoder(std::size_t dim, std::uint64_t seed);
    std::size_t dim() const override { return dim_; }
    Vector encode(std::string_view text) const override { return toy_hash_encode(dim_, seed_, text); }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

// Pass-through wrapper that counts encode() calls.
class CountingEncoder final : public Encoder {
public:
    explicit CountingEncoder(std::shared_ptr<const Encoder> inner);
    std::size_t dim() const override { return inner_->dim(); }
    Vector encode(std::string_view text) const override;

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::shared_ptr<const Encoder> inner_;
    mutable std::atomic<std::size_t> calls_{0};
};

}  // namespace labeltune
