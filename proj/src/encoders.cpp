#include "labeltune/encoders.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "labeltune/io.hpp"
#include "labeltune/similarity.hpp"

namespace labeltune {

EmbeddingMatrix Encoder::encode_all(const std::vector<std::string>& texts) const {
    std::vector<double> data;
    data.reserve(texts.size() * dim());
    for (const auto& t : texts) {
        const Vector v = encode(t);
        data.insert(data.end(), v.begin(), v.end());
    }
    return EmbeddingMatrix(texts.size(), dim(), std::move(data));
}

// ---- EmbeddingStore -------------------------------------------------------

EmbeddingStore::EmbeddingStore(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw InvalidArgument("EmbeddingStore: dim must be at least 1");
}

void EmbeddingStore::add(const std::string& id, Vector v) {
    if (v.size() != dim_) {
        throw InvalidArgument("EmbeddingStore: vector for '" + id + "' has dim " + std::to_string(v.size()) +
                              ", store dim is " + std::to_string(dim_));
    }
    for (double x : v) {
        if (!std::isfinite(x)) throw InvalidArgument("EmbeddingStore: non-finite value for '" + id + "'");
    }
    if (auto it = index_.find(id); it != index_.end()) {
        if (vectors_[it->second] != v) throw InvalidArgument("EmbeddingStore: conflicting vectors for id '" + id + "'");
        return;
    }
    index_.emplace(id, ids_.size());
    ids_.push_back(id);
    vectors_.push_back(std::move(v));
}

const Vector& EmbeddingStore::at(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw MissingEmbedding(id);
    return vectors_[it->second];
}

EmbeddingMatrix EmbeddingStore::to_matrix() const { return EmbeddingMatrix::from_rows(vectors_, dim_); }

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
    const EmbeddingFile file = read_embedding_file(path);
    EmbeddingStore store(file.matrix.cols());
    for (std::size_t i = 0; i < file.matrix.rows(); ++i) {
        const auto r = file.matrix.row(i);
        try {
            store.add(file.ids[i], Vector(r.begin(), r.end()));
        } catch (const InvalidArgument& e) {
            throw FormatError(path.string() + ": " + e.what());
        }
    }
    return store;
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
    write_embedding_file(path, to_matrix(), ids_);
}

Vector file_backed_encode(const EmbeddingStore& store, const std::string& id) { return store.at(id); }

FileBackedEncoder::FileBackedEncoder(std::shared_ptr<const EmbeddingStore> store) : store_(std::move(store)) {
    if (!store_) throw InvalidArgument("FileBackedEncoder: null store");
}

Vector FileBackedEncoder::encode(std::string_view text) const {
    return file_backed_encode(*store_, std::string(text));
}

// ---- word vectors -----------------------------------------------------------

WordVectorTable::WordVectorTable(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw InvalidArgument("WordVectorTable: dim must be at least 1");
}

void WordVectorTable::add(const std::string& word, Vector v) {
    if (v.size() != dim_) throw InvalidArgument("WordVectorTable: wrong dim for '" + word + "'");
    table_.insert_or_assign(word, std::move(v));
}

const Vector* WordVectorTable::find(const std::string& word) const {
    auto it = table_.find(word);
    return it == table_.end() ? nullptr : &it->second;
}

WordVectorTable WordVectorTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open word-vector table " + path.string());
    std::string line;
    std::size_t line_no = 0;
    std::optional<WordVectorTable> table;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream fields(line);
        std::string word;
        if (!(fields >> word)) continue;
        Vector v;
        std::string tok;
        while (fields >> tok) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
            }
        }
        if (v.empty()) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": word without vector");
        if (!table) table.emplace(v.size());
        if (v.size() != table->dim()) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(table->dim()) + " values, got " + std::to_string(v.size()));
        }
        table->add(word, std::move(v));
    }
    if (!table) throw FormatError(path.string() + ": empty word-vector table");
    return std::move(*table);
}

StopwordSet load_stopwords(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open stopword list " + path.string());
    StopwordSet words;
    std::string line;
    while (std::getline(in, line)) {
        for (auto& t : tokenize_alphabetic(line)) words.insert(std::move(t));
    }
    return words;
}

std::vector<std::string> tokenize_alphabetic(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (c >= 0x80) {
            current.push_back(ch);
        } else if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
            current.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

Vector averaging_encode(const WordVectorTable& table, const StopwordSet& stopwords, std::string_view text) {
    std::vector<Vector> kept;
    for (const auto& tok : tokenize_alphabetic(text)) {
        if (stopwords.contains(tok)) continue;
        if (const Vector* v = table.find(tok)) kept.push_back(*v);
    }
    if (kept.empty()) return Vector(table.dim(), 0.0);
    return mean_pool(kept);
}

AveragingEncoder::AveragingEncoder(std::shared_ptr<const WordVectorTable> table, StopwordSet stopwords)
    : table_(std::move(table)), stopwords_(std::move(stopwords)) {
    if (!table_ || table_->size() == 0) throw InvalidArgument("AveragingEncoder: empty word-vector table");
}

Vector AveragingEncoder::encode(std::string_view text) const { return averaging_encode(*table_, stopwords_, text); }

// ---- hashing encoder --------------------------------------------------------

std::uint64_t seeded_hash(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
    for (const char ch : bytes) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
}

Vector toy_hash_encode(std::size_t dim, std::uint64_t seed, std::string_view text) {
    if (dim == 0) throw InvalidArgument("toy_hash_encode: dim must be at least 1");
    Vector v(dim, 0.0);
    if (text.empty()) return v;
    std::string padded;
    padded.reserve(text.size() + 2);
    padded.push_back(' ');
    padded.append(text);
    padded.push_back(' ');
    const std::string_view view(padded);
    for (std::size_t i = 0; i + 3 <= view.size(); ++i) {
        const std::uint64_t h = seeded_hash(view.substr(i, 3), seed);
        // Low bit picks the sign, the remaining bits pick the bucket.
        v[(h >> 1) % dim] += (h & 1U) ? -1.0 : 1.0;
    }
    return normalized(v);
}

HashEncoder::HashEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim == 0) throw InvalidArgument("HashEncoder: dim must be at least 1");
}

CountingEncoder::CountingEncoder(std::shared_ptr<const Encoder> inner) : inner_(std::move(inner)) {
    if (!inner_) throw InvalidArgument("CountingEncoder: null encoder");
}

Vector CountingEncoder::encode(std::string_view text) const {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_->encode(text);
}

}  // namespace labeltune
