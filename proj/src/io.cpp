#include "labeltune/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace labeltune {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<unsigned char>((v >> shift) & 0xFFU));
}

std::uint32_t get_u32(const std::vector<unsigned char>& in, std::size_t offset) {
    std::uint32_t v = 0;
    for (int b = 3; b >= 0; --b) v = (v << 8) | in[offset + static_cast<std::size_t>(b)];
    return v;
}

std::vector<unsigned char> read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

std::ofstream open_for_write(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    return out;
}

bool is_blank(const std::string& s) { return s.find_first_not_of(" \t") == std::string::npos; }

const char* regularizer_name(Regularizer r) {
    return r == Regularizer::Frobenius ? "frobenius" : "half_squared_frobenius";
}

Regularizer parse_regularizer(const std::string& s) {
    if (s == "frobenius") return Regularizer::Frobenius;
    if (s == "half_squared_frobenius" || s == "squared") return Regularizer::HalfSquaredFrobenius;
    throw InvalidArgument("unknown regularizer '" + s + "'");
}

json config_to_json(const TuningConfig& c) {
    return json{{"learning_rate", c.learning_rate},
                {"epochs", c.epochs},
                {"reg_coefficient", c.reg_coefficient},
                {"dropout_rate", c.dropout_rate},
                {"seed", c.seed},
                {"regularizer", regularizer_name(c.regularizer)}};
}

TuningConfig config_from_json(const json& j) {
    TuningConfig c;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.reg_coefficient = j.at("reg_coefficient").get<double>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("regularizer")) c.regularizer = parse_regularizer(j.at("regularizer").get<std::string>());
    c.validate();
    return c;
}

}  // namespace

// ---- EMB1 ----------------------------------------------------------------------------

fs::path sidecar_path(const fs::path& path) { return fs::path(path.string() + ".ids"); }

std::vector<unsigned char> encode_embedding_bytes(const EmbeddingMatrix& matrix) {
    if (matrix.rows() > std::numeric_limits<std::uint32_t>::max() ||
        matrix.cols() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidArgument("embedding matrix too large for EMB1");
    }
    std::vector<unsigned char> out;
    out.reserve(kEmbeddingHeaderBytes + matrix.data().size() * 4);
    out.insert(out.end(), std::begin(kEmbeddingMagic), std::end(kEmbeddingMagic));
    put_u32(out, kEmbeddingVersion);
    put_u32(out, static_cast<std::uint32_t>(matrix.rows()));
    put_u32(out, static_cast<std::uint32_t>(matrix.cols()));
    for (double v : matrix.data()) {
        if (std::abs(v) > static_cast<double>(std::numeric_limits<float>::max())) {
            throw InvalidArgument("value " + std::to_string(v) + " does not fit in a 32-bit float");
        }
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    return out;
}

EmbeddingMatrix decode_embedding_bytes(const std::vector<unsigned char>& bytes, const std::string& source) {
    if (bytes.size() < kEmbeddingHeaderBytes) throw FormatError(source + ": truncated EMB1 header");
    if (!std::equal(std::begin(kEmbeddingMagic), std::end(kEmbeddingMagic), bytes.begin(),
                    [](char a, unsigned char b) { return static_cast<unsigned char>(a) == b; })) {
        throw FormatError(source + ": bad magic (not an EMB1 file)");
    }
    const std::uint32_t version = get_u32(bytes, 4);
    if (version != kEmbeddingVersion) throw FormatError(source + ": unsupported EMB1 version " + std::to_string(version));
    const std::uint64_t count = get_u32(bytes, 8);
    const std::uint64_t dim = get_u32(bytes, 12);
    if (dim == 0) throw FormatError(source + ": dim must be at least 1");
    const std::uint64_t expected = count * dim * 4;
    if (bytes.size() - kEmbeddingHeaderBytes != expected) {
        throw FormatError(source + ": payload is " + std::to_string(bytes.size() - kEmbeddingHeaderBytes) +
                          " bytes, header implies " + std::to_string(expected));
    }
    std::vector<double> data(count * dim);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const float f = std::bit_cast<float>(get_u32(bytes, kEmbeddingHeaderBytes + 4 * i));
        if (!std::isfinite(f)) throw FormatError(source + ": non-finite value at index " + std::to_string(i));
        data[i] = static_cast<double>(f);
    }
    return EmbeddingMatrix(count, dim, std::move(data));
}

void write_embedding_file(const fs::path& path, const EmbeddingMatrix& matrix, const std::vector<std::string>& ids) {
    if (!ids.empty() && ids.size() != matrix.rows()) {
        throw InvalidArgument("write_embedding_file: " + std::to_string(ids.size()) + " ids for " +
                              std::to_string(matrix.rows()) + " rows");
    }
    const auto bytes = encode_embedding_bytes(matrix);
    {
        auto out = open_for_write(path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw FormatError("write failed: " + path.string());
    }
    auto side = open_for_write(sidecar_path(path), std::ios::binary);
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        const std::string id = ids.empty() ? std::to_string(i) : ids[i];
        if (id.find('\n') != std::string::npos) throw InvalidArgument("embedding id contains a newline");
        side << id << '\n';
    }
    if (!side) throw FormatError("write failed: " + sidecar_path(path).string());
}

EmbeddingFileHeader read_embedding_header(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<unsigned char> head(kEmbeddingHeaderBytes);
    in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
    if (in.gcount() != static_cast<std::streamsize>(kEmbeddingHeaderBytes)) {
        throw FormatError(path.string() + ": truncated EMB1 header");
    }
    if (!std::equal(std::begin(kEmbeddingMagic), std::end(kEmbeddingMagic), head.begin(),
                    [](char a, unsigned char b) { return static_cast<unsigned char>(a) == b; })) {
        throw FormatError(path.string() + ": bad magic (not an EMB1 file)");
    }
    return {get_u32(head, 4), get_u32(head, 8), get_u32(head, 12)};
}

EmbeddingFile read_embedding_file(const fs::path& path) {
    EmbeddingMatrix matrix = decode_embedding_bytes(read_all(path), path.string());
    const fs::path side = sidecar_path(path);
    std::vector<std::string> ids;
    if (fs::exists(side)) {
        ids = read_lines(side);
        if (ids.size() != matrix.rows()) {
            throw FormatError(side.string() + ": " + std::to_string(ids.size()) + " ids for " +
                              std::to_string(matrix.rows()) + " rows");
        }
    } else {
        throw FormatError("missing sidecar id file " + side.string());
    }
    return {std::move(matrix), std::move(ids)};
}

// ---- datasets --------------------------------------------------------------------------

Dataset read_dataset(const fs::path& path) {
    Dataset d;
    std::size_t line_no = 0;
    for (const auto& line : read_lines(path)) {
        ++line_no;
        if (is_blank(line)) continue;
        const auto tab = line.rfind('\t');
        if (tab == std::string::npos) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected text<TAB>label");
        }
        d.texts.push_back(line.substr(0, tab));
        d.label_names.push_back(line.substr(tab + 1));
    }
    return d;
}

void write_dataset(const fs::path& path, const Dataset& dataset) {
    if (dataset.texts.size() != dataset.label_names.size()) throw InvalidArgument("write_dataset: ragged dataset");
    auto out = open_for_write(path, std::ios::binary);
    for (std::size_t i = 0; i < dataset.texts.size(); ++i) {
        const auto& t = dataset.texts[i];
        if (t.find_first_of("\t\n") != std::string::npos) throw InvalidArgument("dataset text contains a tab or newline");
        out << t << '\t' << dataset.label_names[i] << '\n';
    }
}

std::vector<std::size_t> resolve_labels(const Dataset& dataset, const LabelSet& labels) {
    std::vector<std::size_t> z;
    z.reserve(dataset.label_names.size());
    for (std::size_t i = 0; i < dataset.label_names.size(); ++i) {
        const auto& name = dataset.label_names[i];
        if (!labels.contains(name)) {
            throw FormatError("example " + std::to_string(i) + " has label '" + name + "' which is not in the label set");
        }
        z.push_back(labels.index_of(name));
    }
    return z;
}

std::vector<std::string> read_texts(const fs::path& path) {
    std::vector<std::string> texts;
    for (auto& line : read_lines(path)) {
        if (is_blank(line)) continue;
        const auto tab = line.rfind('\t');
        texts.push_back(tab == std::string::npos ? std::move(line) : line.substr(0, tab));
    }
    return texts;
}

// ---- label sets and patterns ---------------------------------------------------------

LabelSet read_label_set(const fs::path& path) {
    json doc;
    try {
        std::ifstream in(path);
        if (!in) throw FormatError("cannot open label set " + path.string());
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    const json& list = doc.is_object() ? doc.at("labels") : doc;
    if (!list.is_array()) throw FormatError(path.string() + ": expected a list of labels");
    std::vector<Label> labels;
    try {
        for (std::size_t i = 0; i < list.size(); ++i) {
            const json& entry = list[i];
            if (entry.is_string()) {
                labels.push_back({i, entry.get<std::string>(), std::nullopt});
            } else {
                Label l{i, entry.at("name").get<std::string>(), std::nullopt};
                if (entry.contains("hypothesis")) l.hypothesis = entry.at("hypothesis").get<std::string>();
                labels.push_back(std::move(l));
            }
        }
        return LabelSet(std::move(labels));
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const InvalidArgument& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_label_set(const fs::path& path, const LabelSet& labels) {
    json list = json::array();
    for (const auto& l : labels.labels()) {
        json entry{{"name", l.name}};
        if (l.hypothesis) entry["hypothesis"] = *l.hypothesis;
        list.push_back(std::move(entry));
    }
    auto out = open_for_write(path);
    out << json{{"labels", list}}.dump(2) << '\n';
}

HypothesisPattern parse_pattern(const std::string& text) {
    HypothesisPattern p;
    bool have_template = false;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (is_blank(line) || line.front() == '#') continue;
        if (const auto tab = line.find('\t'); tab != std::string::npos) {
            p.overrides.insert_or_assign(line.substr(0, tab), line.substr(tab + 1));
        } else if (!have_template) {
            p.template_text = line;
            have_template = true;
        } else {
            throw InvalidPattern("pattern has more than one template line");
        }
    }
    return p;
}

HypothesisPattern read_pattern(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open pattern file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_pattern(buf.str());
}

// ---- tuning configs ----------------------------------------------------------------

TuningConfig parse_tuning_config(const std::string& text, const TuningConfig& defaults) {
    TuningConfig c = defaults;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (is_blank(item)) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw InvalidArgument("config entry '" + item + "' is not key=value");
        const std::string key = item.substr(0, eq);
        const std::string value = item.substr(eq + 1);
        try {
            if (key == "lr" || key == "learning_rate") {
                c.learning_rate = std::stod(value);
            } else if (key == "epochs") {
                c.epochs = std::stoull(value);
            } else if (key == "reg" || key == "reg_coefficient") {
                c.reg_coefficient = std::stod(value);
            } else if (key == "dropout" || key == "dropout_rate") {
                c.dropout_rate = std::stod(value);
            } else if (key == "seed") {
                c.seed = std::stoull(value);
            } else if (key == "regularizer") {
                c.regularizer = parse_regularizer(value);
            } else {
                throw InvalidArgument("unknown config key '" + key + "'");
            }
        } catch (const std::logic_error& e) {
            if (dynamic_cast<const InvalidArgument*>(&e)) throw;
            throw InvalidArgument("bad value for config key '" + key + "': " + value);
        }
    }
    c.validate();
    return c;
}

std::string format_tuning_config(const TuningConfig& c) {
    // shortest text that parses back to the same double
    const auto real = [](double v) {
        char buf[32];
        const auto r = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, r.ptr);
    };
    std::ostringstream out;
    out << "lr=" << real(c.learning_rate) << ",epochs=" << c.epochs << ",reg=" << real(c.reg_coefficient)
        << ",dropout=" << real(c.dropout_rate) << ",seed=" << c.seed;
    if (c.regularizer != Regularizer::HalfSquaredFrobenius) out << ",regularizer=" << regularizer_name(c.regularizer);
    return out.str();
}

std::vector<TuningConfig> read_tuning_grid(const fs::path& path) {
    try {
        std::ifstream in(path);
        if (!in) throw FormatError("cannot open grid file " + path.string());
        const json doc = json::parse(in);
        if (!doc.is_array()) throw FormatError(path.string() + ": expected a JSON array of configs");
        std::vector<TuningConfig> grid;
        for (const auto& entry : doc) grid.push_back(config_from_json(entry));
        return grid;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

// ---- tuned label artifacts ---------------------------------------------------------

void write_tuned_labels(const fs::path& dir, const TunedLabels& labels, const std::vector<std::string>& label_names,
                        const std::string& created) {
    if (label_names.size() != labels.y().rows()) {
        throw InvalidArgument("write_tuned_labels: " + std::to_string(label_names.size()) + " names for " +
                              std::to_string(labels.y().rows()) + " label rows");
    }
    fs::create_directories(dir);
    write_embedding_file(dir / "Y.emb", labels.y(), label_names);
    write_embedding_file(dir / "Y0.emb", labels.y0(), label_names);

    json meta{{"format", "labeltune-tuned-labels"},
              {"version", 1},
              {"labels", label_names},
              {"num_labels", labels.y().rows()},
              {"dim", labels.y().cols()},
              {"config_used", labels.config_used() ? config_to_json(*labels.config_used()) : json(nullptr)},
              {"provenance", labels.provenance()},
              {"created", created}};
    auto out = open_for_write(dir / "meta.json");
    out << meta.dump(2) << '\n';
}

TunedLabelsArtifact read_tuned_labels(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw FormatError("tuned labels directory not found: " + dir.string());
    EmbeddingFile y = read_embedding_file(dir / "Y.emb");
    EmbeddingFile y0 = read_embedding_file(dir / "Y0.emb");
    if (y.matrix.rows() != y0.matrix.rows() || y.matrix.cols() != y0.matrix.cols()) {
        throw FormatError(dir.string() + ": Y and Y0 shapes differ");
    }
    try {
        std::ifstream in(dir / "meta.json");
        if (!in) throw FormatError("cannot open " + (dir / "meta.json").string());
        const json meta = json::parse(in);
        auto names = meta.at("labels").get<std::vector<std::string>>();
        if (names.size() != y.matrix.rows()) throw FormatError(dir.string() + ": label count does not match Y rows");
        std::optional<TuningConfig> config;
        if (!meta.at("config_used").is_null()) config = config_from_json(meta.at("config_used"));
        auto provenance = meta.value("provenance", json::object()).get<Provenance>();
        return {TunedLabels(std::move(y.matrix), std::move(y0.matrix), config, std::move(provenance)), std::move(names),
                meta.value("created", std::string{})};
    } catch (const json::exception& e) {
        throw FormatError(dir.string() + "/meta.json: " + e.what());
    }
}

}  // namespace labeltune
