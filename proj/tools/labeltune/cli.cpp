#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "labeltune/distillation.hpp"
#include "labeltune/encoders.hpp"
#include "labeltune/errors.hpp"
#include "labeltune/evaluation.hpp"
#include "labeltune/io.hpp"
#include "labeltune/label_tuning.hpp"
#include "labeltune/metrics.hpp"
#include "labeltune/refinement.hpp"
#include "labeltune/similarity.hpp"
#include "labeltune/statistics.hpp"
#include "labeltune/synthetic.hpp"
#include "labeltune/zeroshot.hpp"

namespace labeltune::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Reported with exit code 3 after the config has been named.
class ConfigDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) return parts;
        start = pos + 1;
    }
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::logic_error&) {
        throw UsageError("bad " + what + " '" + s + "'");
    }
}

std::shared_ptr<const Encoder> make_encoder(const std::string& spec) {
    if (spec.rfind("store:", 0) == 0) {
        return std::make_shared<FileBackedEncoder>(std::make_shared<EmbeddingStore>(EmbeddingStore::load(spec.substr(6))));
    }
    const auto parts = split(spec, ':');
    if (parts[0] == "toy" && parts.size() == 3) {
        const auto dim = parse_u64(parts[1], "encoder dim");
        if (dim == 0) throw UsageError("toy encoder dim must be positive");
        return std::make_shared<HashEncoder>(dim, parse_u64(parts[2], "encoder seed"));
    }
    if (parts[0] == "wordvec" && (parts.size() == 2 || parts.size() == 3)) {
        auto table = std::make_shared<WordVectorTable>(WordVectorTable::load(parts[1]));
        StopwordSet stop = parts.size() == 3 ? load_stopwords(parts[2]) : StopwordSet{};
        return std::make_shared<AveragingEncoder>(std::move(table), std::move(stop));
    }
    throw UsageError("unknown encoder spec '" + spec + "' (expected toy:DIM:SEED, wordvec:TABLE[:STOPWORDS] or store:PATH)");
}

Similarity parse_similarity(const std::string& s) {
    if (s == "dot") return Similarity::Dot;
    if (s == "cosine") return Similarity::Cosine;
    throw UsageError("unknown similarity '" + s + "'");
}

// --timestamp, else SOURCE_DATE_EPOCH, else the epoch. Never the wall clock,
// so reruns stay byte-identical.
std::string creation_timestamp(const std::string& flag) {
    if (!flag.empty()) return flag;
    std::time_t secs = 0;
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env) {
        secs = static_cast<std::time_t>(parse_u64(env, "SOURCE_DATE_EPOCH"));
    }
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void emit(const json& doc, const std::string& path, std::ostream& out) {
    const std::string text = doc.dump(2) + "\n";
    if (path.empty()) {
        out << text;
        return;
    }
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot write " + path);
    f << text;
}

json config_json(const TuningConfig& c) {
    return json{{"learning_rate", c.learning_rate}, {"epochs", c.epochs},     {"reg_coefficient", c.reg_coefficient},
                {"dropout_rate", c.dropout_rate},   {"seed", c.seed},         {"spec", format_tuning_config(c)}};
}

TunedLabels with_provenance(const TunedLabels& t, const Provenance& extra) {
    Provenance p = t.provenance();
    for (const auto& [k, v] : extra) p[k] = v;
    return TunedLabels(t.y(), t.y0(), t.config_used(), std::move(p));
}

struct LabeledData {
    EmbeddingMatrix x;
    std::vector<std::size_t> z;
};

LabeledData load_labeled(const std::string& data_path, const std::string& emb_path, const LabelSet& labels) {
    const Dataset d = read_dataset(data_path);
    EmbeddingFile e = read_embedding_file(emb_path);
    if (e.matrix.rows() != d.texts.size()) {
        throw FormatError(emb_path + " has " + std::to_string(e.matrix.rows()) + " rows but " + data_path + " has " +
                          std::to_string(d.texts.size()) + " examples");
    }
    return {std::move(e.matrix), resolve_labels(d, labels)};
}

void require_every_label(std::span<const std::size_t> z, const LabelSet& labels) {
    std::vector<std::size_t> counts(labels.size(), 0);
    for (auto k : z) ++counts[k];
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) throw InvalidArgument("label '" + labels[k].name + "' has no training examples");
    }
}

// Where the initial label embeddings come from.
struct LabelSource {
    std::string init_dir;
    std::string label_emb;
    std::string encoder;
    std::string pattern;
    bool hypotheses = false;
};

void add_label_source(CLI::App* sub, LabelSource& s, bool with_init) {
    if (with_init) sub->add_option("--init", s.init_dir, "tuned labels directory; its Y is used");
    sub->add_option("--label-emb", s.label_emb, "EMB1 file with one row per label");
    sub->add_option("--encoder", s.encoder, "encode label texts: toy:DIM:SEED | wordvec:TABLE[:STOPWORDS] | store:PATH");
    sub->add_option("--pattern", s.pattern, "hypothesis pattern file (default: identity hypothesis)");
    sub->add_flag("--hypotheses", s.hypotheses, "use the hypothesis fields of the label set");
}

bool has_label_source(const LabelSource& s) {
    return !s.init_dir.empty() || !s.label_emb.empty() || !s.encoder.empty();
}

EmbeddingMatrix resolve_label_embeddings(const LabelSource& s, const LabelSet& labels,
                                         std::size_t* label_encode_calls = nullptr) {
    if (label_encode_calls) *label_encode_calls = 0;
    const int given = !s.init_dir.empty() + !s.label_emb.empty() + !s.encoder.empty();
    if (given != 1) throw UsageError("give exactly one of --init, --label-emb or --encoder for the label embeddings");
    if (s.encoder.empty() && (!s.pattern.empty() || s.hypotheses)) {
        throw UsageError("--pattern and --hypotheses need --encoder");
    }

    if (!s.init_dir.empty()) {
        TunedLabelsArtifact a = read_tuned_labels(s.init_dir);
        if (a.label_names != labels.names()) throw FormatError(s.init_dir + ": label names differ from the label set");
        return a.labels.y();
    }
    if (!s.label_emb.empty()) {
        EmbeddingFile f = read_embedding_file(s.label_emb);
        if (f.matrix.rows() != labels.size()) {
            throw FormatError(s.label_emb + " has " + std::to_string(f.matrix.rows()) + " rows for " +
                              std::to_string(labels.size()) + " labels");
        }
        // rows named by label are put in label order
        std::vector<std::size_t> order;
        for (const auto& name : labels.names()) {
            const auto it = std::find(f.ids.begin(), f.ids.end(), name);
            if (it == f.ids.end()) break;
            order.push_back(static_cast<std::size_t>(it - f.ids.begin()));
        }
        return order.size() == labels.size() ? select_rows(f.matrix, order) : f.matrix;
    }
    if (!s.pattern.empty() && s.hypotheses) throw UsageError("--pattern and --hypotheses are exclusive");
    std::optional<HypothesisPattern> pattern;
    if (!s.pattern.empty()) pattern = read_pattern(s.pattern);
    if (s.hypotheses) pattern = HypothesisPattern::from_label_hypotheses(labels);
    auto counting = std::make_shared<CountingEncoder>(make_encoder(s.encoder));
    ZeroShotModel model = build_zero_shot(counting, labels, pattern);
    if (label_encode_calls) *label_encode_calls = counting->calls();
    return model.label_embeddings();
}

void require_dims(const EmbeddingMatrix& x, const EmbeddingMatrix& y, const std::string& what) {
    if (x.cols() != y.cols()) {
        throw InvalidArgument("dimension mismatch: " + what + " has dim " + std::to_string(x.cols()) +
                              ", label embeddings have dim " + std::to_string(y.cols()));
    }
}

TunedLabels tune_or_name(const FewShotSet& set, const EmbeddingMatrix& y0, const TuningConfig& config) {
    try {
        return tune_labels(set, y0, config);
    } catch (const DivergenceError& e) {
        throw ConfigDiverged("config " + format_tuning_config(config) + " diverged: " + e.what());
    }
}

// Tuned weights are stored as float32; a run that leaves that range has diverged.
void require_storable(const TunedLabels& model) {
    for (double v : model.y().data()) {
        if (std::abs(v) > std::numeric_limits<float>::max()) {
            const std::string name = model.config_used() ? format_tuning_config(*model.config_used()) : "refinement";
            throw ConfigDiverged("config " + name + " diverged: label embeddings exceed the float32 range");
        }
    }
}

// ---- embed ---------------------------------------------------------------------

struct EmbedOptions {
    std::string input, encoder, out;
};

int cmd_embed(const EmbedOptions& o, std::ostream& out) {
    const auto texts = read_texts(o.input);
    const auto encoder = make_encoder(o.encoder);
    const EmbeddingMatrix m = encoder->encode_all(texts);
    write_embedding_file(o.out, m, texts);
    emit(json{{"count", m.rows()}, {"dim", m.cols()}, {"payload_bytes", m.rows() * m.cols() * 4}, {"out", o.out}}, "",
         out);
    return kExitOk;
}

// ---- zeroshot ------------------------------------------------------------------

struct ZeroShotOptions {
    std::string inputs, labels, similarity = "dot", out;
    LabelSource source;
};

int cmd_zeroshot(const ZeroShotOptions& o, std::ostream& out) {
    const LabelSet labels = read_label_set(o.labels);
    const EmbeddingFile in = read_embedding_file(o.inputs);
    std::size_t calls = 0;
    const EmbeddingMatrix y = resolve_label_embeddings(o.source, labels, &calls);
    require_dims(in.matrix, y, o.inputs);
    const Similarity sim = parse_similarity(o.similarity);

    json preds = json::array();
    const auto scored = score_embeddings(in.matrix, y, sim);
    for (std::size_t i = 0; i < scored.size(); ++i) {
        preds.push_back({{"id", in.ids[i]},
                         {"label", labels[scored[i].predicted].name},
                         {"predicted", scored[i].predicted},
                         {"scores", scored[i].scores},
                         {"probabilities", scored[i].probabilities}});
    }
    emit(json{{"labels", labels.names()},
              {"similarity", o.similarity},
              {"label_encode_calls", calls},
              {"predictions", std::move(preds)}},
         o.out, out);
    return kExitOk;
}

// ---- tune ----------------------------------------------------------------------

struct TuneOptions {
    std::string train_data, train_emb, labels, grid, config, out, timestamp;
    std::size_t folds = 4;
    std::uint64_t seed = 0;
    LabelSource source;
};

int cmd_tune(const TuneOptions& o, std::ostream& out, std::ostream& err) {
    const LabelSet labels = read_label_set(o.labels);
    LabeledData data = load_labeled(o.train_data, o.train_emb, labels);
    require_every_label(data.z, labels);
    const EmbeddingMatrix y0 = resolve_label_embeddings(o.source, labels);
    require_dims(data.x, y0, o.train_emb);
    const FewShotSet set(std::move(data.x), std::move(data.z), labels.size());

    json report;
    std::optional<TunedLabels> model;
    if (!o.config.empty()) {
        if (!o.grid.empty()) throw UsageError("--config and --grid are exclusive");
        TuningConfig defaults;
        defaults.seed = o.seed;
        const TuningConfig config = parse_tuning_config(o.config, defaults);
        model = with_provenance(tune_or_name(set, y0, config), {{"selection", "explicit"}});
        report["cv_runs"] = 0;
    } else {
        const auto grid = o.grid.empty() ? default_tuning_grid(o.seed) : read_tuning_grid(o.grid);
        const auto log = [&](const FoldResult& r) {
            char line[160];
            if (r.diverged) {
                std::snprintf(line, sizeof line, "cv config=%zu fold=%zu diverged (%s)", r.config_index, r.fold,
                              format_tuning_config(grid[r.config_index]).c_str());
            } else {
                std::snprintf(line, sizeof line, "cv config=%zu fold=%zu macro_f1=%.6f", r.config_index, r.fold,
                              r.macro_f1);
            }
            err << line << '\n';
        };
        CrossValidationResult cv = [&] {
            try {
                return cross_validate(set, y0, grid, o.folds, o.seed, log);
            } catch (const DivergenceError& e) {
                throw ConfigDiverged(std::string("every config diverged; last: ") + e.what());
            }
        }();
        for (auto k : cv.flagged_labels) {
            err << "warning: label '" << labels[k].name << "' has fewer examples than folds\n";
        }
        for (auto c : cv.diverged_configs) {
            err << "warning: config " << format_tuning_config(grid[c]) << " diverged and was excluded\n";
        }
        err << "cv runs=" << cv.runs << " best=" << format_tuning_config(cv.best) << '\n';
        json means = json::array();
        for (double m : cv.mean_f1) means.push_back(std::isfinite(m) ? json(m) : json(nullptr));
        report["cv_runs"] = cv.runs;
        report["cv_mean_f1"] = std::move(means);
        model = with_provenance(cv.model, {{"selection", std::to_string(o.folds) + "-fold cross-validation"},
                                           {"cv_runs", std::to_string(cv.runs)}});
    }

    require_storable(*model);
    write_tuned_labels(o.out, *model, labels.names(), creation_timestamp(o.timestamp));
    report["config"] = config_json(*model->config_used());
    report["values"] = model->y().rows() * model->y().cols();
    report["payload_bytes"] = model->y().rows() * model->y().cols() * 4;
    report["out"] = o.out;
    emit(report, "", out);
    return kExitOk;
}

// ---- distill -------------------------------------------------------------------

struct DistillOptions {
    std::string teacher, unlabeled, labels, student_init, config, grid, out, timestamp;
    bool select = false;
    std::size_t cap = kDefaultSilverCap;
    std::optional<std::uint64_t> sample_seed;
    std::uint64_t seed = 0;
    std::size_t folds = 4;
    LabelSource source;
};

int cmd_distill(const DistillOptions& o, std::ostream& out) {
    const LabelSet labels = read_label_set(o.labels);
    EmbeddingMatrix teacher_y, student_y0;
    std::string teacher_kind;
    if (!o.teacher.empty()) {
        if (has_label_source(o.source)) throw UsageError("--teacher and a zero-shot teacher are exclusive");
        TunedLabelsArtifact a = read_tuned_labels(o.teacher);
        if (a.label_names != labels.names()) {
            throw FormatError(o.teacher + ": teacher has labels that differ from " + o.labels);
        }
        teacher_y = a.labels.y();
        student_y0 = a.labels.y0();
        teacher_kind = "tuned:" + o.teacher;
    } else {
        teacher_y = resolve_label_embeddings(o.source, labels);
        student_y0 = teacher_y;
        teacher_kind = "zero-shot";
    }
    if (!o.student_init.empty()) {
        LabelSource init;
        init.label_emb = o.student_init;
        if (fs::is_directory(o.student_init)) std::swap(init.init_dir, init.label_emb);
        student_y0 = resolve_label_embeddings(init, labels);
    }

    const EmbeddingFile unlabeled = read_embedding_file(o.unlabeled);
    if (unlabeled.matrix.rows() == 0) throw EmptyInput(o.unlabeled + ": no unlabeled examples");
    require_dims(unlabeled.matrix, teacher_y, o.unlabeled);
    require_dims(unlabeled.matrix, student_y0, o.unlabeled);

    const SilverSet silver =
        build_silver_set(label_embedding_teacher(teacher_y), unlabeled.matrix, SilverOptions{o.cap, o.sample_seed});

    TuningConfig defaults;
    defaults.seed = o.seed;
    std::optional<TunedLabels> student;
    if (o.select || !o.grid.empty()) {
        if (!o.config.empty()) throw UsageError("--config excludes --select and --grid");
        const auto grid = o.grid.empty() ? default_tuning_grid(o.seed) : read_tuning_grid(o.grid);
        try {
            student = select_distillation_config(silver, student_y0, grid, o.folds, o.seed).model;
        } catch (const DivergenceError& e) {
            throw ConfigDiverged(std::string("every config diverged; last: ") + e.what());
        }
    } else {
        const TuningConfig config = o.config.empty() ? defaults : parse_tuning_config(o.config, defaults);
        try {
            student = distill_labels(silver, student_y0, config);
        } catch (const DivergenceError& e) {
            throw ConfigDiverged("config " + format_tuning_config(config) + " diverged: " + e.what());
        }
    }
    student = with_provenance(*student, {{"teacher", teacher_kind}});

    const double agree = agreement(predict_labels(silver.x(), student->y()), teacher_argmax(silver));
    require_storable(*student);
    write_tuned_labels(o.out, *student, labels.names(), creation_timestamp(o.timestamp));
    emit(json{{"silver_examples", silver.size()},
              {"agreement", agree},
              {"config", config_json(*student->config_used())},
              {"drift_from_init", frobenius_distance(student->y(), student->y0())},
              {"out", o.out}},
         "", out);
    return kExitOk;
}

// ---- refine --------------------------------------------------------------------

struct RefineOptions {
    std::string unlabeled, labels, eval_data, eval_emb, out, timestamp;
    double alpha = 0.5;
    std::size_t iters = 10;
    std::size_t cap = 10000;
    std::optional<std::uint64_t> sample_seed;
    LabelSource source;
};

int cmd_refine(const RefineOptions& o, std::ostream& out) {
    const LabelSet labels = read_label_set(o.labels);
    const EmbeddingMatrix y = resolve_label_embeddings(o.source, labels);
    const EmbeddingFile unlabeled = read_embedding_file(o.unlabeled);
    if (unlabeled.matrix.rows() > 0) require_dims(unlabeled.matrix, y, o.unlabeled);

    RefinementConfig config;
    config.anchor_weight = o.alpha;
    config.max_iters = o.iters;
    config.cap = o.cap;
    config.sample_seed = o.sample_seed;
    const RefinementResult result = refine_labels(y, unlabeled.matrix, config);

    json report{{"iterations", result.iterations},
                {"converged", result.converged},
                {"unlabeled_examples", std::min(unlabeled.matrix.rows(), o.cap)},
                {"drift", frobenius_distance(result.labels.y(), y)},
                {"out", o.out}};
    if (!o.eval_data.empty() || !o.eval_emb.empty()) {
        if (o.eval_data.empty() || o.eval_emb.empty()) throw UsageError("--eval-data and --eval-emb go together");
        const LabeledData eval = load_labeled(o.eval_data, o.eval_emb, labels);
        require_dims(eval.x, y, o.eval_emb);
        const double before = macro_f1(eval.z, predict_labels(eval.x, y), labels.size()).macro_f1;
        const double after = macro_f1(eval.z, predict_labels(eval.x, result.labels.y()), labels.size()).macro_f1;
        report["macro_f1_before"] = before;
        report["macro_f1_after"] = after;
        report["improvement"] = after - before;
    }
    write_tuned_labels(o.out, result.labels, labels.names(), creation_timestamp(o.timestamp));
    emit(report, "", out);
    return kExitOk;
}

// ---- evaluate ------------------------------------------------------------------

struct EvaluateOptions {
    std::string test_data, test_emb, labels, train_data, train_emb, out;
    std::vector<std::string> models;
    std::vector<std::string> preds;
    std::size_t n_per_label = 8;
    std::size_t runs = kDefaultRuns;
    std::size_t bootstrap = kDefaultBootstrapResamples;
    std::uint64_t seed = 0;
    std::size_t folds = 4;
    LabelSource source;
};

struct ModelResult {
    std::string spec;
    std::vector<double> scores;
    double mean = 0.0;
    double std_dev = 0.0;
    std::string std_method;
    std::optional<EvalReport> single;
};

json class_scores_json(const EvalReport& r, const LabelSet& labels) {
    json out = json::array();
    for (std::size_t k = 0; k < r.per_class.size(); ++k) {
        const auto& c = r.per_class[k];
        out.push_back({{"label", labels[k].name},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"f1", c.f1},
                       {"support", c.support}});
    }
    return out;
}

// One label name per line, or TSV rows whose last field is the label.
std::vector<std::size_t> read_predictions(const std::string& path, const LabelSet& labels) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    std::vector<std::size_t> pred;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto tab = line.rfind('\t');
        const std::string name = tab == std::string::npos ? line : line.substr(tab + 1);
        if (!labels.contains(name)) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": unknown label '" + name + "'");
        }
        pred.push_back(labels.index_of(name));
    }
    return pred;
}

struct ModelSpec {
    enum class Kind { ZeroShot, Tuned, Tune, TuneCv } kind = Kind::ZeroShot;
    std::string text;
    std::string dir;
    TuningConfig config;
    bool explicit_seed = false;
};

ModelSpec parse_model_spec(const std::string& s) {
    ModelSpec spec;
    spec.text = s;
    if (s == "zs") return spec;
    if (s.rfind("tuned:", 0) == 0) {
        spec.kind = ModelSpec::Kind::Tuned;
        spec.dir = s.substr(6);
        return spec;
    }
    if (s == "lt") {
        spec.kind = ModelSpec::Kind::Tune;
        return spec;
    }
    if (s == "lt-cv") {
        spec.kind = ModelSpec::Kind::TuneCv;
        return spec;
    }
    if (s.rfind("lt[", 0) == 0 && s.back() == ']') {
        const std::string inner = s.substr(3, s.size() - 4);
        spec.kind = ModelSpec::Kind::Tune;
        try {
            spec.config = parse_tuning_config(inner);
        } catch (const InvalidArgument& e) {
            throw UsageError("model spec '" + s + "': " + e.what());
        }
        spec.explicit_seed = inner.find("seed=") != std::string::npos;
        return spec;
    }
    throw UsageError("unknown model spec '" + s + "' (expected zs, lt, lt[CONFIG], lt-cv or tuned:DIR)");
}

json model_json(const ModelResult& r, const LabelSet& labels) {
    json j{{"spec", r.spec},
           {"scores", r.scores},
           {"macro_f1", r.mean},
           {"std", r.std_dev},
           {"std_method", r.std_method},
           {"cell", format_mean_std(100.0 * r.mean, 100.0 * r.std_dev)}};
    if (r.single) j["per_class"] = class_scores_json(*r.single, labels);
    return j;
}

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out, std::ostream& err) {
    if (o.models.empty() && o.preds.empty()) throw UsageError("give at least one --model or --pred");
    if (o.runs == 0) throw UsageError("--runs must be positive");
    const LabelSet labels = read_label_set(o.labels);
    const std::size_t num_labels = labels.size();
    const LabeledData test = load_labeled(o.test_data, o.test_emb, labels);

    std::vector<ModelSpec> specs;
    for (const auto& m : o.models) specs.push_back(parse_model_spec(m));

    std::optional<EmbeddingMatrix> y0;
    const auto initial_labels = [&]() -> const EmbeddingMatrix& {
        if (!y0) {
            y0 = resolve_label_embeddings(o.source, labels);
            require_dims(test.x, *y0, o.test_emb);
        }
        return *y0;
    };
    std::optional<LabeledData> train;
    const auto training_data = [&]() -> const LabeledData& {
        if (!train) {
            if (o.train_data.empty() || o.train_emb.empty()) {
                throw UsageError("tuning models with --n > 0 need --train-data and --train-emb");
            }
            train = load_labeled(o.train_data, o.train_emb, labels);
            require_dims(train->x, test.x, o.train_emb);
        }
        return *train;
    };

    const auto fixed = [&](const std::string& spec, const std::vector<std::size_t>& pred) {
        if (pred.size() != test.z.size()) {
            throw FormatError(spec + ": " + std::to_string(pred.size()) + " predictions for " +
                              std::to_string(test.z.size()) + " test examples");
        }
        ModelResult r;
        r.spec = spec;
        r.single = macro_f1(test.z, pred, num_labels);
        r.scores = {r.single->macro_f1};
        r.mean = r.single->macro_f1;
        r.std_dev = bootstrap_std(test.z, pred, num_labels, o.bootstrap, o.seed);
        r.std_method = "bootstrap";
        return r;
    };

    std::vector<ModelResult> results;
    for (const auto& spec : specs) {
        if (spec.kind == ModelSpec::Kind::Tuned) {
            TunedLabelsArtifact a = read_tuned_labels(spec.dir);
            if (a.label_names != labels.names()) throw FormatError(spec.dir + ": label names differ from the label set");
            require_dims(test.x, a.labels.y(), o.test_emb);
            results.push_back(fixed(spec.text, predict_labels(test.x, a.labels.y())));
        } else if (spec.kind == ModelSpec::Kind::ZeroShot || o.n_per_label == 0) {
            results.push_back(fixed(spec.text, predict_labels(test.x, initial_labels())));
        } else {
            const LabeledData& tr = training_data();
            const FewShotSet full(tr.x, tr.z, num_labels);
            ModelResult r;
            r.spec = spec.text;
            r.std_method = "runs";
            for (std::size_t s = 0; s < o.runs; ++s) {
                const Episode ep = sample_episode(tr.z, num_labels, o.n_per_label, s);
                for (auto k : ep.short_labels) {
                    err << "warning: episode " << s << ": label '" << labels[k].name << "' has fewer than "
                        << o.n_per_label << " examples\n";
                }
                const FewShotSet set = full.subset(ep.train_indices);
                std::optional<TunedLabels> tuned;
                if (spec.kind == ModelSpec::Kind::Tune) {
                    TuningConfig cfg = spec.config;
                    if (!spec.explicit_seed) cfg.seed = s;
                    tuned = tune_or_name(set, initial_labels(), cfg);
                } else {
                    try {
                        tuned = cross_validate(set, initial_labels(), default_tuning_grid(s), o.folds, s).model;
                    } catch (const DivergenceError& e) {
                        throw ConfigDiverged(std::string("every config diverged; last: ") + e.what());
                    }
                }
                r.scores.push_back(macro_f1(test.z, predict_labels(test.x, tuned->y()), num_labels).macro_f1);
            }
            r.mean = mean(r.scores);
            r.std_dev = sample_std(r.scores);
            results.push_back(std::move(r));
        }
    }
    for (const auto& p : o.preds) results.push_back(fixed("pred:" + p, read_predictions(p, labels)));

    json models = json::array();
    for (const auto& r : results) {
        err << r.spec << ": " << format_mean_std(100.0 * r.mean, 100.0 * r.std_dev) << '\n';
        models.push_back(model_json(r, labels));
    }
    json comparisons = json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
        for (std::size_t j = i + 1; j < results.size(); ++j) {
            json c{{"a", results[i].spec}, {"b", results[j].spec}};
            try {
                const SignificanceVerdict v = welch_t_test(results[i].scores, results[j].scores);
                c["defined"] = true;
                c["t"] = v.t_statistic;
                c["df"] = v.degrees_of_freedom;
                c["p"] = v.p_value;
                c["significant"] = v.significant;
            } catch (const UndefinedTest& e) {
                c["defined"] = false;
                c["significant"] = false;
                c["reason"] = e.what();
            }
            comparisons.push_back(std::move(c));
        }
    }
    emit(json{{"n_per_label", o.n_per_label},
              {"runs", o.runs},
              {"test_examples", test.z.size()},
              {"models", std::move(models)},
              {"comparisons", std::move(comparisons)}},
         o.out, out);
    return kExitOk;
}

// ---- bench ---------------------------------------------------------------------

struct BenchOptions {
    std::string encoder, inputs, out;
    std::vector<std::size_t> label_counts{2, 10, 100};
};

int cmd_bench(const BenchOptions& o, std::ostream& out) {
    const auto texts = read_texts(o.inputs);
    const auto inner = make_encoder(o.encoder);
    std::size_t tokens = 0;
    for (const auto& t : texts) tokens += tokenize_alphabetic(t).size();

    json results = json::array();
    for (std::size_t k : o.label_counts) {
        if (k == 0) throw UsageError("label counts must be positive");
        std::vector<std::string> names;
        for (std::size_t i = 0; i < k; ++i) names.push_back("label " + std::to_string(i));
        const LabelSet labels = LabelSet::from_names(names);
        auto counting = std::make_shared<CountingEncoder>(inner);

        const auto start = std::chrono::steady_clock::now();
        const ZeroShotModel model = build_zero_shot(counting, labels, std::nullopt);
        const std::size_t label_calls = counting->calls();
        const auto predictions = classify_batch(model, texts);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const std::size_t total = counting->calls();

        if (total != texts.size() + k || predictions.size() != texts.size()) {
            throw std::logic_error("encoder call count " + std::to_string(total) + " differs from N + K = " +
                                   std::to_string(texts.size() + k));
        }
        const double throughput = tokens > 0 && seconds > 0.0 ? static_cast<double>(tokens) / seconds : 0.0;
        results.push_back({{"labels", k},
                           {"label_encode_calls", label_calls},
                           {"input_encode_calls", total - label_calls},
                           {"total_calls", total},
                           {"seconds", seconds},
                           {"tokens_per_second", throughput}});
    }
    emit(json{{"inputs", texts.size()}, {"tokens", tokens}, {"results", std::move(results)}}, o.out, out);
    return kExitOk;
}

// ---- synth ---------------------------------------------------------------------

struct SynthOptions {
    std::size_t labels = 3;
    std::size_t dim = 8;
    std::size_t points = 100;
    double sigma = 0.0;
    double perturb_norm = 0.5;
    std::uint64_t seed = 0;
    std::uint64_t perturb_seed = 1;
    std::string out_dir, prefix = "data";
};

int cmd_synth(const SynthOptions& o, std::ostream& out) {
    ClusterSpec spec;
    spec.num_labels = o.labels;
    spec.dim = o.dim;
    spec.points_per_cluster = o.points;
    spec.noise_sigma = o.sigma;
    spec.seed = o.seed;
    const SyntheticTask task = make_separable_task(spec);

    std::vector<std::string> names;
    for (std::size_t k = 0; k < o.labels; ++k) names.push_back("label_" + std::to_string(k));
    Dataset d;
    for (std::size_t i = 0; i < task.z.size(); ++i) {
        d.texts.push_back(o.prefix + " " + std::to_string(i));
        d.label_names.push_back(names[task.z[i]]);
    }
    const fs::path dir(o.out_dir);
    fs::create_directories(dir);
    write_dataset(dir / (o.prefix + ".tsv"), d);
    write_embedding_file(dir / (o.prefix + ".emb"), task.x, d.texts);
    write_label_set(dir / "labels.json", LabelSet::from_names(names));
    write_embedding_file(dir / "true_labels.emb", task.true_label_embeddings, names);
    json files = {o.prefix + ".tsv", o.prefix + ".emb", "labels.json", "true_labels.emb"};
    if (o.perturb_norm > 0.0) {
        write_embedding_file(dir / "perturbed_labels.emb", perturb(task.true_label_embeddings, o.perturb_norm, o.perturb_seed),
                             names);
        files.push_back("perturbed_labels.emb");
    }
    emit(json{{"examples", task.z.size()}, {"labels", o.labels}, {"dim", o.dim}, {"files", files}}, "", out);
    return kExitOk;
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Few-shot and zero-shot text classification with label tuning", "labeltune"};
    app.require_subcommand(1);

    EmbedOptions embed_o;
    auto* embed = app.add_subcommand("embed", "encode texts into an EMB1 file");
    embed->add_option("--input", embed_o.input, "dataset TSV or one text per line")->required();
    embed->add_option("--encoder", embed_o.encoder, "toy:DIM:SEED | wordvec:TABLE[:STOPWORDS] | store:PATH")->required();
    embed->add_option("--out", embed_o.out, "output EMB1 path")->required();

    ZeroShotOptions zs_o;
    auto* zs = app.add_subcommand("zeroshot", "classify embedded inputs against label embeddings");
    zs->add_option("--inputs", zs_o.inputs, "EMB1 file of inputs")->required();
    zs->add_option("--labels", zs_o.labels, "label set JSON")->required();
    zs->add_option("--similarity", zs_o.similarity, "dot | cosine");
    zs->add_option("--out", zs_o.out, "predictions JSON (default stdout)");
    add_label_source(zs, zs_o.source, true);

    TuneOptions tune_o;
    auto* tune = app.add_subcommand("tune", "label tuning with cross-validated config selection");
    tune->add_option("--train-data", tune_o.train_data, "training dataset TSV")->required();
    tune->add_option("--train-emb", tune_o.train_emb, "EMB1 embeddings of the training texts")->required();
    tune->add_option("--labels", tune_o.labels, "label set JSON")->required();
    tune->add_option("--grid", tune_o.grid, "JSON grid of configs (default: 16-config grid)");
    tune->add_option("--config", tune_o.config, "skip cross-validation: lr=..,epochs=..,reg=..,dropout=..");
    tune->add_option("--folds", tune_o.folds, "cross-validation folds");
    tune->add_option("--seed", tune_o.seed, "seed for folds and dropout");
    tune->add_option("--out", tune_o.out, "output tuned labels directory")->required();
    tune->add_option("--timestamp", tune_o.timestamp, "creation timestamp written to meta.json");
    add_label_source(tune, tune_o.source, true);

    DistillOptions dist_o;
    auto* distill = app.add_subcommand("distill", "distill a teacher into student label embeddings");
    distill->add_option("--teacher", dist_o.teacher, "teacher tuned labels directory (else a zero-shot teacher)");
    distill->add_option("--unlabeled", dist_o.unlabeled, "EMB1 file of unlabeled inputs")->required();
    distill->add_option("--labels", dist_o.labels, "label set JSON")->required();
    distill->add_option("--student-init", dist_o.student_init, "student Y0: tuned labels dir or EMB1 file");
    distill->add_option("--config", dist_o.config, "training config");
    distill->add_flag("--select", dist_o.select, "select the config by cross-validated teacher agreement");
    distill->add_option("--grid", dist_o.grid, "JSON grid for --select");
    distill->add_option("--folds", dist_o.folds, "folds for --select");
    distill->add_option("--cap", dist_o.cap, "maximum silver set size");
    distill->add_option("--sample-seed", dist_o.sample_seed, "sample the silver set instead of taking the first rows");
    distill->add_option("--seed", dist_o.seed, "seed for dropout and folds");
    distill->add_option("--out", dist_o.out, "output tuned labels directory")->required();
    distill->add_option("--timestamp", dist_o.timestamp, "creation timestamp written to meta.json");
    add_label_source(distill, dist_o.source, false);

    RefineOptions ref_o;
    auto* refine = app.add_subcommand("refine", "anchored k-means refinement of label embeddings");
    refine->add_option("--unlabeled", ref_o.unlabeled, "EMB1 file of unlabeled inputs")->required();
    refine->add_option("--labels", ref_o.labels, "label set JSON")->required();
    refine->add_option("--alpha", ref_o.alpha, "anchor weight in [0, 1]");
    refine->add_option("--iters", ref_o.iters, "maximum iterations");
    refine->add_option("--cap", ref_o.cap, "maximum unlabeled pool size");
    refine->add_option("--sample-seed", ref_o.sample_seed, "sample the pool instead of taking the first rows");
    refine->add_option("--eval-data", ref_o.eval_data, "labeled TSV for before/after macro-F1");
    refine->add_option("--eval-emb", ref_o.eval_emb, "EMB1 embeddings of --eval-data");
    refine->add_option("--out", ref_o.out, "output tuned labels directory")->required();
    refine->add_option("--timestamp", ref_o.timestamp, "creation timestamp written to meta.json");
    add_label_source(refine, ref_o.source, true);

    EvaluateOptions eval_o;
    auto* evaluate = app.add_subcommand("evaluate", "few-shot evaluation over seeded episodes");
    evaluate->add_option("--test-data", eval_o.test_data, "test dataset TSV")->required();
    evaluate->add_option("--test-emb", eval_o.test_emb, "EMB1 embeddings of the test texts")->required();
    evaluate->add_option("--labels", eval_o.labels, "label set JSON")->required();
    evaluate->add_option("--train-data", eval_o.train_data, "training pool TSV for episodes");
    evaluate->add_option("--train-emb", eval_o.train_emb, "EMB1 embeddings of the training pool");
    evaluate->add_option("--model", eval_o.models, "zs | lt | lt[CONFIG] | lt-cv | tuned:DIR (repeatable)");
    evaluate->add_option("--pred", eval_o.preds, "file of predicted label names (repeatable)");
    evaluate->add_option("--n", eval_o.n_per_label, "training examples per label; 0 is zero-shot");
    evaluate->add_option("--runs", eval_o.runs, "episodes, seeded 0..runs-1");
    evaluate->add_option("--bootstrap", eval_o.bootstrap, "bootstrap resamples for single evaluations");
    evaluate->add_option("--seed", eval_o.seed, "bootstrap seed");
    evaluate->add_option("--folds", eval_o.folds, "folds for lt-cv");
    evaluate->add_option("--out", eval_o.out, "report JSON (default stdout)");
    add_label_source(evaluate, eval_o.source, true);

    BenchOptions bench_o;
    auto* bench = app.add_subcommand("bench", "encoder calls and throughput per label count");
    bench->add_option("--encoder", bench_o.encoder, "encoder spec")->required();
    bench->add_option("--inputs", bench_o.inputs, "one text per line")->required();
    bench->add_option("--label-counts", bench_o.label_counts, "comma-separated label counts")->delimiter(',');
    bench->add_option("--out", bench_o.out, "throughput JSON (default stdout)");

    SynthOptions syn_o;
    auto* synth = app.add_subcommand("synth", "write a separable synthetic task");
    synth->add_option("--labels", syn_o.labels, "number of labels K");
    synth->add_option("--dim", syn_o.dim, "embedding dim d (K <= d)");
    synth->add_option("--points", syn_o.points, "points per cluster");
    synth->add_option("--sigma", syn_o.sigma, "Gaussian noise sigma");
    synth->add_option("--seed", syn_o.seed, "noise seed");
    synth->add_option("--perturb", syn_o.perturb_norm, "Frobenius norm of the perturbed labels file; 0 skips it");
    synth->add_option("--perturb-seed", syn_o.perturb_seed, "perturbation seed");
    synth->add_option("--prefix", syn_o.prefix, "file name prefix for the dataset");
    synth->add_option("--out-dir", syn_o.out_dir, "output directory")->required();

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*embed) return cmd_embed(embed_o, out);
        if (*zs) return cmd_zeroshot(zs_o, out);
        if (*tune) return cmd_tune(tune_o, out, err);
        if (*distill) return cmd_distill(dist_o, out);
        if (*refine) return cmd_refine(ref_o, out);
        if (*evaluate) return cmd_evaluate(eval_o, out, err);
        if (*bench) return cmd_bench(bench_o, out);
        if (*synth) return cmd_synth(syn_o, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigDiverged& e) {
        err << "error: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace labeltune::cli
