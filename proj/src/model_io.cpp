#include "accsev/model_io.hpp"

#include <fstream>
#include <sstream>

#include "accsev/textio.hpp"

namespace accsev {

namespace {

using textio::format_double;
using textio::TokenReader;

// Free text is written to the end of its line; newlines and backslashes are escaped.
std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '\\') out += "\\\\";
        else if (c == '\n') out += "\\n";
        else if (c == '\r') out += "\\r";
        else out += c;
    }
    return out;
}

std::string unescape(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\' || i + 1 == s.size()) {
            out += s[i];
            continue;
        }
        const char c = s[++i];
        out += c == 'n' ? '\n' : c == 'r' ? '\r' : c;
    }
    return out;
}

std::string criterion_name(Criterion c) { return c == Criterion::gini ? "gini" : "entropy"; }

Criterion parse_criterion(const std::string& s) {
    if (s == "gini") return Criterion::gini;
    if (s == "entropy") return Criterion::entropy;
    throw Error("model file: unknown criterion '" + s + "'");
}

void write_params(std::ostream& out, const TreeParams& p) {
    out << p.max_depth << ' ' << p.min_samples_split << ' ' << p.min_leaf << ' ' << criterion_name(p.criterion);
}

TreeParams read_params(TokenReader& tok) {
    TreeParams p;
    p.max_depth = static_cast<int>(tok.integer());
    p.min_samples_split = tok.count();
    p.min_leaf = tok.count();
    p.criterion = parse_criterion(tok.word());
    return p;
}

void write_sgd(std::ostream& out, const SgdConfig& c) {
    out << format_double(c.learning_rate) << ' ' << c.epochs << ' ' << c.batch_size << ' ' << c.seed << ' '
        << format_double(c.l2);
}

std::uint64_t read_u64(TokenReader& tok) {
    const std::string w = tok.word();
    std::uint64_t v = 0;
    std::istringstream in(w);
    if (!(in >> v) || !in.eof()) throw Error("model file: expected a seed, found '" + w + "'");
    return v;
}

SgdConfig read_sgd(TokenReader& tok) {
    SgdConfig c;
    c.learning_rate = tok.real();
    c.epochs = tok.count();
    c.batch_size = tok.count();
    c.seed = read_u64(tok);
    c.l2 = tok.real();
    return c;
}

void check_shape(const DecisionTree& t, std::size_t n_features) {
    if (t.n_features() != n_features) throw Error("model file: member tree has the wrong feature count");
}

void write_forest(std::ostream& out, const Forest& f) {
    const auto& c = f.config;
    out << "forest " << (f.variant == ForestVariant::bootstrap_rf ? "random" : "extra") << " features " << f.n_features
        << " classes " << f.n_classes << " trees " << f.trees.size() << '\n';
    out << "config " << c.n_trees << ' ' << c.max_features << ' ' << c.seed << ' ' << (c.bootstrap ? 1 : 0) << ' ';
    write_params(out, c.tree);
    out << '\n';
    for (const auto& t : f.trees) t.write(out);
}

Forest read_forest(std::istream& in, TokenReader& tok) {
    Forest f;
    const std::string variant = tok.word();
    if (variant == "random") f.variant = ForestVariant::bootstrap_rf;
    else if (variant == "extra") f.variant = ForestVariant::full_sample_extra;
    else throw Error("model file: unknown forest variant '" + variant + "'");
    tok.expect("features");
    f.n_features = tok.count();
    tok.expect("classes");
    f.n_classes = tok.count();
    tok.expect("trees");
    const std::size_t n = tok.count();
    tok.expect("config");
    f.config.n_trees = tok.count();
    f.config.max_features = tok.count();
    f.config.seed = read_u64(tok);
    f.config.bootstrap = tok.integer() != 0;
    f.config.tree = read_params(tok);
    for (std::size_t t = 0; t < n; ++t) {
        f.trees.push_back(DecisionTree::read(in));
        check_shape(f.trees.back(), f.n_features);
    }
    return f;
}

void write_adaboost(std::ostream& out, const AdaBoostModel& m) {
    out << "adaboost features " << m.n_features << " classes " << m.n_classes << " stages " << m.stages.size()
        << " fallback " << m.fallback_class << '\n';
    out << "config " << m.config.rounds << ' ' << m.config.seed << '\n';
    for (const auto& s : m.stages) {
        out << "stage " << format_double(s.alpha) << ' ' << format_double(s.error) << '\n';
        s.stump.write(out);
    }
}

AdaBoostModel read_adaboost(std::istream& in, TokenReader& tok) {
    AdaBoostModel m;
    tok.expect("features");
    m.n_features = tok.count();
    tok.expect("classes");
    m.n_classes = tok.count();
    tok.expect("stages");
    const std::size_t n = tok.count();
    tok.expect("fallback");
    m.fallback_class = static_cast<int>(tok.integer());
    tok.expect("config");
    m.config.rounds = tok.count();
    m.config.seed = read_u64(tok);
    for (std::size_t s = 0; s < n; ++s) {
        tok.expect("stage");
        AdaBoostStage stage;
        stage.alpha = tok.real();
        stage.error = tok.real();
        stage.stump = DecisionTree::read(in);
        check_shape(stage.stump, m.n_features);
        m.stages.push_back(std::move(stage));
    }
    return m;
}

void write_gbm(std::ostream& out, const GbmModel& m) {
    const auto& c = m.config;
    out << "gbm features " << m.n_features << " classes " << m.n_classes << " rounds " << m.rounds.size() << '\n';
    out << "config " << c.rounds << ' ' << format_double(c.shrinkage) << ' ' << c.seed << ' ';
    write_params(out, c.tree);
    out << '\n';
    out << "initial";
    for (double v : m.initial_scores) out << ' ' << format_double(v);
    out << "\nloss " << m.training_loss.size();
    for (double v : m.training_loss) out << ' ' << format_double(v);
    out << '\n';
    for (const auto& round : m.rounds)
        for (const auto& t : round) t.write(out);
}

GbmModel read_gbm(std::istream& in, TokenReader& tok) {
    GbmModel m;
    tok.expect("features");
    m.n_features = tok.count();
    tok.expect("classes");
    m.n_classes = tok.count();
    tok.expect("rounds");
    const std::size_t n = tok.count();
    tok.expect("config");
    m.config.rounds = tok.count();
    m.config.shrinkage = tok.real();
    m.config.seed = read_u64(tok);
    m.config.tree = read_params(tok);
    tok.expect("initial");
    m.initial_scores.resize(m.n_classes);
    for (auto& v : m.initial_scores) v = tok.real();
    tok.expect("loss");
    m.training_loss.resize(tok.count());
    for (auto& v : m.training_loss) v = tok.real();
    m.rounds.resize(n);
    for (auto& round : m.rounds)
        for (std::size_t k = 0; k < m.n_classes; ++k) {
            round.push_back(DecisionTree::read(in));
            check_shape(round.back(), m.n_features);
        }
    return m;
}

void write_voting(std::ostream& out, const VotingPair& v) {
    out << "voting\nconfig ";
    write_sgd(out, v.lr_config);
    out << ' ';
    write_sgd(out, v.sgd_config);
    out << '\n';
    v.lr.write(out);
    v.sgd.write(out);
}

VotingPair read_voting(std::istream& in, TokenReader& tok) {
    VotingPair v;
    tok.expect("config");
    v.lr_config = read_sgd(tok);
    v.sgd_config = read_sgd(tok);
    v.lr = LinearModel::read(in);
    v.sgd = LinearModel::read(in);
    if (v.lr.loss() != LossKind::log || v.sgd.loss() != LossKind::hinge)
        throw Error("model file: voting members must be a log-loss and a hinge-loss model");
    if (v.lr.n_features() != v.sgd.n_features() || v.lr.n_classes() != v.sgd.n_classes())
        throw Error("model file: voting members disagree in shape");
    return v;
}

}  // namespace

void write_model(std::ostream& out, const EnsembleModel& model) {
    out << "model " << model_key(model.kind) << '\n';
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Forest>) write_forest(out, m);
            else if constexpr (std::is_same_v<T, AdaBoostModel>) write_adaboost(out, m);
            else if constexpr (std::is_same_v<T, GbmModel>) write_gbm(out, m);
            else write_voting(out, m);
        },
        model.model);
    out << "end model\n";
}

EnsembleModel read_model(std::istream& in) {
    TokenReader tok(in);
    tok.expect("model");
    EnsembleModel model;
    model.kind = parse_model_kind(tok.word());
    const std::string tag = tok.word();
    switch (model.kind) {
    case ModelKind::random_forest:
    case ModelKind::extra_trees: {
        if (tag != "forest") throw Error("model file: expected 'forest', found '" + tag + "'");
        Forest f = read_forest(in, tok);
        const auto want = model.kind == ModelKind::random_forest ? ForestVariant::bootstrap_rf
                                                                 : ForestVariant::full_sample_extra;
        if (f.variant != want) throw Error("model file: forest variant does not match the model kind");
        model.model = std::move(f);
        break;
    }
    case ModelKind::adaboost:
        if (tag != "adaboost") throw Error("model file: expected 'adaboost', found '" + tag + "'");
        model.model = read_adaboost(in, tok);
        break;
    case ModelKind::gbm:
        if (tag != "gbm") throw Error("model file: expected 'gbm', found '" + tag + "'");
        model.model = read_gbm(in, tok);
        break;
    case ModelKind::voting:
        if (tag != "voting") throw Error("model file: expected 'voting', found '" + tag + "'");
        model.model = read_voting(in, tok);
        break;
    }
    tok.expect("end");
    tok.expect("model");
    return model;
}

void write_bundle(std::ostream& out, const ModelBundle& bundle) {
    out << kModelFileMagic << '\n';
    const auto& cols = bundle.schema.columns();
    out << "schema " << cols.size() << '\n';
    for (const auto& c : cols)
        out << "column " << to_string(c.kind) << ' ' << to_string(c.role) << ' ' << escape(c.name) << '\n';
    const auto& enc = bundle.encoding;
    out << "encoding " << enc.columns.size() << " classes " << enc.class_values.size();
    for (int v : enc.class_values) out << ' ' << v;
    out << '\n';
    for (const auto& c : enc.columns) {
        out << "feature " << to_string(c.kind) << ' ' << c.part << ' ' << c.levels.size() << ' ' << escape(c.name)
            << '\n';
        out << "source " << escape(c.source) << '\n';
        for (const auto& l : c.levels) out << "level " << escape(l) << '\n';
    }
    write_model(out, bundle.model);
}

ModelBundle read_bundle(std::istream& in) {
    std::string magic;
    std::getline(in, magic);
    if (!magic.empty() && magic.back() == '\r') magic.pop_back();
    if (magic != kModelFileMagic) {
        if (magic.rfind("accsev-model ", 0) == 0)
            throw Error("model file: unsupported version '" + magic.substr(13) + "'");
        throw Error("model file: not a model file (missing '" + std::string(kModelFileMagic) + "' header)");
    }
    TokenReader tok(in);
    ModelBundle b;
    tok.expect("schema");
    const std::size_t n_cols = tok.count();
    std::vector<ColumnSpec> cols;
    for (std::size_t i = 0; i < n_cols; ++i) {
        tok.expect("column");
        ColumnSpec c;
        c.kind = parse_column_kind(tok.word());
        c.role = parse_column_role(tok.word());
        c.name = unescape(tok.line());
        cols.push_back(std::move(c));
    }
    b.schema = FeatureSchema(std::move(cols));
    tok.expect("encoding");
    const std::size_t n_enc = tok.count();
    tok.expect("classes");
    b.encoding.class_values.resize(tok.count());
    for (auto& v : b.encoding.class_values) v = static_cast<int>(tok.integer());
    for (std::size_t i = 0; i < n_enc; ++i) {
        tok.expect("feature");
        EncodedColumn c;
        c.kind = parse_column_kind(tok.word());
        c.part = static_cast<int>(tok.integer());
        const std::size_t n_levels = tok.count();
        c.name = unescape(tok.line());
        tok.expect("source");
        c.source = unescape(tok.line());
        for (std::size_t l = 0; l < n_levels; ++l) {
            tok.expect("level");
            c.levels.push_back(unescape(tok.line()));
        }
        b.encoding.columns.push_back(std::move(c));
    }
    b.model = read_model(in);
    if (b.model.n_features() != b.encoding.columns.size())
        throw Error("model file: model expects " + std::to_string(b.model.n_features()) + " features but the encoding has " +
                    std::to_string(b.encoding.columns.size()));
    if (b.model.n_classes() != b.encoding.class_values.size())
        throw Error("model file: model and encoding disagree on the class count");
    return b;
}

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write model file '" + path.string() + "'");
    write_bundle(out, bundle);
    if (!out) throw Error("failed writing model file '" + path.string() + "'");
}

ModelBundle load_bundle(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open model file '" + path.string() + "'");
    return read_bundle(in);
}

std::vector<int> predict_values(const ModelBundle& bundle, const Dataset& d, unsigned threads) {
    const FeatureMatrix m = apply_encoding(d, bundle.encoding);
    const auto idx = predict_batch(bundle.model, m, threads);
    std::vector<int> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(bundle.encoding.class_values.at(static_cast<std::size_t>(i)));
    return out;
}

}  // namespace accsev
