#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "accsev/experiment.hpp"

namespace py = pybind11;
using namespace accsev;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<long long, py::array::c_style | py::array::forcecast>;

// A fitted model plus the class values its indices stand for.
struct PyModel {
    EnsembleModel model;
    std::vector<int> class_values;
    std::vector<std::string> feature_names;
};

FeatureMatrix matrix_from_arrays(const DoubleArray& x, const IntArray& y, std::optional<std::vector<int>> classes,
                                 std::optional<std::vector<std::string>> names) {
    if (x.ndim() != 2) throw Error("x must be two-dimensional");
    if (y.ndim() != 1 || static_cast<std::size_t>(y.shape(0)) != static_cast<std::size_t>(x.shape(0)))
        throw MismatchError("y must be one-dimensional with one entry per row of x");
    FeatureMatrix m;
    m.n_rows = static_cast<std::size_t>(x.shape(0));
    m.n_cols = static_cast<std::size_t>(x.shape(1));
    m.values.assign(x.data(), x.data() + x.size());
    const auto yv = y.unchecked<1>();
    if (classes) {
        m.class_values = *classes;
        std::sort(m.class_values.begin(), m.class_values.end());
    } else {
        std::set<int> seen;
        for (py::ssize_t i = 0; i < yv.shape(0); ++i) seen.insert(static_cast<int>(yv(i)));
        m.class_values.assign(seen.begin(), seen.end());
    }
    for (py::ssize_t i = 0; i < yv.shape(0); ++i) {
        const auto it = std::find(m.class_values.begin(), m.class_values.end(), static_cast<int>(yv(i)));
        if (it == m.class_values.end()) throw Error("label " + std::to_string(yv(i)) + " is not a declared class");
        m.labels.push_back(static_cast<int>(it - m.class_values.begin()));
    }
    if (names) {
        if (names->size() != m.n_cols) throw MismatchError("need one feature name per column of x");
        m.feature_names = *names;
    } else {
        for (std::size_t c = 0; c < m.n_cols; ++c) m.feature_names.push_back("x" + std::to_string(c));
    }
    for (std::size_t r = 0; r < m.n_rows; ++r) m.row_ids.push_back(r);
    return m;
}

DoubleArray matrix_values(const FeatureMatrix& m) {
    DoubleArray out({m.n_rows, m.n_cols});
    std::copy(m.values.begin(), m.values.end(), out.mutable_data());
    return out;
}

py::dict row_dict(const EvaluationRow& r) {
    py::dict d;
    d["model"] = r.model;
    d["phase"] = std::string(to_string(r.phase));
    d["averaging"] = std::string(to_string(r.averaging));
    d["accuracy"] = r.accuracy;
    d["precision"] = r.precision;
    d["recall"] = r.recall;
    d["f_score"] = r.f_score;
    d["zero_division"] = r.zero_division;
    return d;
}

py::list importance_list(const ImportanceReport& r) {
    py::list out;
    for (const auto& f : r.ranked()) {
        py::dict d;
        d["feature"] = f.feature;
        d["score"] = f.score;
        d["mean_increase"] = f.mean_increase;
        d["stddev"] = f.stddev;
        d["rank"] = f.rank;
        out.append(d);
    }
    return out;
}

ExperimentConfig make_config(std::optional<std::string> config_text, std::optional<std::filesystem::path> config_path) {
    if (config_text && config_path) throw Error("give config_text or config_path, not both");
    if (config_path) return load_config(*config_path);
    if (config_text) return parse_config(*config_text);
    return ExperimentConfig{};
}

}  // namespace

PYBIND11_MODULE(_accsev, m) {
    m.doc() = "Road-accident severity classification with tree ensembles";

    // most recently registered translator is tried first
    auto base = py::register_exception<Error>(m, "AccsevError", PyExc_RuntimeError);
    py::register_exception<MismatchError>(m, "MismatchError", base.ptr());

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("rows", &Dataset::rows)
        .def_property_readonly("columns", [](const Dataset& d) {
            std::vector<std::string> names;
            for (const auto& c : d.columns) names.push_back(c.spec.name);
            return names;
        })
        .def_property_readonly("labels", [](const Dataset& d) { return d.labels; })
        .def_property_readonly("classes", [](const Dataset& d) { return d.classes; })
        .def_property_readonly("dropped_columns", [](const Dataset& d) { return d.log.dropped_columns; })
        .def("missing_cells", &Dataset::missing_cells)
        .def("missing_ratios", [](const Dataset& d) { return missing_ratios(d); })
        .def("class_counts", [](const Dataset& d) { return class_counts(d); })
        .def("top_values", [](const Dataset& d, const std::string& column, std::size_t n) { return top_values(d, column, n); },
             py::arg("column"), py::arg("n") = 5)
        .def("to_csv", [](const Dataset& d) { return to_csv(d); })
        .def("__repr__", [](const Dataset& d) {
            return "<Dataset " + std::to_string(d.rows()) + " rows, " + std::to_string(d.columns.size()) + " columns>";
        });

    py::class_<FeatureMatrix>(m, "FeatureMatrix")
        .def(py::init(&matrix_from_arrays), py::arg("x"), py::arg("y"), py::arg("classes") = py::none(),
             py::arg("feature_names") = py::none())
        .def_property_readonly("n_rows", [](const FeatureMatrix& f) { return f.n_rows; })
        .def_property_readonly("n_cols", [](const FeatureMatrix& f) { return f.n_cols; })
        .def_property_readonly("feature_names", [](const FeatureMatrix& f) { return f.feature_names; })
        .def_property_readonly("class_values", [](const FeatureMatrix& f) { return f.class_values; })
        .def_property_readonly("values", &matrix_values)
        .def_property_readonly("y", [](const FeatureMatrix& f) {
            std::vector<int> out;
            for (int l : f.labels) out.push_back(f.class_values[static_cast<std::size_t>(l)]);
            return out;
        })
        .def("take_rows", [](const FeatureMatrix& f, std::vector<std::size_t> rows) {
            for (auto r : rows)
                if (r >= f.n_rows) throw py::index_error("row " + std::to_string(r) + " out of range");
            return f.take_rows(rows);
        })
        .def("project", [](const FeatureMatrix& f, std::vector<std::string> names) { return project(f, names); });

    m.def("load_csv",
          [](const std::filesystem::path& path, std::optional<std::filesystem::path> schema, std::vector<int> classes) {
              return load_csv(path, schema ? FeatureSchema::load(*schema) : us_accidents_schema(), LoadOptions{classes, true});
          },
          py::arg("path"), py::arg("schema") = py::none(), py::arg("classes") = std::vector<int>{},
          "Reads a CSV file; without a schema the 49-column accident export layout is assumed.");
    m.def("preprocess", [](const Dataset& d, double ratio) { return preprocess(d, PreprocessOptions{ratio}); },
          py::arg("dataset"), py::arg("max_missing_ratio") = 0.5);
    m.def("encode", [](const Dataset& d) { return encode(d).matrix; }, py::arg("dataset"),
          "Numeric feature matrix of a fully preprocessed dataset.");
    m.def("train_test_split",
          [](const FeatureMatrix& f, double fraction, std::uint64_t seed, bool stratify) {
              auto s = train_test_split(f, SplitOptions{fraction, seed, stratify});
              return py::make_tuple(std::move(s.train), std::move(s.test));
          },
          py::arg("matrix"), py::arg("train_fraction") = 0.7, py::arg("seed") = 0, py::arg("stratify") = false);

    m.def("generate_synth",
          [](std::size_t rows, std::size_t informative, std::size_t noise, std::size_t classes, std::uint64_t seed,
             std::vector<double> class_weights, double categorical_fraction, double noisy_row_fraction,
             double noisy_row_scale) {
              SynthSpec s;
              s.n_rows = rows;
              s.n_informative = informative;
              s.n_noise = noise;
              s.n_classes = classes;
              s.seed = seed;
              s.class_weights = std::move(class_weights);
              s.categorical_fraction = categorical_fraction;
              s.noisy_row_fraction = noisy_row_fraction;
              s.noisy_row_scale = noisy_row_scale;
              auto out = generate(s);
              return py::make_tuple(std::move(out.dataset), out.informative, out.noise);
          },
          py::arg("rows") = 2000, py::arg("informative") = 20, py::arg("noise") = 28, py::arg("classes") = 4,
          py::arg("seed") = 0, py::arg("class_weights") = std::vector<double>{}, py::arg("categorical_fraction") = 0.0,
          py::arg("noisy_row_fraction") = 0.0, py::arg("noisy_row_scale") = 6.0,
          "Returns (dataset, informative column names, noise column names).");
    m.def("inject_missing", &inject_missing, py::arg("dataset"), py::arg("rates"), py::arg("seed") = 0);

    py::class_<PyModel>(m, "Model")
        .def_property_readonly("kind", [](const PyModel& p) { return std::string(model_key(p.model.kind)); })
        .def_property_readonly("n_features", [](const PyModel& p) { return p.model.n_features(); })
        .def_property_readonly("class_values", [](const PyModel& p) { return p.class_values; })
        .def("predict",
             [](const PyModel& p, const DoubleArray& x, unsigned threads) {
                 if (x.ndim() != 2) throw Error("x must be two-dimensional");
                 FeatureMatrix f;
                 f.n_rows = static_cast<std::size_t>(x.shape(0));
                 f.n_cols = static_cast<std::size_t>(x.shape(1));
                 f.values.assign(x.data(), x.data() + x.size());
                 std::vector<int> idx;
                 {
                     py::gil_scoped_release release;
                     idx = predict_batch(p.model, f, threads);
                 }
                 IntArray out(static_cast<py::ssize_t>(idx.size()));
                 auto o = out.mutable_unchecked<1>();
                 for (std::size_t i = 0; i < idx.size(); ++i)
                     o(static_cast<py::ssize_t>(i)) = p.class_values[static_cast<std::size_t>(idx[i])];
                 return out;
             },
             py::arg("x"), py::arg("threads") = 1, "Predicted class values, one per row of x.")
        .def("to_text", [](const PyModel& p) {
            std::ostringstream out;
            out << "classes";
            for (int v : p.class_values) out << ' ' << v;
            out << '\n';
            write_model(out, p.model);
            return out.str();
        })
        .def_static("from_text", [](const std::string& text) {
            std::istringstream in(text);
            std::string word;
            std::string header;
            std::getline(in, header);
            std::istringstream h(header);
            h >> word;
            if (word != "classes") throw Error("model text: expected a classes line");
            PyModel p;
            for (int v; h >> v;) p.class_values.push_back(v);
            p.model = read_model(in);
            if (p.class_values.size() != p.model.n_classes()) throw Error("model text: class count mismatch");
            return p;
        });

    m.def("fit_model",
          [](const std::string& kind, const FeatureMatrix& f, std::uint64_t seed, unsigned threads,
             std::optional<std::string> config_text) {
              ExperimentConfig cfg = config_text ? parse_config(*config_text) : ExperimentConfig{};
              cfg.seed = seed;
              cfg.threads = threads;
              PyModel p;
              p.class_values = f.class_values;
              p.feature_names = f.feature_names;
              const ModelKind k = parse_model_kind(kind);
              py::gil_scoped_release release;
              p.model = fit_model(k, f, seeded_models(cfg));
              return p;
          },
          py::arg("kind"), py::arg("matrix"), py::arg("seed") = 0, py::arg("threads") = 1,
          py::arg("config_text") = py::none(),
          "Fits one of voting, rf, adaboost, extratrees, gbm. Hyperparameters come from the optional config text.");

    m.def("permutation_importance",
          [](const FeatureMatrix& f, std::size_t trees, std::uint64_t seed, std::size_t k, unsigned threads) {
              ExperimentConfig cfg;
              cfg.seed = seed;
              cfg.threads = threads;
              auto models = seeded_models(cfg);
              models.random_forest.n_trees = trees;
              ImportanceReport r;
              {
                  py::gil_scoped_release release;
                  const auto forest = fit_random_forest(f, models.random_forest);
                  r = permutation_importance(forest, f, derive_seed(seed, 8), nullptr, threads);
                  select_top_k(r, std::min(k, r.features.size()));
              }
              return py::make_tuple(importance_list(r), r.selected);
          },
          py::arg("matrix"), py::arg("trees") = 100, py::arg("seed") = 0, py::arg("k") = 20, py::arg("threads") = 1,
          "Returns (ranked feature records, top-k feature names).");

    m.def("confusion",
          [](std::vector<int> y_true, std::vector<int> y_pred, std::size_t n_classes) {
              const auto cm = confusion(y_true, y_pred, n_classes);
              std::vector<std::vector<std::size_t>> out(n_classes, std::vector<std::size_t>(n_classes));
              for (std::size_t i = 0; i < n_classes; ++i)
                  for (std::size_t j = 0; j < n_classes; ++j) out[i][j] = cm.at(i, j);
              return out;
          },
          py::arg("y_true"), py::arg("y_pred"), py::arg("n_classes"), "Counts indexed [true][predicted]; classes are 0-based.");
    m.def("evaluate",
          [](std::vector<int> y_true, std::vector<int> y_pred, std::size_t n_classes, const std::string& averaging) {
              const auto cm = confusion(y_true, y_pred, n_classes);
              return row_dict(report("", cm, parse_averaging(averaging), Phase::all_features));
          },
          py::arg("y_true"), py::arg("y_pred"), py::arg("n_classes"), py::arg("averaging") = "macro");
    m.def("f_score", &f_score, py::arg("precision"), py::arg("recall"));
    m.def("round_half_up", &round_half_up, py::arg("value"), py::arg("decimals") = 3);

    m.def("run_experiment",
          [](std::optional<std::string> config_text, std::optional<std::filesystem::path> config_path,
             std::optional<std::uint64_t> seed, std::optional<std::size_t> k, std::optional<std::string> averaging,
             std::optional<std::filesystem::path> out_dir, std::optional<unsigned> threads) {
              ExperimentConfig cfg = make_config(config_text, config_path);
              if (seed) cfg.seed = *seed;
              if (k) cfg.k_significant = *k;
              if (averaging) cfg.averaging = parse_averaging(*averaging);
              if (out_dir) cfg.out_dir = *out_dir;
              if (threads) cfg.threads = *threads;
              ExperimentReport r;
              {
                  py::gil_scoped_release release;
                  r = cmd_experiment(cfg);
              }
              py::dict d;
              d["text"] = r.to_text();
              py::list p1, p2;
              for (const auto& row : r.phase1) p1.append(row_dict(row));
              for (const auto& row : r.phase2) p2.append(row_dict(row));
              d["phase1"] = p1;
              d["phase2"] = p2;
              d["importance"] = importance_list(r.importance);
              d["selected"] = r.importance.selected;
              d["features"] = r.data.features;
              d["train_rows"] = r.data.train_rows;
              d["test_rows"] = r.data.test_rows;
              return d;
          },
          py::arg("config_text") = py::none(), py::arg("config_path") = py::none(), py::arg("seed") = py::none(),
          py::arg("k") = py::none(), py::arg("averaging") = py::none(), py::arg("out_dir") = py::none(),
          py::arg("threads") = py::none(),
          "Runs the two-phase experiment and returns both tables, the importance ranking and the report text.");
}
