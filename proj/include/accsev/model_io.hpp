#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>

#include "accsev/data.hpp"
#include "accsev/ensembles.hpp"

namespace accsev {

/// A fitted model together with what is needed to apply it to raw files:
/// the schema it was trained under and the fitted feature encoding.
struct ModelBundle {
    FeatureSchema schema;
    Encoding encoding;
    EnsembleModel model;
};

/// First line of every model file.
inline constexpr std::string_view kModelFileMagic = "accsev-model v1";

void write_model(std::ostream& out, const EnsembleModel& model);
EnsembleModel read_model(std::istream& in);

void write_bundle(std::ostream& out, const ModelBundle& bundle);
ModelBundle read_bundle(std::istream& in);

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& path);

/// Predicted class values (not indices) for every row of a raw dataset.
/// Fails with MismatchError when the dataset lacks a column the model uses.
std::vector<int> predict_values(const ModelBundle& bundle, const Dataset& d, unsigned threads = 1);

}  // namespace accsev
