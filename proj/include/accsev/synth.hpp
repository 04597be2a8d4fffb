#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "accsev/data.hpp"

namespace accsev {

/// Spacing between class-conditional means of an informative numeric
/// column, in units of its within-class standard deviation.
inline constexpr double kInformativeSeparation = 2.0;

struct SynthSpec {
    std::size_t n_rows = 2000;
    std::size_t n_informative = 20;
    std::size_t n_noise = 28;
    std::size_t n_classes = 4;
    /// Empty: one dominant class (~67%), one rare class (~1%), rest shared.
    std::vector<double> class_weights;
    double categorical_fraction = 0.0;
    /// Fraction of rows whose informative cells carry extra noise.
    double noisy_row_fraction = 0.0;
    /// Within-class standard deviation of informative cells on noisy rows.
    double noisy_row_scale = 6.0;
    std::uint64_t seed = 0;

    void validate() const;
    std::vector<double> resolved_class_weights() const;
};

struct SynthData {
    Dataset dataset;
    std::vector<std::string> informative;  // ground-truth informative column names
    std::vector<std::string> noise;
    std::vector<bool> noisy_rows;
};

/// Labels 1..K drawn from the class weights. Numeric informative columns are
/// normal with unit spread around separation * rank_j(class), where rank_j is
/// a per-column permutation of the classes; categorical informative columns
/// favour one level per class. Noise columns ignore the label. Column order
/// is shuffled by the seed. The target column is named "Severity".
SynthData generate(const SynthSpec& spec);

/// Marks cells missing independently with the given per-column rate.
/// Columns not named keep all cells. Column c uses derive_seed(seed, c).
Dataset inject_missing(const Dataset& d, const std::map<std::string, double>& per_column_rates, std::uint64_t seed);

}  // namespace accsev
