#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "accsev/data.hpp"
#include "accsev/ensembles.hpp"

namespace accsev {

/// Lower bound applied to the across-tree standard deviation.
inline constexpr double kImportanceSigmaFloor = 1e-12;

struct FeatureImportance {
    std::string feature;
    double mean_increase = 0;  // mean over trees of permuted error minus baseline error
    double stddev = 0;         // sample standard deviation over trees
    double score = 0;          // mean_increase / max(stddev, floor)
    std::size_t rank = 0;      // 1 = most significant
};

struct ImportanceReport {
    std::vector<FeatureImportance> features;  // original column order
    std::size_t trees_used = 0;
    std::size_t trees_skipped = 0;
    std::vector<std::string> selected;  // filled by select_top_k, rank order
    std::size_t k = 0;

    /// Entries sorted by rank.
    std::vector<FeatureImportance> ranked() const;
    /// Two-column `feature,score` text, rank order.
    std::string to_csv() const;
};

/// Permutation importance of a fitted forest. For every tree, the error on
/// its evaluation rows with one column shuffled minus the unshuffled error.
/// Evaluation rows are the tree's out-of-bag rows of `m`, or all rows of
/// `held_out` when given (required for extra trees). The shuffle for
/// (tree t, feature j) is seeded by derive_seed(seed, t, j). Trees with no
/// evaluation rows are skipped; if every tree is skipped this throws.
ImportanceReport permutation_importance(const Forest& f, const FeatureMatrix& m, std::uint64_t seed,
                                        const FeatureMatrix* held_out = nullptr, unsigned threads = 1);

/// Records and returns the k highest scores, ties to the earlier column.
std::vector<std::string> select_top_k(ImportanceReport& report, std::size_t k);

/// Columns of m named by `features`, in that order.
FeatureMatrix project(const FeatureMatrix& m, std::span<const std::string> features);

}  // namespace accsev
