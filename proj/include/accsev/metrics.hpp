#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "accsev/common.hpp"

namespace accsev {

/// K x K counts; entry (i, j) is the number of rows of true class i
/// predicted as class j.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t n_classes) : k_(n_classes), counts_(n_classes * n_classes, 0) {}

    std::size_t classes() const noexcept { return k_; }
    std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * k_ + predicted); }
    void add(std::size_t truth, std::size_t predicted, std::size_t n = 1) { counts_.at(truth * k_ + predicted) += n; }
    std::size_t total() const noexcept;
    std::size_t trace() const noexcept;
    std::size_t true_positives(std::size_t k) const { return at(k, k); }
    std::size_t false_positives(std::size_t k) const;  // column sum minus diagonal
    std::size_t false_negatives(std::size_t k) const;  // row sum minus diagonal
    std::size_t support(std::size_t k) const;          // row sum

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t k_ = 0;
    std::vector<std::size_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes);

/// Correct predictions over total predictions.
double accuracy(const ConfusionMatrix& cm);

/// Accuracy from binary outcome counts: (TP + TN) / (TP + TN + FP + FN).
double binary_accuracy(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn);

/// Harmonic mean 2PR / (P + R); 0 when P + R = 0.
double f_score(double precision, double recall) noexcept;

enum class Averaging { macro, weighted };
std::string_view to_string(Averaging a);
Averaging parse_averaging(std::string_view text);

struct PrecisionRecallF {
    double precision = 0;
    double recall = 0;
    double f_score = 0;
    std::vector<double> class_precision;
    std::vector<double> class_recall;
    std::vector<double> class_f;
    /// Set when some class had a 0/0 precision or recall (scored as 0).
    bool zero_division = false;
};

/// Per-class precision TP/(TP+FP), recall TP/(TP+FN) and F, then averaged.
/// Macro weights classes equally; weighted uses true-class support. The
/// averaged F is the average of per-class F-scores.
PrecisionRecallF precision_recall_f(const ConfusionMatrix& cm, Averaging averaging);

enum class Phase { all_features, significant_features };
std::string_view to_string(Phase p);

/// Rounds half away from zero at the given number of decimals.
double round_half_up(double v, int decimals = 3);

/// One table row: full-precision scores plus their 3-decimal forms.
struct EvaluationRow {
    std::string model;
    Phase phase = Phase::all_features;
    Averaging averaging = Averaging::macro;
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f_score = 0;
    bool zero_division = false;
    ConfusionMatrix confusion;

    double accuracy_3dp() const { return round_half_up(accuracy); }
    double precision_3dp() const { return round_half_up(precision); }
    double recall_3dp() const { return round_half_up(recall); }
    double f_score_3dp() const { return round_half_up(f_score); }

    /// "Random Forest, 0.974, 0.954, 0.930, 0.942"
    std::string to_line() const;
};

EvaluationRow report(std::string model_name, const ConfusionMatrix& cm, Averaging averaging, Phase phase);

/// Aligned plain-text table with the columns
/// Models, Accuracy, Precision, Recall, F-Score.
std::string format_table(std::span<const EvaluationRow> rows, std::string_view title = {});

/// Machine-readable rows: model,phase,averaging,accuracy,precision,recall,f_score
std::string format_csv(std::span<const EvaluationRow> rows, bool header = true);

}  // namespace accsev
