#include "accsev/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace accsev {

std::size_t ConfusionMatrix::total() const noexcept {
    std::size_t t = 0;
    for (auto c : counts_) t += c;
    return t;
}

std::size_t ConfusionMatrix::trace() const noexcept {
    std::size_t t = 0;
    for (std::size_t k = 0; k < k_; ++k) t += counts_[k * k_ + k];
    return t;
}

std::size_t ConfusionMatrix::false_positives(std::size_t k) const {
    std::size_t s = 0;
    for (std::size_t i = 0; i < k_; ++i) s += at(i, k);
    return s - at(k, k);
}

std::size_t ConfusionMatrix::false_negatives(std::size_t k) const {
    return support(k) - at(k, k);
}

std::size_t ConfusionMatrix::support(std::size_t k) const {
    std::size_t s = 0;
    for (std::size_t j = 0; j < k_; ++j) s += at(k, j);
    return s;
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes) {
    if (y_true.size() != y_pred.size())
        throw Error("confusion: " + std::to_string(y_true.size()) + " true labels vs " +
                    std::to_string(y_pred.size()) + " predictions");
    if (y_true.empty()) throw Error("confusion: no rows");
    ConfusionMatrix cm(n_classes);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i], p = y_pred[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes || static_cast<std::size_t>(p) >= n_classes)
            throw Error("confusion: class index out of range at row " + std::to_string(i));
        cm.add(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw Error("accuracy: empty confusion matrix");
    return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

double binary_accuracy(std::size_t tp, std::size_t tn, std::size_t fp, std::size_t fn) {
    const auto total = tp + tn + fp + fn;
    if (total == 0) throw Error("accuracy: no predictions");
    return static_cast<double>(tp + tn) / static_cast<double>(total);
}

double f_score(double precision, double recall) noexcept {
    const double s = precision + recall;
    return s > 0 ? 2.0 * precision * recall / s : 0.0;
}

std::string_view to_string(Averaging a) {
    return a == Averaging::macro ? "macro" : "weighted";
}

Averaging parse_averaging(std::string_view text) {
    if (text == "macro") return Averaging::macro;
    if (text == "weighted") return Averaging::weighted;
    throw Error("unknown averaging '" + std::string(text) + "' (expected macro or weighted)");
}

PrecisionRecallF precision_recall_f(const ConfusionMatrix& cm, Averaging averaging) {
    const auto total = cm.total();
    if (total == 0) throw Error("precision_recall_f: empty confusion matrix");
    PrecisionRecallF out;
    const std::size_t K = cm.classes();
    double wsum = 0;
    for (std::size_t k = 0; k < K; ++k) {
        const double tp = static_cast<double>(cm.true_positives(k));
        const double fp = static_cast<double>(cm.false_positives(k));
        const double fn = static_cast<double>(cm.false_negatives(k));
        double p = 0, r = 0;
        if (tp + fp > 0) p = tp / (tp + fp);
        else out.zero_division = true;
        if (tp + fn > 0) r = tp / (tp + fn);
        else out.zero_division = true;
        const double f = f_score(p, r);
        out.class_precision.push_back(p);
        out.class_recall.push_back(r);
        out.class_f.push_back(f);
        const double w = averaging == Averaging::macro ? 1.0 : static_cast<double>(cm.support(k));
        out.precision += w * p;
        out.recall += w * r;
        out.f_score += w * f;
        wsum += w;
    }
    out.precision /= wsum;
    out.recall /= wsum;
    out.f_score /= wsum;
    return out;
}

std::string_view to_string(Phase p) {
    return p == Phase::all_features ? "all_features" : "significant_features";
}

double round_half_up(double v, int decimals) {
    const double scale = std::pow(10.0, decimals);
    // nudge so 0.9425 (stored as 0.94249999...) rounds up
    const double scaled = std::abs(v) * scale;
    const double r = std::floor(scaled + 0.5 + 1e-9) / scale;
    return std::copysign(r, v);
}

namespace {

std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", round_half_up(v));
    return buf;
}

}  // namespace

std::string EvaluationRow::to_line() const {
    return model + ", " + fixed3(accuracy) + ", " + fixed3(precision) + ", " + fixed3(recall) + ", " + fixed3(f_score);
}

EvaluationRow report(std::string model_name, const ConfusionMatrix& cm, Averaging averaging, Phase phase) {
    EvaluationRow row;
    row.model = std::move(model_name);
    row.phase = phase;
    row.averaging = averaging;
    row.accuracy = accuracy(cm);
    const auto prf = precision_recall_f(cm, averaging);
    row.precision = prf.precision;
    row.recall = prf.recall;
    row.f_score = prf.f_score;
    row.zero_division = prf.zero_division;
    row.confusion = cm;
    return row;
}

std::string format_table(std::span<const EvaluationRow> rows, std::string_view title) {
    std::size_t name_width = std::string_view("Models").size();
    for (const auto& r : rows) name_width = std::max(name_width, r.model.size());
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };
    std::string out;
    if (!title.empty()) {
        out += title;
        out += '\n';
    }
    out += pad("Models", name_width + 2) + pad("Accuracy", 11) + pad("Precision", 11) + pad("Recall", 11) + "F-Score\n";
    for (const auto& r : rows)
        out += pad(r.model, name_width + 2) + pad(fixed3(r.accuracy), 11) + pad(fixed3(r.precision), 11) +
               pad(fixed3(r.recall), 11) + fixed3(r.f_score) + '\n';
    return out;
}

std::string format_csv(std::span<const EvaluationRow> rows, bool header) {
    std::string out;
    if (header) out += "model,phase,averaging,accuracy,precision,recall,f_score\n";
    for (const auto& r : rows)
        out += r.model + "," + std::string(to_string(r.phase)) + "," + std::string(to_string(r.averaging)) + "," +
               fixed3(r.accuracy) + "," + fixed3(r.precision) + "," + fixed3(r.recall) + "," + fixed3(r.f_score) + "\n";
    return out;
}

}  // namespace accsev
