#include "accsev/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace accsev {

namespace {

constexpr std::size_t kCategoricalLevels = 6;
constexpr double kPreferredLevelProbability = 0.7;

std::string column_name(std::size_t position, std::size_t total) {
    const int width = total > 100 ? 3 : 2;
    char buf[16];
    std::snprintf(buf, sizeof buf, "f%0*zu", width, position);
    return buf;
}

}  // namespace

void SynthSpec::validate() const {
    if (n_rows < 1) throw Error("synth: n_rows must be at least 1");
    if (n_informative + n_noise < 1) throw Error("synth: need at least one feature column");
    if (n_classes < 2) throw Error("synth: need at least two classes");
    if (!(categorical_fraction >= 0 && categorical_fraction <= 1)) throw Error("synth: categorical_fraction outside [0, 1]");
    if (!(noisy_row_fraction >= 0 && noisy_row_fraction <= 1)) throw Error("synth: noisy_row_fraction outside [0, 1]");
    if (!(noisy_row_scale > 0)) throw Error("synth: noisy_row_scale must be positive");
    if (!class_weights.empty()) {
        if (class_weights.size() != n_classes) throw Error("synth: need one class weight per class");
        double total = 0;
        for (double w : class_weights) {
            if (!(w >= 0)) throw Error("synth: negative class weight");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9) throw Error("synth: class weights must sum to 1");
    }
}

std::vector<double> SynthSpec::resolved_class_weights() const {
    if (!class_weights.empty()) return class_weights;
    if (n_classes == 2) return {0.33, 0.67};
    std::vector<double> w(n_classes, 0.32 / static_cast<double>(n_classes - 2));
    w[0] = 0.01;
    w[1] = 0.67;
    return w;
}

SynthData generate(const SynthSpec& spec) {
    spec.validate();
    const std::size_t n = spec.n_rows;
    const std::size_t K = spec.n_classes;
    const std::size_t F = spec.n_informative + spec.n_noise;

    std::mt19937_64 rng(spec.seed);
    const auto weights = spec.resolved_class_weights();
    std::discrete_distribution<int> draw_class(weights.begin(), weights.end());
    std::bernoulli_distribution draw_noisy(spec.noisy_row_fraction);
    std::vector<int> cls(n);
    std::vector<bool> noisy(n);
    for (std::size_t r = 0; r < n; ++r) {
        cls[r] = draw_class(rng);
        noisy[r] = draw_noisy(rng);
    }

    // position of generated column i (informative first, then noise)
    std::vector<std::size_t> position(F);
    std::iota(position.begin(), position.end(), std::size_t{0});
    std::shuffle(position.begin(), position.end(), rng);

    const auto n_cat_inf = static_cast<std::size_t>(std::round(spec.categorical_fraction * static_cast<double>(spec.n_informative)));
    const auto n_cat_noise = static_cast<std::size_t>(std::round(spec.categorical_fraction * static_cast<double>(spec.n_noise)));
    const std::size_t levels = std::max(kCategoricalLevels, K);

    std::vector<DataColumn> generated(F);
    SynthData out;
    for (std::size_t i = 0; i < F; ++i) {
        const bool informative = i < spec.n_informative;
        const std::size_t local = informative ? i : i - spec.n_informative;
        const bool categorical = local < (informative ? n_cat_inf : n_cat_noise);
        DataColumn& col = generated[i];
        col.spec = ColumnSpec{column_name(position[i], F),
                              categorical ? ColumnKind::categorical : ColumnKind::numeric, ColumnRole::feature};
        (informative ? out.informative : out.noise).push_back(col.spec.name);

        std::mt19937_64 crng(derive_seed(spec.seed, 1000 + i));
        std::normal_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> any_level(0, levels - 1);
        std::bernoulli_distribution preferred(kPreferredLevelProbability);
        // per-column class ordering so columns do not all rank classes alike
        std::vector<std::size_t> rank(std::max(K, levels));
        std::iota(rank.begin(), rank.end(), std::size_t{0});
        std::shuffle(rank.begin(), rank.end(), crng);

        if (categorical) {
            for (std::size_t l = 0; l < levels; ++l) col.levels.push_back("c" + std::to_string(l));
            for (std::size_t r = 0; r < n; ++r) {
                std::size_t level = any_level(crng);
                const bool prefer = preferred(crng);
                if (informative && !noisy[r] && prefer) level = rank[static_cast<std::size_t>(cls[r])];
                col.cells.push_back(static_cast<double>(level));
            }
            // level indices must follow first appearance, as load_csv would assign them
            std::vector<double> remap(levels, -1.0);
            std::vector<std::string> ordered;
            for (auto& v : col.cells) {
                auto& slot = remap[static_cast<std::size_t>(v)];
                if (slot < 0) {
                    slot = static_cast<double>(ordered.size());
                    ordered.push_back(col.levels[static_cast<std::size_t>(v)]);
                }
                v = slot;
            }
            col.levels = std::move(ordered);
        } else {
            // ranks restricted to the K classes, renumbered 0..K-1
            std::vector<std::size_t> order(K);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
            std::vector<double> mean(K, 0.0);
            for (std::size_t pos = 0; pos < K; ++pos) mean[order[pos]] = kInformativeSeparation * static_cast<double>(pos);
            for (std::size_t r = 0; r < n; ++r) {
                const double z = unit(crng);
                double v = z;
                if (informative) {
                    const double spread = noisy[r] ? spec.noisy_row_scale : 1.0;
                    v = mean[static_cast<std::size_t>(cls[r])] + spread * z;
                }
                col.cells.push_back(v);
            }
        }
    }

    std::vector<ColumnSpec> schema_cols{{"Severity", ColumnKind::numeric, ColumnRole::target}};
    std::vector<std::size_t> by_position(F);
    for (std::size_t i = 0; i < F; ++i) by_position[position[i]] = i;
    Dataset& d = out.dataset;
    for (std::size_t p = 0; p < F; ++p) {
        schema_cols.push_back(generated[by_position[p]].spec);
        d.columns.push_back(std::move(generated[by_position[p]]));
    }
    d.schema = FeatureSchema(std::move(schema_cols));
    for (std::size_t k = 1; k <= K; ++k) d.classes.push_back(static_cast<int>(k));
    for (std::size_t r = 0; r < n; ++r) {
        d.labels.emplace_back(cls[r] + 1);
        d.row_ids.push_back(r);
    }
    out.noisy_rows = std::move(noisy);
    return out;
}

Dataset inject_missing(const Dataset& d, const std::map<std::string, double>& per_column_rates, std::uint64_t seed) {
    for (const auto& [name, rate] : per_column_rates) {
        if (!(rate >= 0 && rate <= 1)) throw Error("inject_missing: rate for '" + name + "' outside [0, 1]");
        if (!d.column(name)) throw Error("inject_missing: unknown column '" + name + "'");
    }
    Dataset out = d;
    for (std::size_t c = 0; c < out.columns.size(); ++c) {
        double rate = 0;
        for (const auto& [name, r] : per_column_rates)
            if (canonical_column_name(name) == canonical_column_name(out.columns[c].spec.name)) rate = r;
        if (rate == 0) continue;
        std::mt19937_64 rng(derive_seed(seed, c));
        std::bernoulli_distribution drop(rate);
        for (auto& cell : out.columns[c].cells)
            if (drop(rng)) cell = kMissing;
    }
    return out;
}

}  // namespace accsev
