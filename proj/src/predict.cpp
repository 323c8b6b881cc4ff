#include "hashtalk/predict.hpp"

#include <algorithm>
#include <cmath>

#include "hashtalk/rng.hpp"

namespace hashtalk {

void RandomForestConfig::validate() const {
    if (trees < 1) throw ValidationError("forest: trees must be at least 1");
    if (max_depth < 1) throw ValidationError("forest: max_depth must be at least 1");
    if (mtry < 0) throw ValidationError("forest: mtry must not be negative");
    if (min_samples_split < 2)
        throw ValidationError("forest: min_samples_split must be at least 2");
}

int RandomForestConfig::effective_mtry(std::size_t input_width) const {
    int m = mtry;
    if (m == 0)
        m = static_cast<int>(
            std::ceil(std::sqrt(static_cast<double>(input_width))));
    return std::min<int>(m, static_cast<int>(input_width));
}

double Tree::predict(const std::uint8_t* row) const {
    std::int32_t at = 0;
    while (nodes[at].split_bit >= 0)
        at = row[nodes[at].split_bit] ? nodes[at].right : nodes[at].left;
    return nodes[at].pos_fraction;
}

double BitForest::predict_proba(const std::uint8_t* row) const {
    double sum = 0.0;
    for (const Tree& t : trees) sum += t.predict(row);
    return sum / static_cast<double>(trees.size());
}

std::vector<double> BitPredictorSet::predict_proba(const std::uint8_t* cp_row) const {
    std::vector<double> out(forests.size());
    for (std::size_t j = 0; j < forests.size(); ++j)
        out[j] = forests[j].predict_proba(cp_row);
    return out;
}

namespace {

double gini(std::size_t pos, std::size_t n) {
    if (n == 0) return 0.0;
    const double p = static_cast<double>(pos) / static_cast<double>(n);
    return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

struct TreeBuilder {
    const BitMatrix& x;
    const std::vector<std::uint8_t>& y;
    const RandomForestConfig& cfg;
    int mtry;
    rng::Engine& eng;
    Tree tree;

    std::int32_t build(std::vector<std::size_t>& rows, int depth) {
        const std::size_t n = rows.size();
        std::size_t pos = 0;
        for (std::size_t r : rows) pos += y[r];

        const std::int32_t id = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();

        const bool pure = (pos == 0 || pos == n);
        if (depth >= cfg.max_depth || pure ||
            n < static_cast<std::size_t>(cfg.min_samples_split)) {
            make_leaf(id, pos, n);
            return id;
        }

        // mtry distinct candidate features, compared in ascending index order
        // so equal gains resolve to the lowest feature.
        std::vector<std::size_t> candidates =
            rng::sample_without_replacement(x.h, static_cast<std::size_t>(mtry), eng);
        std::sort(candidates.begin(), candidates.end());

        const double parent = gini(pos, n);
        double best_gain = 1e-12;
        std::int32_t best_feature = -1;
        for (std::size_t f : candidates) {
            std::size_t n1 = 0, pos1 = 0;
            for (std::size_t r : rows) {
                if (x.at(r, f)) {
                    ++n1;
                    pos1 += y[r];
                }
            }
            const std::size_t n0 = n - n1;
            if (n0 == 0 || n1 == 0) continue;
            const std::size_t pos0 = pos - pos1;
            const double w0 = static_cast<double>(n0) / static_cast<double>(n);
            const double w1 = static_cast<double>(n1) / static_cast<double>(n);
            const double gain = parent - w0 * gini(pos0, n0) - w1 * gini(pos1, n1);
            if (gain > best_gain) {
                best_gain = gain;
                best_feature = static_cast<std::int32_t>(f);
            }
        }
        if (best_feature < 0) {
            make_leaf(id, pos, n);
            return id;
        }

        std::vector<std::size_t> left, right;
        left.reserve(n);
        right.reserve(n);
        for (std::size_t r : rows) {
            if (x.at(r, static_cast<std::size_t>(best_feature)))
                right.push_back(r);
            else
                left.push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        tree.nodes[id].split_bit = best_feature;
        const std::int32_t l = build(left, depth + 1);
        tree.nodes[id].left = l;
        const std::int32_t r = build(right, depth + 1);
        tree.nodes[id].right = r;
        return id;
    }

    void make_leaf(std::int32_t id, std::size_t pos, std::size_t n) {
        tree.nodes[id].split_bit = -1;
        tree.nodes[id].pos_fraction =
            n == 0 ? 0.0 : static_cast<double>(pos) / static_cast<double>(n);
        tree.nodes[id].count = static_cast<std::int32_t>(n);
    }
};

Tree train_tree(const BitMatrix& x, const std::vector<std::uint8_t>& y,
                const RandomForestConfig& cfg, int mtry, std::uint64_t seed) {
    auto eng = rng::make_engine(seed);
    std::vector<std::size_t> rows(x.n);
    for (auto& r : rows) r = rng::uniform_index(eng, x.n);
    TreeBuilder builder{x, y, cfg, mtry, eng, {}};
    builder.build(rows, 0);
    return std::move(builder.tree);
}

}  // namespace

BitPredictorSet train_predictors(const BitMatrix& cp, const BitMatrix& ct,
                                 const RandomForestConfig& config,
                                 std::uint64_t seed) {
    config.validate();
    if (cp.n != ct.n)
        throw ValidationError("train_predictors: row count mismatch");
    if (cp.n < 2)
        throw ValidationError("train_predictors: need at least 2 rows");
    if (cp.h == 0 || ct.h == 0)
        throw ValidationError("train_predictors: empty code");

    BitPredictorSet preds;
    preds.config = config;
    preds.input_width = cp.h;
    preds.forests.resize(ct.h);
    const int mtry = config.effective_mtry(cp.h);

    for (std::size_t j = 0; j < ct.h; ++j) {
        std::vector<std::uint8_t> y(ct.n);
        std::size_t pos = 0;
        for (std::size_t i = 0; i < ct.n; ++i) {
            y[i] = ct.at(i, j);
            pos += y[i];
        }
        BitForest& forest = preds.forests[j];
        forest.majority = pos * 2 > ct.n ? 1 : 0;
        forest.constant_target = (pos == 0 || pos == ct.n);
        forest.trees.reserve(config.trees);
        for (int t = 0; t < config.trees; ++t)
            forest.trees.push_back(
                train_tree(cp, y, config, mtry,
                           rng::derive_seed(seed, j, static_cast<std::uint64_t>(t))));
    }
    return preds;
}

Prediction predict_code(const BitPredictorSet& preds,
                        const std::vector<std::uint8_t>& cp_row) {
    if (cp_row.size() != preds.input_width)
        throw ValidationError("predict_code: row width mismatch");
    Prediction out;
    out.probabilities = preds.predict_proba(cp_row.data());
    out.code.resize(out.probabilities.size());
    for (std::size_t j = 0; j < out.code.size(); ++j) {
        const double p = out.probabilities[j];
        if (p > 0.5)
            out.code[j] = 1;
        else if (p < 0.5)
            out.code[j] = 0;
        else
            out.code[j] = preds.forests[j].majority;
    }
    return out;
}

PredictionReport evaluate_hia(const BitPredictorSet& preds, const BitMatrix& cp,
                              const BitMatrix& ct, int trials, double fraction,
                              std::uint64_t seed) {
    if (cp.n != ct.n) throw ValidationError("evaluate_hia: row count mismatch");
    if (cp.n == 0) throw ValidationError("evaluate_hia: no evaluation rows");
    if (ct.h != preds.output_bits() || cp.h != preds.input_width)
        throw ValidationError("evaluate_hia: code width mismatch");
    if (trials < 1) throw ValidationError("evaluate_hia: trials must be positive");
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw ValidationError("evaluate_hia: fraction must lie in (0, 1]");

    const std::size_t h = ct.h;
    // Predictions are deterministic per row; compute once.
    BitMatrix hard(cp.n, h);
    for (std::size_t i = 0; i < cp.n; ++i) {
        Prediction p = predict_code(preds, cp.row_vec(i));
        for (std::size_t j = 0; j < h; ++j) hard.set(i, j, p.code[j]);
    }

    const auto take = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(fraction * static_cast<double>(cp.n))));

    PredictionReport report;
    report.n_eval = cp.n;
    report.trials = trials;
    report.fraction = fraction;
    report.per_bit_accuracy.assign(h, 0.0);
    report.per_bit_baseline.assign(h, 0.0);

    std::vector<double> cells, base_cells;
    cells.reserve(static_cast<std::size_t>(trials) * h);
    base_cells.reserve(static_cast<std::size_t>(trials) * h);
    for (int t = 0; t < trials; ++t) {
        auto eng = rng::make_engine(
            rng::derive_seed(seed, 0xe7a1, static_cast<std::uint64_t>(t)));
        const auto sub = rng::sample_without_replacement(cp.n, take, eng);
        for (std::size_t j = 0; j < h; ++j) {
            std::size_t correct = 0, base_correct = 0;
            for (std::size_t r : sub) {
                correct += hard.at(r, j) == ct.at(r, j);
                base_correct += preds.forests[j].majority == ct.at(r, j);
            }
            const double acc =
                static_cast<double>(correct) / static_cast<double>(sub.size());
            const double base =
                static_cast<double>(base_correct) / static_cast<double>(sub.size());
            cells.push_back(acc);
            base_cells.push_back(base);
            report.per_bit_accuracy[j] += acc;
            report.per_bit_baseline[j] += base;
        }
    }
    for (std::size_t j = 0; j < h; ++j) {
        report.per_bit_accuracy[j] /= trials;
        report.per_bit_baseline[j] /= trials;
    }
    auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
        mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        sd = std::sqrt(var / static_cast<double>(v.size()));
    };
    mean_std(cells, report.mean_accuracy, report.std_accuracy);
    mean_std(base_cells, report.baseline_mean, report.baseline_std);
    return report;
}

}  // namespace hashtalk
