#pragma once

// Per-bit random forests: one forest per target code bit, trained on the
// prompting side's code to predict the responding side's code. Written from
// first principles so that tree growth, bagging and tie handling are fully
// deterministic in the seed.

#include <cstdint>
#include <vector>

#include "hashtalk/bitmatrix.hpp"
#include "hashtalk/error.hpp"

namespace hashtalk {

struct RandomForestConfig {
    int trees = 100;
    int max_depth = 12;
    int mtry = 0;  // features tried per split; 0 means ceil(sqrt(input width))
    int min_samples_split = 2;

    void validate() const;
    int effective_mtry(std::size_t input_width) const;
};

struct TreeNode {
    std::int32_t split_bit = -1;  // -1 marks a leaf
    std::int32_t left = -1;       // child for bit value 0
    std::int32_t right = -1;      // child for bit value 1
    double pos_fraction = 0.0;    // leaf: fraction of positive samples
    std::int32_t count = 0;       // leaf: samples that reached it
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    double predict(const std::uint8_t* row) const;
};

// Forest for a single target bit.
struct BitForest {
    std::vector<Tree> trees;
    std::uint8_t majority = 0;     // training-majority label; ties resolve to 0
    bool constant_target = false;  // target bit constant in training data
    double predict_proba(const std::uint8_t* row) const;
};

class BitPredictorSet {
  public:
    RandomForestConfig config;
    std::size_t input_width = 0;
    std::vector<BitForest> forests;  // one per target bit

    std::size_t output_bits() const { return forests.size(); }

    // Per-bit probability of a 1, averaged over trees.
    std::vector<double> predict_proba(const std::uint8_t* cp_row) const;
};

struct Prediction {
    std::vector<std::uint8_t> code;
    std::vector<double> probabilities;
};

// Trains one forest per column of ct, each on its own bootstrap resamples of
// the rows of cp. Requires matching row counts and at least 2 rows.
BitPredictorSet train_predictors(const BitMatrix& cp, const BitMatrix& ct,
                                 const RandomForestConfig& config,
                                 std::uint64_t seed);

// Hard code plus probabilities. A probability of exactly 0.5 resolves to the
// bit's training-majority label.
Prediction predict_code(const BitPredictorSet& preds,
                        const std::vector<std::uint8_t>& cp_row);

struct PredictionReport {
    std::vector<double> per_bit_accuracy;       // mean over trials
    double mean_accuracy = 0.0;                 // over (bit, trial) cells
    double std_accuracy = 0.0;
    std::vector<double> per_bit_baseline;
    double baseline_mean = 0.0;                 // majority-label baseline
    double baseline_std = 0.0;
    std::size_t n_eval = 0;
    int trials = 0;
    double fraction = 0.0;
};

// Hashcode inference accuracy over seeded random subsamples of the
// evaluation rows (default 10 trials of 95%), against the per-bit
// training-majority baseline.
PredictionReport evaluate_hia(const BitPredictorSet& preds, const BitMatrix& cp,
                              const BitMatrix& ct, int trials = 10,
                              double fraction = 0.95, std::uint64_t seed = 0);

}  // namespace hashtalk
