#pragma once

// Model selection by maximizing the mutual-information lower bound: greedy
// reference-set construction, kernel-parameter grid search, and a generic
// greedy search over ordered discrete choices.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hashtalk/corpus.hpp"
#include "hashtalk/error.hpp"
#include "hashtalk/infotheory.hpp"
#include "hashtalk/kernel.hpp"
#include "hashtalk/lsh.hpp"
#include "hashtalk/predict.hpp"

namespace hashtalk {

struct OptimizerConfig {
    std::size_t initial_size = 20;      // slots filled at random before growth
    std::size_t final_size = 300;       // reference size when the search ends
    std::size_t candidate_pool = 1000;  // responses scored per step
    std::size_t eval_pairs = 100;       // dialogue pairs scored per step
    int latents = 4;                    // latent variables in the scoring model
    int folds = 2;                      // cross-fitting folds for the proposal
    std::uint64_t seed = 0;
    bool verbose = false;  // keep every candidate score in the trace
    LatentFitConfig latent;
    RandomForestConfig forest;

    OptimizerConfig() {
        latent.max_iters = 60;
        latent.restarts = 2;
        forest.trees = 12;
        forest.max_depth = 6;
    }
    void validate() const;
};

// One greedy step (or one grid cell): what was evaluated, what won, and the
// seeds the evaluation used, so any step can be rescored independently.
// Pooled responses are identified as "<pair id>:a" or "<pair id>:b".
struct SearchStep {
    std::size_t step = 0;
    std::string chosen;
    double mi_lb_bits = 0.0;
    std::size_t pool_size = 0;
    std::size_t pairs_sampled = 0;
    std::uint64_t model_seed = 0;  // bit-subset seed of the scored models
    std::uint64_t score_seed = 0;  // latent fit and proposal folds
    std::vector<std::string> candidates;  // verbose mode only
    std::vector<double> scores;           // verbose mode only
    std::vector<std::string> pair_ids;    // verbose mode only
};

struct SearchTrace {
    std::vector<SearchStep> steps;
};

// The scoring the searches run per candidate: build a clamped hash model on
// the reference set, encode the evaluation pairs, fit a latent model on the
// responder codes, and take the cross-fitted bound.
MiLbReport score_reference(const std::vector<const Response*>& reference,
                           const std::vector<const Response*>& eval_a,
                           const std::vector<const Response*>& eval_b,
                           std::size_t h, int alpha, const HashVariant& variant,
                           const KernelParams& params,
                           const EmbeddingTable& table,
                           const OptimizerConfig& cfg,
                           std::uint64_t model_seed, std::uint64_t score_seed);

struct OptimizedReference {
    HashModel model;
    SearchTrace trace;
    std::vector<std::string> initial_ids;  // the randomly seeded slots
    std::size_t truncated_steps = 0;  // steps whose pool fell short of
                                      // candidate_pool
};

// Greedy reference-set construction over the training split's pooled
// responses. Starts from initial_size random slots, then fixes one slot per
// step (replacing the initial slots first, growing past them after): each
// step draws a fresh candidate pool and fresh evaluation pairs from the
// master seed, scores every candidate occupying the open slot, and keeps
// the argmax (ties to the lowest candidate index). Candidate scoring
// reuses the kernel columns of the fixed slots, so only the open slot's
// column is recomputed per candidate.
OptimizedReference optimize_reference_set(
    const Corpus& corpus, const HashVariant& variant,
    const KernelParams& params, const EmbeddingTable& table, std::size_t h,
    int alpha, const OptimizerConfig& cfg);

struct ThetaGrids {
    std::vector<double> lambdas{0.25, 0.5, 0.75, 0.9};
    std::vector<double> zetas{-0.25, 0.0, 0.25, 0.5};
    std::vector<int> alphas{4, 8, 16};
};

struct GridSearchResult {
    KernelParams params;  // winning cell over the base settings
    int alpha = 0;
    double mi_lb_bits = 0.0;
    std::vector<std::string> reference_ids;  // shared by every cell
    std::vector<std::string> pair_ids;       // evaluation pairs, in order
    SearchTrace trace;
};

// Scores every (lambda, zeta, alpha) cell on one shared reference set, one
// shared pair sample, and shared seeds, and returns the argmax cell (ties
// to the first cell in grid order). Cells only override lambda and zeta;
// the other kernel settings come from base.
GridSearchResult grid_search_theta(const Corpus& corpus,
                                   const HashVariant& variant,
                                   const KernelParams& base,
                                   const EmbeddingTable& table, std::size_t h,
                                   const ThetaGrids& grids,
                                   const OptimizerConfig& cfg);

// Raised when a scoring callback fails mid-search; carries the steps that
// completed before the failure.
class SearchAbort : public Error {
  public:
    SearchAbort(const std::string& what, SearchTrace partial)
        : Error(what), partial_(std::move(partial)) {}
    const SearchTrace& partial() const { return partial_; }

  private:
    SearchTrace partial_;
};

struct GreedyChoiceResult {
    std::vector<std::string> chosen;  // fixed slot values, sentinel excluded
    bool stopped_early = false;
    SearchTrace trace;
};

// Fixes ordered decision slots left to right, each to the candidate value
// maximizing score(prefix + candidate) given the already-fixed prefix (ties
// to the earliest candidate). Choosing stop_token ends the search at that
// slot. A throwing score callback aborts with the completed steps attached.
GreedyChoiceResult greedy_choice_search(
    const std::vector<std::vector<std::string>>& slots,
    const std::function<double(const std::vector<std::string>&)>& score,
    const std::optional<std::string>& stop_token = std::nullopt,
    bool verbose = false);

}  // namespace hashtalk
