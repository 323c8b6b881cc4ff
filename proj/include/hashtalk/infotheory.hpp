#pragma once

// Information quantities over binary code matrices, all in bits (base 2):
// exact pattern-counting oracles for small spaces, a latent factor model
// fitted by alternating maximization of explained total correlation, and a
// variational lower bound on the mutual information between paired codes.
//
// The bound for paired codes (c^t, c^p) decomposes as
//     sum_j H(c^t_j)  -  TC(c^t : Y)  +  sum_j <log2 q(c^t_j | c^p)>
// where Y is a latent summary of c^t and q is a per-bit proposal
// distribution; any proposal and any latent summary give a valid bound
// provided TC(c^t : Y) does not undershoot the dependence among target bits
// captured by the prompting code.

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "hashtalk/bitmatrix.hpp"
#include "hashtalk/error.hpp"
#include "hashtalk/predict.hpp"

namespace hashtalk {

// Proposal probabilities are clipped into [kProposalClip, 1 - kProposalClip]
// before taking logs.
inline constexpr double kProposalClip = 1e-3;

// Binary entropy of a probability, in bits.
double entropy_bits(double p);

// Entropy of one column's empirical marginal.
double column_entropy_bits(const BitMatrix& m, std::size_t j);

// sum_j H(C_j) - H(C) by exact pattern counting. Requires h <= 20.
double total_correlation_exact(const BitMatrix& m);

// H(C^t) + H(C^p) - H(C^t, C^p) by exact pattern counting over row pairs.
// Requires ct.h + cp.h <= 20 and matching row counts.
double mi_bruteforce(const BitMatrix& ct, const BitMatrix& cp);

struct PartitionOptimum {
    double tc_bits = 0.0;                    // best TC(C) - TC(C | Y)
    std::vector<std::uint32_t> cell_of_row;  // optimal cell per input row
    std::size_t cells = 0;
};

// Best deterministic latent assignment Y = f(row pattern) with at most
// `cells` distinct latent values, maximizing TC(C) - TC(C | Y). Exhaustive
// over pattern partitions (subset dynamic program); meant for small spaces.
PartitionOptimum best_partition_tc(const BitMatrix& m, std::size_t cells);

// Convenience wrapper pinned to the documented guard: h <= 8, 1 <= m <= 2,
// at most 16 distinct row patterns; m binary latents give 2^m cells.
double tc_explained_bruteforce(const BitMatrix& m, int latent_bits);

struct LatentFitConfig {
    int max_iters = 200;
    int restarts = 5;
    double tolerance = 1e-6;  // minimum improvement that counts as progress
    int patience = 8;         // iterations without progress before stopping

    void validate() const;
};

// Latent summary of a code matrix. Two flavors share the interface:
// a fitted soft model (binary latents with per-bit connection weights and
// conditional tables) and an exact deterministic pattern assignment used as
// an oracle in tests.
class LatentModel {
  public:
    enum class Kind { Fitted, Oracle };

    Kind kind = Kind::Fitted;
    int m = 0;               // number of binary latents (fitted)
    std::size_t h = 0;       // code width the model was built for

    // Fitted parameters; all tables clipped away from 0 and 1.
    std::vector<double> weight;     // m*h connection weights in [0, 1]
    std::vector<double> cond_one;   // m*h*2: p(c_j = 1 | y_k = v)
    std::vector<double> marginal;   // m: p(y_k = 1)
    std::vector<double> trace;      // best objective after each iteration
    bool converged = false;
    int best_restart = -1;

    // Oracle assignment: row pattern -> latent cell.
    std::unordered_map<std::uint64_t, std::uint32_t> pattern_cell;
    std::size_t cells = 0;

    // Estimated TC(C : Y) on the given rows. Fitted models evaluate their
    // own factorized estimate; oracle models count patterns exactly.
    double tc_explained_bits(const BitMatrix& rows) const;

    // Fitted models: posterior p(y_k = 1 | row) per latent.
    std::vector<double> posterior(const std::uint8_t* row) const;
};

// Alternating maximization: posteriors from current tables (E), tables,
// marginals, per-bit mutual informations and connection weights from
// posteriors (M). Keeps the best iterate of the best restart; ties between
// restarts resolve to the lowest restart index. A model that stopped on the
// iteration cap rather than on stalled progress reports converged = false.
LatentModel fit_latent_model(const BitMatrix& ct, int m,
                             const LatentFitConfig& cfg, std::uint64_t seed);

// Deterministic latent from an explicit per-row cell assignment.
LatentModel oracle_latent(const BitMatrix& ct,
                          const std::vector<std::uint32_t>& cell_of_row,
                          std::size_t cells);

// Oracle latent at the optimal partition with `cells` cells.
LatentModel oracle_latent_best(const BitMatrix& ct, std::size_t cells);

// Per-bit proposal distribution q(c^t_j = 1 | c^p row).
class BitProposal {
  public:
    virtual ~BitProposal() = default;
    virtual std::vector<double> prob_one(const std::uint8_t* cp_row) const = 0;
};

// Empirical conditional p(c^t_j = 1 | c^p pattern); rows with a pattern
// unseen at construction fall back to the target marginal.
class ExactConditionalProposal : public BitProposal {
  public:
    ExactConditionalProposal(const BitMatrix& ct, const BitMatrix& cp);
    std::vector<double> prob_one(const std::uint8_t* cp_row) const override;

  private:
    std::size_t cp_h_ = 0;
    std::vector<double> marginal_;
    std::unordered_map<std::uint64_t, std::vector<double>> cond_;
};

struct MiLbReport {
    double sum_marginal_entropy_bits = 0.0;
    double tc_explained_bits = 0.0;
    double sum_mean_log_q_bits = 0.0;  // never positive
    double mi_lb_bits = 0.0;           // = entropy terms - tc + log q term
    double entropy_ub_bits = 0.0;      // = sum of marginals - tc
    double nmi_lb = 0.0;               // mi_lb / entropy_ub when ub > 0
    std::optional<double> shuffled_mi_lb_bits;
    std::size_t n_eval = 0;
    int folds = 0;
};

// Cross-fitted bound: rows are dealt into `folds` folds (seeded); each
// fold's per-bit proposals are forests trained on the other folds. Requires
// at least 2 folds and 2*folds rows.
MiLbReport mi_lower_bound(const BitMatrix& ct, const BitMatrix& cp,
                          const LatentModel& latent,
                          const RandomForestConfig& proposal, int folds,
                          std::uint64_t seed);

// Same bound with an externally supplied proposal evaluated on all rows.
MiLbReport mi_lower_bound_fixed(const BitMatrix& ct, const BitMatrix& cp,
                                const LatentModel& latent,
                                const BitProposal& proposal);

// Bound recomputed after a seeded permutation of the cp rows (pairing
// destroyed, marginals and latent term unchanged). The proposal is retrained
// on the shuffled pairing.
double shuffled_mi_lb(const BitMatrix& ct, const BitMatrix& cp,
                      const LatentModel& latent,
                      const RandomForestConfig& proposal, int folds,
                      std::uint64_t seed);

}  // namespace hashtalk
