#pragma once

// Gap-weighted subsequence kernel over token sequences with soft token
// matches from word vectors. The dynamic program and a small exhaustive
// enumerator implement the same function; the enumerator exists to check the
// dynamic program and is restricted to short inputs.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hashtalk/corpus.hpp"
#include "hashtalk/error.hpp"

namespace hashtalk {

struct KernelParams {
    double lambda = 0.5;   // decay per unit of matched span, in (0, 1)
    double zeta = 0.0;     // cosine support threshold, in (-1, 1)
    int e_max = 16;        // longest subsequence length considered
    bool normalize = false;
    bool use_pos_tags = false;  // exact-tag match gates token similarity
    std::size_t max_tokens = 2000;  // longer responses keep their tail

    void validate() const;
};

// cs * max(0, 1 - (1 - cs) / (1 - zeta)) where cs is the cosine of wa, wb.
// Zero whenever cs <= zeta. Errors on dimension mismatch or a zero vector.
double token_similarity(const std::vector<double>& wa,
                        const std::vector<double>& wb, double zeta);

// Caches unit-normalized word vectors per token across kernel evaluations.
// Tokens absent from the table (or with zero-norm vectors) resolve to null
// and contribute similarity 0.
class TokenVectorCache {
  public:
    explicit TokenVectorCache(const EmbeddingTable& table) : table_(&table) {}
    const std::vector<double>* unit(const std::string& token) const;

  private:
    const EmbeddingTable* table_;
    mutable std::unordered_map<std::string, std::vector<double>> unit_;
    mutable std::unordered_set<std::string> missing_;
};

// Sum over subsequence lengths e = 1..e_max of all index-tuple pairs, each
// weighted by the product of token similarities and lambda^(span_s + span_t),
// where a span counts end - start + 1 positions.
double subsequence_kernel(const std::vector<std::string>& s,
                          const std::vector<std::string>& t,
                          const EmbeddingTable& table,
                          const KernelParams& params);

// Exhaustive enumeration of the same sum. Requires both inputs to have at
// most 8 tokens (after truncation).
double subsequence_kernel_bruteforce(const std::vector<std::string>& s,
                                     const std::vector<std::string>& t,
                                     const EmbeddingTable& table,
                                     const KernelParams& params);

// Kernel between two responses; applies the pos-tag gate when enabled and
// both sides carry tags.
double response_kernel(const Response& a, const Response& b,
                       const EmbeddingTable& table, const KernelParams& params);

struct KernelMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // row-major

    double at(std::size_t i, std::size_t j) const {
        return values[i * cols + j];
    }
    double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

// Dense pairwise kernel matrix. When both lists are the same responses in
// the same order the symmetric half is computed once and mirrored.
KernelMatrix kernel_matrix(const std::vector<const Response*>& rows,
                           const std::vector<const Response*>& cols,
                           const EmbeddingTable& table,
                           const KernelParams& params);

// Process-wide count of pairwise kernel evaluations, used for cost
// accounting of the reference-set search.
std::uint64_t kernel_eval_count();
void reset_kernel_eval_count();

// Process-wide count of responses that exceeded max_tokens and were
// truncated to their tail.
std::uint64_t kernel_truncation_count();
void reset_kernel_truncation_count();

}  // namespace hashtalk
