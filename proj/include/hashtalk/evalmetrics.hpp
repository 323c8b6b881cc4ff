#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "hashtalk/corpus.hpp"

namespace hashtalk {

// Embedding-based response similarity. Each metric returns a cosine in
// [-1, 1], or nullopt when a side has no usable word vectors (no token in
// the table, or the aggregate vector has zero norm). Out-of-vocabulary
// tokens are skipped, never substituted.

// Cosine of the two mean word vectors.
std::optional<double> embedding_average(const std::vector<std::string>& sm,
                                        const std::vector<std::string>& sa,
                                        const EmbeddingTable& table);

// Cosine of the two extrema vectors. Per dimension the extremum is the
// component of largest absolute value across the side's word vectors; on an
// exact magnitude tie between a positive and a negative component the
// positive one wins.
std::optional<double> embedding_extrema(const std::vector<std::string>& sm,
                                        const std::vector<std::string>& sa,
                                        const EmbeddingTable& table);

// Mean over sm's usable tokens of the best cosine against sa's usable
// tokens. One-directional (sm -> sa) unless symmetric, which averages the
// two directions.
std::optional<double> embedding_greedy(const std::vector<std::string>& sm,
                                       const std::vector<std::string>& sa,
                                       const EmbeddingTable& table,
                                       bool symmetric = false);

struct MetricSummary {
    std::vector<std::optional<double>> values;  // one slot per sample
    double mean = 0.0;    // over defined samples; 0 when none are defined
    double stddev = 0.0;  // population standard deviation, same domain
    std::size_t defined = 0;
    std::size_t undefined = 0;
};

struct MetricReport {
    std::size_t samples = 0;
    MetricSummary average;
    MetricSummary extrema;
    MetricSummary greedy;
};

// Scores system[i] against reference[i] under all three metrics. The lists
// must be aligned; a sample where a metric is undefined is excluded from
// that metric's mean and counted instead.
MetricReport corpus_eval(
    const std::vector<std::vector<std::string>>& system_tokens,
    const std::vector<std::vector<std::string>>& reference_tokens,
    const EmbeddingTable& table, bool symmetric_greedy = false);

}  // namespace hashtalk
