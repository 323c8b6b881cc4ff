#pragma once

// Kernelized locality-sensitive hashing. Each code bit is a tiny binary
// classifier over a random balanced-labeled subset of a shared reference
// set: either the label of the nearest subset member (RkNN) or a kernel
// max-margin separator trained on the subset (RMM). Encoding a response
// costs one kernel row against the reference set, shared across bits.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hashtalk/bitmatrix.hpp"
#include "hashtalk/corpus.hpp"
#include "hashtalk/error.hpp"
#include "hashtalk/kernel.hpp"

namespace hashtalk {

struct HashVariant {
    enum class Kind { RkNN, RMM };

    Kind kind = Kind::RkNN;
    int k = 1;      // RkNN: neighbors consulted
    double c = 1.0; // RMM: box constraint on the dual coefficients

    void validate() const;
};

// One code bit: a balanced-labeled subset of the reference set plus, for
// RMM, the trained dual state. A bit whose margin training degenerated
// falls back to nearest-neighbor and carries the fallback flag.
struct BitSpec {
    std::vector<std::size_t> members;  // 2*alpha distinct reference indices
    std::vector<std::uint8_t> labels;  // exactly alpha ones and alpha zeros
    std::vector<double> dual;          // RMM: one coefficient per member
    double bias = 0.0;
    bool fallback = false;
    int smo_iterations = 0;
};

struct HashModel {
    HashVariant variant;
    KernelParams params;
    std::vector<Response> reference;  // owned copies, size M
    std::vector<BitSpec> bits;        // size h
    std::size_t h = 0;
    int alpha = 0;
    std::uint64_t seed = 0;

    std::size_t reference_size() const { return reference.size(); }
};

using Hashcode = std::vector<std::uint8_t>;

// Draws each bit's 2*alpha-member subset and labels from the seed (one
// derived stream per bit, so bits are independent of evaluation order) and
// trains RMM bits on their subsets. Requires 2 <= 2*alpha <= |reference|.
HashModel build_hash_model(const std::vector<const Response*>& reference,
                           std::size_t h, int alpha, const HashVariant& variant,
                           const KernelParams& params,
                           const EmbeddingTable& table, std::uint64_t seed);

// Same construction with the subset size clamped to min(2*alpha,
// |reference|) and labels split as evenly as the clamped size allows. The
// reference-set search scores candidates through this while its set is
// still smaller than a full subset; one-member bits decide constantly.
HashModel build_hash_model_clamped(const std::vector<const Response*>& reference,
                                   std::size_t h, int alpha,
                                   const HashVariant& variant,
                                   const KernelParams& params,
                                   const EmbeddingTable& table,
                                   std::uint64_t seed);

// One kernel row K(s, reference) then one cheap decision per bit.
Hashcode encode(const HashModel& model, const Response& s,
                const EmbeddingTable& table);

// Decision half of encode for callers that manage kernel rows themselves,
// such as the reference-set search, which reuses all but one column across
// candidates. row holds K(s, reference) in reference order.
Hashcode encode_from_kernel_row(const HashModel& model,
                                const std::vector<double>& row);

// Row i is encode(responses[i]). Errors are re-raised naming the row.
BitMatrix encode_all(const HashModel& model,
                     const std::vector<const Response*>& responses,
                     const EmbeddingTable& table);

// Persistence. The JSON form is versioned and key-ordered; loading a saved
// model reproduces bit-identical encodings.
nlohmann::ordered_json hash_model_to_json(const HashModel& model);
HashModel hash_model_from_json(const nlohmann::json& j);
void save_hash_model(const HashModel& model, const std::string& path);
HashModel load_hash_model(const std::string& path);

}  // namespace hashtalk
