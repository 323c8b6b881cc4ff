#pragma once

// Response generation by retrieval: the inferred responder hashcode is
// matched against the codes of all training responses by Hamming distance
// and the closest stored text is returned verbatim.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hashtalk/bitmatrix.hpp"
#include "hashtalk/corpus.hpp"
#include "hashtalk/error.hpp"
#include "hashtalk/lsh.hpp"
#include "hashtalk/predict.hpp"

namespace hashtalk {

struct ResponseIndex {
    BitMatrix codes;                 // one row per training response
    std::vector<std::string> texts;  // aligned to rows
    std::vector<std::string> ids;    // pair ids, aligned to rows

    std::size_t size() const { return texts.size(); }
};

// Encodes every training-split responding utterance. Duplicate responses
// keep their own rows.
ResponseIndex build_index(const HashModel& model, const Corpus& corpus,
                          const EmbeddingTable& table);

struct RetrievalResult {
    std::string text;
    std::string id;
    std::size_t row = 0;
    std::size_t hamming_distance = 0;
};

// Linear scan for the minimal Hamming distance; equal distances resolve to
// the lowest row index. Rows whose pair id equals exclude_id are skipped
// when exclude_id is non-null.
RetrievalResult nearest_response(const ResponseIndex& index,
                                 const Hashcode& code,
                                 const std::string* exclude_id = nullptr);

struct RespondDiagnostics {
    Hashcode prompt_code;      // encoding of the prompting utterance
    Prediction prediction;     // inferred responder code and probabilities
    RetrievalResult retrieval;
};

// encode -> predict -> retrieve. Errors carry the failing stage's name.
// exclude_self skips index rows sharing the utterance's pair id.
std::pair<std::string, RespondDiagnostics> respond(
    const HashModel& model, const BitPredictorSet& predictors,
    const ResponseIndex& index, const Response& utterance,
    const EmbeddingTable& table, bool exclude_self = false);

}  // namespace hashtalk
