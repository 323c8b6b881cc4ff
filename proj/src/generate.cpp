#include "hashtalk/generate.hpp"

namespace hashtalk {

ResponseIndex build_index(const HashModel& model, const Corpus& corpus,
                          const EmbeddingTable& table) {
    const std::vector<std::size_t> train = corpus.split_indices(Split::Train);
    if (train.empty())
        throw ValidationError("build_index: corpus has no training split");
    std::vector<const Response*> responses;
    responses.reserve(train.size());
    ResponseIndex index;
    for (std::size_t i : train) {
        responses.push_back(&corpus.pairs[i].b);
        index.texts.push_back(corpus.pairs[i].b.raw_text);
        index.ids.push_back(corpus.pairs[i].b.id);
    }
    index.codes = encode_all(model, responses, table);
    return index;
}

RetrievalResult nearest_response(const ResponseIndex& index,
                                 const Hashcode& code,
                                 const std::string* exclude_id) {
    if (index.size() == 0) throw ValidationError("nearest_response: empty index");
    if (code.size() != index.codes.h)
        throw ValidationError("nearest_response: code width mismatch");
    bool found = false;
    std::size_t best_row = 0, best_distance = 0;
    for (std::size_t row = 0; row < index.codes.n; ++row) {
        if (exclude_id && index.ids[row] == *exclude_id) continue;
        std::size_t d = 0;
        for (std::size_t j = 0; j < index.codes.h; ++j)
            if (index.codes.at(row, j) != code[j]) ++d;
        if (!found || d < best_distance) {
            found = true;
            best_row = row;
            best_distance = d;
        }
    }
    if (!found)
        throw ValidationError("nearest_response: every row was excluded");
    RetrievalResult out;
    out.text = index.texts[best_row];
    out.id = index.ids[best_row];
    out.row = best_row;
    out.hamming_distance = best_distance;
    return out;
}

namespace {

[[noreturn]] void rethrow_staged(const char* stage, const Error& e) {
    throw ValidationError(std::string(stage) + " stage: " + e.what());
}

}  // namespace

std::pair<std::string, RespondDiagnostics> respond(
    const HashModel& model, const BitPredictorSet& predictors,
    const ResponseIndex& index, const Response& utterance,
    const EmbeddingTable& table, bool exclude_self) {
    if (predictors.input_width != model.h)
        throw ValidationError("respond: predictor input width differs from the "
                              "hash model");
    if (predictors.output_bits() != index.codes.h)
        throw ValidationError("respond: predictor output width differs from "
                              "the index");

    RespondDiagnostics diag;
    try {
        diag.prompt_code = encode(model, utterance, table);
    } catch (const Error& e) {
        rethrow_staged("encode", e);
    }
    try {
        diag.prediction = predict_code(predictors, diag.prompt_code);
    } catch (const Error& e) {
        rethrow_staged("prediction", e);
    }
    try {
        const std::string* exclude = exclude_self ? &utterance.id : nullptr;
        diag.retrieval = nearest_response(index, diag.prediction.code, exclude);
    } catch (const Error& e) {
        rethrow_staged("retrieval", e);
    }
    return {diag.retrieval.text, diag};
}

}  // namespace hashtalk
