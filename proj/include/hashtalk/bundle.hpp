#pragma once

// One trained system as a directory of versioned JSON files: manifest,
// hash model, bit predictors, and the retrieval index. Saves build the
// directory next to the target and rename it into place, so an interrupted
// save never leaves a half-written bundle at the target path.

#include <string>

#include <nlohmann/json.hpp>

#include "hashtalk/generate.hpp"
#include "hashtalk/lsh.hpp"
#include "hashtalk/predict.hpp"

namespace hashtalk {

struct Bundle {
    HashModel model;
    BitPredictorSet predictors;
    ResponseIndex index;
    nlohmann::ordered_json manifest;  // config echo; schema_version added on
                                      // save when absent
};

nlohmann::ordered_json predictors_to_json(const BitPredictorSet& preds);
BitPredictorSet predictors_from_json(const nlohmann::json& j);

nlohmann::ordered_json index_to_json(const ResponseIndex& index);
ResponseIndex index_from_json(const nlohmann::json& j);

// Replaces any existing bundle at dir. The written bytes depend only on the
// bundle contents, so identical runs produce identical directories.
void save_bundle(const Bundle& bundle, const std::string& dir);

// Validates every file and the cross-widths (predictor input and index code
// width must both match the hash model).
Bundle load_bundle(const std::string& dir);

}  // namespace hashtalk
