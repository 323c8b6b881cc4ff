#pragma once

// Seeded synthetic dialogue corpora for experiments and self-tests: topical
// exchanges where the responding side stays on the prompting side's topic,
// plus a copy-task variant where the response repeats the prompt verbatim.
// Word vectors come bundled, clustered by topic.

#include <cstdint>
#include <string>

#include "hashtalk/corpus.hpp"

namespace hashtalk {

struct SyntheticConfig {
    int topics = 8;
    std::size_t pairs = 2000;
    int words_per_topic = 12;
    int filler_words = 8;       // shared off-topic words
    std::size_t min_tokens = 4;
    std::size_t max_tokens = 9;
    double filler_rate = 0.2;   // chance a token is filler
    double jitter = 0.15;       // per-dimension word vector noise
    bool copy_task = false;     // response repeats the prompt verbatim
    double test_fraction = 0.1;
    double valid_fraction = 0.1;

    void validate() const;
};

struct SyntheticData {
    Corpus corpus;
    EmbeddingTable table;
};

// Pair ids are "t<topic>_<index>"; topics rotate over pairs so every topic
// appears equally often. Vector dimensionality is topics + filler_words.
SyntheticData make_synthetic_corpus(const SyntheticConfig& config,
                                    std::uint64_t seed);

// Topic index parsed from a pair id of the form "t<k>_<i>"; -1 otherwise.
int topic_of_id(const std::string& id);

// One JSON record per line with keys id, a_text, b_text and split (omitted
// when unassigned). Loadable by load_corpus.
void write_corpus_jsonl(const Corpus& corpus, const std::string& path);

// "count dim" header then one token per line in sorted token order, so the
// file is byte-stable. Loadable by load_embeddings.
void write_embeddings(const EmbeddingTable& table, const std::string& path);

}  // namespace hashtalk
