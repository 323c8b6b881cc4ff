#pragma once

// Dialogue corpus model: paired two-party exchanges (a prompting utterance A
// and its response B), tokenization, train/valid/test splitting and word
// vector tables.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "hashtalk/error.hpp"

namespace hashtalk {

enum class Role { A, B };

enum class Split { Unassigned, Train, Valid, Test };

const char* to_string(Split s);
std::optional<Split> parse_split(const std::string& s);

struct Response {
    std::string id;       // pair id, shared by both sides of an exchange
    Role role = Role::A;
    std::string raw_text;
    std::vector<std::string> tokens;
    std::vector<std::string> pos_tags;  // empty, or one tag per token
};

struct DialoguePair {
    Response a;  // prompting side
    Response b;  // responding side
    Split split = Split::Unassigned;
};

// Lowercases, splits on whitespace and makes each of . , ? ! ; : " ( )
// a standalone token. Applying it to re-joined output is a fixed point.
std::vector<std::string> tokenize(const std::string& text);

struct Corpus {
    std::vector<DialoguePair> pairs;

    std::size_t size() const { return pairs.size(); }

    // Indices of pairs carrying the given split label.
    std::vector<std::size_t> split_indices(Split s) const;

    // All responses of one role, in corpus order.
    std::vector<const Response*> side(Role r) const;

    // All A responses followed by all B responses (2N entries). Reference
    // sets and retrieval pools are drawn from this view.
    std::vector<const Response*> pooled() const;
};

// Reads newline-delimited JSON records with fields:
//   id (string, required, unique), a_text, b_text (required, non-empty after
//   tokenization), a_pos, b_pos (optional, space-separated tags, one per
//   token), split (optional: train|valid|test), context (optional, prepended
//   to a_text so multi-turn history folds into the prompting side).
// Any malformed line fails the whole load; the error names the line.
Corpus load_corpus(const std::string& path);
Corpus load_corpus(std::istream& in, const std::string& name);

// Pure seeded re-split: carves round(N * test_fraction) pairs for test, then
// round(remaining * valid_fraction) for validation; the rest train. Existing
// labels are overwritten. Requires 0 < fractions and their sum < 1.
Corpus assign_splits(const Corpus& corpus, double test_fraction,
                     double valid_fraction, std::uint64_t seed);

struct EmbeddingTable {
    std::size_t dim = 0;
    std::unordered_map<std::string, std::vector<double>> vectors;
    std::size_t duplicate_count = 0;  // later repeats of a token, dropped

    bool contains(const std::string& token) const {
        return vectors.find(token) != vectors.end();
    }
    const std::vector<double>* find(const std::string& token) const {
        auto it = vectors.find(token);
        return it == vectors.end() ? nullptr : &it->second;
    }
};

// Reads whitespace-separated text vectors: optional "count dim" header line,
// then one token followed by its components per line. The first occurrence
// of a duplicated token wins; repeats are counted in duplicate_count.
EmbeddingTable load_embeddings(const std::string& path);
EmbeddingTable load_embeddings(std::istream& in, const std::string& name);

}  // namespace hashtalk
