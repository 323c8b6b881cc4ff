#include <doctest.h>

#include <cstdio>

#include "hashtalk/synthcorpus.hpp"

using namespace hashtalk;

namespace {

SyntheticConfig small_config() {
    SyntheticConfig cfg;
    cfg.topics = 4;
    cfg.pairs = 60;
    cfg.words_per_topic = 6;
    cfg.filler_words = 4;
    return cfg;
}

}  // namespace

TEST_SUITE("synthcorpus") {

TEST_CASE("generator is deterministic and shaped as configured") {
    const SyntheticConfig cfg = small_config();
    const SyntheticData a = make_synthetic_corpus(cfg, 1234);
    const SyntheticData b = make_synthetic_corpus(cfg, 1234);
    REQUIRE(a.corpus.size() == 60);
    CHECK(a.table.dim == 8);
    CHECK(a.table.vectors.size() == 4 * 6 + 4);
    for (std::size_t i = 0; i < a.corpus.size(); ++i) {
        const DialoguePair& p = a.corpus.pairs[i];
        CHECK(p.a.tokens == b.corpus.pairs[i].a.tokens);
        CHECK(p.b.tokens == b.corpus.pairs[i].b.tokens);
        CHECK(p.split == b.corpus.pairs[i].split);
        CHECK(p.a.tokens.size() >= cfg.min_tokens);
        CHECK(p.a.tokens.size() <= cfg.max_tokens);
        CHECK(topic_of_id(p.a.id) == static_cast<int>(i % 4));
        CHECK(p.split != Split::Unassigned);
    }
    const SyntheticData c = make_synthetic_corpus(cfg, 99);
    bool any_differs = false;
    for (std::size_t i = 0; i < c.corpus.size(); ++i)
        if (c.corpus.pairs[i].a.tokens != a.corpus.pairs[i].a.tokens)
            any_differs = true;
    CHECK(any_differs);
}

TEST_CASE("copy task repeats the prompt") {
    SyntheticConfig cfg = small_config();
    cfg.copy_task = true;
    const SyntheticData data = make_synthetic_corpus(cfg, 7);
    for (const DialoguePair& p : data.corpus.pairs) {
        CHECK(p.b.raw_text == p.a.raw_text);
        CHECK(p.b.tokens == p.a.tokens);
    }
}

TEST_CASE("pair ids carry their topic") {
    CHECK(topic_of_id("t3_17") == 3);
    CHECK(topic_of_id("t12_0") == 12);
    CHECK(topic_of_id("x3_1") == -1);
    CHECK(topic_of_id("t_1") == -1);
    CHECK(topic_of_id("t3a_1") == -1);
    CHECK(topic_of_id("") == -1);
}

TEST_CASE("written files load back identically") {
    const SyntheticData data = make_synthetic_corpus(small_config(), 1234);
    const std::string corpus_path = "tmp_synth_corpus.jsonl";
    const std::string vec_path = "tmp_synth_vectors.txt";
    write_corpus_jsonl(data.corpus, corpus_path);
    write_embeddings(data.table, vec_path);

    const Corpus loaded = load_corpus(corpus_path);
    REQUIRE(loaded.size() == data.corpus.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded.pairs[i].a.id == data.corpus.pairs[i].a.id);
        CHECK(loaded.pairs[i].a.tokens == data.corpus.pairs[i].a.tokens);
        CHECK(loaded.pairs[i].b.tokens == data.corpus.pairs[i].b.tokens);
        CHECK(loaded.pairs[i].split == data.corpus.pairs[i].split);
    }

    const EmbeddingTable table = load_embeddings(vec_path);
    REQUIRE(table.dim == data.table.dim);
    REQUIRE(table.vectors.size() == data.table.vectors.size());
    for (const auto& [token, vec] : data.table.vectors) {
        REQUIRE(table.contains(token));
        CHECK(*table.find(token) == vec);
    }
    std::remove(corpus_path.c_str());
    std::remove(vec_path.c_str());
}

TEST_CASE("config validation") {
    SyntheticConfig cfg = small_config();
    cfg.topics = 0;
    CHECK_THROWS_AS(make_synthetic_corpus(cfg, 1), ValidationError);
    cfg = small_config();
    cfg.min_tokens = 5;
    cfg.max_tokens = 4;
    CHECK_THROWS_AS(make_synthetic_corpus(cfg, 1), ValidationError);
    cfg = small_config();
    cfg.filler_rate = 1.0;
    CHECK_THROWS_AS(make_synthetic_corpus(cfg, 1), ValidationError);
    cfg = small_config();
    cfg.test_fraction = 0.6;
    cfg.valid_fraction = 0.5;
    CHECK_THROWS_AS(make_synthetic_corpus(cfg, 1), ValidationError);
}

}  // TEST_SUITE
