#include "hashtalk/synthcorpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hashtalk/error.hpp"
#include "hashtalk/rng.hpp"

namespace hashtalk {

void SyntheticConfig::validate() const {
    if (topics < 1) throw ValidationError("synthetic corpus: need at least 1 topic");
    if (pairs < 1) throw ValidationError("synthetic corpus: need at least 1 pair");
    if (words_per_topic < 1)
        throw ValidationError("synthetic corpus: need at least 1 word per topic");
    if (filler_words < 1)
        throw ValidationError("synthetic corpus: need at least 1 filler word");
    if (min_tokens < 1 || max_tokens < min_tokens)
        throw ValidationError("synthetic corpus: bad token length range");
    if (filler_rate < 0.0 || filler_rate >= 1.0)
        throw ValidationError("synthetic corpus: filler rate outside [0, 1)");
    if (!(jitter >= 0.0))
        throw ValidationError("synthetic corpus: jitter must be non-negative");
    if (!(test_fraction > 0.0) || !(valid_fraction > 0.0) ||
        test_fraction + valid_fraction >= 1.0)
        throw ValidationError("synthetic corpus: bad split fractions");
}

namespace {

std::string topic_word(int topic, int j) {
    return "t" + std::to_string(topic) + "w" + std::to_string(j);
}

std::string filler_word(int j) { return "f" + std::to_string(j); }

std::vector<std::string> draw_tokens(rng::Engine& eng,
                                     const SyntheticConfig& cfg, int topic) {
    const std::size_t len =
        cfg.min_tokens +
        rng::uniform_index(eng, cfg.max_tokens - cfg.min_tokens + 1);
    std::vector<std::string> out;
    out.reserve(len);
    for (std::size_t t = 0; t < len; ++t) {
        if (rng::uniform_real(eng) < cfg.filler_rate) {
            out.push_back(filler_word(static_cast<int>(
                rng::uniform_index(eng, cfg.filler_words))));
        } else {
            out.push_back(topic_word(
                topic,
                static_cast<int>(rng::uniform_index(eng, cfg.words_per_topic))));
        }
    }
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

std::vector<double> jittered_axis(rng::Engine& eng, std::size_t dim,
                                  std::size_t axis, double jitter) {
    std::vector<double> v(dim);
    for (std::size_t d = 0; d < dim; ++d)
        v[d] = jitter * (2.0 * rng::uniform_real(eng) - 1.0);
    v[axis] += 1.0;
    return v;
}

}  // namespace

SyntheticData make_synthetic_corpus(const SyntheticConfig& cfg,
                                    std::uint64_t seed) {
    cfg.validate();
    SyntheticData out;

    auto vec_eng = rng::make_engine(rng::derive_seed(seed, 0x7ec5));
    const std::size_t dim =
        static_cast<std::size_t>(cfg.topics + cfg.filler_words);
    out.table.dim = dim;
    for (int k = 0; k < cfg.topics; ++k)
        for (int j = 0; j < cfg.words_per_topic; ++j)
            out.table.vectors.emplace(
                topic_word(k, j),
                jittered_axis(vec_eng, dim, static_cast<std::size_t>(k),
                              cfg.jitter));
    for (int j = 0; j < cfg.filler_words; ++j)
        out.table.vectors.emplace(
            filler_word(j),
            jittered_axis(vec_eng, dim,
                          static_cast<std::size_t>(cfg.topics + j), cfg.jitter));

    auto text_eng = rng::make_engine(rng::derive_seed(seed, 0x7e17));
    out.corpus.pairs.reserve(cfg.pairs);
    for (std::size_t i = 0; i < cfg.pairs; ++i) {
        const int topic = static_cast<int>(i % cfg.topics);
        DialoguePair pair;
        pair.a.id = "t" + std::to_string(topic) + "_" + std::to_string(i);
        pair.a.role = Role::A;
        pair.a.tokens = draw_tokens(text_eng, cfg, topic);
        pair.a.raw_text = join_tokens(pair.a.tokens);
        pair.b.id = pair.a.id;
        pair.b.role = Role::B;
        pair.b.tokens =
            cfg.copy_task ? pair.a.tokens : draw_tokens(text_eng, cfg, topic);
        pair.b.raw_text = join_tokens(pair.b.tokens);
        out.corpus.pairs.push_back(std::move(pair));
    }
    out.corpus =
        assign_splits(out.corpus, cfg.test_fraction, cfg.valid_fraction, seed);
    return out;
}

int topic_of_id(const std::string& id) {
    if (id.size() < 4 || id[0] != 't') return -1;
    const std::size_t sep = id.find('_');
    if (sep == std::string::npos || sep < 2) return -1;
    int topic = 0;
    for (std::size_t i = 1; i < sep; ++i) {
        if (id[i] < '0' || id[i] > '9') return -1;
        topic = topic * 10 + (id[i] - '0');
    }
    return topic;
}

void write_corpus_jsonl(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write corpus file: " + path);
    for (const DialoguePair& pair : corpus.pairs) {
        nlohmann::ordered_json rec;
        rec["id"] = pair.a.id;
        rec["a_text"] = pair.a.raw_text;
        rec["b_text"] = pair.b.raw_text;
        if (pair.split != Split::Unassigned) rec["split"] = to_string(pair.split);
        out << rec.dump() << '\n';
    }
    if (!out) throw Error("failed writing corpus file: " + path);
}

void write_embeddings(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write embeddings file: " + path);
    const std::map<std::string, const std::vector<double>*> sorted = [&] {
        std::map<std::string, const std::vector<double>*> m;
        for (const auto& [token, vec] : table.vectors) m.emplace(token, &vec);
        return m;
    }();
    out << table.vectors.size() << ' ' << table.dim << '\n';
    out.precision(17);
    for (const auto& [token, vec] : sorted) {
        out << token;
        for (double x : *vec) out << ' ' << x;
        out << '\n';
    }
    if (!out) throw Error("failed writing embeddings file: " + path);
}

}  // namespace hashtalk
