#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "hashtalk/optimize.hpp"
#include "hashtalk/synthcorpus.hpp"
#include "testutil.hpp"

using namespace hashtalk;

namespace {

struct CorpusMaps {
    std::unordered_map<std::string, const Response*> by_tag;
    std::unordered_map<std::string, const DialoguePair*> by_pair;
};

CorpusMaps map_corpus(const Corpus& corpus) {
    CorpusMaps maps;
    for (const DialoguePair& p : corpus.pairs) {
        maps.by_tag[p.a.id + ":a"] = &p.a;
        maps.by_tag[p.b.id + ":b"] = &p.b;
        maps.by_pair[p.a.id] = &p;
    }
    return maps;
}

SyntheticData tiny_corpus(std::size_t pairs, std::uint64_t seed) {
    SyntheticConfig cfg;
    cfg.topics = 2;
    cfg.pairs = pairs;
    cfg.words_per_topic = 6;
    cfg.filler_words = 4;
    return make_synthetic_corpus(cfg, seed);
}

// Rescores one recorded step for one candidate through the public scorer.
double rescore(const CorpusMaps& maps,
               const std::vector<std::string>& reference_tags,
               const SearchStep& step, std::size_t h, int alpha,
               const HashVariant& variant, const KernelParams& params,
               const EmbeddingTable& table, const OptimizerConfig& cfg) {
    std::vector<const Response*> reference;
    for (const std::string& tag : reference_tags)
        reference.push_back(maps.by_tag.at(tag));
    std::vector<const Response*> eval_a, eval_b;
    for (const std::string& id : step.pair_ids) {
        const DialoguePair* pair = maps.by_pair.at(id);
        eval_a.push_back(&pair->a);
        eval_b.push_back(&pair->b);
    }
    return score_reference(reference, eval_a, eval_b, h, alpha, variant,
                           params, table, cfg, step.model_seed,
                           step.score_seed)
        .mi_lb_bits;
}

std::size_t argmax_first(const std::vector<double>& values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

}  // namespace

TEST_SUITE_BEGIN("optimize");

TEST_CASE("optimizer config validation") {
    OptimizerConfig cfg;
    cfg.eval_pairs = 6;
    CHECK_NOTHROW(cfg.validate());

    OptimizerConfig bad = cfg;
    bad.initial_size = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.final_size = bad.initial_size - 1;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.candidate_pool = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.folds = 1;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.eval_pairs = 2 * static_cast<std::size_t>(bad.folds) - 1;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.latents = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("reference search input validation") {
    const SyntheticData data = tiny_corpus(8, 42);
    const std::size_t n = data.corpus.split_indices(Split::Train).size();
    OptimizerConfig cfg;
    cfg.initial_size = 1;
    cfg.final_size = 1;
    cfg.candidate_pool = 4;
    cfg.eval_pairs = n + 1;
    cfg.seed = 7;
    CHECK_THROWS_AS(optimize_reference_set(data.corpus, HashVariant{},
                                           KernelParams{}, data.table, 4, 1,
                                           cfg),
                    ValidationError);
    cfg.eval_pairs = std::max<std::size_t>(4, n);
    cfg.final_size = 2 * n + 1;
    CHECK_THROWS_AS(optimize_reference_set(data.corpus, HashVariant{},
                                           KernelParams{}, data.table, 4, 1,
                                           cfg),
                    ValidationError);

    Corpus unsplit;
    unsplit.pairs = data.corpus.pairs;
    for (DialoguePair& p : unsplit.pairs) p.split = Split::Test;
    cfg.final_size = 1;
    cfg.eval_pairs = 4;
    CHECK_THROWS_AS(optimize_reference_set(unsplit, HashVariant{},
                                           KernelParams{}, data.table, 4, 1,
                                           cfg),
                    ValidationError);
}

TEST_CASE("exhaustive single-slot search matches an external rescoring") {
    const SyntheticData data = tiny_corpus(8, 42);
    const CorpusMaps maps = map_corpus(data.corpus);
    const std::size_t n = data.corpus.split_indices(Split::Train).size();
    REQUIRE(n >= 4);

    OptimizerConfig cfg;
    cfg.initial_size = 1;
    cfg.final_size = 1;
    cfg.candidate_pool = 2 * n;
    cfg.eval_pairs = n;
    cfg.seed = 77;
    cfg.verbose = true;
    const HashVariant variant;
    const KernelParams params;

    const OptimizedReference got = optimize_reference_set(
        data.corpus, variant, params, data.table, 8, 1, cfg);

    REQUIRE(got.trace.steps.size() == 1);
    const SearchStep& step = got.trace.steps[0];
    CHECK(step.pool_size == 2 * n);
    REQUIRE(step.candidates.size() == 2 * n);
    REQUIRE(step.scores.size() == 2 * n);
    REQUIRE(step.pair_ids.size() == n);
    CHECK(got.initial_ids.size() == 1);
    CHECK(got.model.reference_size() == 1);
    CHECK(got.truncated_steps == 0);

    CHECK(step.mi_lb_bits ==
          *std::max_element(step.scores.begin(), step.scores.end()));
    CHECK(step.chosen == step.candidates[argmax_first(step.scores)]);

    std::vector<double> rescored;
    for (const std::string& tag : step.candidates)
        rescored.push_back(
            rescore(maps, {tag}, step, 8, 1, variant, params, data.table,
                    cfg));
    for (std::size_t i = 0; i < rescored.size(); ++i)
        CHECK(rescored[i] == step.scores[i]);
    CHECK(step.chosen == step.candidates[argmax_first(rescored)]);
}

TEST_CASE("kernel evaluations stay within twice the step-sum bound") {
    const SyntheticData data = tiny_corpus(8, 42);
    const std::size_t n = data.corpus.split_indices(Split::Train).size();
    OptimizerConfig cfg;
    cfg.initial_size = 1;
    cfg.final_size = 1;
    cfg.candidate_pool = 2 * n;
    cfg.eval_pairs = n;
    cfg.seed = 77;

    reset_kernel_eval_count();
    optimize_reference_set(data.corpus, HashVariant{}, KernelParams{},
                           data.table, 8, 1, cfg);
    const std::uint64_t used = kernel_eval_count();
    const std::uint64_t m = cfg.final_size;
    const std::uint64_t bound = cfg.eval_pairs * (m * m + m * cfg.candidate_pool);
    CHECK(used <= 2 * bound);
    CHECK(2 * used >= bound);
}

TEST_CASE("growing search replays step by step through the public scorer") {
    const SyntheticData data = tiny_corpus(12, 99);
    const CorpusMaps maps = map_corpus(data.corpus);
    const std::size_t n = data.corpus.split_indices(Split::Train).size();
    REQUIRE(n >= 6);

    OptimizerConfig cfg;
    cfg.initial_size = 2;
    cfg.final_size = 3;
    cfg.candidate_pool = 6;
    cfg.eval_pairs = 6;
    cfg.seed = 5;
    cfg.verbose = true;
    const HashVariant variant;
    const KernelParams params;

    const OptimizedReference got = optimize_reference_set(
        data.corpus, variant, params, data.table, 6, 1, cfg);

    REQUIRE(got.trace.steps.size() == 3);
    REQUIRE(got.initial_ids.size() == 2);
    CHECK(got.model.reference_size() == 3);
    CHECK(got.truncated_steps == 0);

    // reference contents seen by each step: slot 0 is replaced first, then
    // slot 1, then the set grows by one
    const std::vector<std::vector<std::string>> frames = {
        {"", got.initial_ids[1]},
        {got.trace.steps[0].chosen, ""},
        {got.trace.steps[0].chosen, got.trace.steps[1].chosen, ""},
    };
    for (std::size_t s = 0; s < 3; ++s) {
        const SearchStep& step = got.trace.steps[s];
        CHECK(step.step == s + 1);
        CHECK(step.pool_size == 6);
        REQUIRE(step.scores.size() == 6);
        CHECK(step.mi_lb_bits ==
              *std::max_element(step.scores.begin(), step.scores.end()));
        CHECK(step.chosen == step.candidates[argmax_first(step.scores)]);

        const std::size_t open = std::min<std::size_t>(s, frames[s].size() - 1);
        for (std::size_t ci = 0; ci < step.candidates.size(); ++ci) {
            std::vector<std::string> tags = frames[s];
            tags[open] = step.candidates[ci];
            CHECK(rescore(maps, tags, step, 6, 1, variant, params, data.table,
                          cfg) == step.scores[ci]);
        }
    }

    const OptimizedReference again = optimize_reference_set(
        data.corpus, variant, params, data.table, 6, 1, cfg);
    CHECK(again.initial_ids == got.initial_ids);
    REQUIRE(again.trace.steps.size() == 3);
    for (std::size_t s = 0; s < 3; ++s) {
        CHECK(again.trace.steps[s].chosen == got.trace.steps[s].chosen);
        CHECK(again.trace.steps[s].scores == got.trace.steps[s].scores);
    }
    REQUIRE(again.model.reference_size() == got.model.reference_size());
    for (std::size_t i = 0; i < got.model.reference_size(); ++i)
        CHECK(again.model.reference[i].raw_text ==
              got.model.reference[i].raw_text);
}

TEST_CASE("small pools are truncated and counted") {
    const SyntheticData data = tiny_corpus(8, 42);
    const std::size_t n = data.corpus.split_indices(Split::Train).size();
    OptimizerConfig cfg;
    cfg.initial_size = 1;
    cfg.final_size = 2;
    cfg.candidate_pool = 1000;
    cfg.eval_pairs = std::max<std::size_t>(4, n);
    cfg.seed = 3;

    const OptimizedReference got = optimize_reference_set(
        data.corpus, HashVariant{}, KernelParams{}, data.table, 4, 1, cfg);
    CHECK(got.truncated_steps == 2);
    for (const SearchStep& step : got.trace.steps)
        CHECK(step.pool_size == 2 * n);
}

TEST_CASE("grid search returns the one cell of a degenerate grid") {
    const SyntheticData data = tiny_corpus(12, 99);
    OptimizerConfig cfg;
    cfg.initial_size = 2;
    cfg.final_size = 4;
    cfg.candidate_pool = 4;
    cfg.eval_pairs = 6;
    cfg.seed = 11;

    ThetaGrids grids;
    grids.lambdas = {0.5};
    grids.zetas = {0.0};
    grids.alphas = {1};
    const GridSearchResult got = grid_search_theta(
        data.corpus, HashVariant{}, KernelParams{}, data.table, 6, grids, cfg);
    CHECK(got.params.lambda == 0.5);
    CHECK(got.params.zeta == 0.0);
    CHECK(got.alpha == 1);
    CHECK(got.trace.steps.size() == 1);
    CHECK(got.mi_lb_bits == got.trace.steps[0].mi_lb_bits);
    CHECK(got.reference_ids.size() == 4);
    CHECK(got.pair_ids.size() == 6);
}

TEST_CASE("grid search winner survives an external rescoring of all cells") {
    const SyntheticData data = tiny_corpus(12, 99);
    const CorpusMaps maps = map_corpus(data.corpus);
    OptimizerConfig cfg;
    cfg.initial_size = 2;
    cfg.final_size = 4;
    cfg.candidate_pool = 4;
    cfg.eval_pairs = 6;
    cfg.seed = 11;

    ThetaGrids grids;
    grids.lambdas = {0.3, 0.7};
    grids.zetas = {-0.2, 0.2};
    grids.alphas = {1};
    const HashVariant variant;
    const GridSearchResult got = grid_search_theta(
        data.corpus, variant, KernelParams{}, data.table, 6, grids, cfg);
    REQUIRE(got.trace.steps.size() == 4);

    std::vector<const Response*> reference, eval_a, eval_b;
    for (const std::string& tag : got.reference_ids)
        reference.push_back(maps.by_tag.at(tag));
    for (const std::string& id : got.pair_ids) {
        eval_a.push_back(&maps.by_pair.at(id)->a);
        eval_b.push_back(&maps.by_pair.at(id)->b);
    }

    std::vector<double> scores;
    double best = 0.0;
    KernelParams best_params;
    bool have = false;
    std::size_t cell = 0;
    for (double lambda : grids.lambdas) {
        for (double zeta : grids.zetas) {
            for (int alpha : grids.alphas) {
                KernelParams p;
                p.lambda = lambda;
                p.zeta = zeta;
                const double score =
                    score_reference(reference, eval_a, eval_b, 6, alpha,
                                    variant, p, data.table, cfg,
                                    got.trace.steps[cell].model_seed,
                                    got.trace.steps[cell].score_seed)
                        .mi_lb_bits;
                CHECK(score == got.trace.steps[cell].mi_lb_bits);
                scores.push_back(score);
                if (!have || score > best) {
                    have = true;
                    best = score;
                    best_params = p;
                }
                ++cell;
            }
        }
    }
    CHECK(got.mi_lb_bits == best);
    CHECK(got.params.lambda == best_params.lambda);
    CHECK(got.params.zeta == best_params.zeta);

    const GridSearchResult again = grid_search_theta(
        data.corpus, variant, KernelParams{}, data.table, 6, grids, cfg);
    CHECK(again.params.lambda == got.params.lambda);
    CHECK(again.params.zeta == got.params.zeta);
    CHECK(again.mi_lb_bits == got.mi_lb_bits);
}

TEST_CASE("grid search rejects empty axes") {
    const SyntheticData data = tiny_corpus(8, 42);
    OptimizerConfig cfg;
    cfg.initial_size = 1;
    cfg.final_size = 2;
    cfg.eval_pairs = 4;
    ThetaGrids grids;
    grids.lambdas.clear();
    CHECK_THROWS_AS(grid_search_theta(data.corpus, HashVariant{},
                                      KernelParams{}, data.table, 4, grids,
                                      cfg),
                    ValidationError);
}

TEST_CASE("choice search fixes slots greedily") {
    const std::vector<std::vector<std::string>> slots = {
        {"a0", "a1", "a2"}, {"b0", "b1"}, {"c0", "c1", "c2"}};
    const std::unordered_map<std::string, double> value = {
        {"a0", 0.1}, {"a1", 0.9}, {"a2", 0.4}, {"b0", 0.7},
        {"b1", 0.2}, {"c0", 0.0}, {"c1", 0.3}, {"c2", 0.8}};
    auto additive = [&](const std::vector<std::string>& chosen) {
        double total = 0.0;
        for (const std::string& v : chosen) total += value.at(v);
        return total;
    };

    const GreedyChoiceResult got =
        greedy_choice_search(slots, additive, std::nullopt, true);
    CHECK(got.chosen == std::vector<std::string>{"a1", "b0", "c2"});
    CHECK_FALSE(got.stopped_early);
    REQUIRE(got.trace.steps.size() == 3);
    CHECK(got.trace.steps[2].mi_lb_bits == doctest::Approx(0.9 + 0.7 + 0.8));
    for (const SearchStep& step : got.trace.steps) {
        REQUIRE(step.scores.size() == step.pool_size);
        CHECK(step.mi_lb_bits ==
              *std::max_element(step.scores.begin(), step.scores.end()));
    }

    // additive structure makes greedy equal the exhaustive argmax
    double best = -1.0;
    std::vector<std::string> best_combo;
    for (const auto& a : slots[0])
        for (const auto& b : slots[1])
            for (const auto& c : slots[2]) {
                const double total = additive({a, b, c});
                if (total > best) {
                    best = total;
                    best_combo = {a, b, c};
                }
            }
    CHECK(got.chosen == best_combo);
}

TEST_CASE("choice search breaks ties toward the earliest candidate") {
    const GreedyChoiceResult got = greedy_choice_search(
        {{"x", "y", "z"}}, [](const std::vector<std::string>&) { return 1.0; });
    CHECK(got.chosen == std::vector<std::string>{"x"});
}

TEST_CASE("choice search stops when the sentinel wins") {
    const std::vector<std::vector<std::string>> slots = {
        {"a", "none"}, {"b", "none"}, {"c", "none"}, {"d", "none"}};
    auto score = [](const std::vector<std::string>& chosen) {
        // slot 1 prefers its value, slot 2 prefers stopping
        if (chosen.size() == 1) return chosen[0] == "a" ? 1.0 : 0.0;
        return chosen.back() == "none" ? 1.0 : 0.0;
    };
    const GreedyChoiceResult got = greedy_choice_search(
        slots, score, std::optional<std::string>("none"));
    CHECK(got.stopped_early);
    CHECK(got.trace.steps.size() == 2);
    CHECK(got.chosen == std::vector<std::string>{"a"});
    CHECK(got.trace.steps[1].chosen == "none");
}

TEST_CASE("choice search aborts with the completed steps attached") {
    const std::vector<std::vector<std::string>> slots = {
        {"a"}, {"b"}, {"c"}};
    auto score = [](const std::vector<std::string>& chosen) {
        if (chosen.size() == 2) throw Error("scorer exploded");
        return 1.0;
    };
    try {
        greedy_choice_search(slots, score);
        FAIL("expected SearchAbort");
    } catch (const SearchAbort& e) {
        CHECK(e.partial().steps.size() == 1);
        CHECK(std::string(e.what()).find("slot 2") != std::string::npos);
    }
}

TEST_CASE("choice search validates its slots") {
    auto one = [](const std::vector<std::string>&) { return 0.0; };
    CHECK_THROWS_AS(greedy_choice_search({}, one), ValidationError);
    CHECK_THROWS_AS(greedy_choice_search({{"a"}, {}}, one), ValidationError);
}

TEST_SUITE_END();
