#include "hashtalk/optimize.hpp"

#include <limits>
#include <sstream>
#include <utility>

#include "hashtalk/rng.hpp"

namespace hashtalk {
namespace {

constexpr std::uint64_t kInitTag = 0x171a;
constexpr std::uint64_t kPoolTag = 0xca9d;
constexpr std::uint64_t kPairTag = 0x9a12;
constexpr std::uint64_t kScoreTag = 0x5c02;
constexpr std::uint64_t kModelTag = 0x30de;
constexpr std::uint64_t kRefTag = 0x9e15;

// Responses share their pair's id, so pool entries are tagged by side.
std::string side_tag(const Response& r) {
    return r.id + (r.role == Role::A ? ":a" : ":b");
}

struct TrainView {
    std::vector<std::size_t> pair_indices;   // into corpus.pairs
    std::vector<const Response*> pool;       // A then B per pair, 2N entries
};

TrainView train_view(const Corpus& corpus, const char* who) {
    TrainView view;
    view.pair_indices = corpus.split_indices(Split::Train);
    if (view.pair_indices.empty())
        throw ValidationError(std::string(who) + ": empty training split");
    view.pool.reserve(2 * view.pair_indices.size());
    for (std::size_t i : view.pair_indices)
        view.pool.push_back(&corpus.pairs[i].a);
    for (std::size_t i : view.pair_indices)
        view.pool.push_back(&corpus.pairs[i].b);
    return view;
}

void check_pair_budget(const TrainView& view, const OptimizerConfig& cfg,
                       const char* who) {
    if (cfg.eval_pairs > view.pair_indices.size())
        throw ValidationError(std::string(who) + ": eval_pairs " +
                              std::to_string(cfg.eval_pairs) +
                              " exceeds the " +
                              std::to_string(view.pair_indices.size()) +
                              " training pairs");
    if (cfg.final_size > view.pool.size())
        throw ValidationError(std::string(who) + ": final_size " +
                              std::to_string(cfg.final_size) +
                              " exceeds the " +
                              std::to_string(view.pool.size()) +
                              " pooled responses");
}

std::pair<std::vector<const Response*>, std::vector<const Response*>>
draw_eval_pairs(const Corpus& corpus, const TrainView& view,
                std::size_t count, std::uint64_t seed,
                std::vector<std::string>* ids_out) {
    auto eng = rng::make_engine(seed);
    const auto pick = rng::sample_without_replacement(
        view.pair_indices.size(), count, eng);
    std::vector<const Response*> eval_a, eval_b;
    eval_a.reserve(count);
    eval_b.reserve(count);
    for (std::size_t p : pick) {
        const DialoguePair& pair = corpus.pairs[view.pair_indices[p]];
        eval_a.push_back(&pair.a);
        eval_b.push_back(&pair.b);
        if (ids_out) ids_out->push_back(pair.a.id);
    }
    return {std::move(eval_a), std::move(eval_b)};
}

double score_candidate(const std::vector<const Response*>& slots,
                       std::size_t open, const KernelMatrix& k_fixed,
                       const KernelMatrix& k_cand, std::size_t pairs,
                       std::size_t h, int alpha, const HashVariant& variant,
                       const KernelParams& params, const EmbeddingTable& table,
                       const OptimizerConfig& cfg, std::uint64_t model_seed,
                       std::uint64_t score_seed) {
    const HashModel model = build_hash_model_clamped(
        slots, h, alpha, variant, params, table, model_seed);
    const std::size_t s = slots.size();
    std::vector<double> row(s);
    BitMatrix cp(pairs, h), ct(pairs, h);
    for (std::size_t i = 0; i < 2 * pairs; ++i) {
        for (std::size_t t = 0; t < s; ++t)
            row[t] = t == open ? k_cand.at(i, 0)
                               : k_fixed.at(i, t < open ? t : t - 1);
        const Hashcode code = encode_from_kernel_row(model, row);
        BitMatrix& target = i < pairs ? cp : ct;
        const std::size_t r = i < pairs ? i : i - pairs;
        for (std::size_t j = 0; j < h; ++j) target.set(r, j, code[j]);
    }
    const LatentModel latent =
        fit_latent_model(ct, cfg.latents, cfg.latent, score_seed);
    return mi_lower_bound(ct, cp, latent, cfg.forest, cfg.folds, score_seed)
        .mi_lb_bits;
}

}  // namespace

void OptimizerConfig::validate() const {
    if (initial_size < 1)
        throw ValidationError("optimizer: initial_size must be positive");
    if (final_size < initial_size)
        throw ValidationError("optimizer: final_size below initial_size");
    if (candidate_pool < 1)
        throw ValidationError("optimizer: candidate_pool must be positive");
    if (latents < 1)
        throw ValidationError("optimizer: latents must be positive");
    if (folds < 2) throw ValidationError("optimizer: need at least 2 folds");
    if (eval_pairs < 2 * static_cast<std::size_t>(folds))
        throw ValidationError("optimizer: eval_pairs must cover every fold "
                              "at least twice");
    latent.validate();
    forest.validate();
}

MiLbReport score_reference(const std::vector<const Response*>& reference,
                           const std::vector<const Response*>& eval_a,
                           const std::vector<const Response*>& eval_b,
                           std::size_t h, int alpha, const HashVariant& variant,
                           const KernelParams& params,
                           const EmbeddingTable& table,
                           const OptimizerConfig& cfg,
                           std::uint64_t model_seed, std::uint64_t score_seed) {
    if (eval_a.size() != eval_b.size())
        throw ValidationError("score_reference: prompt and response lists "
                              "differ in length");
    const HashModel model = build_hash_model_clamped(
        reference, h, alpha, variant, params, table, model_seed);
    const BitMatrix cp = encode_all(model, eval_a, table);
    const BitMatrix ct = encode_all(model, eval_b, table);
    const LatentModel latent =
        fit_latent_model(ct, cfg.latents, cfg.latent, score_seed);
    return mi_lower_bound(ct, cp, latent, cfg.forest, cfg.folds, score_seed);
}

OptimizedReference optimize_reference_set(
    const Corpus& corpus, const HashVariant& variant,
    const KernelParams& params, const EmbeddingTable& table, std::size_t h,
    int alpha, const OptimizerConfig& cfg) {
    cfg.validate();
    variant.validate();
    params.validate();
    if (h < 1) throw ValidationError("reference search: need at least 1 bit");
    if (alpha < 1)
        throw ValidationError("reference search: alpha must be positive");
    const TrainView view = train_view(corpus, "reference search");
    check_pair_budget(view, cfg, "reference search");

    auto eng_init = rng::make_engine(rng::derive_seed(cfg.seed, kInitTag));
    const auto init_idx = rng::sample_without_replacement(
        view.pool.size(), cfg.initial_size, eng_init);
    std::vector<const Response*> slots;
    slots.reserve(cfg.final_size);
    OptimizedReference out;
    for (std::size_t i : init_idx) {
        slots.push_back(view.pool[i]);
        out.initial_ids.push_back(side_tag(*view.pool[i]));
    }

    const std::uint64_t model_seed = rng::derive_seed(cfg.seed, kModelTag);
    const std::size_t pairs = cfg.eval_pairs;
    for (std::size_t j = 1; j <= cfg.final_size; ++j) {
        const std::size_t open = j - 1;
        if (open >= slots.size()) slots.push_back(nullptr);
        const std::size_t s = slots.size();

        auto eng_pool =
            rng::make_engine(rng::derive_seed(cfg.seed, kPoolTag, j));
        const std::size_t take =
            std::min(cfg.candidate_pool, view.pool.size());
        if (take < cfg.candidate_pool) ++out.truncated_steps;
        const auto cand_idx =
            rng::sample_without_replacement(view.pool.size(), take, eng_pool);

        SearchStep record;
        record.step = j;
        record.pool_size = take;
        record.pairs_sampled = pairs;
        record.model_seed = model_seed;
        record.score_seed = rng::derive_seed(cfg.seed, kScoreTag, j);
        auto [eval_a, eval_b] = draw_eval_pairs(
            corpus, view, pairs, rng::derive_seed(cfg.seed, kPairTag, j),
            cfg.verbose ? &record.pair_ids : nullptr);
        std::vector<const Response*> eval_all;
        eval_all.reserve(2 * pairs);
        eval_all.insert(eval_all.end(), eval_a.begin(), eval_a.end());
        eval_all.insert(eval_all.end(), eval_b.begin(), eval_b.end());

        std::vector<const Response*> fixed;
        fixed.reserve(s - 1);
        for (std::size_t t = 0; t < s; ++t)
            if (t != open) fixed.push_back(slots[t]);
        KernelMatrix k_fixed;
        if (!fixed.empty())
            k_fixed = kernel_matrix(eval_all, fixed, table, params);

        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_ci = 0;
        for (std::size_t ci = 0; ci < take; ++ci) {
            const Response* cand = view.pool[cand_idx[ci]];
            slots[open] = cand;
            const std::vector<const Response*> one{cand};
            const KernelMatrix k_cand =
                kernel_matrix(eval_all, one, table, params);
            const double score = score_candidate(
                slots, open, k_fixed, k_cand, pairs, h, alpha, variant,
                params, table, cfg, model_seed, record.score_seed);
            if (cfg.verbose) {
                record.candidates.push_back(side_tag(*cand));
                record.scores.push_back(score);
            }
            if (score > best) {
                best = score;
                best_ci = ci;
            }
        }
        slots[open] = view.pool[cand_idx[best_ci]];
        record.chosen = side_tag(*slots[open]);
        record.mi_lb_bits = best;
        out.trace.steps.push_back(std::move(record));
    }

    out.model = build_hash_model_clamped(slots, h, alpha, variant, params,
                                         table, model_seed);
    return out;
}

GridSearchResult grid_search_theta(const Corpus& corpus,
                                   const HashVariant& variant,
                                   const KernelParams& base,
                                   const EmbeddingTable& table, std::size_t h,
                                   const ThetaGrids& grids,
                                   const OptimizerConfig& cfg) {
    cfg.validate();
    variant.validate();
    base.validate();
    if (h < 1) throw ValidationError("grid search: need at least 1 bit");
    if (grids.lambdas.empty() || grids.zetas.empty() || grids.alphas.empty())
        throw ValidationError("grid search: every grid axis needs a value");
    for (int a : grids.alphas)
        if (a < 1)
            throw ValidationError("grid search: alpha must be positive");
    const TrainView view = train_view(corpus, "grid search");
    check_pair_budget(view, cfg, "grid search");

    GridSearchResult out;
    auto eng_ref = rng::make_engine(rng::derive_seed(cfg.seed, kRefTag));
    const auto ref_idx = rng::sample_without_replacement(
        view.pool.size(), cfg.final_size, eng_ref);
    std::vector<const Response*> reference;
    reference.reserve(cfg.final_size);
    for (std::size_t i : ref_idx) {
        reference.push_back(view.pool[i]);
        out.reference_ids.push_back(side_tag(*view.pool[i]));
    }

    const auto [eval_a, eval_b] = draw_eval_pairs(
        corpus, view, cfg.eval_pairs, rng::derive_seed(cfg.seed, kPairTag),
        &out.pair_ids);
    const std::uint64_t model_seed = rng::derive_seed(cfg.seed, kModelTag);
    const std::uint64_t score_seed = rng::derive_seed(cfg.seed, kScoreTag);

    bool have = false;
    std::size_t cell = 0;
    for (double lambda : grids.lambdas) {
        for (double zeta : grids.zetas) {
            for (int a : grids.alphas) {
                KernelParams p = base;
                p.lambda = lambda;
                p.zeta = zeta;
                p.validate();
                const MiLbReport rep = score_reference(
                    reference, eval_a, eval_b, h, a, variant, p, table, cfg,
                    model_seed, score_seed);
                ++cell;
                std::ostringstream name;
                name << "lambda=" << lambda << " zeta=" << zeta
                     << " alpha=" << a;
                SearchStep record;
                record.step = cell;
                record.chosen = name.str();
                record.mi_lb_bits = rep.mi_lb_bits;
                record.pool_size = 1;
                record.pairs_sampled = cfg.eval_pairs;
                record.model_seed = model_seed;
                record.score_seed = score_seed;
                out.trace.steps.push_back(std::move(record));
                if (!have || rep.mi_lb_bits > out.mi_lb_bits) {
                    have = true;
                    out.params = p;
                    out.alpha = a;
                    out.mi_lb_bits = rep.mi_lb_bits;
                }
            }
        }
    }
    return out;
}

GreedyChoiceResult greedy_choice_search(
    const std::vector<std::vector<std::string>>& slots,
    const std::function<double(const std::vector<std::string>&)>& score,
    const std::optional<std::string>& stop_token, bool verbose) {
    if (slots.empty())
        throw ValidationError("choice search: need at least one slot");
    for (const auto& slot : slots)
        if (slot.empty())
            throw ValidationError("choice search: every slot needs a "
                                  "candidate");

    GreedyChoiceResult out;
    for (std::size_t k = 0; k < slots.size(); ++k) {
        SearchStep record;
        record.step = k + 1;
        record.pool_size = slots[k].size();
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_i = 0;
        bool have = false;
        for (std::size_t i = 0; i < slots[k].size(); ++i) {
            std::vector<std::string> probe = out.chosen;
            probe.push_back(slots[k][i]);
            double value = 0.0;
            try {
                value = score(probe);
            } catch (const std::exception& e) {
                throw SearchAbort("choice search: scoring failed at slot " +
                                      std::to_string(k + 1) + ": " + e.what(),
                                  out.trace);
            }
            if (verbose) {
                record.candidates.push_back(slots[k][i]);
                record.scores.push_back(value);
            }
            if (!have || value > best) {
                have = true;
                best = value;
                best_i = i;
            }
        }
        record.chosen = slots[k][best_i];
        record.mi_lb_bits = best;
        out.trace.steps.push_back(std::move(record));
        if (stop_token && slots[k][best_i] == *stop_token) {
            out.stopped_early = true;
            break;
        }
        out.chosen.push_back(slots[k][best_i]);
    }
    return out;
}

}  // namespace hashtalk
