// Command-line surface for the dialogue pipeline: corpus generation,
// training, bound reporting, interactive chat, evaluation and self-tests.
// Reports are flat key=value lines on stdout, one per line, and every
// report echoes the effective configuration and master seed. Exit codes:
// 0 success, 1 validation error, 2 runtime failure, 3 self-test breach.

#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hashtalk/bundle.hpp"
#include "hashtalk/error.hpp"
#include "hashtalk/evalmetrics.hpp"
#include "hashtalk/generate.hpp"
#include "hashtalk/infotheory.hpp"
#include "hashtalk/kernel.hpp"
#include "hashtalk/optimize.hpp"
#include "hashtalk/rng.hpp"
#include "hashtalk/synthcorpus.hpp"

namespace {

using namespace hashtalk;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitSelftest = 3;

// seed derivation tags, one per randomized stage
constexpr std::uint64_t kSplitTag = 0x5b17;
constexpr std::uint64_t kRefTag = 0xd0a1;
constexpr std::uint64_t kForestTag = 0xf0e5;
constexpr std::uint64_t kLatentTag = 0x1a7b;
constexpr std::uint64_t kBoundTag = 0xb0d1;
constexpr std::uint64_t kShuffleTag = 0x5f1e;
constexpr std::uint64_t kOptTag = 0x0537;
constexpr std::uint64_t kGridTag = 0x6a1d;
constexpr std::uint64_t kHiaTag = 0x41a0;
constexpr std::uint64_t kSelfTag = 0x5e1f;

std::string fmt(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

void emit(const std::string& key, const std::string& value) {
    std::cout << key << '=' << value << '\n';
}
void emit(const std::string& key, const char* value) {
    emit(key, std::string(value));
}
void emit(const std::string& key, double value) { emit(key, fmt(value)); }
void emit(const std::string& key, std::uint64_t value) {
    emit(key, std::to_string(value));
}
void emit(const std::string& key, int value) { emit(key, std::to_string(value)); }
void emit(const std::string& key, bool value) { emit(key, value ? "1" : "0"); }

void emit_manifest(const nlohmann::ordered_json& manifest) {
    for (const auto& [key, value] : manifest.items()) {
        if (value.is_string())
            emit(key, value.get<std::string>());
        else if (value.is_boolean())
            emit(key, value.get<bool>());
        else if (value.is_number_unsigned())
            emit(key, value.get<std::uint64_t>());
        else if (value.is_number_integer())
            emit(key, static_cast<int>(value.get<std::int64_t>()));
        else if (value.is_number_float())
            emit(key, value.get<double>());
        else if (value.is_array())
            emit(key + "_count", static_cast<std::uint64_t>(value.size()));
    }
}

void emit_bound(const MiLbReport& rep) {
    emit("sum_marginal_entropy_bits", rep.sum_marginal_entropy_bits);
    emit("tc_explained_bits", rep.tc_explained_bits);
    emit("sum_mean_log_q_bits", rep.sum_mean_log_q_bits);
    emit("mi_lb_bits", rep.mi_lb_bits);
    emit("entropy_ub_bits", rep.entropy_ub_bits);
    emit("nmi_lb", rep.nmi_lb);
    if (rep.shuffled_mi_lb_bits)
        emit("shuffled_mi_lb_bits", *rep.shuffled_mi_lb_bits);
    emit("bound_rows", static_cast<std::uint64_t>(rep.n_eval));
    emit("bound_folds", rep.folds);
}

std::string code_string(const std::vector<std::uint8_t>& code) {
    std::string s(code.size(), '0');
    for (std::size_t i = 0; i < code.size(); ++i)
        if (code[i]) s[i] = '1';
    return s;
}

std::string side_tag(const Response& r) {
    return r.id + (r.role == Role::A ? ":a" : ":b");
}

// Rethrows any failure with the owning stage's name prefixed.
template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ValidationError& e) {
        throw ValidationError(name + ": " + e.what());
    } catch (const Error& e) {
        throw Error(name + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error(name + ": " + e.what());
    }
}

std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t parsed) {
    if (opt->count() > 0) return parsed;
    const char* env = std::getenv("HASHTALK_SEED");
    if (env == nullptr) return 0;
    try {
        std::size_t used = 0;
        const std::uint64_t value = std::stoull(env, &used);
        if (used != std::string(env).size())
            throw ValidationError("trailing characters");
        return value;
    } catch (const ValidationError&) {
        throw ValidationError(
            "HASHTALK_SEED is not an unsigned integer: " + std::string(env));
    } catch (const std::exception&) {
        throw ValidationError(
            "HASHTALK_SEED is not an unsigned integer: " + std::string(env));
    }
}

Split parse_split_flag(const std::string& name) {
    const std::optional<Split> s = parse_split(name);
    if (!s || *s == Split::Unassigned)
        throw ValidationError("unknown split: " + name +
                              " (expected train, valid or test)");
    return *s;
}

struct SplitSides {
    std::vector<std::size_t> indices;
    std::vector<const Response*> a;
    std::vector<const Response*> b;
};

SplitSides split_sides(const Corpus& corpus, Split split,
                       const std::string& what) {
    SplitSides out;
    out.indices = corpus.split_indices(split);
    if (out.indices.empty())
        throw ValidationError(what + ": the " + to_string(split) +
                              " split has no pairs");
    for (std::size_t i : out.indices) {
        out.a.push_back(&corpus.pairs[i].a);
        out.b.push_back(&corpus.pairs[i].b);
    }
    return out;
}

// ---------------------------------------------------------------- gen-corpus

struct GenOptions {
    std::string corpus;
    std::string embeddings;
    std::uint64_t seed = 0;
    SyntheticConfig synth;
};

int cmd_gen_corpus(const GenOptions& o) {
    const SyntheticData data = stage("gen-corpus: generating", [&] {
        return make_synthetic_corpus(o.synth, o.seed);
    });
    stage("gen-corpus: writing corpus", [&] {
        write_corpus_jsonl(data.corpus, o.corpus);
        return 0;
    });
    stage("gen-corpus: writing embeddings", [&] {
        write_embeddings(data.table, o.embeddings);
        return 0;
    });

    emit("command", "gen-corpus");
    emit("corpus", o.corpus);
    emit("embeddings", o.embeddings);
    emit("seed", o.seed);
    emit("topics", o.synth.topics);
    emit("pairs", o.synth.pairs);
    emit("words_per_topic", o.synth.words_per_topic);
    emit("filler_words", o.synth.filler_words);
    emit("filler_rate", o.synth.filler_rate);
    emit("jitter", o.synth.jitter);
    emit("copy_task", o.synth.copy_task);
    emit("test_fraction", o.synth.test_fraction);
    emit("valid_fraction", o.synth.valid_fraction);
    emit("train_pairs",
         static_cast<std::uint64_t>(
             data.corpus.split_indices(Split::Train).size()));
    emit("valid_pairs",
         static_cast<std::uint64_t>(
             data.corpus.split_indices(Split::Valid).size()));
    emit("test_pairs",
         static_cast<std::uint64_t>(
             data.corpus.split_indices(Split::Test).size()));
    emit("vocabulary", static_cast<std::uint64_t>(data.table.vectors.size()));
    return kExitOk;
}

// --------------------------------------------------------------------- train

struct TrainOptions {
    std::string corpus;
    std::string embeddings;
    std::string model_dir;
    std::uint64_t seed = 0;
    std::size_t h = 32;
    std::size_t m_ref = 30;
    int alpha = 4;
    double lambda = 0.5;
    double zeta = 0.0;
    int e_max = 16;
    bool normalize = false;
    bool use_pos_tags = false;
    bool rmm = false;
    int k = 1;
    double box_c = 1.0;
    int latents = 4;
    int folds = 2;
    int trees = 100;
    int forest_depth = 12;
    bool optimize_ref = false;
    bool grid_search = false;
    std::size_t initial_size = 10;
    std::size_t pool = 200;
    std::size_t eval_pairs = 100;
    double test_fraction = 0.1;
    double valid_fraction = 0.1;
};

KernelParams kernel_params(const TrainOptions& o) {
    KernelParams p;
    p.lambda = o.lambda;
    p.zeta = o.zeta;
    p.e_max = o.e_max;
    p.normalize = o.normalize;
    p.use_pos_tags = o.use_pos_tags;
    return p;
}

HashVariant hash_variant(const TrainOptions& o) {
    HashVariant v;
    if (o.rmm) {
        v.kind = HashVariant::Kind::RMM;
        v.c = o.box_c;
    } else {
        v.kind = HashVariant::Kind::RkNN;
        v.k = o.k;
    }
    return v;
}

OptimizerConfig optimizer_config(const TrainOptions& o, std::uint64_t seed) {
    OptimizerConfig cfg;
    cfg.initial_size = std::min(o.initial_size, o.m_ref);
    cfg.final_size = o.m_ref;
    cfg.candidate_pool = o.pool;
    cfg.eval_pairs = o.eval_pairs;
    cfg.latents = o.latents;
    cfg.folds = o.folds;
    cfg.seed = seed;
    return cfg;
}

int cmd_train(const TrainOptions& o) {
    KernelParams params = kernel_params(o);
    const HashVariant variant = hash_variant(o);
    RandomForestConfig forest;
    forest.trees = o.trees;
    forest.max_depth = o.forest_depth;

    params.validate();
    variant.validate();
    forest.validate();
    if (o.h < 1) throw ValidationError("train: need at least 1 hash bit");
    if (o.m_ref < 1)
        throw ValidationError("train: need at least 1 reference response");
    if (o.alpha < 1) throw ValidationError("train: alpha must be positive");
    if (o.latents < 1)
        throw ValidationError("train: latents must be positive");
    if (o.folds < 2) throw ValidationError("train: need at least 2 folds");
    if (o.optimize_ref || o.grid_search)
        optimizer_config(o, 0).validate();

    Corpus corpus = stage("train: loading corpus",
                          [&] { return load_corpus(o.corpus); });
    const EmbeddingTable table = stage("train: loading embeddings", [&] {
        return load_embeddings(o.embeddings);
    });
    bool resplit = false;
    if (corpus.split_indices(Split::Train).empty()) {
        resplit = true;
        corpus = stage("train: assigning splits", [&] {
            return assign_splits(corpus, o.test_fraction, o.valid_fraction,
                                 rng::derive_seed(o.seed, kSplitTag));
        });
    }
    const SplitSides train = split_sides(corpus, Split::Train, "train");

    int alpha = o.alpha;
    double grid_mi_lb = 0.0;
    if (o.grid_search) {
        const GridSearchResult grid = stage("train: grid search", [&] {
            return grid_search_theta(corpus, variant, params, table, o.h,
                                     ThetaGrids{},
                                     optimizer_config(
                                         o, rng::derive_seed(o.seed, kGridTag)));
        });
        params = grid.params;
        alpha = grid.alpha;
        grid_mi_lb = grid.mi_lb_bits;
    }

    HashModel model;
    std::size_t truncated_steps = 0;
    if (o.optimize_ref) {
        const OptimizedReference opt =
            stage("train: optimizing reference set", [&] {
                return optimize_reference_set(
                    corpus, variant, params, table, o.h, alpha,
                    optimizer_config(o, rng::derive_seed(o.seed, kOptTag)));
            });
        model = opt.model;
        truncated_steps = opt.truncated_steps;
    } else {
        model = stage("train: building hash model", [&] {
            std::vector<const Response*> pool = train.a;
            pool.insert(pool.end(), train.b.begin(), train.b.end());
            auto eng = rng::make_engine(rng::derive_seed(o.seed, kRefTag));
            const auto picks = rng::sample_without_replacement(
                pool.size(), o.m_ref, eng);
            std::vector<const Response*> reference;
            for (std::size_t i : picks) reference.push_back(pool[i]);
            return build_hash_model_clamped(reference, o.h, alpha, variant,
                                            params, table, o.seed);
        });
    }

    const BitMatrix cp = stage("train: encoding prompting side", [&] {
        return encode_all(model, train.a, table);
    });
    const BitMatrix ct = stage("train: encoding responding side", [&] {
        return encode_all(model, train.b, table);
    });
    const BitPredictorSet predictors =
        stage("train: training bit predictors", [&] {
            return train_predictors(cp, ct, forest,
                                    rng::derive_seed(o.seed, kForestTag));
        });
    const LatentModel latent = stage("train: fitting latent model", [&] {
        return fit_latent_model(ct, o.latents, LatentFitConfig{},
                                rng::derive_seed(o.seed, kLatentTag));
    });
    MiLbReport report = stage("train: scoring the bound", [&] {
        return mi_lower_bound(ct, cp, latent, forest, o.folds,
                              rng::derive_seed(o.seed, kBoundTag));
    });
    report.shuffled_mi_lb_bits = stage("train: scoring shuffled bound", [&] {
        return shuffled_mi_lb(ct, cp, latent, forest, o.folds,
                              rng::derive_seed(o.seed, kShuffleTag));
    });
    const ResponseIndex index = stage("train: building the index", [&] {
        return build_index(model, corpus, table);
    });

    Bundle bundle;
    bundle.model = model;
    bundle.predictors = predictors;
    bundle.index = index;
    nlohmann::ordered_json& m = bundle.manifest;
    m["command"] = "train";
    m["corpus"] = o.corpus;
    m["embeddings"] = o.embeddings;
    m["seed"] = o.seed;
    m["h"] = o.h;
    m["m_ref"] = o.m_ref;
    m["alpha"] = alpha;
    m["subset_size"] = std::min<std::size_t>(2 * alpha, o.m_ref);
    m["variant"] = o.rmm ? "rmm" : "rknn";
    m["k"] = o.k;
    m["box_c"] = o.box_c;
    m["lambda"] = params.lambda;
    m["zeta"] = params.zeta;
    m["e_max"] = params.e_max;
    m["normalize_kernel"] = params.normalize;
    m["use_pos_tags"] = params.use_pos_tags;
    m["latents"] = o.latents;
    m["folds"] = o.folds;
    m["trees"] = o.trees;
    m["forest_depth"] = o.forest_depth;
    m["optimize_ref"] = o.optimize_ref;
    m["grid_search"] = o.grid_search;
    m["resplit"] = resplit;
    m["train_pairs"] = train.indices.size();
    m["index_rows"] = index.size();
    nlohmann::ordered_json refs = nlohmann::ordered_json::array();
    for (const Response& r : model.reference) refs.push_back(side_tag(r));
    m["reference"] = std::move(refs);

    stage("train: writing the bundle", [&] {
        save_bundle(bundle, o.model_dir);
        return 0;
    });

    emit_manifest(bundle.manifest);
    emit("model_dir", o.model_dir);
    if (o.grid_search) emit("grid_mi_lb_bits", grid_mi_lb);
    if (o.optimize_ref)
        emit("truncated_steps", static_cast<std::uint64_t>(truncated_steps));
    emit_bound(report);
    return kExitOk;
}

// --------------------------------------------------------------- milb-report

struct ReportOptions {
    std::string model_dir;
    std::string corpus;
    std::string embeddings;
    std::string split = "train";
    std::uint64_t seed = 0;
    int latents = 4;
    int folds = 2;
    int trees = 100;
    int forest_depth = 12;
};

int cmd_milb_report(const ReportOptions& o) {
    RandomForestConfig forest;
    forest.trees = o.trees;
    forest.max_depth = o.forest_depth;
    forest.validate();
    if (o.latents < 1)
        throw ValidationError("milb-report: latents must be positive");
    if (o.folds < 2)
        throw ValidationError("milb-report: need at least 2 folds");
    const Split split = parse_split_flag(o.split);

    const Bundle bundle = stage("milb-report: loading bundle", [&] {
        return load_bundle(o.model_dir);
    });
    const Corpus corpus = stage("milb-report: loading corpus", [&] {
        return load_corpus(o.corpus);
    });
    const EmbeddingTable table = stage("milb-report: loading embeddings", [&] {
        return load_embeddings(o.embeddings);
    });
    const SplitSides sides = split_sides(corpus, split, "milb-report");

    const BitMatrix cp = stage("milb-report: encoding prompting side", [&] {
        return encode_all(bundle.model, sides.a, table);
    });
    const BitMatrix ct = stage("milb-report: encoding responding side", [&] {
        return encode_all(bundle.model, sides.b, table);
    });
    const LatentModel latent = stage("milb-report: fitting latent model", [&] {
        return fit_latent_model(ct, o.latents, LatentFitConfig{},
                                rng::derive_seed(o.seed, kLatentTag));
    });
    MiLbReport report = stage("milb-report: scoring the bound", [&] {
        return mi_lower_bound(ct, cp, latent, forest, o.folds,
                              rng::derive_seed(o.seed, kBoundTag));
    });
    report.shuffled_mi_lb_bits =
        stage("milb-report: scoring shuffled bound", [&] {
            return shuffled_mi_lb(ct, cp, latent, forest, o.folds,
                                  rng::derive_seed(o.seed, kShuffleTag));
        });

    emit("command", "milb-report");
    emit("model_dir", o.model_dir);
    emit("corpus", o.corpus);
    emit("embeddings", o.embeddings);
    emit("split", o.split);
    emit("seed", o.seed);
    emit("latents", o.latents);
    emit("folds", o.folds);
    emit("trees", o.trees);
    emit("forest_depth", o.forest_depth);
    emit("h", static_cast<std::uint64_t>(bundle.model.h));
    emit("m_ref", static_cast<std::uint64_t>(bundle.model.reference_size()));
    emit("pairs", static_cast<std::uint64_t>(sides.indices.size()));
    emit_bound(report);
    return kExitOk;
}

// ---------------------------------------------------------------------- chat

struct ChatOptions {
    std::string model_dir;
    std::string embeddings;
    bool debug = false;
};

int cmd_chat(const ChatOptions& o) {
    const Bundle bundle = stage("chat: loading bundle", [&] {
        return load_bundle(o.model_dir);
    });
    const EmbeddingTable table = stage("chat: loading embeddings", [&] {
        return load_embeddings(o.embeddings);
    });

    std::string line;
    std::cerr << "> " << std::flush;
    while (std::getline(std::cin, line)) {
        Response utterance;
        utterance.role = Role::A;
        utterance.raw_text = line;
        utterance.tokens = tokenize(line);
        if (utterance.tokens.empty()) {
            std::cerr << "> " << std::flush;
            continue;
        }
        const auto [text, diag] = stage("chat: responding", [&] {
            return respond(bundle.model, bundle.predictors, bundle.index,
                           utterance, table);
        });
        if (o.debug)
            std::cerr << "code=" << code_string(diag.prediction.code)
                      << " hamming=" << diag.retrieval.hamming_distance
                      << '\n';
        std::cout << text << '\n' << std::flush;
        std::cerr << "> " << std::flush;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------- eval

struct EvalOptions {
    std::string model_dir;
    std::string corpus;
    std::string embeddings;
    std::string split = "test";
    std::uint64_t seed = 0;
    int trials = 10;
    bool exclude_self = false;
    bool symmetric_greedy = false;
};

void emit_metric(const std::string& name, const MetricSummary& s) {
    emit(name + "_mean", s.mean);
    emit(name + "_std", s.stddev);
    emit(name + "_defined", static_cast<std::uint64_t>(s.defined));
    emit(name + "_undefined", static_cast<std::uint64_t>(s.undefined));
}

int cmd_eval(const EvalOptions& o) {
    if (o.trials < 1)
        throw ValidationError("eval: trials must be positive");
    const Split split = parse_split_flag(o.split);

    const Bundle bundle = stage("eval: loading bundle", [&] {
        return load_bundle(o.model_dir);
    });
    const Corpus corpus = stage("eval: loading corpus", [&] {
        return load_corpus(o.corpus);
    });
    const EmbeddingTable table = stage("eval: loading embeddings", [&] {
        return load_embeddings(o.embeddings);
    });
    const SplitSides sides = split_sides(corpus, split, "eval");

    std::vector<std::vector<std::string>> system_tokens, reference_tokens;
    stage("eval: generating responses", [&] {
        for (std::size_t i : sides.indices) {
            const DialoguePair& pair = corpus.pairs[i];
            const auto [text, diag] =
                respond(bundle.model, bundle.predictors, bundle.index,
                        pair.a, table, o.exclude_self);
            system_tokens.push_back(tokenize(text));
            reference_tokens.push_back(pair.b.tokens);
        }
        return 0;
    });
    const MetricReport metrics = stage("eval: scoring metrics", [&] {
        return corpus_eval(system_tokens, reference_tokens, table,
                           o.symmetric_greedy);
    });

    const BitMatrix cp = stage("eval: encoding prompting side", [&] {
        return encode_all(bundle.model, sides.a, table);
    });
    const BitMatrix ct = stage("eval: encoding responding side", [&] {
        return encode_all(bundle.model, sides.b, table);
    });
    const PredictionReport hia = stage("eval: scoring hashcode accuracy", [&] {
        return evaluate_hia(bundle.predictors, cp, ct, o.trials, 0.95,
                            rng::derive_seed(o.seed, kHiaTag));
    });

    emit("command", "eval");
    emit("model_dir", o.model_dir);
    emit("corpus", o.corpus);
    emit("embeddings", o.embeddings);
    emit("split", o.split);
    emit("seed", o.seed);
    emit("trials", o.trials);
    emit("exclude_self", o.exclude_self);
    emit("symmetric_greedy", o.symmetric_greedy);
    emit("samples", static_cast<std::uint64_t>(metrics.samples));
    emit_metric("average", metrics.average);
    emit_metric("extrema", metrics.extrema);
    emit_metric("greedy", metrics.greedy);
    emit("hia_mean_accuracy", hia.mean_accuracy);
    emit("hia_std_accuracy", hia.std_accuracy);
    emit("hia_baseline_mean", hia.baseline_mean);
    emit("hia_baseline_std", hia.baseline_std);
    emit("hia_minus_baseline", hia.mean_accuracy - hia.baseline_mean);
    emit("hia_rows", static_cast<std::uint64_t>(hia.n_eval));
    emit("hia_trials", hia.trials);
    emit("hia_fraction", hia.fraction);
    return kExitOk;
}

// ------------------------------------------------------------------ selftest

BitMatrix make_rows(const std::vector<std::vector<int>>& rows) {
    BitMatrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m.set(i, j, rows[i][j] ? 1 : 0);
    return m;
}

std::string check_kernel_enumeration(std::uint64_t seed) {
    EmbeddingTable table;
    table.dim = 3;
    auto eng = rng::make_engine(rng::derive_seed(seed, kSelfTag, 1));
    const std::vector<std::string> vocab = {"a", "b", "c", "d"};
    for (const std::string& tok : vocab) {
        std::vector<double> v(3);
        for (double& x : v) x = 2.0 * rng::uniform_real(eng) - 1.0;
        table.vectors[tok] = v;
    }
    for (int i = 0; i < 40; ++i) {
        std::vector<std::string> s(1 + rng::uniform_index(eng, 6));
        std::vector<std::string> t(1 + rng::uniform_index(eng, 6));
        for (auto& tok : s) tok = vocab[rng::uniform_index(eng, vocab.size())];
        for (auto& tok : t) tok = vocab[rng::uniform_index(eng, vocab.size())];
        KernelParams params;
        params.lambda = 0.1 + 0.8 * rng::uniform_real(eng);
        params.zeta = -0.5 + rng::uniform_real(eng);
        const double dp = subsequence_kernel(s, t, table, params);
        const double bf = subsequence_kernel_bruteforce(s, t, table, params);
        if (std::abs(dp - bf) > 1e-9)
            return "case " + std::to_string(i) + ": dp " + fmt(dp) +
                   " vs enumeration " + fmt(bf);
    }
    return "";
}

std::string check_closed_forms() {
    if (std::abs(entropy_bits(0.25) - 0.811278) > 1e-6)
        return "entropy(0.25) = " + fmt(entropy_bits(0.25));
    const BitMatrix dup = make_rows({{0, 0}, {1, 1}});
    if (std::abs(tc_explained_bruteforce(dup, 1) - 1.0) > 1e-6)
        return "duplicated-bit tc = " + fmt(tc_explained_bruteforce(dup, 1));
    const BitMatrix trip = make_rows({{0, 0, 0}, {1, 1, 1}});
    if (std::abs(tc_explained_bruteforce(trip, 1) - 2.0) > 1e-6)
        return "triplicated-bit tc = " + fmt(tc_explained_bruteforce(trip, 1));
    const BitMatrix x = make_rows({{0}, {0}, {0}, {0}, {1}, {1}, {1}, {1}});
    const BitMatrix y = make_rows({{0}, {0}, {0}, {1}, {1}, {1}, {1}, {0}});
    if (std::abs(mi_bruteforce(y, x) - 0.188722) > 1e-6)
        return "flipped-channel mi = " + fmt(mi_bruteforce(y, x));
    return "";
}

std::string check_bound_validity(std::uint64_t seed) {
    auto eng = rng::make_engine(rng::derive_seed(seed, kSelfTag, 2));
    for (int c = 0; c < 20; ++c) {
        std::vector<double> pmf(16);
        double total = 0.0;
        for (double& p : pmf) {
            p = 0.02 + rng::uniform_real(eng);
            total += p;
        }
        for (double& p : pmf) p /= total;
        const std::size_t n = 80;
        BitMatrix ct(n, 2), cp(n, 2);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = rng::uniform_real(eng);
            double acc = 0.0;
            std::size_t outcome = 15;
            for (std::size_t o = 0; o < 16; ++o) {
                acc += pmf[o];
                if (r < acc) {
                    outcome = o;
                    break;
                }
            }
            ct.set(i, 0, (outcome >> 0) & 1);
            ct.set(i, 1, (outcome >> 1) & 1);
            cp.set(i, 0, (outcome >> 2) & 1);
            cp.set(i, 1, (outcome >> 3) & 1);
        }
        const LatentModel latent = oracle_latent_best(ct, 4);
        const ExactConditionalProposal proposal(ct, cp);
        const MiLbReport rep = mi_lower_bound_fixed(ct, cp, latent, proposal);
        const double exact = mi_bruteforce(ct, cp);
        if (rep.mi_lb_bits > exact + 0.01)
            return "case " + std::to_string(c) + ": bound " +
                   fmt(rep.mi_lb_bits) + " above exact mi " + fmt(exact);
    }
    return "";
}

std::string check_retrieval_rescan(std::uint64_t seed) {
    SyntheticConfig cfg;
    cfg.topics = 3;
    cfg.pairs = 40;
    cfg.words_per_topic = 6;
    cfg.filler_words = 4;
    const SyntheticData data =
        make_synthetic_corpus(cfg, rng::derive_seed(seed, kSelfTag, 3));

    const std::vector<const Response*> pool = data.corpus.pooled();
    const std::vector<const Response*> reference(pool.begin(),
                                                 pool.begin() + 12);
    const HashModel model =
        build_hash_model(reference, 10, 2, HashVariant{}, KernelParams{},
                         data.table, rng::derive_seed(seed, kSelfTag, 4));

    std::vector<const Response*> a_side, b_side;
    for (std::size_t i : data.corpus.split_indices(Split::Train)) {
        a_side.push_back(&data.corpus.pairs[i].a);
        b_side.push_back(&data.corpus.pairs[i].b);
    }
    const BitMatrix cp = encode_all(model, a_side, data.table);
    const BitMatrix ct = encode_all(model, b_side, data.table);
    RandomForestConfig forest;
    forest.trees = 8;
    forest.max_depth = 5;
    const BitPredictorSet predictors =
        train_predictors(cp, ct, forest, rng::derive_seed(seed, kSelfTag, 5));
    const ResponseIndex index = build_index(model, data.corpus, data.table);

    for (std::size_t p = 0; p < 5 && p < a_side.size(); ++p) {
        const auto [text, diag] = respond(model, predictors, index,
                                          *a_side[p], data.table);
        std::size_t best_row = 0;
        std::size_t best_dist = index.codes.h + 1;
        for (std::size_t row = 0; row < index.size(); ++row) {
            std::size_t dist = 0;
            for (std::size_t b = 0; b < index.codes.h; ++b)
                if (index.codes.at(row, b) != diag.prediction.code[b]) ++dist;
            if (dist < best_dist) {
                best_dist = dist;
                best_row = row;
            }
        }
        if (best_row != diag.retrieval.row ||
            best_dist != diag.retrieval.hamming_distance)
            return "prompt " + std::to_string(p) + ": rescan row " +
                   std::to_string(best_row) + " distance " +
                   std::to_string(best_dist) + " vs retrieval row " +
                   std::to_string(diag.retrieval.row) + " distance " +
                   std::to_string(diag.retrieval.hamming_distance);
    }
    return "";
}

int cmd_selftest(std::uint64_t seed) {
    emit("command", "selftest");
    emit("seed", seed);

    struct Check {
        std::string name;
        std::function<std::string()> body;
    };
    const std::vector<Check> checks = {
        {"kernel_enumeration", [&] { return check_kernel_enumeration(seed); }},
        {"closed_forms", [] { return check_closed_forms(); }},
        {"bound_validity", [&] { return check_bound_validity(seed); }},
        {"retrieval_rescan", [&] { return check_retrieval_rescan(seed); }},
    };

    int failures = 0;
    for (const Check& check : checks) {
        std::string detail;
        try {
            detail = check.body();
        } catch (const std::exception& e) {
            detail = e.what();
        }
        emit("check." + check.name, detail.empty() ? "pass" : "fail");
        if (!detail.empty()) {
            emit("check." + check.name + ".detail", detail);
            ++failures;
        }
    }
    emit("checks", static_cast<std::uint64_t>(checks.size()));
    emit("failures", failures);
    return failures == 0 ? kExitOk : kExitSelftest;
}

int guarded(const std::function<int()>& run) {
    try {
        return run();
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernelized-hash dialogue toolkit"};
    app.require_subcommand(1);

    GenOptions gen;
    CLI::App* gen_cmd = app.add_subcommand(
        "gen-corpus", "Write a synthetic dialogue corpus and embeddings");
    gen_cmd->add_option("--corpus", gen.corpus, "Output corpus path (jsonl)")
        ->required();
    gen_cmd->add_option("--embeddings", gen.embeddings,
                        "Output embeddings path")
        ->required();
    CLI::Option* gen_seed =
        gen_cmd->add_option("--seed", gen.seed, "Master seed");
    gen_cmd->add_option("--topics", gen.synth.topics, "Topic count");
    gen_cmd->add_option("--pairs", gen.synth.pairs, "Dialogue pair count");
    gen_cmd->add_option("--words-per-topic", gen.synth.words_per_topic,
                        "Vocabulary per topic");
    gen_cmd->add_option("--filler-words", gen.synth.filler_words,
                        "Shared filler vocabulary");
    gen_cmd->add_option("--filler-rate", gen.synth.filler_rate,
                        "Filler token probability");
    gen_cmd->add_option("--jitter", gen.synth.jitter,
                        "Embedding jitter radius");
    gen_cmd->add_flag("--copy-task", gen.synth.copy_task,
                      "Responses echo the prompting text");
    gen_cmd->add_option("--test-fraction", gen.synth.test_fraction,
                        "Test split fraction");
    gen_cmd->add_option("--valid-fraction", gen.synth.valid_fraction,
                        "Validation split fraction");

    TrainOptions train;
    CLI::App* train_cmd =
        app.add_subcommand("train", "Train a model bundle from a corpus");
    train_cmd->add_option("--corpus", train.corpus, "Corpus path (jsonl)")
        ->required();
    train_cmd->add_option("--embeddings", train.embeddings,
                          "Embeddings path")
        ->required();
    train_cmd->add_option("--model-dir", train.model_dir,
                          "Output bundle directory")
        ->required();
    CLI::Option* train_seed =
        train_cmd->add_option("--seed", train.seed, "Master seed");
    train_cmd->set_help_flag("--help", "Print this help message and exit");
    train_cmd->add_option("--h", train.h, "Hashcode width");
    train_cmd->add_option("--m-ref", train.m_ref, "Reference set size");
    train_cmd->add_option("--alpha", train.alpha,
                          "Half subset size per bit");
    train_cmd->add_option("--lambda", train.lambda, "Kernel gap decay");
    train_cmd->add_option("--zeta", train.zeta,
                          "Token similarity threshold");
    train_cmd->add_option("--e-max", train.e_max,
                          "Longest subsequence length");
    train_cmd->add_flag("--normalize-kernel", train.normalize,
                        "Normalize kernel values");
    train_cmd->add_flag("--use-pos-tags", train.use_pos_tags,
                        "Gate token similarity on matching tags");
    train_cmd->add_flag("--rmm", train.rmm,
                        "Max-margin bits instead of k-nearest-neighbor");
    train_cmd->add_option("--k", train.k, "Neighbors per bit decision");
    train_cmd->add_option("--box-c", train.box_c,
                          "Max-margin box constraint");
    train_cmd->add_option("--latents", train.latents,
                          "Latent variables in the bound");
    train_cmd->add_option("--folds", train.folds, "Cross-fitting folds");
    train_cmd->add_option("--trees", train.trees, "Trees per bit forest");
    train_cmd->add_option("--forest-depth", train.forest_depth,
                          "Tree depth cap");
    train_cmd->add_flag("--optimize-ref", train.optimize_ref,
                        "Greedy reference set search");
    train_cmd->add_flag("--grid-search", train.grid_search,
                        "Kernel setting grid search");
    train_cmd->add_option("--initial-size", train.initial_size,
                          "Random slots before greedy growth");
    train_cmd->add_option("--pool", train.pool,
                          "Candidates scored per search step");
    train_cmd->add_option("--eval-pairs", train.eval_pairs,
                          "Pairs scored per search step");
    train_cmd->add_option("--test-fraction", train.test_fraction,
                          "Test fraction for unlabeled corpora");
    train_cmd->add_option("--valid-fraction", train.valid_fraction,
                          "Validation fraction for unlabeled corpora");

    ReportOptions rep;
    CLI::App* rep_cmd = app.add_subcommand(
        "milb-report", "Report the mutual information lower bound");
    rep_cmd->add_option("--model-dir", rep.model_dir, "Bundle directory")
        ->required();
    rep_cmd->add_option("--corpus", rep.corpus, "Corpus path (jsonl)")
        ->required();
    rep_cmd->add_option("--embeddings", rep.embeddings, "Embeddings path")
        ->required();
    rep_cmd->add_option("--split", rep.split, "Corpus split to score");
    CLI::Option* rep_seed =
        rep_cmd->add_option("--seed", rep.seed, "Master seed");
    rep_cmd->add_option("--latents", rep.latents,
                        "Latent variables in the bound");
    rep_cmd->add_option("--folds", rep.folds, "Cross-fitting folds");
    rep_cmd->add_option("--trees", rep.trees, "Trees per proposal forest");
    rep_cmd->add_option("--forest-depth", rep.forest_depth,
                        "Tree depth cap");

    ChatOptions chat;
    CLI::App* chat_cmd =
        app.add_subcommand("chat", "Interactive retrieval chat");
    chat_cmd->add_option("--model-dir", chat.model_dir, "Bundle directory")
        ->required();
    chat_cmd->add_option("--embeddings", chat.embeddings, "Embeddings path")
        ->required();
    chat_cmd->add_flag("--debug", chat.debug,
                       "Print predicted code and Hamming distance");

    EvalOptions eval;
    CLI::App* eval_cmd = app.add_subcommand(
        "eval", "Score generated responses against references");
    eval_cmd->add_option("--model-dir", eval.model_dir, "Bundle directory")
        ->required();
    eval_cmd->add_option("--corpus", eval.corpus, "Corpus path (jsonl)")
        ->required();
    eval_cmd->add_option("--embeddings", eval.embeddings, "Embeddings path")
        ->required();
    eval_cmd->add_option("--split", eval.split, "Corpus split to score");
    CLI::Option* eval_seed =
        eval_cmd->add_option("--seed", eval.seed, "Master seed");
    eval_cmd->add_option("--trials", eval.trials,
                         "Accuracy subsample trials");
    eval_cmd->add_flag("--exclude-self", eval.exclude_self,
                       "Skip index rows sharing the prompt's pair id");
    eval_cmd->add_flag("--symmetric-greedy", eval.symmetric_greedy,
                       "Average greedy matching over both directions");

    std::uint64_t selftest_seed = 0;
    CLI::App* self_cmd = app.add_subcommand(
        "selftest", "Check the pipeline against built-in oracles");
    CLI::Option* self_seed =
        self_cmd->add_option("--seed", selftest_seed, "Master seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    if (gen_cmd->parsed())
        return guarded([&] {
            gen.seed = resolve_seed(gen_seed, gen.seed);
            return cmd_gen_corpus(gen);
        });
    if (train_cmd->parsed())
        return guarded([&] {
            train.seed = resolve_seed(train_seed, train.seed);
            return cmd_train(train);
        });
    if (rep_cmd->parsed())
        return guarded([&] {
            rep.seed = resolve_seed(rep_seed, rep.seed);
            return cmd_milb_report(rep);
        });
    if (chat_cmd->parsed()) return guarded([&] { return cmd_chat(chat); });
    if (eval_cmd->parsed())
        return guarded([&] {
            eval.seed = resolve_seed(eval_seed, eval.seed);
            return cmd_eval(eval);
        });
    if (self_cmd->parsed())
        return guarded([&] {
            return cmd_selftest(resolve_seed(self_seed, selftest_seed));
        });
    return kExitValidation;
}
