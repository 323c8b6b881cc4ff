#include "hashtalk/lsh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hashtalk/rng.hpp"

namespace hashtalk {

void HashVariant::validate() const {
    if (k < 1) throw ValidationError("hash variant: k must be positive");
    if (!(c > 0.0)) throw ValidationError("hash variant: c must be positive");
}

namespace {

constexpr double kSmoTolerance = 1e-6;

// Dual coordinate ascent on the 2*alpha-point margin problem. Returns false
// when the kernel matrix is degenerate (all rows identical) or the trained
// separator misclassifies half its own training points or worse.
bool train_margin_bit(BitSpec& spec, const KernelMatrix& gram, double c) {
    const std::size_t n = spec.members.size();
    bool distinct = false;
    for (std::size_t i = 1; i < n && !distinct; ++i)
        for (std::size_t j = 0; j < n && !distinct; ++j)
            if (std::abs(gram.at(i, j) - gram.at(0, j)) > 1e-12) distinct = true;
    if (!distinct) return false;

    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = spec.labels[i] ? 1.0 : -1.0;
    std::vector<double> a(n, 0.0);
    double b = 0.0;

    auto decision = [&](std::size_t i) {
        double f = b;
        for (std::size_t j = 0; j < n; ++j)
            f += a[j] * y[j] * gram.at(j, i);
        return f;
    };
    std::vector<double> err(n);
    auto refresh_errors = [&] {
        for (std::size_t i = 0; i < n; ++i) err[i] = decision(i) - y[i];
    };
    refresh_errors();

    const int cap = static_cast<int>(10 * n * n);
    int updates = 0;
    bool changed = true;
    while (changed && updates < cap) {
        changed = false;
        for (std::size_t i = 0; i < n && updates < cap; ++i) {
            const double r = err[i] * y[i];
            const bool violates = (r < -kSmoTolerance && a[i] < c) ||
                                  (r > kSmoTolerance && a[i] > 0.0);
            if (!violates) continue;

            // partners in decreasing error gap, index breaking ties
            std::vector<std::size_t> order;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) order.push_back(j);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t p, std::size_t q) {
                                 return std::abs(err[i] - err[p]) >
                                        std::abs(err[i] - err[q]);
                             });
            for (std::size_t j : order) {
                double lo, hi;
                if (y[i] != y[j]) {
                    lo = std::max(0.0, a[j] - a[i]);
                    hi = std::min(c, c + a[j] - a[i]);
                } else {
                    lo = std::max(0.0, a[i] + a[j] - c);
                    hi = std::min(c, a[i] + a[j]);
                }
                if (lo >= hi) continue;
                const double eta =
                    gram.at(i, i) + gram.at(j, j) - 2.0 * gram.at(i, j);
                if (eta <= 0.0) continue;
                double aj = a[j] + y[j] * (err[i] - err[j]) / eta;
                aj = std::min(std::max(aj, lo), hi);
                if (std::abs(aj - a[j]) < 1e-12) continue;
                const double ai = a[i] + y[i] * y[j] * (a[j] - aj);

                const double di = ai - a[i], dj = aj - a[j];
                const double b1 = b - err[i] - y[i] * di * gram.at(i, i) -
                                  y[j] * dj * gram.at(i, j);
                const double b2 = b - err[j] - y[i] * di * gram.at(i, j) -
                                  y[j] * dj * gram.at(j, j);
                a[i] = ai;
                a[j] = aj;
                if (a[i] > 0.0 && a[i] < c)
                    b = b1;
                else if (a[j] > 0.0 && a[j] < c)
                    b = b2;
                else
                    b = 0.5 * (b1 + b2);
                refresh_errors();
                ++updates;
                changed = true;
                break;
            }
        }
    }

    spec.dual = a;
    spec.bias = b;
    spec.smo_iterations = updates;

    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t predicted = decision(i) > 0.0 ? 1 : 0;
        if (predicted == spec.labels[i]) ++correct;
    }
    return 2 * correct > n;
}

std::uint8_t rknn_bit(const BitSpec& spec, const double* row, int k) {
    if (static_cast<std::size_t>(k) > spec.members.size())
        k = static_cast<int>(spec.members.size());
    if (k == 1) {
        std::size_t best = 0;
        double best_sim = row[spec.members[0]];
        for (std::size_t i = 1; i < spec.members.size(); ++i) {
            const double sim = row[spec.members[i]];
            if (sim > best_sim ||
                (sim == best_sim && spec.members[i] < spec.members[best])) {
                best = i;
                best_sim = sim;
            }
        }
        return spec.labels[best];
    }
    std::vector<std::size_t> order(spec.members.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) {
        const double sp = row[spec.members[p]], sq = row[spec.members[q]];
        if (sp != sq) return sp > sq;
        return spec.members[p] < spec.members[q];
    });
    int ones = 0;
    for (int i = 0; i < k; ++i) ones += spec.labels[order[i]];
    return 2 * ones > k ? 1 : 0;
}

std::uint8_t decide_bit(const HashModel& model, const BitSpec& spec,
                        const double* row) {
    if (model.variant.kind == HashVariant::Kind::RMM && !spec.fallback) {
        double f = spec.bias;
        for (std::size_t i = 0; i < spec.members.size(); ++i) {
            const double y = spec.labels[i] ? 1.0 : -1.0;
            f += spec.dual[i] * y * row[spec.members[i]];
        }
        return f > 0.0 ? 1 : 0;
    }
    const int k =
        model.variant.kind == HashVariant::Kind::RkNN ? model.variant.k : 1;
    return rknn_bit(spec, row, k);
}

std::vector<const Response*> reference_pointers(const HashModel& model) {
    std::vector<const Response*> refs;
    refs.reserve(model.reference.size());
    for (const Response& r : model.reference) refs.push_back(&r);
    return refs;
}

HashModel assemble_model(const std::vector<const Response*>& reference,
                         std::size_t h, int alpha, const HashVariant& variant,
                         const KernelParams& params,
                         const EmbeddingTable& table, std::uint64_t seed,
                         std::size_t subset) {
    HashModel model;
    model.variant = variant;
    model.params = params;
    model.h = h;
    model.alpha = alpha;
    model.seed = seed;
    model.reference.reserve(reference.size());
    for (const Response* r : reference) {
        if (!r) throw ValidationError("hash model: null reference response");
        if (r->tokens.empty())
            throw ValidationError("hash model: empty reference response");
        model.reference.push_back(*r);
    }

    const std::size_t ones = (subset + 1) / 2;
    model.bits.resize(h);
    for (std::size_t j = 0; j < h; ++j) {
        auto eng = rng::make_engine(rng::derive_seed(seed, 0xb175, j));
        BitSpec& spec = model.bits[j];
        spec.members =
            rng::sample_without_replacement(reference.size(), subset, eng);
        spec.labels.assign(subset, 0);
        for (std::size_t i = 0; i < ones; ++i) spec.labels[i] = 1;
        if (variant.kind == HashVariant::Kind::RMM) {
            std::vector<const Response*> members;
            members.reserve(subset);
            for (std::size_t idx : spec.members)
                members.push_back(&model.reference[idx]);
            const KernelMatrix gram =
                kernel_matrix(members, members, table, params);
            spec.fallback = !train_margin_bit(spec, gram, variant.c);
        }
    }
    return model;
}

void validate_build_inputs(std::size_t h, int alpha,
                           const HashVariant& variant,
                           const KernelParams& params) {
    variant.validate();
    params.validate();
    if (h < 1) throw ValidationError("hash model: need at least 1 bit");
    if (alpha < 1) throw ValidationError("hash model: alpha must be positive");
}

}  // namespace

HashModel build_hash_model(const std::vector<const Response*>& reference,
                           std::size_t h, int alpha, const HashVariant& variant,
                           const KernelParams& params,
                           const EmbeddingTable& table, std::uint64_t seed) {
    validate_build_inputs(h, alpha, variant, params);
    const std::size_t m = reference.size();
    const std::size_t subset = 2 * static_cast<std::size_t>(alpha);
    if (subset > m)
        throw ValidationError("hash model: 2*alpha exceeds the reference size");
    if (variant.kind == HashVariant::Kind::RkNN &&
        static_cast<std::size_t>(variant.k) > subset)
        throw ValidationError("hash model: k exceeds the subset size");
    return assemble_model(reference, h, alpha, variant, params, table, seed,
                          subset);
}

HashModel build_hash_model_clamped(const std::vector<const Response*>& reference,
                                   std::size_t h, int alpha,
                                   const HashVariant& variant,
                                   const KernelParams& params,
                                   const EmbeddingTable& table,
                                   std::uint64_t seed) {
    validate_build_inputs(h, alpha, variant, params);
    if (reference.empty())
        throw ValidationError("hash model: empty reference set");
    const std::size_t subset =
        std::min(2 * static_cast<std::size_t>(alpha), reference.size());
    return assemble_model(reference, h, alpha, variant, params, table, seed,
                          subset);
}

Hashcode encode(const HashModel& model, const Response& s,
                const EmbeddingTable& table) {
    if (s.tokens.empty()) throw ValidationError("encode: empty response");
    const std::vector<const Response*> refs = reference_pointers(model);
    const std::vector<const Response*> one{&s};
    const KernelMatrix km = kernel_matrix(one, refs, table, model.params);
    Hashcode code(model.h);
    for (std::size_t j = 0; j < model.h; ++j)
        code[j] = decide_bit(model, model.bits[j], km.values.data());
    return code;
}

Hashcode encode_from_kernel_row(const HashModel& model,
                                const std::vector<double>& row) {
    if (row.size() != model.reference_size())
        throw ValidationError("encode_from_kernel_row: row has " +
                              std::to_string(row.size()) + " values for " +
                              std::to_string(model.reference_size()) +
                              " references");
    Hashcode code(model.h);
    for (std::size_t j = 0; j < model.h; ++j)
        code[j] = decide_bit(model, model.bits[j], row.data());
    return code;
}

BitMatrix encode_all(const HashModel& model,
                     const std::vector<const Response*>& responses,
                     const EmbeddingTable& table) {
    BitMatrix out(responses.size(), model.h);
    for (std::size_t i = 0; i < responses.size(); ++i) {
        if (!responses[i])
            throw ValidationError("encode_all: null response at row " +
                                  std::to_string(i));
        try {
            const Hashcode code = encode(model, *responses[i], table);
            for (std::size_t j = 0; j < model.h; ++j) out.set(i, j, code[j]);
        } catch (const Error& e) {
            throw ValidationError("encode_all: row " + std::to_string(i) + ": " +
                                  e.what());
        }
    }
    return out;
}

namespace {

const char* role_name(Role r) { return r == Role::A ? "a" : "b"; }

Role parse_role(const std::string& s) {
    if (s == "a") return Role::A;
    if (s == "b") return Role::B;
    throw ValidationError("hash model load: bad role '" + s + "'");
}

}  // namespace

nlohmann::ordered_json hash_model_to_json(const HashModel& model) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["variant"]["kind"] =
        model.variant.kind == HashVariant::Kind::RkNN ? "rknn" : "rmm";
    j["variant"]["k"] = model.variant.k;
    j["variant"]["c"] = model.variant.c;
    j["params"]["lambda"] = model.params.lambda;
    j["params"]["zeta"] = model.params.zeta;
    j["params"]["e_max"] = model.params.e_max;
    j["params"]["normalize"] = model.params.normalize;
    j["params"]["use_pos_tags"] = model.params.use_pos_tags;
    j["params"]["max_tokens"] = model.params.max_tokens;
    j["h"] = model.h;
    j["alpha"] = model.alpha;
    j["seed"] = model.seed;
    j["reference"] = nlohmann::ordered_json::array();
    for (const Response& r : model.reference) {
        nlohmann::ordered_json rec;
        rec["id"] = r.id;
        rec["role"] = role_name(r.role);
        rec["text"] = r.raw_text;
        rec["tokens"] = r.tokens;
        rec["pos"] = r.pos_tags;
        j["reference"].push_back(std::move(rec));
    }
    j["bits"] = nlohmann::ordered_json::array();
    for (const BitSpec& spec : model.bits) {
        nlohmann::ordered_json rec;
        rec["members"] = spec.members;
        rec["labels"] = spec.labels;
        rec["dual"] = spec.dual;
        rec["bias"] = spec.bias;
        rec["fallback"] = spec.fallback;
        rec["smo_iterations"] = spec.smo_iterations;
        j["bits"].push_back(std::move(rec));
    }
    return j;
}

HashModel hash_model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version").get<int>() != 1)
            throw ValidationError("hash model load: unsupported schema version");
        HashModel model;
        const std::string kind = j.at("variant").at("kind").get<std::string>();
        if (kind == "rknn")
            model.variant.kind = HashVariant::Kind::RkNN;
        else if (kind == "rmm")
            model.variant.kind = HashVariant::Kind::RMM;
        else
            throw ValidationError("hash model load: bad variant '" + kind + "'");
        model.variant.k = j.at("variant").at("k").get<int>();
        model.variant.c = j.at("variant").at("c").get<double>();
        const auto& p = j.at("params");
        model.params.lambda = p.at("lambda").get<double>();
        model.params.zeta = p.at("zeta").get<double>();
        model.params.e_max = p.at("e_max").get<int>();
        model.params.normalize = p.at("normalize").get<bool>();
        model.params.use_pos_tags = p.at("use_pos_tags").get<bool>();
        model.params.max_tokens = p.at("max_tokens").get<std::size_t>();
        model.h = j.at("h").get<std::size_t>();
        model.alpha = j.at("alpha").get<int>();
        model.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& rec : j.at("reference")) {
            Response r;
            r.id = rec.at("id").get<std::string>();
            r.role = parse_role(rec.at("role").get<std::string>());
            r.raw_text = rec.at("text").get<std::string>();
            r.tokens = rec.at("tokens").get<std::vector<std::string>>();
            r.pos_tags = rec.at("pos").get<std::vector<std::string>>();
            model.reference.push_back(std::move(r));
        }
        for (const auto& rec : j.at("bits")) {
            BitSpec spec;
            spec.members = rec.at("members").get<std::vector<std::size_t>>();
            spec.labels = rec.at("labels").get<std::vector<std::uint8_t>>();
            spec.dual = rec.at("dual").get<std::vector<double>>();
            spec.bias = rec.at("bias").get<double>();
            spec.fallback = rec.at("fallback").get<bool>();
            spec.smo_iterations = rec.at("smo_iterations").get<int>();
            model.bits.push_back(std::move(spec));
        }

        model.variant.validate();
        model.params.validate();
        if (model.h != model.bits.size())
            throw ValidationError("hash model load: h does not match bit count");
        if (model.alpha < 1)
            throw ValidationError("hash model load: alpha must be positive");
        if (model.reference.empty())
            throw ValidationError("hash model load: empty reference set");
        const std::size_t subset =
            std::min(2 * static_cast<std::size_t>(model.alpha),
                     model.reference.size());
        for (const BitSpec& spec : model.bits) {
            if (spec.members.size() != subset || spec.labels.size() != subset)
                throw ValidationError("hash model load: bad subset size");
            std::size_t ones = 0;
            for (std::uint8_t v : spec.labels) ones += v;
            if (ones != (subset + 1) / 2)
                throw ValidationError("hash model load: unbalanced labels");
            std::vector<std::size_t> sorted = spec.members;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
                throw ValidationError("hash model load: duplicate member index");
            if (sorted.back() >= model.reference.size())
                throw ValidationError(
                    "hash model load: member index out of range");
            if (model.variant.kind == HashVariant::Kind::RMM &&
                !spec.fallback && spec.dual.size() != subset)
                throw ValidationError("hash model load: bad dual state size");
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("hash model load: ") + e.what());
    }
}

void save_hash_model(const HashModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write hash model file: " + path);
    out << hash_model_to_json(model).dump(2) << '\n';
    if (!out) throw Error("failed writing hash model file: " + path);
}

HashModel load_hash_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read hash model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("hash model load: " + path + ": " + e.what());
    }
    return hash_model_from_json(j);
}

}  // namespace hashtalk
