#include "hashtalk/kernel.hpp"

#include <atomic>
#include <cmath>
#include <numeric>

namespace hashtalk {

namespace {

std::atomic<std::uint64_t> g_eval_count{0};
std::atomic<std::uint64_t> g_truncation_count{0};

}  // namespace

std::uint64_t kernel_eval_count() { return g_eval_count.load(); }
void reset_kernel_eval_count() { g_eval_count.store(0); }
std::uint64_t kernel_truncation_count() { return g_truncation_count.load(); }
void reset_kernel_truncation_count() { g_truncation_count.store(0); }

void KernelParams::validate() const {
    if (!(lambda > 0.0 && lambda < 1.0))
        throw ValidationError("kernel: lambda must lie in (0, 1)");
    if (!(zeta > -1.0 && zeta < 1.0))
        throw ValidationError("kernel: zeta must lie in (-1, 1)");
    if (e_max < 1) throw ValidationError("kernel: e_max must be at least 1");
    if (max_tokens < 1) throw ValidationError("kernel: max_tokens must be at least 1");
}

double token_similarity(const std::vector<double>& wa,
                        const std::vector<double>& wb, double zeta) {
    if (wa.size() != wb.size())
        throw ValidationError("token_similarity: dimension mismatch");
    if (wa.empty()) throw ValidationError("token_similarity: empty vectors");
    if (!(zeta > -1.0 && zeta < 1.0))
        throw ValidationError("token_similarity: zeta must lie in (-1, 1)");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < wa.size(); ++i) {
        dot += wa[i] * wb[i];
        na += wa[i] * wa[i];
        nb += wb[i] * wb[i];
    }
    if (na == 0.0 || nb == 0.0)
        throw ValidationError("token_similarity: zero vector has no direction");
    const double cs = dot / std::sqrt(na * nb);
    const double support = 1.0 - (1.0 - cs) / (1.0 - zeta);
    return support > 0.0 ? cs * support : 0.0;
}

const std::vector<double>* TokenVectorCache::unit(const std::string& token) const {
    auto hit = unit_.find(token);
    if (hit != unit_.end()) return &hit->second;
    if (missing_.count(token)) return nullptr;
    const std::vector<double>* raw = table_->find(token);
    if (raw == nullptr) {
        missing_.insert(token);
        return nullptr;
    }
    double norm2 = 0.0;
    for (double v : *raw) norm2 += v * v;
    if (norm2 == 0.0) {
        missing_.insert(token);
        return nullptr;
    }
    std::vector<double> u(*raw);
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : u) v *= inv;
    return &unit_.emplace(token, std::move(u)).first->second;
}

namespace {

struct Sequence {
    const std::vector<std::string>* tokens;
    const std::vector<std::string>* tags;  // null when absent
    std::size_t begin = 0;                 // truncation offset
    std::size_t size = 0;
};

Sequence make_sequence(const std::vector<std::string>& tokens,
                       const std::vector<std::string>* tags,
                       const KernelParams& params) {
    Sequence s;
    s.tokens = &tokens;
    s.tags = (tags != nullptr && !tags->empty()) ? tags : nullptr;
    s.size = tokens.size();
    if (s.size > params.max_tokens) {
        s.begin = s.size - params.max_tokens;
        s.size = params.max_tokens;
        g_truncation_count.fetch_add(1);
    }
    return s;
}

double clipped_cosine(const std::vector<double>& ua,
                      const std::vector<double>& ub, double zeta) {
    const double cs = std::inner_product(ua.begin(), ua.end(), ub.begin(), 0.0);
    const double support = 1.0 - (1.0 - cs) / (1.0 - zeta);
    return support > 0.0 ? cs * support : 0.0;
}

// Pairwise token similarities for a truncated sequence pair.
std::vector<double> similarity_grid(const Sequence& s, const Sequence& t,
                                    const TokenVectorCache& cache,
                                    const KernelParams& params) {
    std::vector<const std::vector<double>*> us(s.size), ut(t.size);
    for (std::size_t i = 0; i < s.size; ++i)
        us[i] = cache.unit((*s.tokens)[s.begin + i]);
    for (std::size_t j = 0; j < t.size; ++j)
        ut[j] = cache.unit((*t.tokens)[t.begin + j]);
    const bool gate = params.use_pos_tags && s.tags != nullptr && t.tags != nullptr;
    std::vector<double> k(s.size * t.size, 0.0);
    for (std::size_t i = 0; i < s.size; ++i) {
        if (us[i] == nullptr) continue;
        for (std::size_t j = 0; j < t.size; ++j) {
            if (ut[j] == nullptr) continue;
            if (gate && (*s.tags)[s.begin + i] != (*t.tags)[t.begin + j]) continue;
            k[i * t.size + j] = clipped_cosine(*us[i], *ut[j], params.zeta);
        }
    }
    return k;
}

// Gap-weighted subsequence kernel via the standard prefix recursions.
// kp[i][j] holds K'_{p}(s[0..i), t[0..j)): subsequence weight extended to
// the prefix ends, used by the next length layer.
double kernel_dp(const Sequence& s, const Sequence& t,
                 const TokenVectorCache& cache, const KernelParams& params) {
    const std::size_t n = s.size, m = t.size;
    const std::size_t depth =
        std::min<std::size_t>(static_cast<std::size_t>(params.e_max), std::min(n, m));
    if (depth == 0) return 0.0;
    const std::vector<double> k = similarity_grid(s, t, cache, params);
    const double lam = params.lambda;
    const double lam2 = lam * lam;

    const std::size_t w = m + 1;
    std::vector<double> kp_prev((n + 1) * w, 1.0);  // K'_0 = 1 everywhere
    std::vector<double> kp_cur((n + 1) * w, 0.0);
    std::vector<double> kpp((n + 1) * w, 0.0);

    double total = 0.0;
    for (std::size_t p = 1; p <= depth; ++p) {
        double layer = 0.0;
        for (std::size_t i = 1; i <= n; ++i)
            for (std::size_t j = 1; j <= m; ++j)
                layer += k[(i - 1) * m + (j - 1)] * kp_prev[(i - 1) * w + (j - 1)];
        total += lam2 * layer;
        if (p == depth) break;

        std::fill(kp_cur.begin(), kp_cur.end(), 0.0);
        std::fill(kpp.begin(), kpp.end(), 0.0);
        for (std::size_t i = 1; i <= n; ++i) {
            for (std::size_t j = 1; j <= m; ++j) {
                kpp[i * w + j] = lam * kpp[i * w + (j - 1)] +
                                 lam2 * k[(i - 1) * m + (j - 1)] *
                                     kp_prev[(i - 1) * w + (j - 1)];
                kp_cur[i * w + j] = lam * kp_cur[(i - 1) * w + j] + kpp[i * w + j];
            }
        }
        kp_prev.swap(kp_cur);
    }
    return total;
}

double kernel_unnormalized(const Sequence& s, const Sequence& t,
                           const TokenVectorCache& cache,
                           const KernelParams& params) {
    g_eval_count.fetch_add(1);
    return kernel_dp(s, t, cache, params);
}

double normalize_value(double kst, double kss, double ktt) {
    if (kss <= 0.0 || ktt <= 0.0) return 0.0;
    return kst / std::sqrt(kss * ktt);
}

double kernel_pair(const Sequence& s, const Sequence& t,
                   const TokenVectorCache& cache, const KernelParams& params) {
    const double kst = kernel_unnormalized(s, t, cache, params);
    if (!params.normalize) return kst;
    const double kss = kernel_unnormalized(s, s, cache, params);
    const double ktt = kernel_unnormalized(t, t, cache, params);
    return normalize_value(kst, kss, ktt);
}

// Advances a strictly increasing index tuple; returns false after the last.
bool next_combination(std::vector<std::size_t>& idx, std::size_t n) {
    const std::size_t e = idx.size();
    for (std::size_t pos = e; pos-- > 0;) {
        if (idx[pos] + (e - pos) < n) {
            ++idx[pos];
            for (std::size_t q = pos + 1; q < e; ++q) idx[q] = idx[q - 1] + 1;
            return true;
        }
    }
    return false;
}

double bruteforce_unnormalized(const Sequence& s, const Sequence& t,
                               const TokenVectorCache& cache,
                               const KernelParams& params) {
    const std::size_t n = s.size, m = t.size;
    if (n > 8 || m > 8)
        throw ValidationError(
            "subsequence_kernel_bruteforce: inputs longer than 8 tokens");
    const std::vector<double> k = similarity_grid(s, t, cache, params);
    const std::size_t depth =
        std::min<std::size_t>(static_cast<std::size_t>(params.e_max), std::min(n, m));
    double total = 0.0;
    for (std::size_t e = 1; e <= depth; ++e) {
        std::vector<std::size_t> si(e), tj(e);
        std::iota(si.begin(), si.end(), 0);
        do {
            std::iota(tj.begin(), tj.end(), 0);
            do {
                double prod = 1.0;
                for (std::size_t q = 0; q < e; ++q) prod *= k[si[q] * m + tj[q]];
                if (prod == 0.0) continue;
                const double span_s = static_cast<double>(si[e - 1] - si[0] + 1);
                const double span_t = static_cast<double>(tj[e - 1] - tj[0] + 1);
                total += prod * std::pow(params.lambda, span_s + span_t);
            } while (next_combination(tj, m));
        } while (next_combination(si, n));
    }
    return total;
}

}  // namespace

double subsequence_kernel(const std::vector<std::string>& s,
                          const std::vector<std::string>& t,
                          const EmbeddingTable& table,
                          const KernelParams& params) {
    params.validate();
    TokenVectorCache cache(table);
    return kernel_pair(make_sequence(s, nullptr, params),
                       make_sequence(t, nullptr, params), cache, params);
}

double subsequence_kernel_bruteforce(const std::vector<std::string>& s,
                                     const std::vector<std::string>& t,
                                     const EmbeddingTable& table,
                                     const KernelParams& params) {
    params.validate();
    TokenVectorCache cache(table);
    const Sequence ss = make_sequence(s, nullptr, params);
    const Sequence st = make_sequence(t, nullptr, params);
    const double kst = bruteforce_unnormalized(ss, st, cache, params);
    if (!params.normalize) return kst;
    return normalize_value(kst, bruteforce_unnormalized(ss, ss, cache, params),
                           bruteforce_unnormalized(st, st, cache, params));
}

double response_kernel(const Response& a, const Response& b,
                       const EmbeddingTable& table, const KernelParams& params) {
    params.validate();
    TokenVectorCache cache(table);
    return kernel_pair(make_sequence(a.tokens, &a.pos_tags, params),
                       make_sequence(b.tokens, &b.pos_tags, params), cache, params);
}

KernelMatrix kernel_matrix(const std::vector<const Response*>& rows,
                           const std::vector<const Response*>& cols,
                           const EmbeddingTable& table,
                           const KernelParams& params) {
    params.validate();
    TokenVectorCache cache(table);
    KernelMatrix out;
    out.rows = rows.size();
    out.cols = cols.size();
    out.values.assign(out.rows * out.cols, 0.0);

    std::vector<Sequence> rs, cs;
    rs.reserve(rows.size());
    for (const Response* r : rows)
        rs.push_back(make_sequence(r->tokens, &r->pos_tags, params));
    const bool symmetric = rows == cols;
    if (!symmetric) {
        cs.reserve(cols.size());
        for (const Response* c : cols)
            cs.push_back(make_sequence(c->tokens, &c->pos_tags, params));
    }
    const std::vector<Sequence>& cseq = symmetric ? rs : cs;

    KernelParams raw = params;
    raw.normalize = false;
    std::vector<double> row_self, col_self;
    if (params.normalize) {
        row_self.resize(rs.size());
        for (std::size_t i = 0; i < rs.size(); ++i)
            row_self[i] = kernel_unnormalized(rs[i], rs[i], cache, raw);
        if (symmetric) {
            col_self = row_self;
        } else {
            col_self.resize(cseq.size());
            for (std::size_t j = 0; j < cseq.size(); ++j)
                col_self[j] = kernel_unnormalized(cseq[j], cseq[j], cache, raw);
        }
    }

    for (std::size_t i = 0; i < rs.size(); ++i) {
        const std::size_t j0 = symmetric ? i : 0;
        for (std::size_t j = j0; j < cseq.size(); ++j) {
            double v = kernel_unnormalized(rs[i], cseq[j], cache, raw);
            if (params.normalize) v = normalize_value(v, row_self[i], col_self[j]);
            out.at(i, j) = v;
            if (symmetric) out.at(j, i) = v;
        }
    }
    return out;
}

}  // namespace hashtalk
