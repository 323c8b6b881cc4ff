#include "hashtalk/evalmetrics.hpp"

#include <cmath>
#include <cstdlib>

#include "hashtalk/error.hpp"

namespace hashtalk {
namespace {

std::vector<const std::vector<double>*> usable_vectors(
    const std::vector<std::string>& tokens, const EmbeddingTable& table) {
    std::vector<const std::vector<double>*> out;
    for (const std::string& tok : tokens) {
        const std::vector<double>* v = table.find(tok);
        if (v != nullptr) out.push_back(v);
    }
    return out;
}

double squared_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

std::optional<double> cosine(const std::vector<double>& a,
                             const std::vector<double>& b) {
    const double na = squared_norm(a);
    const double nb = squared_norm(b);
    if (na == 0.0 || nb == 0.0) return std::nullopt;
    double dot = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) dot += a[d] * b[d];
    double c = dot / std::sqrt(na * nb);
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return c;
}

std::optional<std::vector<double>> mean_vector(
    const std::vector<std::string>& tokens, const EmbeddingTable& table) {
    const auto vecs = usable_vectors(tokens, table);
    if (vecs.empty()) return std::nullopt;
    std::vector<double> mean(table.dim, 0.0);
    for (const auto* v : vecs)
        for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += (*v)[d];
    for (double& x : mean) x /= static_cast<double>(vecs.size());
    return mean;
}

std::optional<std::vector<double>> extrema_vector(
    const std::vector<std::string>& tokens, const EmbeddingTable& table) {
    const auto vecs = usable_vectors(tokens, table);
    if (vecs.empty()) return std::nullopt;
    std::vector<double> ext(table.dim, 0.0);
    for (std::size_t d = 0; d < ext.size(); ++d) {
        double best = (*vecs[0])[d];
        for (std::size_t i = 1; i < vecs.size(); ++i) {
            const double x = (*vecs[i])[d];
            if (std::abs(x) > std::abs(best) ||
                (std::abs(x) == std::abs(best) && x > best)) {
                best = x;
            }
        }
        ext[d] = best;
    }
    return ext;
}

std::optional<double> greedy_one_way(
    const std::vector<const std::vector<double>*>& from,
    const std::vector<const std::vector<double>*>& to) {
    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto* w : from) {
        std::optional<double> best;
        for (const auto* u : to) {
            const std::optional<double> c = cosine(*w, *u);
            if (c && (!best || *c > *best)) best = c;
        }
        if (best) {
            sum += *best;
            ++counted;
        }
    }
    if (counted == 0) return std::nullopt;
    return sum / static_cast<double>(counted);
}

MetricSummary summarize(std::vector<std::optional<double>> values) {
    MetricSummary s;
    s.values = std::move(values);
    double sum = 0.0;
    for (const auto& v : s.values) {
        if (v) {
            sum += *v;
            ++s.defined;
        } else {
            ++s.undefined;
        }
    }
    if (s.defined > 0) {
        s.mean = sum / static_cast<double>(s.defined);
        double var = 0.0;
        for (const auto& v : s.values)
            if (v) var += (*v - s.mean) * (*v - s.mean);
        s.stddev = std::sqrt(var / static_cast<double>(s.defined));
    }
    return s;
}

}  // namespace

std::optional<double> embedding_average(const std::vector<std::string>& sm,
                                        const std::vector<std::string>& sa,
                                        const EmbeddingTable& table) {
    const auto m = mean_vector(sm, table);
    const auto a = mean_vector(sa, table);
    if (!m || !a) return std::nullopt;
    return cosine(*m, *a);
}

std::optional<double> embedding_extrema(const std::vector<std::string>& sm,
                                        const std::vector<std::string>& sa,
                                        const EmbeddingTable& table) {
    const auto m = extrema_vector(sm, table);
    const auto a = extrema_vector(sa, table);
    if (!m || !a) return std::nullopt;
    return cosine(*m, *a);
}

std::optional<double> embedding_greedy(const std::vector<std::string>& sm,
                                       const std::vector<std::string>& sa,
                                       const EmbeddingTable& table,
                                       bool symmetric) {
    const auto from = usable_vectors(sm, table);
    const auto to = usable_vectors(sa, table);
    if (from.empty() || to.empty()) return std::nullopt;
    const std::optional<double> forward = greedy_one_way(from, to);
    if (!symmetric || !forward) return forward;
    const std::optional<double> backward = greedy_one_way(to, from);
    if (!backward) return std::nullopt;
    return 0.5 * (*forward + *backward);
}

MetricReport corpus_eval(
    const std::vector<std::vector<std::string>>& system_tokens,
    const std::vector<std::vector<std::string>>& reference_tokens,
    const EmbeddingTable& table, bool symmetric_greedy) {
    if (system_tokens.size() != reference_tokens.size()) {
        throw ValidationError("corpus_eval: got " +
                              std::to_string(system_tokens.size()) +
                              " system responses but " +
                              std::to_string(reference_tokens.size()) +
                              " references");
    }
    MetricReport report;
    report.samples = system_tokens.size();
    std::vector<std::optional<double>> avg, ext, grd;
    avg.reserve(report.samples);
    ext.reserve(report.samples);
    grd.reserve(report.samples);
    for (std::size_t i = 0; i < report.samples; ++i) {
        avg.push_back(
            embedding_average(system_tokens[i], reference_tokens[i], table));
        ext.push_back(
            embedding_extrema(system_tokens[i], reference_tokens[i], table));
        grd.push_back(embedding_greedy(system_tokens[i], reference_tokens[i],
                                       table, symmetric_greedy));
    }
    report.average = summarize(std::move(avg));
    report.extrema = summarize(std::move(ext));
    report.greedy = summarize(std::move(grd));
    return report;
}

}  // namespace hashtalk
