#include "hashtalk/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hashtalk/rng.hpp"

namespace hashtalk {

namespace {

constexpr double kLog2 = 0.6931471805599453;  // ln 2
constexpr double kTableClip = 1e-6;

double log2_safe(double x) { return std::log(x) / kLog2; }

double clip_unit(double p, double eps) {
    return std::min(std::max(p, eps), 1.0 - eps);
}

// Entropy in bits from integer counts.
double entropy_from_counts(const std::vector<std::size_t>& counts,
                           std::size_t total) {
    if (total == 0) return 0.0;
    double s = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        s -= p * log2_safe(p);
    }
    return s;
}

struct PatternStats {
    std::vector<std::uint64_t> keys;            // sorted distinct patterns
    std::vector<std::size_t> counts;            // aligned with keys
    std::vector<std::uint32_t> pattern_of_row;  // index into keys per row
};

PatternStats collect_patterns(const BitMatrix& m) {
    std::map<std::uint64_t, std::size_t> counter;
    std::vector<std::uint64_t> row_keys(m.n);
    for (std::size_t i = 0; i < m.n; ++i) {
        row_keys[i] = m.row_key(i);
        ++counter[row_keys[i]];
    }
    PatternStats ps;
    std::unordered_map<std::uint64_t, std::uint32_t> index;
    for (const auto& [key, count] : counter) {
        index.emplace(key, static_cast<std::uint32_t>(ps.keys.size()));
        ps.keys.push_back(key);
        ps.counts.push_back(count);
    }
    ps.pattern_of_row.resize(m.n);
    for (std::size_t i = 0; i < m.n; ++i)
        ps.pattern_of_row[i] = index.at(row_keys[i]);
    return ps;
}

double joint_entropy_bits(const BitMatrix& m) {
    PatternStats ps = collect_patterns(m);
    return entropy_from_counts(ps.counts, m.n);
}

}  // namespace

double entropy_bits(double p) {
    if (!(p >= 0.0 && p <= 1.0))
        throw ValidationError("entropy_bits: probability outside [0, 1]");
    if (p == 0.0 || p == 1.0) return 0.0;
    return -p * log2_safe(p) - (1.0 - p) * log2_safe(1.0 - p);
}

double column_entropy_bits(const BitMatrix& m, std::size_t j) {
    if (j >= m.h) throw ValidationError("column_entropy_bits: column out of range");
    if (m.n == 0) return 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < m.n; ++i) pos += m.at(i, j);
    return entropy_bits(static_cast<double>(pos) / static_cast<double>(m.n));
}

double total_correlation_exact(const BitMatrix& m) {
    if (m.h > 20)
        throw ValidationError("total_correlation_exact: more than 20 columns");
    if (m.n == 0) throw ValidationError("total_correlation_exact: no rows");
    double marginals = 0.0;
    for (std::size_t j = 0; j < m.h; ++j) marginals += column_entropy_bits(m, j);
    return marginals - joint_entropy_bits(m);
}

double mi_bruteforce(const BitMatrix& ct, const BitMatrix& cp) {
    if (ct.n != cp.n) throw ValidationError("mi_bruteforce: row count mismatch");
    if (ct.h + cp.h > 20)
        throw ValidationError("mi_bruteforce: joint space wider than 20 bits");
    if (ct.n == 0) throw ValidationError("mi_bruteforce: no rows");
    const BitMatrix joint = BitMatrix::concat_cols(ct, cp);
    return joint_entropy_bits(ct) + joint_entropy_bits(cp) -
           joint_entropy_bits(joint);
}

namespace {

// TC of the rows restricted to a pattern subset, weighted by the subset's
// probability: p(S) * TC(C | C in S). The DP block cost.
double block_cost(const PatternStats& ps, const BitMatrix& m, std::uint32_t mask) {
    std::size_t total = 0;
    for (std::size_t p = 0; p < ps.keys.size(); ++p)
        if (mask & (1u << p)) total += ps.counts[p];
    if (total == 0) return 0.0;

    double sum_marg = 0.0;
    for (std::size_t j = 0; j < m.h; ++j) {
        std::size_t pos = 0;
        for (std::size_t p = 0; p < ps.keys.size(); ++p)
            if (mask & (1u << p))
                if (ps.keys[p] & (1ULL << j)) pos += ps.counts[p];
        sum_marg += entropy_bits(static_cast<double>(pos) / static_cast<double>(total));
    }
    std::vector<std::size_t> in_counts;
    for (std::size_t p = 0; p < ps.keys.size(); ++p)
        if (mask & (1u << p)) in_counts.push_back(ps.counts[p]);
    const double joint = entropy_from_counts(in_counts, total);
    const double weight = static_cast<double>(total) / static_cast<double>(m.n);
    return weight * (sum_marg - joint);
}

}  // namespace

PartitionOptimum best_partition_tc(const BitMatrix& m, std::size_t cells) {
    if (m.n == 0) throw ValidationError("best_partition_tc: no rows");
    if (cells < 1) throw ValidationError("best_partition_tc: need at least 1 cell");
    const PatternStats ps = collect_patterns(m);
    const std::size_t np = ps.keys.size();
    const double tc_total = total_correlation_exact(m);

    PartitionOptimum out;
    if (cells >= np) {
        // Singleton cells pin every pattern: TC(C | Y) = 0 is optimal.
        out.tc_bits = tc_total;
        out.cells = np;
        out.cell_of_row.resize(m.n);
        for (std::size_t i = 0; i < m.n; ++i)
            out.cell_of_row[i] = ps.pattern_of_row[i];
        return out;
    }
    if (np > 16)
        throw ValidationError(
            "best_partition_tc: more than 16 distinct patterns for exhaustive "
            "search");

    const std::uint32_t full = (1u << np) - 1u;
    std::vector<double> cost(full + 1, 0.0);
    for (std::uint32_t mask = 1; mask <= full; ++mask)
        cost[mask] = block_cost(ps, m, mask);

    // dp[k][S]: minimal total cost of splitting pattern set S into exactly
    // k non-empty blocks; choice[k][S] records the block containing S's
    // lowest pattern.
    const double inf = 1e300;
    std::vector<std::vector<double>> dp(cells + 1,
                                        std::vector<double>(full + 1, inf));
    std::vector<std::vector<std::uint32_t>> choice(
        cells + 1, std::vector<std::uint32_t>(full + 1, 0));
    dp[0][0] = 0.0;
    for (std::size_t k = 1; k <= cells; ++k) {
        for (std::uint32_t s = 1; s <= full; ++s) {
            const std::uint32_t low = s & (~s + 1u);
            // enumerate submasks of s containing the lowest pattern
            for (std::uint32_t t = s; t != 0; t = (t - 1) & s) {
                if (!(t & low)) continue;
                const double v = cost[t] + dp[k - 1][s & ~t];
                if (v < dp[k][s]) {
                    dp[k][s] = v;
                    choice[k][s] = t;
                }
            }
        }
    }
    double best = inf;
    std::size_t best_k = 1;
    for (std::size_t k = 1; k <= cells; ++k) {
        if (dp[k][full] < best) {
            best = dp[k][full];
            best_k = k;
        }
    }

    std::vector<std::uint32_t> cell_of_pattern(np, 0);
    std::uint32_t rest = full;
    std::size_t k = best_k;
    std::uint32_t next_cell = 0;
    while (rest != 0) {
        const std::uint32_t block = choice[k][rest];
        for (std::size_t p = 0; p < np; ++p)
            if (block & (1u << p)) cell_of_pattern[p] = next_cell;
        rest &= ~block;
        --k;
        ++next_cell;
    }

    out.tc_bits = tc_total - best;
    out.cells = next_cell;
    out.cell_of_row.resize(m.n);
    for (std::size_t i = 0; i < m.n; ++i)
        out.cell_of_row[i] = cell_of_pattern[ps.pattern_of_row[i]];
    return out;
}

double tc_explained_bruteforce(const BitMatrix& m, int latent_bits) {
    if (m.h > 8)
        throw ValidationError("tc_explained_bruteforce: more than 8 columns");
    if (latent_bits < 1 || latent_bits > 2)
        throw ValidationError("tc_explained_bruteforce: latent bits must be 1 or 2");
    const PatternStats ps = collect_patterns(m);
    if (ps.keys.size() > 16)
        throw ValidationError(
            "tc_explained_bruteforce: more than 16 distinct patterns");
    return best_partition_tc(m, std::size_t(1) << latent_bits).tc_bits;
}

void LatentFitConfig::validate() const {
    if (max_iters < 1) throw ValidationError("latent fit: max_iters must be positive");
    if (restarts < 1) throw ValidationError("latent fit: restarts must be positive");
    if (!(tolerance > 0.0)) throw ValidationError("latent fit: tolerance must be positive");
    if (patience < 1) throw ValidationError("latent fit: patience must be positive");
}

namespace {

// Sufficient statistics of one alternating-maximization iteration.
struct LatentStats {
    std::vector<double> gamma;     // n*m posteriors p(y_k = 1 | row)
    std::vector<double> info;      // m*h per-bit mutual informations, bits
    std::vector<double> info_yx;   // m: I(Y_k ; full row), bits
    std::vector<double> pi;        // m latent marginals (from posteriors)
};

// Mutual information of a soft 2x2 joint given by cell masses, in bits.
double mi_2x2(double p00, double p01, double p10, double p11) {
    const double py0 = p00 + p01, py1 = p10 + p11;
    const double px0 = p00 + p10, px1 = p01 + p11;
    double s = 0.0;
    auto add = [&](double pxy, double py, double px) {
        if (pxy > 0.0 && py > 0.0 && px > 0.0)
            s += pxy * log2_safe(pxy / (py * px));
    };
    add(p00, py0, px0);
    add(p01, py0, px1);
    add(p10, py1, px0);
    add(p11, py1, px1);
    return s;
}

void e_step(const BitMatrix& x, const LatentModel& model,
            std::vector<double>& gamma) {
    const std::size_t n = x.n, h = x.h;
    const int m = model.m;
    gamma.assign(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* row = x.row(i);
        for (int k = 0; k < m; ++k) {
            const double pi = model.marginal[k];
            double s1 = std::log(pi), s0 = std::log(1.0 - pi);
            for (std::size_t j = 0; j < h; ++j) {
                const double w = model.weight[k * h + j];
                if (w == 0.0) continue;
                const double t1 = model.cond_one[(k * h + j) * 2 + 1];
                const double t0 = model.cond_one[(k * h + j) * 2 + 0];
                if (row[j]) {
                    s1 += w * std::log(t1);
                    s0 += w * std::log(t0);
                } else {
                    s1 += w * std::log(1.0 - t1);
                    s0 += w * std::log(1.0 - t0);
                }
            }
            gamma[i * m + k] = 1.0 / (1.0 + std::exp(s0 - s1));
        }
    }
}

// Posterior-weighted marginals, per-bit informations and latent-row
// information from a posterior matrix.
LatentStats collect_stats(const BitMatrix& x, const std::vector<double>& gamma,
                          int m) {
    const std::size_t n = x.n, h = x.h;
    LatentStats st;
    st.gamma = gamma;
    st.pi.assign(m, 0.0);
    st.info.assign(m * h, 0.0);
    st.info_yx.assign(m, 0.0);
    for (int k = 0; k < m; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += gamma[i * m + k];
        st.pi[k] = s / static_cast<double>(n);
    }
    for (int k = 0; k < m; ++k) {
        for (std::size_t j = 0; j < h; ++j) {
            double a1 = 0.0, b1 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double g = gamma[i * m + k];
                const double xv = x.at(i, j);
                a1 += g * xv;
                b1 += (1.0 - g) * xv;
            }
            const double nn = static_cast<double>(n);
            const double p11 = a1 / nn;                       // y=1, x=1
            const double p10 = st.pi[k] - p11;                // y=1, x=0
            const double p01 = b1 / nn;                       // y=0, x=1
            const double p00 = (1.0 - st.pi[k]) - p01;        // y=0, x=0
            st.info[k * h + j] =
                mi_2x2(std::max(p00, 0.0), std::max(p01, 0.0),
                       std::max(p10, 0.0), std::max(p11, 0.0));
        }
        const double pi = clip_unit(st.pi[k], kTableClip);
        double iyx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double g = gamma[i * m + k];
            if (g > 0.0) iyx += g * log2_safe(g / pi);
            if (g < 1.0) iyx += (1.0 - g) * log2_safe((1.0 - g) / (1.0 - pi));
        }
        st.info_yx[k] = std::max(iyx / static_cast<double>(n), 0.0);
    }
    return st;
}

// argmax over latents per bit, ties to the lowest latent.
void update_weights(LatentModel& model, const LatentStats& st, double damping) {
    const std::size_t h = model.h;
    for (std::size_t j = 0; j < h; ++j) {
        int best = 0;
        for (int k = 1; k < model.m; ++k)
            if (st.info[k * h + j] > st.info[best * h + j]) best = k;
        for (int k = 0; k < model.m; ++k) {
            const double target = (k == best) ? 1.0 : 0.0;
            double& w = model.weight[k * h + j];
            w = (1.0 - damping) * w + damping * target;
        }
    }
}

void m_step_tables(LatentModel& model, const BitMatrix& x,
                   const std::vector<double>& gamma) {
    const std::size_t n = x.n, h = x.h;
    for (int k = 0; k < model.m; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += gamma[i * model.m + k];
        model.marginal[k] = clip_unit(s / static_cast<double>(n), kTableClip);
        for (std::size_t j = 0; j < h; ++j) {
            double a1 = 0.0, a = 0.0, b1 = 0.0, b = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double g = gamma[i * model.m + k];
                const double xv = x.at(i, j);
                a1 += g * xv;
                a += g;
                b1 += (1.0 - g) * xv;
                b += 1.0 - g;
            }
            model.cond_one[(k * h + j) * 2 + 1] =
                clip_unit(a > 0.0 ? a1 / a : 0.5, kTableClip);
            model.cond_one[(k * h + j) * 2 + 0] =
                clip_unit(b > 0.0 ? b1 / b : 0.5, kTableClip);
        }
    }
}

double objective_bits(const LatentModel& model, const LatentStats& st) {
    const std::size_t h = model.h;
    double total = 0.0;
    for (int k = 0; k < model.m; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < h; ++j)
            s += model.weight[k * h + j] * st.info[k * h + j];
        total += s - st.info_yx[k];
    }
    return total;
}

}  // namespace

std::vector<double> LatentModel::posterior(const std::uint8_t* row) const {
    if (kind != Kind::Fitted)
        throw Error("LatentModel::posterior: not a fitted model");
    std::vector<double> out(m);
    for (int k = 0; k < m; ++k) {
        const double pi = marginal[k];
        double s1 = std::log(pi), s0 = std::log(1.0 - pi);
        for (std::size_t j = 0; j < h; ++j) {
            const double w = weight[k * h + j];
            if (w == 0.0) continue;
            const double t1 = cond_one[(k * h + j) * 2 + 1];
            const double t0 = cond_one[(k * h + j) * 2 + 0];
            if (row[j]) {
                s1 += w * std::log(t1);
                s0 += w * std::log(t0);
            } else {
                s1 += w * std::log(1.0 - t1);
                s0 += w * std::log(1.0 - t0);
            }
        }
        out[k] = 1.0 / (1.0 + std::exp(s0 - s1));
    }
    return out;
}

double LatentModel::tc_explained_bits(const BitMatrix& rows) const {
    if (rows.h != h)
        throw ValidationError("tc_explained_bits: code width mismatch");
    if (rows.n == 0) throw ValidationError("tc_explained_bits: no rows");
    if (kind == Kind::Oracle) {
        // Exact: TC(C) - TC(C | Y) with the stored deterministic assignment.
        std::vector<std::vector<std::size_t>> rows_of_cell(cells);
        for (std::size_t i = 0; i < rows.n; ++i) {
            const auto it = pattern_cell.find(rows.row_key(i));
            if (it == pattern_cell.end())
                throw ValidationError("tc_explained_bits: pattern unseen by oracle");
            rows_of_cell[it->second].push_back(i);
        }
        double cond = 0.0;
        for (const auto& cell_rows : rows_of_cell) {
            if (cell_rows.empty()) continue;
            const BitMatrix sub = rows.select_rows(cell_rows);
            const double w = static_cast<double>(cell_rows.size()) /
                             static_cast<double>(rows.n);
            cond += w * total_correlation_exact(sub);
        }
        return total_correlation_exact(rows) - cond;
    }
    std::vector<double> gamma;
    e_step(rows, *this, gamma);
    const LatentStats st = collect_stats(rows, gamma, m);
    return objective_bits(*this, st);
}

LatentModel fit_latent_model(const BitMatrix& ct, int m,
                             const LatentFitConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (m < 1) throw ValidationError("fit_latent_model: need at least 1 latent");
    if (ct.n < 2) throw ValidationError("fit_latent_model: need at least 2 rows");
    if (ct.h < 1) throw ValidationError("fit_latent_model: empty code");

    const std::size_t h = ct.h;
    LatentModel best_model;
    double best_obj = -1e300;

    for (int r = 0; r < cfg.restarts; ++r) {
        auto eng = rng::make_engine(
            rng::derive_seed(seed, 0x1a7e, static_cast<std::uint64_t>(r)));
        LatentModel model;
        model.kind = LatentModel::Kind::Fitted;
        model.m = m;
        model.h = h;
        model.weight.resize(m * h);
        model.cond_one.resize(m * h * 2);
        model.marginal.resize(m);
        for (auto& w : model.weight) w = 0.5 + 0.5 * rng::uniform_real(eng);
        for (auto& t : model.cond_one) t = 0.25 + 0.5 * rng::uniform_real(eng);
        for (auto& p : model.marginal) p = 0.4 + 0.2 * rng::uniform_real(eng);
        model.best_restart = r;

        LatentModel best_iterate = model;
        double restart_best = -1e300;
        int stall = 0;
        bool stopped_early = false;
        std::vector<double> gamma;
        for (int iter = 0; iter < cfg.max_iters; ++iter) {
            e_step(ct, model, gamma);
            m_step_tables(model, ct, gamma);
            const LatentStats st = collect_stats(ct, gamma, m);
            update_weights(model, st, 0.5);
            const double obj = objective_bits(model, st);
            if (obj > restart_best + cfg.tolerance) {
                stall = 0;
            } else {
                ++stall;
            }
            if (obj > restart_best) {
                restart_best = obj;
                best_iterate = model;
            }
            model.trace.push_back(restart_best);
            if (stall >= cfg.patience) {
                stopped_early = true;
                break;
            }
        }
        best_iterate.trace = model.trace;
        best_iterate.converged = stopped_early;
        if (restart_best > best_obj) {
            best_obj = restart_best;
            best_model = best_iterate;
        }
    }
    return best_model;
}

LatentModel oracle_latent(const BitMatrix& ct,
                          const std::vector<std::uint32_t>& cell_of_row,
                          std::size_t cells) {
    if (cell_of_row.size() != ct.n)
        throw ValidationError("oracle_latent: assignment length mismatch");
    LatentModel model;
    model.kind = LatentModel::Kind::Oracle;
    model.h = ct.h;
    model.cells = cells;
    for (std::size_t i = 0; i < ct.n; ++i) {
        if (cell_of_row[i] >= cells)
            throw ValidationError("oracle_latent: cell index out of range");
        const std::uint64_t key = ct.row_key(i);
        auto [it, inserted] = model.pattern_cell.emplace(key, cell_of_row[i]);
        if (!inserted && it->second != cell_of_row[i])
            throw ValidationError(
                "oracle_latent: pattern mapped to two different cells");
    }
    return model;
}

LatentModel oracle_latent_best(const BitMatrix& ct, std::size_t cells) {
    const PartitionOptimum opt = best_partition_tc(ct, cells);
    return oracle_latent(ct, opt.cell_of_row, std::max<std::size_t>(opt.cells, 1));
}

ExactConditionalProposal::ExactConditionalProposal(const BitMatrix& ct,
                                                   const BitMatrix& cp) {
    if (ct.n != cp.n)
        throw ValidationError("ExactConditionalProposal: row count mismatch");
    if (ct.n == 0) throw ValidationError("ExactConditionalProposal: no rows");
    cp_h_ = cp.h;
    marginal_.assign(ct.h, 0.0);
    for (std::size_t j = 0; j < ct.h; ++j) {
        std::size_t pos = 0;
        for (std::size_t i = 0; i < ct.n; ++i) pos += ct.at(i, j);
        marginal_[j] = static_cast<double>(pos) / static_cast<double>(ct.n);
    }
    std::unordered_map<std::uint64_t, std::pair<std::vector<double>, std::size_t>>
        acc;
    for (std::size_t i = 0; i < ct.n; ++i) {
        auto& slot = acc[cp.row_key(i)];
        if (slot.first.empty()) slot.first.assign(ct.h, 0.0);
        for (std::size_t j = 0; j < ct.h; ++j) slot.first[j] += ct.at(i, j);
        ++slot.second;
    }
    for (auto& [key, slot] : acc) {
        std::vector<double> cond(ct.h);
        for (std::size_t j = 0; j < ct.h; ++j)
            cond[j] = slot.first[j] / static_cast<double>(slot.second);
        cond_.emplace(key, std::move(cond));
    }
}

std::vector<double> ExactConditionalProposal::prob_one(
    const std::uint8_t* cp_row) const {
    std::uint64_t key = 0;
    for (std::size_t j = 0; j < cp_h_; ++j)
        if (cp_row[j]) key |= (1ULL << j);
    const auto it = cond_.find(key);
    return it != cond_.end() ? it->second : marginal_;
}

namespace {

struct BoundTerms {
    double sum_marg = 0.0;
    double sum_log_q = 0.0;
};

MiLbReport assemble(const BitMatrix& ct, const LatentModel& latent,
                    const BoundTerms& terms, int folds) {
    MiLbReport r;
    r.sum_marginal_entropy_bits = terms.sum_marg;
    r.tc_explained_bits = latent.tc_explained_bits(ct);
    r.sum_mean_log_q_bits = terms.sum_log_q;
    r.mi_lb_bits =
        r.sum_marginal_entropy_bits - r.tc_explained_bits + r.sum_mean_log_q_bits;
    r.entropy_ub_bits = r.sum_marginal_entropy_bits - r.tc_explained_bits;
    r.nmi_lb = r.entropy_ub_bits > 0.0 ? r.mi_lb_bits / r.entropy_ub_bits : 0.0;
    r.n_eval = ct.n;
    r.folds = folds;
    return r;
}

double sum_marginals(const BitMatrix& ct) {
    double s = 0.0;
    for (std::size_t j = 0; j < ct.h; ++j) s += column_entropy_bits(ct, j);
    return s;
}

double log_q_of_row(const std::vector<double>& prob, const std::uint8_t* ct_row,
                    std::size_t h) {
    double s = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
        const double q1 = clip_unit(prob[j], kProposalClip);
        s += log2_safe(ct_row[j] ? q1 : 1.0 - q1);
    }
    return s;
}

void validate_bound_inputs(const BitMatrix& ct, const BitMatrix& cp,
                           const LatentModel& latent) {
    if (ct.n != cp.n) throw ValidationError("mi_lower_bound: row count mismatch");
    if (ct.n < 2) throw ValidationError("mi_lower_bound: need at least 2 rows");
    if (ct.h < 1 || cp.h < 1) throw ValidationError("mi_lower_bound: empty code");
    if (latent.h != ct.h)
        throw ValidationError("mi_lower_bound: latent model width mismatch");
}

}  // namespace

MiLbReport mi_lower_bound(const BitMatrix& ct, const BitMatrix& cp,
                          const LatentModel& latent,
                          const RandomForestConfig& proposal, int folds,
                          std::uint64_t seed) {
    validate_bound_inputs(ct, cp, latent);
    proposal.validate();
    if (folds < 2) throw ValidationError("mi_lower_bound: need at least 2 folds");
    if (ct.n < 2 * static_cast<std::size_t>(folds))
        throw ValidationError("mi_lower_bound: need at least 2 rows per fold");

    const std::size_t n = ct.n;
    auto eng = rng::make_engine(rng::derive_seed(seed, 0xf01d));
    const std::vector<std::size_t> perm = rng::permutation(n, eng);
    std::vector<int> fold_of(n);
    for (std::size_t i = 0; i < n; ++i)
        fold_of[perm[i]] = static_cast<int>(i % folds);

    BoundTerms terms;
    terms.sum_marg = sum_marginals(ct);
    double total_log = 0.0;
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> train_rows, eval_rows;
        for (std::size_t i = 0; i < n; ++i)
            (fold_of[i] == f ? eval_rows : train_rows).push_back(i);
        const BitPredictorSet preds = train_predictors(
            cp.select_rows(train_rows), ct.select_rows(train_rows), proposal,
            rng::derive_seed(seed, 0x9f00, static_cast<std::uint64_t>(f)));
        for (std::size_t r : eval_rows) {
            const std::vector<double> prob = preds.predict_proba(cp.row(r));
            total_log += log_q_of_row(prob, ct.row(r), ct.h);
        }
    }
    terms.sum_log_q = total_log / static_cast<double>(n);
    return assemble(ct, latent, terms, folds);
}

MiLbReport mi_lower_bound_fixed(const BitMatrix& ct, const BitMatrix& cp,
                                const LatentModel& latent,
                                const BitProposal& proposal) {
    validate_bound_inputs(ct, cp, latent);
    BoundTerms terms;
    terms.sum_marg = sum_marginals(ct);
    double total_log = 0.0;
    for (std::size_t i = 0; i < ct.n; ++i) {
        const std::vector<double> prob = proposal.prob_one(cp.row(i));
        if (prob.size() != ct.h)
            throw ValidationError("mi_lower_bound: proposal width mismatch");
        total_log += log_q_of_row(prob, ct.row(i), ct.h);
    }
    terms.sum_log_q = total_log / static_cast<double>(ct.n);
    return assemble(ct, latent, terms, 0);
}

double shuffled_mi_lb(const BitMatrix& ct, const BitMatrix& cp,
                      const LatentModel& latent,
                      const RandomForestConfig& proposal, int folds,
                      std::uint64_t seed) {
    validate_bound_inputs(ct, cp, latent);
    auto eng = rng::make_engine(rng::derive_seed(seed, 0x50f1));
    const std::vector<std::size_t> perm = rng::permutation(ct.n, eng);
    const BitMatrix cp_shuffled = cp.select_rows(perm);
    return mi_lower_bound(ct, cp_shuffled, latent, proposal, folds,
                          rng::derive_seed(seed, 0xba5e))
        .mi_lb_bits;
}

}  // namespace hashtalk
