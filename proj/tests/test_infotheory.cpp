#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hashtalk/infotheory.hpp"
#include "hashtalk/rng.hpp"

using namespace hashtalk;

namespace {

BitMatrix from_rows(const std::vector<std::vector<int>>& rows) {
    BitMatrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m.set(i, j, rows[i][j] ? 1 : 0);
    return m;
}

BitMatrix random_bits(std::size_t n, std::size_t h, std::uint64_t seed) {
    auto eng = rng::make_engine(seed);
    BitMatrix m(n, h);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < h; ++j)
            m.set(i, j, static_cast<std::uint8_t>(rng::uniform_index(eng, 2)));
    return m;
}

// All 2^w patterns repeated `reps` times, one latent factor per source bit
// expanded into `copies` identical columns.
BitMatrix factor_copies(std::size_t w, std::size_t copies, std::size_t reps) {
    BitMatrix m((std::size_t(1) << w) * reps, w * copies);
    std::size_t r = 0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
        for (std::size_t pat = 0; pat < (std::size_t(1) << w); ++pat, ++r)
            for (std::size_t s = 0; s < w; ++s)
                for (std::size_t c = 0; c < copies; ++c)
                    m.set(r, s + c * w, (pat >> s) & 1u);
    }
    return m;
}

// Conditional total correlation of `m` under an explicit row partition,
// straight from the definition. Independent check on the partition search.
double conditional_tc(const BitMatrix& m,
                      const std::vector<std::uint32_t>& cell_of_row,
                      std::size_t cells) {
    double tc = 0.0;
    for (std::uint32_t c = 0; c < cells; ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < m.n; ++i)
            if (cell_of_row[i] == c) idx.push_back(i);
        if (idx.empty()) continue;
        const double w =
            static_cast<double>(idx.size()) / static_cast<double>(m.n);
        tc += w * total_correlation_exact(m.select_rows(idx));
    }
    return tc;
}

constexpr double kEntropyQuarter = 0.8112781244591328;

}  // namespace

TEST_SUITE("infotheory") {

TEST_CASE("binary entropy matches hand values") {
    CHECK(entropy_bits(0.0) == 0.0);
    CHECK(entropy_bits(1.0) == 0.0);
    CHECK(entropy_bits(0.5) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(entropy_bits(0.25) == doctest::Approx(kEntropyQuarter).epsilon(1e-12));
    CHECK(entropy_bits(0.75) == doctest::Approx(kEntropyQuarter).epsilon(1e-12));
    CHECK_THROWS_AS(entropy_bits(-0.01), ValidationError);
    CHECK_THROWS_AS(entropy_bits(1.01), ValidationError);
}

TEST_CASE("column entropy counts ones") {
    const BitMatrix m = from_rows({{1, 0}, {0, 0}, {1, 0}, {1, 0}});
    CHECK(column_entropy_bits(m, 0) ==
          doctest::Approx(kEntropyQuarter).epsilon(1e-12));
    CHECK(column_entropy_bits(m, 1) == 0.0);
    CHECK_THROWS_AS(column_entropy_bits(m, 2), ValidationError);
}

TEST_CASE("total correlation of independent and duplicated columns") {
    const BitMatrix indep = from_rows({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
    CHECK(total_correlation_exact(indep) == doctest::Approx(0.0).epsilon(1e-12));

    const BitMatrix dup = from_rows({{0, 0}, {0, 0}, {1, 1}, {1, 1}});
    CHECK(total_correlation_exact(dup) == doctest::Approx(1.0).epsilon(1e-12));

    const BitMatrix trip = from_rows({{0, 0, 0}, {1, 1, 1}});
    CHECK(total_correlation_exact(trip) == doctest::Approx(2.0).epsilon(1e-12));

    BitMatrix wide(2, 21);
    CHECK_THROWS_AS(total_correlation_exact(wide), ValidationError);
    BitMatrix empty(0, 2);
    CHECK_THROWS_AS(total_correlation_exact(empty), ValidationError);
}

TEST_CASE("pairwise mutual information on known channels") {
    const BitMatrix bit = from_rows({{0}, {1}});
    CHECK(mi_bruteforce(bit, bit) == doctest::Approx(1.0).epsilon(1e-12));

    const BitMatrix ct = from_rows({{0}, {0}, {1}, {1}});
    const BitMatrix cp = from_rows({{0}, {1}, {0}, {1}});
    CHECK(mi_bruteforce(ct, cp) == doctest::Approx(0.0).epsilon(1e-12));

    // symmetric channel flipping the bit with probability 1/4, as an exact
    // 8-row weighted sample: counts (3, 1, 1, 3) over (00, 01, 10, 11)
    const BitMatrix in8 =
        from_rows({{0}, {0}, {0}, {0}, {1}, {1}, {1}, {1}});
    const BitMatrix out8 =
        from_rows({{0}, {0}, {0}, {1}, {0}, {1}, {1}, {1}});
    CHECK(mi_bruteforce(in8, out8) ==
          doctest::Approx(1.0 - kEntropyQuarter).epsilon(1e-12));

    BitMatrix a(4, 10), b(4, 11);
    CHECK_THROWS_AS(mi_bruteforce(a, b), ValidationError);
    BitMatrix c(3, 2);
    CHECK_THROWS_AS(mi_bruteforce(ct, c), ValidationError);
}

TEST_CASE("best partition explains duplicated structure") {
    // two identical columns, patterns 00 and 11: one binary latent suffices
    const BitMatrix dup = from_rows({{0, 0}, {0, 0}, {1, 1}, {1, 1}});
    const PartitionOptimum two = best_partition_tc(dup, 2);
    CHECK(two.tc_bits == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(two.cells == 2);
    CHECK(two.cell_of_row[0] == two.cell_of_row[1]);
    CHECK(two.cell_of_row[2] == two.cell_of_row[3]);
    CHECK(two.cell_of_row[0] != two.cell_of_row[2]);

    // four columns built from two factors: four cells recover everything
    const BitMatrix pairs = factor_copies(2, 2, 2);
    CHECK(total_correlation_exact(pairs) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(best_partition_tc(pairs, 4).tc_bits ==
          doctest::Approx(2.0).epsilon(1e-9));

    // six columns from three factors: four cells can pin two factors, the
    // third keeps one bit of residual dependence
    const BitMatrix triples = factor_copies(3, 2, 1);
    CHECK(total_correlation_exact(triples) ==
          doctest::Approx(3.0).epsilon(1e-12));
    CHECK(best_partition_tc(triples, 4).tc_bits ==
          doctest::Approx(2.0).epsilon(1e-9));
    CHECK(best_partition_tc(triples, 2).tc_bits ==
          doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(best_partition_tc(dup, 0), ValidationError);
    CHECK_THROWS_AS(best_partition_tc(BitMatrix(0, 2), 2), ValidationError);
}

TEST_CASE("partition search matches exhaustive assignment enumeration") {
    const BitMatrix m = random_bits(12, 3, 97531);
    const double tc_total = total_correlation_exact(m);
    for (std::size_t cells : {2u, 3u}) {
        // brute force over every pattern-to-cell assignment
        std::vector<std::uint64_t> keys(m.n);
        std::vector<std::uint64_t> distinct;
        for (std::size_t i = 0; i < m.n; ++i) {
            keys[i] = m.row_key(i);
            if (std::find(distinct.begin(), distinct.end(), keys[i]) ==
                distinct.end())
                distinct.push_back(keys[i]);
        }
        const std::size_t np = distinct.size();
        std::size_t total_assignments = 1;
        for (std::size_t p = 0; p < np; ++p) total_assignments *= cells;
        double best = -1.0;
        for (std::size_t code = 0; code < total_assignments; ++code) {
            std::vector<std::uint32_t> cell_of_pattern(np);
            std::size_t rest = code;
            for (std::size_t p = 0; p < np; ++p) {
                cell_of_pattern[p] = static_cast<std::uint32_t>(rest % cells);
                rest /= cells;
            }
            std::vector<std::uint32_t> cell_of_row(m.n);
            for (std::size_t i = 0; i < m.n; ++i) {
                const auto it =
                    std::find(distinct.begin(), distinct.end(), keys[i]);
                cell_of_row[i] =
                    cell_of_pattern[static_cast<std::size_t>(it - distinct.begin())];
            }
            best = std::max(best,
                            tc_total - conditional_tc(m, cell_of_row, cells));
        }
        const PartitionOptimum opt = best_partition_tc(m, cells);
        CHECK(opt.tc_bits == doctest::Approx(best).epsilon(1e-9));
        // the returned assignment achieves the returned value
        CHECK(tc_total - conditional_tc(m, opt.cell_of_row, opt.cells) ==
              doctest::Approx(opt.tc_bits).epsilon(1e-9));
    }
}

TEST_CASE("latent bit wrapper guards its domain") {
    const BitMatrix dup = from_rows({{0, 0}, {0, 0}, {1, 1}, {1, 1}});
    CHECK(tc_explained_bruteforce(dup, 1) == doctest::Approx(1.0).epsilon(1e-9));

    const BitMatrix pairs = factor_copies(2, 2, 2);
    CHECK(tc_explained_bruteforce(pairs, 2) ==
          doctest::Approx(2.0).epsilon(1e-9));

    const BitMatrix triples = factor_copies(3, 2, 1);
    CHECK(tc_explained_bruteforce(triples, 2) ==
          doctest::Approx(2.0).epsilon(1e-9));

    CHECK_THROWS_AS(tc_explained_bruteforce(BitMatrix(2, 9), 1),
                    ValidationError);
    CHECK_THROWS_AS(tc_explained_bruteforce(dup, 0), ValidationError);
    CHECK_THROWS_AS(tc_explained_bruteforce(dup, 3), ValidationError);
    CHECK_THROWS_AS(tc_explained_bruteforce(factor_copies(5, 1, 1), 2),
                    ValidationError);
}

TEST_CASE("oracle latents evaluate exactly") {
    const BitMatrix dup = from_rows({{0, 0}, {0, 0}, {1, 1}, {1, 1}});
    const LatentModel best = oracle_latent_best(dup, 2);
    CHECK(best.tc_explained_bits(dup) == doctest::Approx(1.0).epsilon(1e-9));

    const LatentModel trivial = oracle_latent(dup, {0, 0, 0, 0}, 1);
    CHECK(trivial.tc_explained_bits(dup) == doctest::Approx(0.0).epsilon(1e-9));

    CHECK_THROWS_AS(oracle_latent(dup, {0, 0, 1}, 2), ValidationError);
    CHECK_THROWS_AS(oracle_latent(dup, {0, 0, 2, 2}, 2), ValidationError);
    CHECK_THROWS_AS(oracle_latent(dup, {0, 1, 1, 1}, 2), ValidationError);

    const BitMatrix other = from_rows({{1, 0}});
    CHECK_THROWS_AS(best.tc_explained_bits(other), ValidationError);
    CHECK_THROWS_AS(best.posterior(other.row(0)), Error);
}

TEST_CASE("latent fit recovers duplicated factor pairs") {
    auto eng = rng::make_engine(20240817);
    const std::size_t n = 400;
    BitMatrix data(n, 4);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t y1 = static_cast<std::uint8_t>(rng::uniform_index(eng, 2));
        const std::uint8_t y2 = static_cast<std::uint8_t>(rng::uniform_index(eng, 2));
        data.set(i, 0, y1);
        data.set(i, 1, y1);
        data.set(i, 2, y2);
        data.set(i, 3, y2);
    }
    const double oracle = oracle_latent_best(data, 4).tc_explained_bits(data);
    CHECK(oracle > 1.9);

    LatentFitConfig cfg;
    const LatentModel fit = fit_latent_model(data, 2, cfg, 4242);
    const double explained = fit.tc_explained_bits(data);
    CHECK(explained >= 0.95 * oracle);
    CHECK(fit.converged);
    CHECK(fit.best_restart >= 0);
    CHECK(fit.best_restart < cfg.restarts);
    for (std::size_t t = 1; t < fit.trace.size(); ++t)
        CHECK(fit.trace[t] >= fit.trace[t - 1]);

    const std::vector<double> post = fit.posterior(data.row(0));
    REQUIRE(post.size() == 2);
    for (double p : post) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
}

TEST_CASE("latent fit is seed deterministic") {
    const BitMatrix data = factor_copies(2, 2, 25);
    LatentFitConfig cfg;
    cfg.restarts = 3;
    const LatentModel a = fit_latent_model(data, 2, cfg, 777);
    const LatentModel b = fit_latent_model(data, 2, cfg, 777);
    CHECK(a.weight == b.weight);
    CHECK(a.cond_one == b.cond_one);
    CHECK(a.marginal == b.marginal);
    CHECK(a.trace == b.trace);
    CHECK(a.best_restart == b.best_restart);
}

TEST_CASE("latent fit on constant data explains nothing") {
    BitMatrix flat(50, 3);
    LatentFitConfig cfg;
    cfg.restarts = 2;
    const LatentModel fit = fit_latent_model(flat, 1, cfg, 99);
    CHECK(std::abs(fit.tc_explained_bits(flat)) <= 1e-9);
}

TEST_CASE("latent fit validates inputs") {
    const BitMatrix data = factor_copies(2, 1, 2);
    LatentFitConfig cfg;
    CHECK_THROWS_AS(fit_latent_model(data, 0, cfg, 1), ValidationError);
    CHECK_THROWS_AS(fit_latent_model(BitMatrix(1, 2), 1, cfg, 1),
                    ValidationError);
    cfg.tolerance = 0.0;
    CHECK_THROWS_AS(fit_latent_model(data, 1, cfg, 1), ValidationError);
    cfg = LatentFitConfig{};
    cfg.restarts = 0;
    CHECK_THROWS_AS(fit_latent_model(data, 1, cfg, 1), ValidationError);
    cfg = LatentFitConfig{};
    cfg.patience = 0;
    CHECK_THROWS_AS(fit_latent_model(data, 1, cfg, 1), ValidationError);
}

TEST_CASE("empirical conditional proposal") {
    const BitMatrix ct = from_rows({{0}, {1}, {1}, {0}});
    const BitMatrix cp = from_rows({{0, 0}, {0, 1}, {0, 1}, {0, 0}});
    const ExactConditionalProposal prop(ct, cp);

    const std::uint8_t seen0[2] = {0, 0};
    const std::uint8_t seen1[2] = {0, 1};
    const std::uint8_t unseen[2] = {1, 1};
    CHECK(prop.prob_one(seen0)[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(prop.prob_one(seen1)[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(prop.prob_one(unseen)[0] == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(ExactConditionalProposal(ct, BitMatrix(3, 1)),
                    ValidationError);
}

TEST_CASE("fixed proposal bound hits the clipped copy value") {
    BitMatrix bit(200, 1);
    for (std::size_t i = 0; i < bit.n; ++i) bit.set(i, 0, i & 1u);
    const LatentModel latent = oracle_latent_best(bit, 2);
    const ExactConditionalProposal prop(bit, bit);
    const MiLbReport r = mi_lower_bound_fixed(bit, bit, latent, prop);

    CHECK(r.sum_marginal_entropy_bits == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.tc_explained_bits == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.mi_lb_bits ==
          doctest::Approx(1.0 + std::log2(1.0 - kProposalClip)).epsilon(1e-9));
    CHECK(r.entropy_ub_bits == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.mi_lb_bits <= mi_bruteforce(bit, bit));
    CHECK(mi_bruteforce(bit, bit) - r.mi_lb_bits ==
          doctest::Approx(-std::log2(1.0 - kProposalClip)).epsilon(1e-9));
    CHECK(r.n_eval == 200);
    CHECK(r.folds == 0);

    // report identities
    CHECK(r.mi_lb_bits == doctest::Approx(r.sum_marginal_entropy_bits -
                                          r.tc_explained_bits +
                                          r.sum_mean_log_q_bits)
                              .epsilon(1e-12));
    CHECK(r.entropy_ub_bits ==
          doctest::Approx(r.sum_marginal_entropy_bits - r.tc_explained_bits)
              .epsilon(1e-12));
    CHECK(r.nmi_lb ==
          doctest::Approx(r.mi_lb_bits / r.entropy_ub_bits).epsilon(1e-12));
}

TEST_CASE("marginal proposal on independent bits gives a zero bound") {
    BitMatrix ct(100, 1);
    for (std::size_t i = 0; i < ct.n; ++i) ct.set(i, 0, i & 1u);
    BitMatrix cp(100, 1);  // constant prompter code: proposal is the marginal
    const LatentModel latent = oracle_latent_best(ct, 2);
    const ExactConditionalProposal prop(ct, cp);
    const MiLbReport r = mi_lower_bound_fixed(ct, cp, latent, prop);
    CHECK(r.mi_lb_bits == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.sum_mean_log_q_bits <= 0.0);
}

TEST_CASE("bound never exceeds exact mutual information") {
    // dependent pair: cp echoes ct with some noise
    auto eng = rng::make_engine(555);
    const std::size_t n = 300;
    BitMatrix ct(n, 2), cp(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            const std::uint8_t v =
                static_cast<std::uint8_t>(rng::uniform_index(eng, 2));
            ct.set(i, j, v);
            const bool flip = rng::uniform_index(eng, 4) == 0;
            cp.set(i, j, flip ? 1 - v : v);
        }
    }
    const LatentModel latent = oracle_latent_best(ct, 4);
    const ExactConditionalProposal prop(ct, cp);
    const MiLbReport r = mi_lower_bound_fixed(ct, cp, latent, prop);
    CHECK(r.mi_lb_bits <= mi_bruteforce(ct, cp) + 1e-9);
    CHECK(r.mi_lb_bits <= r.entropy_ub_bits + 1e-12);
    CHECK(r.mi_lb_bits > 0.2);
}

TEST_CASE("dropping a target column cannot raise exact information") {
    auto eng = rng::make_engine(4321);
    const std::size_t n = 200;
    BitMatrix ct(n, 2), cp(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            const std::uint8_t v =
                static_cast<std::uint8_t>(rng::uniform_index(eng, 2));
            ct.set(i, j, v);
            const bool flip = rng::uniform_index(eng, 5) == 0;
            cp.set(i, j, flip ? 1 - v : v);
        }
    }
    BitMatrix first(n, 1);
    for (std::size_t i = 0; i < n; ++i) first.set(i, 0, ct.at(i, 0));
    CHECK(mi_bruteforce(first, cp) <= mi_bruteforce(ct, cp) + 1e-12);
}

TEST_CASE("cross fitted bound learns the copy map") {
    const std::size_t n = 200;
    BitMatrix code(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        code.set(i, 0, i & 1u);
        code.set(i, 1, (i >> 1) & 1u);
    }
    const LatentModel latent = oracle_latent_best(code, 4);
    RandomForestConfig rf;
    rf.trees = 30;
    rf.max_depth = 6;
    const MiLbReport r = mi_lower_bound(code, code, latent, rf, 5, 2024);
    CHECK(r.entropy_ub_bits == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.mi_lb_bits > 1.9);
    CHECK(r.mi_lb_bits <= r.entropy_ub_bits + 1e-12);
    CHECK(r.folds == 5);
    CHECK(r.n_eval == n);

    const MiLbReport again = mi_lower_bound(code, code, latent, rf, 5, 2024);
    CHECK(again.mi_lb_bits == r.mi_lb_bits);
    CHECK(again.sum_mean_log_q_bits == r.sum_mean_log_q_bits);

    const double shuffled = shuffled_mi_lb(code, code, latent, rf, 5, 2024);
    CHECK(shuffled < 0.3);
    CHECK(shuffled + 0.5 < r.mi_lb_bits);
    CHECK(shuffled_mi_lb(code, code, latent, rf, 5, 2024) == shuffled);
}

TEST_CASE("cross fitted bound validates inputs") {
    BitMatrix code(20, 2);
    for (std::size_t i = 0; i < code.n; ++i) code.set(i, 0, i & 1u);
    const LatentModel latent = oracle_latent_best(code, 2);
    RandomForestConfig rf;
    rf.trees = 5;
    CHECK_THROWS_AS(mi_lower_bound(code, code, latent, rf, 1, 1),
                    ValidationError);
    CHECK_THROWS_AS(mi_lower_bound(code, code, latent, rf, 11, 1),
                    ValidationError);
    CHECK_THROWS_AS(mi_lower_bound(code, BitMatrix(21, 2), latent, rf, 2, 1),
                    ValidationError);
    const LatentModel narrow = oracle_latent_best(BitMatrix(20, 1), 2);
    CHECK_THROWS_AS(mi_lower_bound(code, code, narrow, rf, 2, 1),
                    ValidationError);
}

}  // TEST_SUITE
