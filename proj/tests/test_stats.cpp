#include <catch2/catch_amalgamated.hpp>

#include "modval/stats.hpp"

using namespace modval;
using namespace modval::stats;
using Catch::Approx;

namespace {

std::vector<double> sample_from(const DistributionFit& fit, std::size_t n, std::uint64_t seed) {
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> unif(1e-12, 1.0 - 1e-12);
    std::vector<double> out(n);
    for (auto& v : out) v = fit.quantile(unif(rng));
    return out;
}

std::vector<double> normal_draws(std::size_t n, std::uint64_t seed, double mu = 0, double sd = 1) {
    auto rng = make_rng(seed);
    std::normal_distribution<double> g(mu, sd);
    std::vector<double> out(n);
    for (auto& v : out) v = g(rng);
    return out;
}

}  // namespace

TEST_CASE("percentile follows the type-7 convention") {
    std::vector<double> v{1, 2, 3, 4};
    CHECK(percentile(v, 0.5) == Approx(2.5));
    CHECK(percentile(v, 0.0) == Approx(1.0));
    CHECK(percentile(v, 1.0) == Approx(4.0));
    CHECK(percentile(v, 0.25) == Approx(1.75));
}

TEST_CASE("normal fit recovers symmetric location") {
    std::vector<double> v{-1, 1, -1, 1, -1, 1, -1, 1};
    auto f = fit(v, Family::normal);
    CHECK(f.params[0] == Approx(0.0).margin(1e-15));
}

TEST_CASE("laplace fit recovers parameters from a large sample") {
    DistributionFit truth{Family::laplace, {0.0, 1.0, 0, 0}, ""};
    auto v = sample_from(truth, 100000, 42);
    auto f = fit(v, Family::laplace);
    CHECK(f.params[0] == Approx(0.0).margin(0.02));
    CHECK(f.params[1] == Approx(1.0).margin(0.02));
}

TEST_CASE("degenerate samples are rejected by every family") {
    std::vector<double> v(30, 3.14);
    for (auto fam : {Family::normal, Family::laplace, Family::cauchy, Family::johnson_su})
        CHECK_THROWS_AS(fit(v, fam), std::invalid_argument);
    CHECK_THROWS_AS(fit(std::vector<double>{1, 2, 3}, Family::normal), std::invalid_argument);
}

TEST_CASE("ks statistic on quantile-spaced samples equals 0.5/n") {
    DistributionFit f{Family::normal, {0.0, 1.0, 0, 0}, ""};
    const std::size_t n = 40;
    std::vector<double> v;
    for (std::size_t i = 1; i <= n; ++i)
        v.push_back(f.quantile((static_cast<double>(i) - 0.5) / n));
    CHECK(ks_statistic(v, f) == Approx(0.5 / n).epsilon(1e-9));
}

TEST_CASE("ks accepts matching samples and rejects a cauchy mismatch") {
    int accepted = 0;
    for (int t = 0; t < 100; ++t) {
        auto v = normal_draws(10000, 100 + t);
        auto f = fit(v, Family::normal);
        if (ks_test(v, f).pvalue > 0.01) ++accepted;
    }
    CHECK(accepted >= 95);

    auto v = normal_draws(10000, 7);
    DistributionFit cauchy{Family::cauchy, {0.0, 1.0, 0, 0}, ""};
    CHECK(ks_test(v, cauchy).pvalue < 0.001);
}

TEST_CASE("ks statistic is invariant under affine rescaling of sample and fit") {
    auto v = normal_draws(500, 3);
    DistributionFit f{Family::normal, {0.0, 1.0, 0, 0}, ""};
    const double d0 = ks_statistic(v, f);
    std::vector<double> w;
    for (double x : v) w.push_back(3.5 * x + 2.0);
    DistributionFit g{Family::normal, {2.0, 3.5, 0, 0}, ""};
    CHECK(ks_statistic(w, g) == Approx(d0).epsilon(1e-12));
}

TEST_CASE("ad test needs 8 samples and weights the tails more than ks") {
    DistributionFit f{Family::normal, {0.0, 1.0, 0, 0}, ""};
    CHECK_THROWS_AS(ad_test(std::vector<double>{1, 2, 3}, f), std::invalid_argument);

    // 2% contamination at +-8 sigma: paired comparison over seeds
    int ad_rejects = 0, ks_rejects = 0;
    for (int t = 0; t < 30; ++t) {
        auto v = normal_draws(200, 900 + t);
        for (int k = 0; k < 4; ++k) v[static_cast<std::size_t>(k)] = (k % 2 ? 8.0 : -8.0);
        auto fitted = fit(v, Family::normal);
        if (ad_test(v, fitted, 200, 55 + t).pvalue < 0.05) ++ad_rejects;
        if (ks_test(v, fitted).pvalue < 0.05) ++ks_rejects;
    }
    CHECK(ad_rejects >= ks_rejects);
    CHECK(ad_rejects >= 25);
}

TEST_CASE("anova basics") {
    std::vector<std::vector<double>> same{{1, 2, 3}, {1, 2, 3}, {1, 2, 3}};
    auto r = anova(same);
    CHECK(r.statistic == Approx(0.0));
    CHECK(r.pvalue == Approx(1.0));

    std::vector<std::vector<double>> apart{{0.001, -0.001, 0.0005, -0.0005},
                                           {5.001, 4.999, 5.0005, 4.9995}};
    CHECK(anova(apart).pvalue < 1e-12);

    CHECK_THROWS_AS(anova(std::vector<std::vector<double>>{{1.0}, {1, 2}}),
                    std::invalid_argument);
}

TEST_CASE("levene separates unequal variances") {
    auto a = normal_draws(100, 1, 0, 1);
    auto b = normal_draws(100, 2, 0, 5);
    std::vector<std::vector<double>> groups{a, b};
    CHECK(levene(groups).pvalue < 0.001);
    CHECK_THROWS_AS(levene(std::vector<std::vector<double>>{{1, 2, 3}}), std::invalid_argument);
}

TEST_CASE("pearson and spearman behave on canonical relations") {
    std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<double> lin, cub;
    for (double v : x) {
        lin.push_back(2 * v + 1);
        cub.push_back(v * v * v);
    }
    CHECK(pearson(x, lin).statistic == Approx(1.0));
    CHECK(spearman(x, cub).statistic == Approx(1.0));
    CHECK(pearson(x, cub).statistic < 1.0);
    std::vector<double> c(8, 1.0);
    CHECK_THROWS_AS(pearson(x, c), std::invalid_argument);

    int calibrated = 0;
    for (int t = 0; t < 40; ++t) {
        auto rng = make_rng(40 + static_cast<std::uint64_t>(t));
        std::uniform_real_distribution<double> u(0, 1);
        std::vector<double> a(1000), b(1000);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = u(rng);
            b[i] = u(rng);
        }
        auto r = pearson(a, b);
        if (std::abs(r.statistic) < 0.1 && r.pvalue > 0.05) ++calibrated;
    }
    CHECK(calibrated >= 30);
}

TEST_CASE("gesd recovers planted outliers and rejects degenerate input") {
    auto v = normal_draws(1000, 11);
    const std::vector<std::size_t> planted{3, 117, 256, 600, 999};
    int sign = 1;
    for (auto idx : planted) {
        v[idx] = 8.0 * sign;
        sign = -sign;
    }
    auto flagged = gesd(v, 10, 0.01);
    CHECK(flagged == planted);

    std::vector<double> flat(50, 2.0);
    CHECK_THROWS_AS(gesd(flat, 5, 0.05), std::invalid_argument);
    CHECK_THROWS_AS(gesd(std::vector<double>{1, 2, 3, 4}, 2, 0.05), std::invalid_argument);
}

TEST_CASE("gesd false-flag rate tracks alpha and flags at most k") {
    int runs_with_flags = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        auto v = normal_draws(1000, 5000 + t);
        auto flagged = gesd(v, 10, 0.05);
        CHECK(flagged.size() <= 10);
        if (!flagged.empty()) ++runs_with_flags;
    }
    const double rate = static_cast<double>(runs_with_flags) / trials;
    CHECK(rate > 0.005);
    CHECK(rate < 0.12);
}

TEST_CASE("gesd is invariant under sample reordering") {
    auto v = normal_draws(500, 77);
    v[10] = 9.0;
    v[400] = -8.5;
    auto flagged = gesd(v, 5, 0.01);
    std::vector<double> rev(v.rbegin(), v.rend());
    auto flagged_rev = gesd(rev, 5, 0.01);
    std::vector<std::size_t> mapped;
    for (auto i : flagged_rev) mapped.push_back(v.size() - 1 - i);
    std::sort(mapped.begin(), mapped.end());
    CHECK(flagged == mapped);
}

TEST_CASE("johnson normalization maps the fitted family to standard normal") {
    DistributionFit truth{Family::johnson_su, {-0.5, 1.3, 0.02, 0.05}, ""};
    CHECK(johnson_normalize(std::vector<double>{0.02}, truth)[0] == Approx(-0.5));

    auto v = sample_from(truth, 20000, 9);
    auto fitted = fit(v, Family::johnson_su);
    auto z = johnson_normalize(v, fitted);
    DistributionFit std_normal{Family::normal, {0.0, 1.0, 0, 0}, ""};
    CHECK(ks_test(z, std_normal).pvalue > 0.01);

    // strictly increasing
    std::vector<double> probe{-1.0, -0.5, 0.0, 0.5, 1.0};
    auto pz = johnson_normalize(probe, truth);
    for (std::size_t i = 1; i < pz.size(); ++i) CHECK(pz[i] > pz[i - 1]);
}

TEST_CASE("bootstrap basics and degenerate cases") {
    std::vector<double> flat(20, 1.5);
    auto r = bootstrap(flat, Statistic::parse("median"), 300, 1);
    CHECK(r.ci_lo == Approx(1.5));
    CHECK(r.ci_hi == Approx(1.5));
    CHECK_THROWS_AS(bootstrap(flat, Statistic::parse("median"), 100, 1), std::invalid_argument);
    CHECK_THROWS_AS(Statistic::parse("mode"), std::invalid_argument);
    CHECK(Statistic::parse("percentile:5").p == Approx(0.05));
}

TEST_CASE("bootstrap CI width shrinks with sample size") {
    std::vector<double> med_width;
    for (std::size_t n : {100u, 1000u, 10000u}) {
        std::vector<double> widths;
        for (int s = 0; s < 20; ++s) {
            auto v = normal_draws(n, 300 + static_cast<std::uint64_t>(s));
            auto r = bootstrap(v, Statistic::parse("percentile:5"), 250,
                               static_cast<std::uint64_t>(s));
            widths.push_back(r.ci_hi - r.ci_lo);
        }
        med_width.push_back(percentile(widths, 0.5));
    }
    CHECK(med_width[1] <= med_width[0]);
    CHECK(med_width[2] <= med_width[1]);
}

TEST_CASE("bootstrap is deterministic and independent of thread count") {
    auto v = normal_draws(500, 4);
    auto a = bootstrap(v, Statistic::parse("mean"), 400, 9, 1);
    auto b = bootstrap(v, Statistic::parse("mean"), 400, 9, 4);
    CHECK(a.ci_lo == b.ci_lo);
    CHECK(a.ci_hi == b.ci_hi);
    CHECK(a.bootstrap_mean == b.bootstrap_mean);
}

TEST_CASE("tolerance band widens plain percentile positions and stays ordered") {
    for (int n : {50, 167, 300, 1000, 2000}) {
        auto [j, k] = tolerance_band_indices(n, 0.95, 0.75);
        CHECK(j >= 1);
        CHECK(k <= n);
        CHECK(j < k);
        // coverage guarantee: (k - j) / (n + 1) at or above the level
        CHECK(static_cast<double>(k - j) / (n + 1) >= 0.95 - 1e-12);
    }
}

TEST_CASE("split-half mode fits one half and tests the other") {
    auto v = normal_draws(2000, 55);
    auto sh = split_half_ks(v, Family::normal, 3);
    CHECK(sh.ks.pvalue > 0.001);
    CHECK(sh.ks.df1 == Approx(1000.0));  // tested on the held-out half only
    CHECK_THROWS_AS(split_half_ks(std::vector<double>(10, 1.0), Family::normal, 1),
                    std::invalid_argument);
}

TEST_CASE("p-values stay within [0,1] across random inputs") {
    for (int t = 0; t < 25; ++t) {
        auto v = normal_draws(60, 600 + static_cast<std::uint64_t>(t), 1.0, 2.0);
        auto f = fit(v, Family::normal);
        for (double p : {ks_test(v, f).pvalue, ad_test(v, f, 100, t).pvalue}) {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
    }
}
