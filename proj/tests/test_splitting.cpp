#include <catch2/catch_amalgamated.hpp>

#include "modval/splitting.hpp"
#include "modval/synthetic.hpp"
#include "oracle_helpers.hpp"

using namespace modval;
using Catch::Approx;

namespace {

// dataset with one categorical (levels) and `dims` numeric features
Dataset make_cat_dataset(const std::vector<int>& level_of_row, const Matrix& numerics,
                         int n_levels) {
    Dataset ds;
    for (Index c = 0; c < numerics.cols(); ++c)
        ds.schema.features.push_back(
            {"x" + std::to_string(c), ColumnKind::numeric, 0, "", "", {}});
    ColumnSpec cat{"cat", ColumnKind::ordinal, 0, "", "", {}};
    for (int l = 0; l < n_levels; ++l) cat.levels.push_back("L" + std::to_string(l));
    ds.schema.features.push_back(cat);
    ds.schema.outputs.push_back({"y", ColumnKind::numeric, 0, "", "", {}});
    const Index n = static_cast<Index>(level_of_row.size());
    ds.X.resize(n, numerics.cols() + 1);
    ds.X.leftCols(numerics.cols()) = numerics;
    for (Index r = 0; r < n; ++r)
        ds.X(r, numerics.cols()) = level_of_row[static_cast<std::size_t>(r)];
    ds.Y = Matrix::Zero(n, 1);
    ds.feature_levels.resize(static_cast<std::size_t>(ds.n()));
    ds.feature_levels.back() = cat.levels;
    return ds;
}

}  // namespace

TEST_CASE("holdout split counts, determinism and bounds") {
    SyntheticOptions so;
    so.rows = 1000;
    so.numeric_features = 3;
    auto ds = generate_synthetic_case(1, so).data;

    auto sp = holdout_split(ds, 0.8, 7);
    CHECK(sp.train_indices.size() == 800);
    CHECK(sp.test_indices.size() == 200);
    std::vector<Index> all = sp.train_indices;
    all.insert(all.end(), sp.test_indices.begin(), sp.test_indices.end());
    std::sort(all.begin(), all.end());
    for (Index i = 0; i < 1000; ++i) CHECK(all[static_cast<std::size_t>(i)] == i);

    auto sp2 = holdout_split(ds, 0.8, 7);
    CHECK(sp.train_indices == sp2.train_indices);
    CHECK(sp.test_indices == sp2.test_indices);

    CHECK_THROWS_AS(holdout_split(ds, 0.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(holdout_split(ds, 1.0, 1), std::invalid_argument);
}

TEST_CASE("lhs split strategy is deterministic and disjoint") {
    SyntheticOptions so;
    so.rows = 1000;
    so.numeric_features = 3;
    so.frame_levels = 2;
    so.stringers = 3;
    auto ds = generate_synthetic_case(2, so).data;
    auto a = holdout_split(ds, 0.8, 3, SplitStrategy::lhs);
    auto b = holdout_split(ds, 0.8, 3, SplitStrategy::lhs);
    CHECK(a.test_indices == b.test_indices);
    CHECK(a.train_indices.size() == 800);
    CHECK(a.test_indices.size() == 200);
    std::vector<Index> inter;
    std::set_intersection(a.train_indices.begin(), a.train_indices.end(),
                          a.test_indices.begin(), a.test_indices.end(),
                          std::back_inserter(inter));
    CHECK(inter.empty());
}

TEST_CASE("voxelize groups rows by categorical tuples") {
    Dataset ds;
    ds.schema.features = {{"a", ColumnKind::ordinal, 0, "", "", {"p", "q", "r"}},
                          {"b", ColumnKind::ordinal, 0, "", "", {"s", "t", "u", "v"}}};
    ds.schema.outputs = {{"y", ColumnKind::numeric, 0, "", "", {}}};
    ds.feature_levels = {{"p", "q", "r"}, {"s", "t", "u", "v"}};
    const int reps = 3;
    ds.X.resize(12 * reps, 2);
    ds.Y = Matrix::Zero(12 * reps, 1);
    Index r = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < reps; ++k) {
                ds.X(r, 0) = i;
                ds.X(r, 1) = j;
                ++r;
            }
    std::vector<Index> rows(static_cast<std::size_t>(ds.rows()));
    std::iota(rows.begin(), rows.end(), Index{0});

    SECTION("two variables: product of level counts") {
        std::vector<int> cols{0, 1};
        auto table = voxelize(ds, rows, cols);
        CHECK(table.voxels.size() == 12);
        std::size_t total = 0;
        for (const auto& [k, v] : table.voxels) total += v.size();
        CHECK(total == rows.size());
    }
    SECTION("single variable: one voxel per observed level") {
        std::vector<int> cols{0};
        auto table = voxelize(ds, rows, cols);
        CHECK(table.voxels.size() == 3);
    }
    SECTION("no categorical columns is an error") {
        std::vector<int> cols;
        CHECK_THROWS_AS(voxelize(ds, rows, cols), std::invalid_argument);
    }
}

namespace {

VoxelTable table_of(const std::vector<std::pair<std::vector<int>, Index>>& spec) {
    VoxelTable t;
    Index next = 0;
    for (const auto& [key, count] : spec)
        for (Index i = 0; i < count; ++i) t.voxels[key].push_back(next++);
    return t;
}

}  // namespace

TEST_CASE("two-sample chi-square over voxel occupancy") {
    SECTION("identical occupancy gives stat 0, p 1") {
        auto a = table_of({{{0}, 50}, {{1}, 50}});
        auto b = table_of({{{0}, 50}, {{1}, 50}});
        auto r = voxel_chi2(a, b);
        CHECK(r.statistic == Approx(0.0).margin(1e-12));
        CHECK(r.pvalue == Approx(1.0));
    }
    SECTION("strong imbalance: closed-form statistic 128, p far below 0.001") {
        auto a = table_of({{{0}, 90}, {{1}, 10}});
        auto b = table_of({{{0}, 10}, {{1}, 90}});
        auto r = voxel_chi2(a, b);
        // hand computation: all four expected counts are 50, (40^2/50)*4 = 128
        CHECK(r.statistic == Approx(128.0));
        CHECK(r.pvalue < 0.001);
        CHECK(r.df1 == Approx(1.0));
    }
    SECTION("statistic is symmetric in the two samples") {
        auto a = table_of({{{0}, 70}, {{1}, 35}, {{2}, 20}});
        auto b = table_of({{{0}, 40}, {{1}, 55}, {{2}, 30}});
        CHECK(voxel_chi2(a, b).statistic == Approx(voxel_chi2(b, a).statistic));
    }
    SECTION("single voxel after pooling is an error") {
        auto a = table_of({{{0}, 100}});
        auto b = table_of({{{0}, 100}});
        CHECK_THROWS_AS(voxel_chi2(a, b), std::invalid_argument);
    }
}

TEST_CASE("vtpm classification matches a brute-force oracle on random voxels") {
    auto rng = make_rng(17);
    std::uniform_int_distribution<int> n_pts(5, 500), n_dim(1, 5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int voxel = 0; voxel < 50; ++voxel) {
        const int n = n_pts(rng), d = n_dim(rng);
        Matrix pts(n, d);
        std::vector<std::vector<double>> pts_v(static_cast<std::size_t>(n),
                                               std::vector<double>(static_cast<std::size_t>(d)));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) {
                pts(i, j) = u(rng);
                pts_v[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = pts(i, j);
            }
        const auto st = voxel_distance_stats(pts);

        // oracle reproduces the thresholds from its own distance scan
        auto nn = oracle::nn_distances(pts_v);
        std::sort(nn.begin(), nn.end());
        const auto [j, k] =
            stats::tolerance_band_indices(static_cast<int>(nn.size()), 0.95, 0.75);
        REQUIRE(st.p2_5 == Approx(nn[static_cast<std::size_t>(j - 1)]));
        REQUIRE(st.p97_5 == Approx(nn[static_cast<std::size_t>(k - 1)]));

        for (int q = 0; q < 40; ++q) {
            Vector z(d);
            std::vector<double> zv(static_cast<std::size_t>(d));
            for (int j2 = 0; j2 < d; ++j2) {
                z(j2) = u(rng) * 1.5 - 0.25;
                zv[static_cast<std::size_t>(j2)] = z(j2);
            }
            const auto got = vtpm_classify(z, pts, st);
            const double dz = oracle::min_dist_to(pts_v, zv);
            VtpmClass want = VtpmClass::valid;
            if (dz >= st.p97_5) want = VtpmClass::isolated;
            else if (dz <= st.p2_5) want = VtpmClass::p_hacking;
            REQUIRE(got == want);
        }
    }
}

TEST_CASE("vtpm classification canonical cases") {
    auto rng = make_rng(23);
    std::uniform_real_distribution<double> u(0, 1);
    Matrix pts(100, 2);
    for (Index i = 0; i < pts.size(); ++i) pts(i) = u(rng);
    const auto st = voxel_distance_stats(pts);

    Vector dup = pts.row(17);
    CHECK(vtpm_classify(dup, pts, st) == VtpmClass::p_hacking);  // d_z = 0 <= P2.5

    Vector far(2);
    far << 50.0, 50.0;
    CHECK(vtpm_classify(far, pts, st) == VtpmClass::isolated);

    SECTION("classification is invariant under a common positive rescaling") {
        const double scale = 37.5;
        Matrix scaled = pts * scale;
        const auto st2 = voxel_distance_stats(scaled);
        for (int q = 0; q < 50; ++q) {
            Vector z(2);
            z << u(rng) * 1.4 - 0.2, u(rng) * 1.4 - 0.2;
            Vector z2 = z * scale;
            CHECK(vtpm_classify(z, pts, st) == vtpm_classify(z2, scaled, st2));
        }
    }
}

TEST_CASE("all-pairs distance population stays available behind the option") {
    auto rng = make_rng(29);
    std::uniform_real_distribution<double> u(0, 1);
    Matrix pts(30, 2);
    for (Index i = 0; i < pts.size(); ++i) pts(i) = u(rng);
    VtpmOptions opt;
    opt.population = VtpmOptions::Population::all_pairs;
    const auto st = voxel_distance_stats(pts, opt);
    CHECK(st.pair_count == 30 * 29 / 2);
    CHECK(st.p2_5 <= st.p97_5);
}

TEST_CASE("vtpm report flags duplicated test sets as p-hacking") {
    auto rng = make_rng(31);
    std::uniform_real_distribution<double> u(0, 1);
    const int per_level = 120, levels = 4;
    Matrix numerics(per_level * levels * 2, 2);
    std::vector<int> level_of;
    for (int l = 0; l < levels; ++l)
        for (int i = 0; i < per_level; ++i) {
            const Index r = static_cast<Index>(level_of.size());
            numerics(r, 0) = u(rng);
            numerics(r, 1) = u(rng);
            level_of.push_back(l);
        }
    // duplicate each training row exactly as a test row
    const Index half = static_cast<Index>(level_of.size());
    for (Index r = 0; r < half; ++r) {
        numerics.row(half + r) = numerics.row(r);
        level_of.push_back(level_of[static_cast<std::size_t>(r)]);
    }
    auto ds = make_cat_dataset(level_of, numerics, levels);
    SplitResult split;
    for (Index r = 0; r < half; ++r) split.train_indices.push_back(r);
    for (Index r = half; r < 2 * half; ++r) split.test_indices.push_back(r);
    auto rep = vtpm_report(split, ds);
    CHECK(rep.phacking_fraction >= 0.99);
    CHECK_FALSE(rep.adequate);
}

TEST_CASE("vtpm report sends unseen categorical tuples to the residual voxel") {
    auto rng = make_rng(37);
    std::uniform_real_distribution<double> u(0, 1);
    const int n_train = 300, n_test = 60;
    Matrix numerics(n_train + n_test, 2);
    std::vector<int> level_of;
    for (int i = 0; i < n_train; ++i) {
        numerics(i, 0) = u(rng);
        numerics(i, 1) = u(rng);
        level_of.push_back(i % 3);  // levels 0..2 in training
    }
    for (int i = 0; i < n_test; ++i) {
        const Index r = n_train + i;
        numerics(r, 0) = u(rng);
        numerics(r, 1) = u(rng);
        level_of.push_back(3);  // unseen level
    }
    auto ds = make_cat_dataset(level_of, numerics, 4);
    SplitResult split;
    for (Index r = 0; r < n_train; ++r) split.train_indices.push_back(r);
    for (Index r = n_train; r < n_train + n_test; ++r) split.test_indices.push_back(r);
    auto rep = vtpm_report(split, ds);
    CHECK(rep.residual_fraction == Approx(1.0));
    CHECK_FALSE(rep.adequate);
    for (auto c : rep.test_class) CHECK(c == VtpmClass::residual_voxel);
}

TEST_CASE("vtpm report accepts an honestly iid split") {
    SyntheticOptions so;
    so.rows = 12000;
    so.numeric_features = 3;
    so.frame_levels = 4;
    so.stringers = 6;
    auto ds = generate_synthetic_case(11, so).data;
    auto split = holdout_split(ds, 0.8, 5);
    auto rep = vtpm_report(split, ds, {}, 5);
    CHECK(rep.adequate);
    CHECK(rep.valid_fraction >= 0.95);
    CHECK(rep.residual_fraction <= 0.05);
    CHECK(rep.voxel_count == 24);

    SECTION("report is deterministic, including across thread counts") {
        VtpmOptions opt;
        opt.jobs = 4;
        auto rep2 = vtpm_report(split, ds, opt, 5);
        CHECK(rep.valid_fraction == rep2.valid_fraction);
        CHECK(rep.adequate == rep2.adequate);
        for (std::size_t i = 0; i < rep.test_class.size(); ++i)
            CHECK(rep.test_class[i] == rep2.test_class[i]);
    }
}
