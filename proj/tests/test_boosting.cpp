#include <catch2/catch_amalgamated.hpp>

#include "modval/boosting.hpp"
#include "oracle_helpers.hpp"

using namespace modval;
using Catch::Approx;

namespace {

LearningCurve curve_of(const std::vector<std::array<double, 3>>& rows) {
    LearningCurve c;
    for (const auto& r : rows)
        c.points.push_back({static_cast<int>(r[0]), r[1], r[2]});
    return c;
}

}  // namespace

TEST_CASE("regime classifier reproduces the four quadrants on constructed curves") {
    // flat train 0.01, flat test 0.30: wide gap
    auto hv = curve_of({{100, 0.010, 0.300}, {200, 0.010, 0.301}, {400, 0.0099, 0.299},
                        {800, 0.0101, 0.300}});
    CHECK(diagnose_regime(hv).regime == Regime::high_variance_plateau);

    // both flat around 0.5: high bias at a high error level
    auto hb = curve_of({{100, 0.52, 0.55}, {200, 0.50, 0.53}, {400, 0.50, 0.52},
                        {800, 0.50, 0.52}});
    CHECK(diagnose_regime(hb).regime == Regime::high_bias_plateau);

    // test error still dropping 20% over the final third
    auto nmd = curve_of({{100, 0.10, 0.60}, {200, 0.10, 0.45}, {400, 0.10, 0.35},
                         {800, 0.10, 0.27}});
    CHECK(diagnose_regime(nmd).regime == Regime::needs_more_data);

    // both flat and low
    auto ok = curve_of({{100, 0.020, 0.022}, {200, 0.019, 0.021}, {400, 0.019, 0.0205},
                        {800, 0.019, 0.0205}});
    CHECK(diagnose_regime(ok).regime == Regime::converged);

    CHECK_THROWS_AS(diagnose_regime(curve_of({{10, 1, 1}, {20, 1, 1}})), std::invalid_argument);

    SECTION("diagnosis is a pure function of curve and thresholds") {
        auto a = diagnose_regime(hv, 0.05, 0.2, 0.1);
        auto b = diagnose_regime(hv, 0.05, 0.2, 0.1);
        CHECK(a.regime == b.regime);
        CHECK(a.gap == b.gap);
        CHECK(a.plateau_tol == 0.05);  // thresholds surfaced for auditability
    }
}

TEST_CASE("learning curves on a learnable target converge and order sanely") {
    auto rng = make_rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    std::normal_distribution<double> g(0, 0.02);
    const int n = 900, nt = 300;
    Matrix x(n + nt, 2), y(n + nt, 1);
    for (Index i = 0; i < x.rows(); ++i) {
        x(i, 0) = u(rng);
        x(i, 1) = u(rng);
        y(i, 0) = 0.7 * x(i, 0) - 0.4 * x(i, 1) + g(rng);
    }
    TrainingConfig cfg;
    cfg.hidden = {};
    cfg.learning_rate = 0.03;
    cfg.batch_size = 32;
    cfg.epochs = 80;
    auto curve = learning_curves(x.topRows(n), y.topRows(n), x.bottomRows(nt), y.bottomRows(nt),
                                 cfg, {100, 300, 900}, 2, 5);
    REQUIRE(curve.points.size() == 3);
    for (std::size_t i = 1; i < curve.points.size(); ++i)
        CHECK(curve.points[i].size > curve.points[i - 1].size);
    // the fixed test set is shared, so test error approaches the noise floor
    CHECK(curve.points.back().test_error < 0.01);
    // more data is harder to fit: train error at the smallest size stays below
    // the largest size (up to noise)
    CHECK(curve.points.front().train_error <= curve.points.back().train_error + 5e-3);
    auto d = diagnose_regime(curve, 0.05, 0.2, 0.05);
    CHECK(d.regime == Regime::converged);

    SECTION("size exceeding the training set is rejected") {
        CHECK_THROWS_AS(learning_curves(x.topRows(n), y.topRows(n), x.bottomRows(nt),
                                        y.bottomRows(nt), cfg, {100, 300, 2000}, 1, 5),
                        std::invalid_argument);
    }
}

TEST_CASE("an underparameterized model plateaus high: high-bias quadrant") {
    auto rng = make_rng(6);
    std::uniform_real_distribution<double> u(-1, 1);
    const int n = 600, nt = 200;
    Matrix x(n + nt, 1), y(n + nt, 1);
    for (Index i = 0; i < x.rows(); ++i) {
        x(i, 0) = u(rng);
        y(i, 0) = std::sin(3.0 * M_PI * x(i, 0));  // strongly nonlinear
    }
    TrainingConfig cfg;
    cfg.hidden = {};  // a line cannot fit a sine
    cfg.learning_rate = 0.05;
    cfg.epochs = 60;
    auto curve = learning_curves(x.topRows(n), y.topRows(n), x.bottomRows(nt), y.bottomRows(nt),
                                 cfg, {150, 300, 600}, 2, 7);
    auto d = diagnose_regime(curve, 0.08, 0.5, 0.05);
    CHECK(d.regime == Regime::high_bias_plateau);
    CHECK(curve.points.back().train_error > 0.2);
}

TEST_CASE("l1 feature selection on first-layer weights") {
    auto model = SurrogateModel::init(4, {6}, 1, 2);
    SECTION("a zero column is discardable at any positive threshold") {
        model.W[0].col(3).setZero();
        auto d = l1_feature_selection(model, 1e-12);
        CHECK(d == std::vector<int>{3});
    }
    SECTION("all weights above threshold: empty list") {
        for (Index i = 0; i < model.W[0].size(); ++i)
            model.W[0](i) = model.W[0](i) >= 0 ? model.W[0](i) + 0.5 : model.W[0](i) - 0.5;
        CHECK(l1_feature_selection(model, 0.1).empty());
    }
    SECTION("l1 training suppresses dummy features end to end") {
        auto rng = make_rng(8);
        std::uniform_real_distribution<double> u(0, 1);
        std::normal_distribution<double> g(0, 0.02);
        const int n = 500;
        Matrix x(n, 4), y(n, 1);
        for (Index i = 0; i < x.size(); ++i) x(i) = u(rng);
        for (Index i = 0; i < n; ++i) y(i, 0) = 3.0 * x(i, 0) + g(rng);
        TrainingConfig cfg;
        cfg.hidden = {6};
        cfg.reg = RegKind::l1;
        cfg.lambda = 0.02;
        cfg.learning_rate = 0.01;
        cfg.epochs = 250;
        cfg.batch_size = 64;
        cfg.seed = 4;
        auto res = train(x, y, cfg);
        auto d = l1_feature_selection(res.model, 0.05);
        CHECK(std::find(d.begin(), d.end(), 0) == d.end());  // informative feature kept
        CHECK(d.size() >= 2);                                 // most dummies suppressed
    }
}

TEST_CASE("hypercube applicability from training bounds") {
    auto rng = make_rng(9);
    std::uniform_real_distribution<double> u(0, 1);
    Matrix train(50, 3);
    for (Index i = 0; i < train.size(); ++i) train(i) = u(rng);
    auto dom = fit_hypercube(train);
    for (Index r = 0; r < train.rows(); ++r)
        CHECK(hypercube_contains(dom, train.row(r).transpose()));
    Vector out = train.row(0);
    out(1) = dom.hi(1) + 0.01;
    CHECK_FALSE(hypercube_contains(dom, out));
    // inside all coordinate ranges but far from every training point: still true
    Vector corner(3);
    corner << dom.lo(0) + 1e-6, dom.hi(1) - 1e-6, dom.lo(2) + 1e-6;
    CHECK(hypercube_contains(dom, corner));
    CHECK_THROWS_AS(hypercube_contains(dom, Vector::Zero(2)), std::invalid_argument);
}

TEST_CASE("hull membership: centroid and vertices are inside") {
    auto rng = make_rng(10);
    std::uniform_real_distribution<double> u(0, 1);
    Matrix train(40, 3);
    for (Index i = 0; i < train.size(); ++i) train(i) = u(rng);
    auto dom = fit_hull(train);
    Vector centroid = train.colwise().mean();
    CHECK(hull_contains(dom, centroid));
    // every training point (vertices included) is inside within tolerance
    for (Index r = 0; r < train.rows(); ++r)
        CHECK(hull_contains(dom, train.row(r).transpose()));
    Vector far = Vector::Constant(3, 10.0);
    CHECK_FALSE(hull_contains(dom, far));
}

TEST_CASE("hull membership agrees with the 2d polygon oracle") {
    auto rng = make_rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    for (int inst = 0; inst < 10; ++inst) {
        std::uniform_int_distribution<int> np(30, 200);
        const int n = np(rng);
        Matrix train(n, 2);
        std::vector<oracle::Pt> pts;
        for (int i = 0; i < n; ++i) {
            train(i, 0) = u(rng);
            train(i, 1) = u(rng);
            pts.push_back({train(i, 0), train(i, 1)});
        }
        auto dom = fit_hull(train);
        auto hull = oracle::convex_hull_2d(pts);
        for (int q = 0; q < 60; ++q) {
            Vector z(2);
            z << u(rng) * 1.2 - 0.1, u(rng) * 1.2 - 0.1;
            const bool got = hull_contains(dom, z);
            const bool want = oracle::polygon_contains(hull, {z(0), z(1)});
            REQUIRE(got == want);
        }
    }
}

TEST_CASE("hull membership implies hypercube membership up to 10 dimensions") {
    auto rng = make_rng(12);
    std::uniform_real_distribution<double> u(0, 1);
    for (int d = 2; d <= 10; ++d) {
        const int n = 3 * d + 20;
        Matrix train(n, d);
        for (Index i = 0; i < train.size(); ++i) train(i) = u(rng);
        auto hull = fit_hull(train);
        auto cube = fit_hypercube(train);
        for (int q = 0; q < 40; ++q) {
            Vector z(d);
            for (int j = 0; j < d; ++j) z(j) = u(rng) * 1.4 - 0.2;
            if (hull_contains(hull, z)) CHECK(hypercube_contains(cube, z));
        }
    }
}

TEST_CASE("hull membership is invariant under translation and uniform scaling") {
    auto rng = make_rng(13);
    std::uniform_real_distribution<double> u(0, 1);
    Matrix train(60, 3);
    for (Index i = 0; i < train.size(); ++i) train(i) = u(rng);
    auto dom = fit_hull(train);
    const double scale = 12.5;
    Vector shift(3);
    shift << 3.0, -7.0, 0.5;
    Matrix train2 = (train * scale).rowwise() + shift.transpose();
    auto dom2 = fit_hull(train2);
    for (int q = 0; q < 60; ++q) {
        Vector z(3);
        for (int j = 0; j < 3; ++j) z(j) = u(rng) * 1.3 - 0.15;
        Vector z2 = z * scale + shift;
        CHECK(hull_contains(dom, z, 1e-8) == hull_contains(dom2, z2, 1e-8 * scale));
    }
}

TEST_CASE("wide feature spaces route hull queries through pca") {
    auto rng = make_rng(14);
    std::normal_distribution<double> g(0, 1);
    Matrix train(200, 25);  // above the d > 20 threshold
    for (Index i = 0; i < train.size(); ++i) train(i) = g(rng);
    auto dom = fit_hull(train);
    CHECK(dom.pca.has_value());
    Vector centroid = train.colwise().mean();
    CHECK(hull_contains(dom, centroid));
}

TEST_CASE("dataset fingerprint covers every column") {
    Dataset ds;
    ds.schema.features = {{"a", ColumnKind::numeric, 0, "", "", {}}};
    ds.schema.outputs = {{"y", ColumnKind::numeric, 0, "", "", {}}};
    ds.feature_levels.resize(1);
    ds.X.resize(4, 1);
    ds.X << 1, 2, 3, 4;
    ds.Y.resize(4, 1);
    ds.Y << 2, 4, 6, 8;
    auto fp = fingerprint(ds);
    CHECK(fp.rows == 4);
    CHECK(fp.features[0].mean == Approx(2.5));
    CHECK(fp.outputs[0].max == Approx(8.0));
}
