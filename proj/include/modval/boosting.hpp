#pragma once

#include <optional>
#include <string>
#include <vector>

#include "modval/common.hpp"
#include "modval/dataset.hpp"
#include "modval/surrogate.hpp"

namespace modval {

// ---------------------------------------------------------------------------
// Learning curves (fixed test set, varying training-set size)
// ---------------------------------------------------------------------------

struct LearningCurvePoint {
    int size = 0;
    double train_error = 0.0;
    double test_error = 0.0;
};

struct LearningCurve {
    std::vector<LearningCurvePoint> points;  // sizes strictly increasing
    std::string metric = "mse";
    int seeds_per_size = 1;
};

inline LearningCurve learning_curves(const Matrix& X_train, const Matrix& Y_train,
                                     const Matrix& X_test, const Matrix& Y_test,
                                     const TrainingConfig& cfg, std::vector<int> sizes,
                                     int seeds_per_size = 1, std::uint64_t seed = 0,
                                     unsigned jobs = 1) {
    require(sizes.size() >= 3, "learning_curves: need >= 3 sizes");
    std::sort(sizes.begin(), sizes.end());
    require(sizes.front() >= 2, "learning_curves: sizes must be >= 2");
    require(sizes.back() <= X_train.rows(), "learning_curves: size exceeds training set");
    require(seeds_per_size >= 1, "learning_curves: need >= 1 seed per size");

    struct Cell { double train = 0.0, test = 0.0; };
    std::vector<Cell> cells(sizes.size() * static_cast<std::size_t>(seeds_per_size));
    parallel_for(cells.size(), jobs, [&](std::size_t idx) {
        const std::size_t si = idx / static_cast<std::size_t>(seeds_per_size);
        const std::size_t ri = idx % static_cast<std::size_t>(seeds_per_size);
        const int s = sizes[si];
        auto rng = make_rng(mix_seed(seed, si), ri);
        std::vector<Index> order(static_cast<std::size_t>(X_train.rows()));
        std::iota(order.begin(), order.end(), Index{0});
        std::shuffle(order.begin(), order.end(), rng);
        Matrix xs(s, X_train.cols()), ys(s, Y_train.cols());
        for (int i = 0; i < s; ++i) {
            xs.row(i) = X_train.row(order[static_cast<std::size_t>(i)]);
            ys.row(i) = Y_train.row(order[static_cast<std::size_t>(i)]);
        }
        TrainingConfig c = cfg;
        c.seed = mix_seed(mix_seed(seed, si), 1000 + ri);
        auto res = train(xs, ys, c);
        cells[idx].train = detail::pooled_mse(ys, res.model.predict(xs));
        cells[idx].test = detail::pooled_mse(Y_test, res.model.predict(X_test));
    });

    LearningCurve curve;
    curve.seeds_per_size = seeds_per_size;
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        LearningCurvePoint pt;
        pt.size = sizes[si];
        for (int r = 0; r < seeds_per_size; ++r) {
            const auto& c = cells[si * static_cast<std::size_t>(seeds_per_size) +
                                  static_cast<std::size_t>(r)];
            pt.train_error += c.train;
            pt.test_error += c.test;
        }
        pt.train_error /= seeds_per_size;
        pt.test_error /= seeds_per_size;
        curve.points.push_back(pt);
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Bias/variance regime diagnosis
// ---------------------------------------------------------------------------

enum class Regime { high_variance_plateau, high_bias_plateau, needs_more_data, converged };

inline std::string regime_name(Regime r) {
    switch (r) {
        case Regime::high_variance_plateau: return "high-variance-plateau";
        case Regime::high_bias_plateau: return "high-bias-plateau";
        case Regime::needs_more_data: return "needs-more-data";
        case Regime::converged: return "converged";
    }
    return "?";
}

struct RegimeDiagnosis {
    Regime regime = Regime::converged;
    bool train_plateaued = false;
    bool test_plateaued = false;
    double gap = 0.0;          // (test - train) / test at the largest size
    double final_train = 0.0;
    double final_test = 0.0;
    double plateau_tol = 0.0;  // thresholds echoed for auditability
    double gap_tol = 0.0;
    double low_error_tol = 0.0;
};

namespace detail {

// relative improvement over the final third of the curve; plateau when small
inline double tail_improvement(const LearningCurve& curve, bool test_side) {
    const std::size_t n = curve.points.size();
    const std::size_t seg = std::max<std::size_t>(2, (n + 2) / 3);
    const auto& first = curve.points[n - seg];
    const auto& last = curve.points[n - 1];
    const double e0 = test_side ? first.test_error : first.train_error;
    const double e1 = test_side ? last.test_error : last.train_error;
    return (e0 - e1) / std::max(std::abs(e0), 1e-12);
}

}  // namespace detail

// Four-quadrant classification of a learning curve: test error still
// dropping -> needs more data; both plateaued with a wide train/test gap ->
// high variance; narrow gap at a high error level -> high bias; otherwise
// converged.
inline RegimeDiagnosis diagnose_regime(const LearningCurve& curve, double plateau_tol = 0.05,
                                       double gap_tol = 0.20, double low_error_tol = 0.1) {
    require(curve.points.size() >= 3, "diagnose_regime: need >= 3 curve points");
    RegimeDiagnosis d;
    d.plateau_tol = plateau_tol;
    d.gap_tol = gap_tol;
    d.low_error_tol = low_error_tol;
    d.train_plateaued = detail::tail_improvement(curve, false) < plateau_tol;
    d.test_plateaued = detail::tail_improvement(curve, true) < plateau_tol;
    const auto& last = curve.points.back();
    d.final_train = last.train_error;
    d.final_test = last.test_error;
    d.gap = (last.test_error - last.train_error) / std::max(last.test_error, 1e-12);
    if (!d.test_plateaued) d.regime = Regime::needs_more_data;
    else if (d.gap > gap_tol) d.regime = Regime::high_variance_plateau;
    else if (d.final_test > low_error_tol) d.regime = Regime::high_bias_plateau;
    else d.regime = Regime::converged;
    return d;
}

// ---------------------------------------------------------------------------
// L1-driven feature selection
// ---------------------------------------------------------------------------

// A source feature is discardable when every first-layer weight incident to
// every one of its encoded columns is below the threshold; cyclic pairs and
// one-hot blocks are therefore discarded only jointly. Meaningful on models
// trained with L1 regularization, which rewards sparse first layers.
inline std::vector<int> l1_feature_selection(const SurrogateModel& model, double threshold,
                                             const EncodedMatrix* provenance = nullptr) {
    require(!model.W.empty(), "l1_feature_selection: model has no layers");
    require(threshold > 0.0, "l1_feature_selection: threshold must be positive");
    const Matrix& w1 = model.W.front();
    std::vector<int> discardable;
    if (provenance) {
        require(static_cast<Index>(provenance->provenance.size()) == w1.cols(),
                "l1_feature_selection: provenance width mismatch");
        for (int f = 0; f < provenance->source_count; ++f) {
            bool all_small = true;
            for (int c : provenance->columns_of(f))
                if (w1.col(c).cwiseAbs().maxCoeff() >= threshold) all_small = false;
            if (all_small) discardable.push_back(f);
        }
    } else {
        for (Index c = 0; c < w1.cols(); ++c)
            if (w1.col(c).cwiseAbs().maxCoeff() < threshold)
                discardable.push_back(static_cast<int>(c));
    }
    return discardable;
}

// ---------------------------------------------------------------------------
// Applicability domains
// ---------------------------------------------------------------------------

struct HypercubeDomain {
    Vector lo, hi;  // per numeric feature, from training data
};

inline HypercubeDomain fit_hypercube(const Matrix& train_numeric) {
    require(train_numeric.rows() >= 1, "fit_hypercube: empty training data");
    return {train_numeric.colwise().minCoeff(), train_numeric.colwise().maxCoeff()};
}

inline bool hypercube_contains(const HypercubeDomain& domain, const Vector& x) {
    require(x.size() == domain.lo.size(), "hypercube_contains: dimension mismatch");
    for (Index i = 0; i < x.size(); ++i)
        if (x(i) < domain.lo(i) || x(i) > domain.hi(i)) return false;
    return true;
}

struct HullDomain {
    Matrix points;                 // training points (possibly PCA-reduced)
    std::optional<PcaModel> pca;   // reduction applied to queries when present
};

// Stores the training cloud for convex-hull membership queries; when the
// ambient dimension exceeds pca_above, queries run in the PCA space keeping
// 99% of the variance (hull checks are markedly cheaper there).
inline HullDomain fit_hull(const Matrix& train_encoded, int pca_above = 20,
                           double pca_variance = 0.99) {
    require(train_encoded.rows() >= train_encoded.cols() + 1,
            "fit_hull: need at least d+1 training points");
    HullDomain dom;
    if (train_encoded.cols() > pca_above) {
        dom.pca = fit_pca(train_encoded, pca_variance);
        dom.points = pca_project(*dom.pca, train_encoded);
    } else {
        dom.points = train_encoded;
    }
    return dom;
}

namespace detail {

// Phase-I simplex feasibility for  A^T w = x, sum w = 1, w >= 0  without
// constructing the hull. Bland's rule to avoid cycling; iteration cap
// 50 * (N + d). Returns the minimum attainable L1 constraint residual.
inline double phase1_residual(const Matrix& pts, const Vector& x) {
    const Index n = pts.rows();
    const Index d = pts.cols();
    const Index rows = d + 1;
    const Index cols = n + rows;  // variables + artificials
    Matrix t(rows, cols + 1);
    t.setZero();
    for (Index i = 0; i < d; ++i) {
        for (Index j = 0; j < n; ++j) t(i, j) = pts(j, i);
        t(i, cols) = x(i);
    }
    for (Index j = 0; j < n; ++j) t(d, j) = 1.0;
    t(d, cols) = 1.0;
    for (Index i = 0; i < rows; ++i)
        if (t(i, cols) < 0.0) t.row(i) = -t.row(i);
    for (Index i = 0; i < rows; ++i) t(i, n + i) = 1.0;

    std::vector<Index> basis(static_cast<std::size_t>(rows));
    for (Index i = 0; i < rows; ++i) basis[static_cast<std::size_t>(i)] = n + i;
    // objective row: minimize sum of artificials, expressed in the nonbasic vars
    Vector obj = Vector::Zero(cols);
    double obj_rhs = 0.0;
    for (Index i = 0; i < rows; ++i) {
        obj.head(n) -= t.row(i).head(n);
        obj_rhs -= t(i, cols);
    }
    const double eps = 1e-11;
    const long cap = 50 * static_cast<long>(n + d);
    for (long it = 0;; ++it) {
        if (it > cap) throw std::runtime_error("hull_contains: LP iteration limit exceeded");
        Index enter = -1;
        for (Index j = 0; j < cols; ++j)
            if (obj(j) < -eps) { enter = j; break; }  // Bland: lowest index
        if (enter < 0) break;
        Index leave = -1;
        double best_ratio = 0.0;
        for (Index i = 0; i < rows; ++i) {
            if (t(i, enter) <= eps) continue;
            const double ratio = t(i, cols) / t(i, enter);
            if (leave < 0 || ratio < best_ratio - 1e-15 ||
                (std::abs(ratio - best_ratio) <= 1e-15 &&
                 basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
                leave = i;
                best_ratio = ratio;
            }
        }
        if (leave < 0) break;  // unbounded cannot happen here; treat as optimal
        t.row(leave) /= t(leave, enter);
        for (Index i = 0; i < rows; ++i) {
            if (i == leave) continue;
            const double f = t(i, enter);
            if (f != 0.0) t.row(i) -= f * t.row(leave);
        }
        const double fo = obj(enter);
        obj -= fo * t.row(leave).head(cols);
        obj_rhs -= fo * t(leave, cols);
        basis[static_cast<std::size_t>(leave)] = enter;
    }
    return -obj_rhs;  // = minimized sum of artificials
}

}  // namespace detail

// Convex-hull membership via LP feasibility (no explicit hull). Boundary
// points count as inside within the tolerance.
inline bool hull_contains(const HullDomain& domain, const Vector& x, double tolerance = 1e-8) {
    Vector q = x;
    if (domain.pca) {
        require(x.size() == domain.pca->mean.size(), "hull_contains: dimension mismatch");
        q = pca_project(*domain.pca, x.transpose()).row(0);
    }
    require(q.size() == domain.points.cols(), "hull_contains: dimension mismatch");
    return detail::phase1_residual(domain.points, q) <= tolerance;
}

// Error-based applicability (the third layer) is an extension point only:
// implementations classify inputs expected to exceed an error tolerance.
struct ErrorApplicabilityClassifier {
    virtual ~ErrorApplicabilityClassifier() = default;
    virtual bool applicable(const Vector& x) const = 0;
};

// ---------------------------------------------------------------------------
// Dataset fingerprint (for external concept-drift comparison)
// ---------------------------------------------------------------------------

struct ColumnMoments {
    std::string name;
    double mean = 0.0, stddev = 0.0, min = 0.0, max = 0.0;
};

struct DatasetFingerprint {
    Index rows = 0;
    std::vector<ColumnMoments> features;
    std::vector<ColumnMoments> outputs;
};

inline DatasetFingerprint fingerprint(const Dataset& ds) {
    DatasetFingerprint fp;
    fp.rows = ds.rows();
    auto summarize = [&](const Matrix& m, const std::vector<ColumnSpec>& specs,
                         std::vector<ColumnMoments>& out) {
        for (Index c = 0; c < m.cols(); ++c) {
            ColumnMoments cm;
            cm.name = specs[static_cast<std::size_t>(c)].name;
            cm.mean = m.col(c).mean();
            cm.stddev = std::sqrt((m.col(c).array() - cm.mean).square().sum() /
                                  std::max<double>(1, m.rows() - 1));
            cm.min = m.col(c).minCoeff();
            cm.max = m.col(c).maxCoeff();
            out.push_back(cm);
        }
    };
    summarize(ds.X, ds.schema.features, fp.features);
    summarize(ds.Y, ds.schema.outputs, fp.outputs);
    return fp;
}

}  // namespace modval
