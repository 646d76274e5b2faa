#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "modval/common.hpp"
#include "modval/dataset.hpp"
#include "modval/errors.hpp"
#include "modval/stats.hpp"

namespace modval {

// ---------------------------------------------------------------------------
// Train / calibration / validation split
// ---------------------------------------------------------------------------

struct ThreeWaySplit {
    std::vector<Index> train, calibration, validation;
    std::array<double, 3> fractions{};
};

inline ThreeWaySplit three_way_split(const Dataset& ds, std::array<double, 3> fractions,
                                     std::uint64_t seed, Index min_part = 50) {
    double sum = 0.0;
    for (double f : fractions) {
        require(f > 0.0, "three_way_split: fractions must be positive");
        sum += f;
    }
    require(std::abs(sum - 1.0) < 1e-9, "three_way_split: fractions must sum to 1");
    const Index n = ds.rows();
    const Index n_train = static_cast<Index>(std::llround(fractions[0] * static_cast<double>(n)));
    const Index n_cal = static_cast<Index>(std::llround(fractions[1] * static_cast<double>(n)));
    const Index n_val = n - n_train - n_cal;
    require(n_train >= min_part && n_cal >= min_part && n_val >= min_part,
            "three_way_split: a part has fewer than " + std::to_string(min_part) + " rows");
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    auto rng = make_rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    ThreeWaySplit out;
    out.fractions = fractions;
    out.train.assign(idx.begin(), idx.begin() + n_train);
    out.calibration.assign(idx.begin() + n_train, idx.begin() + n_train + n_cal);
    out.validation.assign(idx.begin() + n_train + n_cal, idx.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.calibration.begin(), out.calibration.end());
    std::sort(out.validation.begin(), out.validation.end());
    return out;
}

// ---------------------------------------------------------------------------
// Prediction intervals
// ---------------------------------------------------------------------------

// Interval for a prediction yhat is [yhat - eps_lo, yhat + eps_hi].
struct PredictionInterval {
    double eps_lo = 0.0;
    double eps_hi = 0.0;
    double level = 0.95;
    bool conservative = false;
    bool clamped = false;   // a negative raw offset was clamped to 0

    double lower(double yhat) const { return yhat - eps_lo; }
    double upper(double yhat) const { return yhat + eps_hi; }
    bool covers(double yhat, double y) const { return y >= lower(yhat) && y <= upper(yhat); }
};

// Global uncertainty model: offsets from the bootstrap of the calibration
// residues' tail percentiles. Conservative mode takes the outer CI95 bounds
// instead of the bootstrap means (and always contains the default interval).
inline PredictionInterval build_gum(std::span<const double> calibration_residues,
                                    int bootstrap_b = 2000, std::uint64_t seed = 1,
                                    double level = 0.95, bool conservative = false,
                                    unsigned jobs = 1, std::size_t min_residues = 100) {
    require(calibration_residues.size() >= min_residues,
            "build_gum: need >= " + std::to_string(min_residues) + " calibration residues");
    require(level > 0.0 && level < 1.0, "build_gum: level outside (0,1)");
    const double tail = 0.5 * (1.0 - level);
    auto lo = stats::bootstrap(calibration_residues, {stats::Statistic::Kind::percentile, tail},
                               bootstrap_b, mix_seed(seed, 1), jobs);
    auto hi = stats::bootstrap(calibration_residues,
                               {stats::Statistic::Kind::percentile, 1.0 - tail}, bootstrap_b,
                               mix_seed(seed, 2), jobs);
    PredictionInterval iv;
    iv.level = level;
    iv.conservative = conservative;
    double eps_lo = -lo.bootstrap_mean;
    double eps_hi = hi.bootstrap_mean;
    if (conservative) {
        eps_lo = std::max(eps_lo, -lo.ci_lo);
        eps_hi = std::max(eps_hi, hi.ci_hi);
    }
    if (eps_lo < 0.0 || eps_hi < 0.0) iv.clamped = true;
    iv.eps_lo = std::max(0.0, eps_lo);
    iv.eps_hi = std::max(0.0, eps_hi);
    return iv;
}

// ---------------------------------------------------------------------------
// Mesoscopic models (iMUM conditions on an input feature, oMUM on yhat)
// ---------------------------------------------------------------------------

struct ConditionalIntervalModel {
    enum class Kind { input, output } kind = Kind::output;
    std::string variable;
    int feature_column = -1;               // iMUM: raw feature column
    std::vector<double> edges;
    std::vector<PredictionInterval> per_bin;
    bool degenerate_fallback = false;      // single usable bin: behaves as GUM
    PredictionInterval fallback;

    // out-of-range queries clamp to the nearest bin
    const PredictionInterval& query(double v) const {
        if (degenerate_fallback || per_bin.empty()) return fallback;
        return per_bin[bin_index(edges, v)];
    }
};

inline ConditionalIntervalModel build_mum(std::span<const double> calibration_residues,
                                          std::span<const double> conditioning_values,
                                          ConditionalIntervalModel::Kind kind,
                                          const std::string& variable, int bins = 10,
                                          int min_per_bin = 50, int bootstrap_b = 2000,
                                          std::uint64_t seed = 1, double level = 0.95,
                                          bool conservative = false, unsigned jobs = 1) {
    require(calibration_residues.size() == conditioning_values.size(), "build_mum: size mismatch");
    ConditionalIntervalModel model;
    model.kind = kind;
    model.variable = variable;
    model.fallback = build_gum(calibration_residues, bootstrap_b, mix_seed(seed, 999), level,
                               conservative, jobs);
    std::vector<double> edges;
    try {
        edges = binned_edges(conditioning_values,
                             {BinSpec::Mode::equal_count, bins, min_per_bin});
    } catch (const std::invalid_argument&) {
        model.degenerate_fallback = true;
        return model;
    }
    if (edges.size() < 3) {
        model.degenerate_fallback = true;  // single usable bin
        return model;
    }
    model.edges = edges;
    std::vector<std::vector<double>> groups(edges.size() - 1);
    for (std::size_t i = 0; i < conditioning_values.size(); ++i)
        groups[bin_index(edges, conditioning_values[i])].push_back(calibration_residues[i]);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        require(groups[g].size() >= 2, "build_mum: empty bin after merging");
        model.per_bin.push_back(build_gum(groups[g], bootstrap_b, mix_seed(seed, g), level,
                                          conservative, jobs,
                                          static_cast<std::size_t>(min_per_bin)));
    }
    return model;
}

// ---------------------------------------------------------------------------
// Full uncertainty model: FUM = GUM  ∩ oMUM  ∩ (∩ iMUM[j])
// ---------------------------------------------------------------------------

struct FullUncertaintyModel {
    PredictionInterval gum;
    std::optional<ConditionalIntervalModel> omum;
    std::vector<ConditionalIntervalModel> imums;
    bool reduced = false;  // GUM ∩ oMUM only, input dependencies discarded
};

struct FumInterval {
    PredictionInterval interval;
    bool fell_back = false;  // empty intersection, replaced by GUM
};

inline FumInterval intersect_intervals(std::span<const PredictionInterval> components,
                                       const PredictionInterval& gum) {
    double eps_lo = std::numeric_limits<double>::infinity();
    double eps_hi = std::numeric_limits<double>::infinity();
    for (const auto& c : components) {
        eps_lo = std::min(eps_lo, c.eps_lo);
        eps_hi = std::min(eps_hi, c.eps_hi);
    }
    if (-eps_lo > eps_hi) return {gum, true};  // disjoint components
    PredictionInterval iv = gum;
    iv.eps_lo = eps_lo;
    iv.eps_hi = eps_hi;
    return {iv, false};
}

// Interval for one prediction: intersection of every applicable component.
// `x_row` supplies the raw feature values the iMUMs condition on.
inline FumInterval fum_interval(const FullUncertaintyModel& fum, double yhat,
                                const Vector* x_row = nullptr) {
    std::vector<PredictionInterval> parts{fum.gum};
    if (fum.omum) parts.push_back(fum.omum->query(yhat));
    if (!fum.reduced) {
        for (const auto& im : fum.imums) {
            require(x_row != nullptr, "fum_interval: iMUM components need the feature row");
            parts.push_back(im.query((*x_row)(im.feature_column)));
        }
    }
    return intersect_intervals(parts, fum.gum);
}

// ---------------------------------------------------------------------------
// Coverage validation
// ---------------------------------------------------------------------------

struct BinCoverage {
    double lo = 0.0, hi = 0.0;
    std::size_t count = 0;
    double coverage = 0.0;
};

struct CoverageReport {
    double coverage = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;   // bootstrap CI95 of coverage
    bool pass = false;
    std::size_t n = 0;
    std::vector<BinCoverage> per_bin;  // conditional models only
};

// Fraction of validation points whose ground truth falls inside the model's
// interval; pass when coverage >= nominal or nominal lies inside the CI95.
inline CoverageReport validate_coverage(
    const std::function<PredictionInterval(Index)>& interval_of, std::span<const double> y,
    std::span<const double> yhat, int bootstrap_b = 2000, std::uint64_t seed = 1,
    double nominal = 0.95, unsigned jobs = 1) {
    require(!y.empty(), "validate_coverage: empty validation set");
    require(y.size() == yhat.size(), "validate_coverage: size mismatch");
    std::vector<double> hits(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        hits[i] = interval_of(static_cast<Index>(i)).covers(yhat[i], y[i]) ? 1.0 : 0.0;
    CoverageReport rep;
    rep.n = y.size();
    rep.coverage = mean_of(hits);
    auto boot = stats::bootstrap(hits, {stats::Statistic::Kind::mean, 0}, bootstrap_b, seed, jobs);
    rep.ci_lo = boot.ci_lo;
    rep.ci_hi = boot.ci_hi;
    rep.pass = rep.coverage >= nominal || (nominal >= rep.ci_lo && nominal <= rep.ci_hi);
    return rep;
}

inline CoverageReport validate_coverage(const PredictionInterval& gum, std::span<const double> y,
                                        std::span<const double> yhat, int bootstrap_b = 2000,
                                        std::uint64_t seed = 1, unsigned jobs = 1) {
    return validate_coverage([&](Index) { return gum; }, y, yhat, bootstrap_b, seed, gum.level,
                             jobs);
}

inline CoverageReport validate_coverage(const ConditionalIntervalModel& model,
                                        std::span<const double> conditioning,
                                        std::span<const double> y, std::span<const double> yhat,
                                        int bootstrap_b = 2000, std::uint64_t seed = 1,
                                        unsigned jobs = 1) {
    require(conditioning.size() == y.size(), "validate_coverage: size mismatch");
    auto rep = validate_coverage(
        [&](Index i) { return model.query(conditioning[static_cast<std::size_t>(i)]); }, y, yhat,
        bootstrap_b, seed, model.fallback.level, jobs);
    if (!model.degenerate_fallback && !model.per_bin.empty()) {
        std::vector<std::size_t> count(model.per_bin.size(), 0), hit(model.per_bin.size(), 0);
        for (std::size_t i = 0; i < y.size(); ++i) {
            const std::size_t b = bin_index(model.edges, conditioning[i]);
            ++count[b];
            if (model.per_bin[b].covers(yhat[i], y[i])) ++hit[b];
        }
        for (std::size_t b = 0; b < model.per_bin.size(); ++b) {
            BinCoverage bc;
            bc.lo = model.edges[b];
            bc.hi = model.edges[b + 1];
            bc.count = count[b];
            bc.coverage = count[b] ? static_cast<double>(hit[b]) / count[b] : 0.0;
            rep.per_bin.push_back(bc);
        }
    }
    return rep;
}

}  // namespace modval
