#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modval/common.hpp"
#include "modval/dataset.hpp"
#include "modval/stats.hpp"
#include "modval/surrogate.hpp"

namespace modval {

// Signed residues e = y - yhat, one column per output. Positive means the
// model over-predicts risk (conservative), negative means risk is
// underestimated. row_ids align residues with dataset rows.
struct ResidueSet {
    Matrix e;
    std::vector<long> row_ids;

    int m() const { return static_cast<int>(e.cols()); }
    Index rows() const { return e.rows(); }
    std::vector<double> output(int j) const { return to_vector(e.col(j)); }
};

inline ResidueSet residues(const PredictionTable& pt) {
    pt.validate();
    ResidueSet rs;
    rs.e = pt.Y - pt.Yhat;
    rs.row_ids = pt.row_ids;
    return rs;
}

// ---------------------------------------------------------------------------
// Point-wise metrics (box #4)
// ---------------------------------------------------------------------------

struct OutputMetrics {
    double mse = 0.0;
    double mae = 0.0;
    std::optional<double> r2;   // undefined for constant ground truth
    double mean_residue = 0.0;
    double residue_std = 0.0;
};

struct MetricsSummary {
    std::vector<OutputMetrics> per_output;
};

inline MetricsSummary pointwise_metrics(const PredictionTable& pt) {
    pt.validate();
    require(pt.rows() >= 2, "pointwise_metrics: need >= 2 rows");
    MetricsSummary out;
    for (int j = 0; j < pt.m(); ++j) {
        OutputMetrics om;
        Vector e = pt.Y.col(j) - pt.Yhat.col(j);
        const double n = static_cast<double>(e.size());
        om.mse = e.squaredNorm() / n;
        om.mae = e.cwiseAbs().sum() / n;
        om.mean_residue = e.mean();
        om.residue_std = std::sqrt((e.array() - om.mean_residue).square().sum() / (n - 1.0));
        const double ymean = pt.Y.col(j).mean();
        const double ss_tot = (pt.Y.col(j).array() - ymean).square().sum();
        if (ss_tot > 0.0) om.r2 = 1.0 - e.squaredNorm() / ss_tot;
        out.per_output.push_back(om);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Marginal residue distribution (box #5)
// ---------------------------------------------------------------------------

struct FamilyFit {
    stats::Family family = stats::Family::normal;
    bool ok = false;
    stats::DistributionFit fit;
    stats::TestResult ks;
    stats::TestResult ad;
    std::string error;
};

struct MarginalAnalysis {
    std::vector<FamilyFit> fits;
    // key percentiles (as probabilities) with bootstrap CI95
    std::map<double, stats::BootstrapResult> percentiles;
};

inline MarginalAnalysis marginal_analysis(std::span<const double> residue,
                                          std::span<const stats::Family> families,
                                          int bootstrap_b = 2000, std::uint64_t seed = 1,
                                          int ad_replicates = 200, unsigned jobs = 1) {
    require(residue.size() >= 30, "marginal_analysis: need >= 30 residues");
    MarginalAnalysis out;
    for (auto fam : families) {
        FamilyFit ff;
        ff.family = fam;
        try {
            ff.fit = stats::fit(residue, fam);
            ff.ks = stats::ks_test(residue, ff.fit);
            ff.ad = stats::ad_test(residue, ff.fit, ad_replicates, mix_seed(seed, 17), jobs);
            ff.ok = true;
        } catch (const std::exception& ex) {
            ff.error = ex.what();
        }
        out.fits.push_back(std::move(ff));
    }
    int pi = 0;
    for (double p : {0.025, 0.05, 0.95, 0.975}) {
        out.percentiles[p] =
            stats::bootstrap(residue, {stats::Statistic::Kind::percentile, p}, bootstrap_b,
                             mix_seed(seed, static_cast<std::uint64_t>(100 + pi)), jobs);
        ++pi;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Outlier detection (Johnson SU normalization + gESD)
// ---------------------------------------------------------------------------

struct OutlierScan {
    std::vector<long> flagged_ids;       // dataset row ids
    std::vector<std::size_t> positions;  // positions within the residue vector
    bool johnson_normalized = false;
    std::string method;
};

inline OutlierScan detect_outliers(const ResidueSet& rs, int output, double alpha = 0.05,
                                   double max_outlier_fraction = 0.05) {
    const auto e = rs.output(output);
    require(e.size() > 3, "detect_outliers: too few residues");
    const int k = std::max(1, static_cast<int>(max_outlier_fraction *
                                               static_cast<double>(e.size())));
    OutlierScan scan;
    std::vector<double> work;
    if (e.size() >= 20) {
        try {
            auto fit = stats::fit_johnson_su(e);
            work = stats::johnson_normalize(e, fit);
            scan.johnson_normalized = true;
            scan.method = "johnson_su+gesd";
        } catch (const std::exception&) {
            // fall through to direct gESD
        }
    }
    if (!scan.johnson_normalized) {
        work.assign(e.begin(), e.end());
        scan.method = "gesd (normality not enforced: johnson fit unavailable)";
    }
    scan.positions = stats::gesd(work, std::min<int>(k, static_cast<int>(e.size()) - 3), alpha);
    for (auto p : scan.positions) scan.flagged_ids.push_back(rs.row_ids[p]);
    return scan;
}

// ---------------------------------------------------------------------------
// Binning helpers (type-7 quantile edges; greedy merge of small bins)
// ---------------------------------------------------------------------------

inline std::vector<double> equal_width_edges(double lo, double hi, int bins) {
    require(bins >= 1 && hi > lo, "equal_width_edges: bad range");
    std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i)
        edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) /
                                                  static_cast<double>(bins);
    return edges;
}

inline std::vector<double> quantile_edges(std::span<const double> values, int bins) {
    require(bins >= 1 && !values.empty(), "quantile_edges: bad input");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> edges;
    for (int i = 0; i <= bins; ++i)
        edges.push_back(percentile_sorted(sorted, static_cast<double>(i) / bins));
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

// last bin is closed on the right
inline std::size_t bin_index(std::span<const double> edges, double v) {
    const std::size_t bins = edges.size() - 1;
    for (std::size_t i = 0; i + 1 < bins; ++i)
        if (v < edges[i + 1]) return i;
    return bins - 1;
}

struct BinSpec {
    enum class Mode { equal_count, equal_width } mode = Mode::equal_count;
    int bins = 10;
    int min_per_bin = 30;
};

// Edges for the requested mode, then greedy right-merge of undersized bins.
inline std::vector<double> binned_edges(std::span<const double> values, const BinSpec& spec) {
    require(spec.bins >= 2, "binning: need >= 2 bins");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    require(*hi_it > *lo_it, "binning: constant values, all data in one bin");
    std::vector<double> edges =
        spec.mode == BinSpec::Mode::equal_width
            ? equal_width_edges(*lo_it, *hi_it, spec.bins)
            : quantile_edges(values, spec.bins);
    // merge bins below the minimum occupancy into their right neighbor
    bool changed = true;
    while (changed && edges.size() > 2) {
        changed = false;
        std::vector<std::size_t> counts(edges.size() - 1, 0);
        for (double v : values) ++counts[bin_index(edges, v)];
        for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
            if (counts[i] < static_cast<std::size_t>(spec.min_per_bin)) {
                edges.erase(edges.begin() +
                            static_cast<long>(i + 1 < counts.size() ? i + 1 : i));
                changed = true;
                break;
            }
        }
    }
    return edges;
}

// ---------------------------------------------------------------------------
// Input-conditioned reports (box #6)
// ---------------------------------------------------------------------------

struct GroupSummary {
    std::string label;
    std::size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

inline GroupSummary summarize_group(const std::string& label, std::vector<double> v) {
    GroupSummary g;
    g.label = label;
    g.count = v.size();
    g.mean = mean_of(v);
    g.stddev = v.size() >= 2 ? stddev_of(v) : 0.0;
    std::sort(v.begin(), v.end());
    g.min = v.front();
    g.q1 = percentile_sorted(v, 0.25);
    g.median = percentile_sorted(v, 0.5);
    g.q3 = percentile_sorted(v, 0.75);
    g.max = v.back();
    return g;
}

struct ConditionedReport {
    std::string variable;
    enum class Mode { categorical, numeric_binned } mode = Mode::categorical;
    std::vector<GroupSummary> groups;
    stats::TestResult anova;
    stats::TestResult levene;
    std::optional<stats::TestResult> pearson;   // numeric mode: trend tests on (x, e)
    std::optional<stats::TestResult> spearman;
    std::vector<double> bin_edges;              // numeric mode
};

// Residues grouped by the level of one categorical column; levels with < 2
// residues are pooled into "other". ANOVA checks the means, Levene
// (Brown-Forsythe) the dispersions.
inline ConditionedReport condition_on_categorical(const ResidueSet& rs, int output,
                                                  const Dataset& ds, int column) {
    require(column >= 0 && column < ds.n(), "condition_on_categorical: bad column");
    const auto& spec = ds.schema.features[static_cast<std::size_t>(column)];
    require(spec.categorical(), "condition_on_categorical: column is not categorical");
    std::map<int, std::vector<double>> by_level;
    for (Index i = 0; i < rs.rows(); ++i) {
        const Index row = static_cast<Index>(rs.row_ids[static_cast<std::size_t>(i)]);
        by_level[static_cast<int>(ds.X(row, column))].push_back(rs.e(i, output));
    }
    require(by_level.size() >= 2, "condition_on_categorical: single level");

    ConditionedReport rep;
    rep.variable = spec.name;
    rep.mode = ConditionedReport::Mode::categorical;
    std::vector<std::vector<double>> groups;
    std::vector<double> pooled;
    for (auto& [level, vals] : by_level) {
        if (vals.size() < 2) {
            pooled.insert(pooled.end(), vals.begin(), vals.end());
            continue;
        }
        const std::string label = spec.kind == ColumnKind::cyclic
                                      ? std::to_string(level)
                                      : ds.level_name(column, level);
        rep.groups.push_back(summarize_group(label, vals));
        groups.push_back(std::move(vals));
    }
    if (!pooled.empty()) {
        if (pooled.size() >= 2) {
            rep.groups.push_back(summarize_group("other", pooled));
            groups.push_back(std::move(pooled));
        } else if (!groups.empty()) {
            // a lone leftover residue joins the largest group
            std::size_t big = 0;
            for (std::size_t g = 1; g < groups.size(); ++g)
                if (groups[g].size() > groups[big].size()) big = g;
            groups[big].insert(groups[big].end(), pooled.begin(), pooled.end());
            rep.groups[big] = summarize_group(rep.groups[big].label, groups[big]);
        }
    }
    require(groups.size() >= 2, "condition_on_categorical: single level after pooling");
    rep.anova = stats::anova(groups);
    rep.levene = stats::levene(groups);
    return rep;
}

// Trend tests (Pearson/Spearman) plus binned ANOVA/Levene; a missing linear
// trend does not rule out a binned pattern, so both are always reported.
inline ConditionedReport condition_on_numeric(const ResidueSet& rs, int output,
                                              const Dataset& ds, int column, int bins = 5) {
    require(column >= 0 && column < ds.n(), "condition_on_numeric: bad column");
    const auto& spec = ds.schema.features[static_cast<std::size_t>(column)];
    require(!spec.categorical(), "condition_on_numeric: column is not numeric");
    require(bins >= 2, "condition_on_numeric: need >= 2 bins");
    std::vector<double> x, e;
    for (Index i = 0; i < rs.rows(); ++i) {
        const Index row = static_cast<Index>(rs.row_ids[static_cast<std::size_t>(i)]);
        x.push_back(ds.X(row, column));
        e.push_back(rs.e(i, output));
    }
    ConditionedReport rep;
    rep.variable = spec.name;
    rep.mode = ConditionedReport::Mode::numeric_binned;
    rep.pearson = stats::pearson(x, e);
    rep.spearman = stats::spearman(x, e);
    rep.bin_edges = binned_edges(x, {BinSpec::Mode::equal_count, bins, 2});
    std::vector<std::vector<double>> groups(rep.bin_edges.size() - 1);
    for (std::size_t i = 0; i < x.size(); ++i) groups[bin_index(rep.bin_edges, x[i])].push_back(e[i]);
    std::vector<std::vector<double>> usable;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].size() < 2) continue;
        char label[64];
        std::snprintf(label, sizeof label, "[%.4g, %.4g)", rep.bin_edges[g], rep.bin_edges[g + 1]);
        rep.groups.push_back(summarize_group(label, groups[g]));
        usable.push_back(std::move(groups[g]));
    }
    require(usable.size() >= 2, "condition_on_numeric: constant column");
    rep.anova = stats::anova(usable);
    rep.levene = stats::levene(usable);
    return rep;
}

// ---------------------------------------------------------------------------
// Output-conditioned reports (box #7)
// ---------------------------------------------------------------------------

struct BinFit {
    double lo = 0.0, hi = 0.0;
    std::size_t count = 0;
    double residue_std = 0.0;
    std::vector<FamilyFit> fits;   // AD omitted here; per-bin KS is the Fig. 13B analogue
};

struct BinFitTable {
    std::vector<double> edges;
    std::vector<BinFit> bins;
};

// Bins the output variable (ground truth or prediction), fits each family
// inside each bin and records the 1-sample KS p-value per (bin, family);
// per-bin residue std is the heteroscedasticity summary.
inline BinFitTable condition_on_output(std::span<const double> residue,
                                       std::span<const double> values,
                                       std::span<const stats::Family> families,
                                       const BinSpec& spec = {}) {
    require(residue.size() == values.size(), "condition_on_output: size mismatch");
    BinFitTable table;
    table.edges = binned_edges(values, spec);
    require(table.edges.size() >= 3, "condition_on_output: all data in one bin");
    std::vector<std::vector<double>> groups(table.edges.size() - 1);
    for (std::size_t i = 0; i < values.size(); ++i)
        groups[bin_index(table.edges, values[i])].push_back(residue[i]);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        BinFit bf;
        bf.lo = table.edges[g];
        bf.hi = table.edges[g + 1];
        bf.count = groups[g].size();
        if (groups[g].size() >= 2) bf.residue_std = stddev_of(groups[g]);
        for (auto fam : families) {
            FamilyFit ff;
            ff.family = fam;
            try {
                ff.fit = stats::fit(groups[g], fam);
                ff.ks = stats::ks_test(groups[g], ff.fit);
                ff.ok = true;
            } catch (const std::exception& ex) {
                ff.error = ex.what();
            }
            bf.fits.push_back(std::move(ff));
        }
        table.bins.push_back(std::move(bf));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Pair conditioning (the frame x stringer table)
// ---------------------------------------------------------------------------

enum class PairMetric { max_abs, mean_abs, max_relative };

struct PairConditionReport {
    std::string var_a, var_b;
    std::vector<std::string> a_levels, b_levels;
    // worst_output(a, b) = output index with the largest error in that cell, -1 when empty
    Eigen::MatrixXi worst_output;
    Matrix metric_value;
    PairMetric metric = PairMetric::max_abs;
};

inline PairConditionReport condition_on_pair(const ResidueSet& rs, const Dataset& ds, int col_a,
                                             int col_b, PairMetric metric = PairMetric::max_abs,
                                             const Matrix* ground_truth = nullptr) {
    require(col_a != col_b, "condition_on_pair: identical columns");
    const auto& sa = ds.schema.features[static_cast<std::size_t>(col_a)];
    const auto& sb = ds.schema.features[static_cast<std::size_t>(col_b)];
    require(sa.categorical() && sb.categorical(), "condition_on_pair: columns must be categorical");
    require(metric != PairMetric::max_relative || ground_truth,
            "condition_on_pair: relative metric needs ground truth");
    auto levels_of = [&](int col, const ColumnSpec& spec) {
        std::set<int> seen;
        for (Index i = 0; i < rs.rows(); ++i) {
            const Index row = static_cast<Index>(rs.row_ids[static_cast<std::size_t>(i)]);
            seen.insert(static_cast<int>(ds.X(row, col)));
        }
        std::vector<int> ordered(seen.begin(), seen.end());
        std::vector<std::string> names;
        for (int l : ordered)
            names.push_back(spec.kind == ColumnKind::cyclic ? std::to_string(l)
                                                            : ds.level_name(col, l));
        return std::pair{ordered, names};
    };
    auto [la, na] = levels_of(col_a, sa);
    auto [lb, nb] = levels_of(col_b, sb);
    PairConditionReport rep;
    rep.var_a = sa.name;
    rep.var_b = sb.name;
    rep.a_levels = na;
    rep.b_levels = nb;
    rep.metric = metric;
    const auto A = static_cast<Index>(la.size());
    const auto B = static_cast<Index>(lb.size());
    rep.worst_output = Eigen::MatrixXi::Constant(A, B, -1);
    rep.metric_value = Matrix::Zero(A, B);
    std::map<int, Index> ia, ib;
    for (Index i = 0; i < A; ++i) ia[la[static_cast<std::size_t>(i)]] = i;
    for (Index i = 0; i < B; ++i) ib[lb[static_cast<std::size_t>(i)]] = i;

    // accumulate per-cell per-output: max |e|, sum |e|, count
    std::vector<Matrix> cell_max(static_cast<std::size_t>(rs.m()), Matrix::Zero(A, B));
    std::vector<Matrix> cell_sum(static_cast<std::size_t>(rs.m()), Matrix::Zero(A, B));
    Eigen::MatrixXi cell_count = Eigen::MatrixXi::Zero(A, B);
    for (Index i = 0; i < rs.rows(); ++i) {
        const Index row = static_cast<Index>(rs.row_ids[static_cast<std::size_t>(i)]);
        const Index a = ia.at(static_cast<int>(ds.X(row, col_a)));
        const Index b = ib.at(static_cast<int>(ds.X(row, col_b)));
        ++cell_count(a, b);
        for (int j = 0; j < rs.m(); ++j) {
            double v = std::abs(rs.e(i, j));
            if (metric == PairMetric::max_relative) {
                const double y = std::abs((*ground_truth)(i, j));
                v = y > 1e-9 ? v / y : 0.0;
            }
            auto& mx = cell_max[static_cast<std::size_t>(j)];
            mx(a, b) = std::max(mx(a, b), v);
            cell_sum[static_cast<std::size_t>(j)](a, b) += v;
        }
    }
    for (Index a = 0; a < A; ++a)
        for (Index b = 0; b < B; ++b) {
            if (cell_count(a, b) == 0) continue;
            for (int j = 0; j < rs.m(); ++j) {
                const double v = metric == PairMetric::mean_abs
                                     ? cell_sum[static_cast<std::size_t>(j)](a, b) /
                                           cell_count(a, b)
                                     : cell_max[static_cast<std::size_t>(j)](a, b);
                if (rep.worst_output(a, b) < 0 || v > rep.metric_value(a, b)) {
                    rep.worst_output(a, b) = j;
                    rep.metric_value(a, b) = v;
                }
            }
        }
    return rep;
}

}  // namespace modval
