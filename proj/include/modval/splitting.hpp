#pragma once

#include <map>
#include <string>
#include <vector>

#include "modval/common.hpp"
#include "modval/dataset.hpp"
#include "modval/stats.hpp"

namespace modval {

struct SplitResult {
    std::vector<Index> train_indices;
    std::vector<Index> test_indices;
    double fraction = 0.0;
};

enum class SplitStrategy { random, lhs };

// Holdout split with |train| = round(p*N). The lhs strategy picks test points
// nearest to a Latin hypercube design in (minmax-normalized) encoded space so
// the test set fills the feature space evenly.
inline SplitResult holdout_split(const Dataset& ds, double p, std::uint64_t seed,
                                 SplitStrategy strategy = SplitStrategy::random) {
    require(p > 0.5 && p < 1.0, "holdout_split: train fraction must be in (0.5, 1)");
    const Index n = ds.rows();
    require(n >= 5, "holdout_split: need at least 5 rows");
    Index n_train = static_cast<Index>(std::llround(p * static_cast<double>(n)));
    n_train = std::clamp<Index>(n_train, 1, n - 1);
    SplitResult out;
    out.fraction = p;

    if (strategy == SplitStrategy::random) {
        std::vector<Index> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), Index{0});
        auto rng = make_rng(seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        out.train_indices.assign(idx.begin(), idx.begin() + n_train);
        out.test_indices.assign(idx.begin() + n_train, idx.end());
    } else {
        const Index n_test = n - n_train;
        auto enc = encode(ds);
        Matrix norm = Normalizer::fit(enc.values, Normalizer::Method::minmax).apply(enc.values);
        Matrix design = lhs_sample(static_cast<int>(n_test), static_cast<int>(norm.cols()), seed);
        std::vector<bool> taken(static_cast<std::size_t>(n), false);
        out.test_indices.reserve(static_cast<std::size_t>(n_test));
        for (Index t = 0; t < n_test; ++t) {
            Index best = -1;
            double best_d = std::numeric_limits<double>::infinity();
            for (Index r = 0; r < n; ++r) {
                if (taken[static_cast<std::size_t>(r)]) continue;
                const double d = (norm.row(r) - design.row(t)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = r;
                }
            }
            taken[static_cast<std::size_t>(best)] = true;
            out.test_indices.push_back(best);
        }
        for (Index r = 0; r < n; ++r)
            if (!taken[static_cast<std::size_t>(r)]) out.train_indices.push_back(r);
        std::sort(out.test_indices.begin(), out.test_indices.end());
    }
    std::sort(out.train_indices.begin(), out.train_indices.end());
    return out;
}

// ---------------------------------------------------------------------------
// Voxel tessellation
// ---------------------------------------------------------------------------

using VoxelKey = std::vector<int>;

struct VoxelTable {
    std::map<VoxelKey, std::vector<Index>> voxels;
    std::vector<int> columns;      // categorical feature columns forming the key
    std::vector<Index> residual;   // rows whose key is unseen in the reference table
};

inline VoxelKey voxel_key_of(const Dataset& ds, Index row, std::span<const int> cat_cols) {
    VoxelKey key;
    key.reserve(cat_cols.size());
    for (int c : cat_cols) key.push_back(static_cast<int>(ds.X(row, c)));
    return key;
}

inline std::string voxel_key_name(const Dataset& ds, std::span<const int> cat_cols,
                                  const VoxelKey& key) {
    std::string s;
    for (std::size_t i = 0; i < key.size(); ++i) {
        const int col = cat_cols[i];
        const auto& spec = ds.schema.features[static_cast<std::size_t>(col)];
        if (i) s += "|";
        if (spec.kind == ColumnKind::cyclic)
            s += spec.name + "=" + std::to_string(key[i]);
        else
            s += spec.name + "=" + ds.level_name(col, key[i]);
    }
    return s;
}

inline VoxelTable voxelize(const Dataset& ds, std::span<const Index> rows,
                           std::span<const int> categorical_columns) {
    require(!categorical_columns.empty(), "voxelize: no categorical columns declared");
    VoxelTable table;
    table.columns.assign(categorical_columns.begin(), categorical_columns.end());
    for (Index r : rows) table.voxels[voxel_key_of(ds, r, categorical_columns)].push_back(r);
    return table;
}

// ---------------------------------------------------------------------------
// Two-sample chi-square over voxel occupancy
// ---------------------------------------------------------------------------

// Pearson chi-square on the 2 x K occupancy table; buckets with expected
// count < 5 on either margin are pooled into an "other" bucket first.
inline stats::TestResult voxel_chi2(const VoxelTable& train_table, const VoxelTable& test_table) {
    std::map<VoxelKey, std::pair<double, double>> counts;
    for (const auto& [key, rows] : train_table.voxels)
        counts[key].first += static_cast<double>(rows.size());
    for (const auto& [key, rows] : test_table.voxels)
        counts[key].second += static_cast<double>(rows.size());
    double total_train = 0, total_test = 0;
    for (const auto& [key, c] : counts) {
        total_train += c.first;
        total_test += c.second;
    }
    require(total_train > 0 && total_test > 0, "voxel_chi2: empty sample");
    const double total = total_train + total_test;
    std::vector<std::pair<double, double>> buckets;
    double pooled_train = 0, pooled_test = 0;
    bool pooled_any = false;
    for (const auto& [key, c] : counts) {
        const double share = (c.first + c.second) / total;
        const double e_train = total_train * share;
        const double e_test = total_test * share;
        if (e_train < 5.0 || e_test < 5.0) {
            pooled_train += c.first;
            pooled_test += c.second;
            pooled_any = true;
        } else {
            buckets.push_back(c);
        }
    }
    if (pooled_any) buckets.push_back({pooled_train, pooled_test});
    if (buckets.size() < 2)
        throw std::invalid_argument("voxel_chi2: fewer than 2 voxels after sparse pooling");
    double stat = 0.0;
    for (const auto& [t, s] : buckets) {
        const double share = (t + s) / total;
        const double e_train = total_train * share;
        const double e_test = total_test * share;
        if (e_train > 0) stat += (t - e_train) * (t - e_train) / e_train;
        if (e_test > 0) stat += (s - e_test) * (s - e_test) / e_test;
    }
    const double df = static_cast<double>(buckets.size() - 1);
    return {stat, stats::chi2_sf(stat, df), "chi2-two-sample", df, 0.0};
}

// ---------------------------------------------------------------------------
// Proximity classification
// ---------------------------------------------------------------------------

enum class VtpmClass { valid, isolated, p_hacking, residual_voxel };

inline std::string vtpm_class_name(VtpmClass c) {
    switch (c) {
        case VtpmClass::valid: return "valid";
        case VtpmClass::isolated: return "isolated";
        case VtpmClass::p_hacking: return "p-hacking";
        case VtpmClass::residual_voxel: return "residual-voxel";
    }
    return "?";
}

struct VoxelDistanceStats {
    double p2_5 = 0.0;
    double p97_5 = 0.0;
    int pair_count = 0;
};

struct VtpmOptions {
    enum class Population { nearest_neighbor, all_pairs } population =
        Population::nearest_neighbor;
    // Distance-population thresholds are order-statistic tolerance bounds:
    // the band covers >= band_level of the distance distribution with
    // probability >= band_confidence (plain percentiles under-cover at
    // finite n and would bias the audit toward rejection).
    double band_level = 0.95;
    double band_confidence = 0.75;
    int subsample_cap = 2000;
    double min_valid_fraction = 0.95;
    double max_residual_fraction = 0.05;
    unsigned jobs = 1;
};

// Distance population inside one voxel: nearest-neighbor distance of every
// training point to the rest (default), or all pairwise distances.
inline VoxelDistanceStats voxel_distance_stats(const Matrix& train_pts,
                                               const VtpmOptions& opt = {}) {
    const Index n = train_pts.rows();
    require(n >= 2, "voxel_distance_stats: need >= 2 training points");
    std::vector<double> pop;
    if (opt.population == VtpmOptions::Population::nearest_neighbor) {
        pop.resize(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (Index j = 0; j < n; ++j) {
                if (i == j) continue;
                best = std::min(best, (train_pts.row(i) - train_pts.row(j)).squaredNorm());
            }
            pop[static_cast<std::size_t>(i)] = std::sqrt(best);
        }
    } else {
        pop.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
        for (Index i = 0; i < n; ++i)
            for (Index j = i + 1; j < n; ++j)
                pop.push_back((train_pts.row(i) - train_pts.row(j)).norm());
    }
    std::sort(pop.begin(), pop.end());
    const auto [lo_i, hi_i] = stats::tolerance_band_indices(static_cast<int>(pop.size()),
                                                            opt.band_level, opt.band_confidence);
    return {pop[static_cast<std::size_t>(lo_i - 1)], pop[static_cast<std::size_t>(hi_i - 1)],
            static_cast<int>(pop.size())};
}

// P2.5 < d_z < P97.5 -> valid; boundary ties resolve to the invalid side.
inline VtpmClass vtpm_classify(const Vector& z, const Matrix& voxel_train_points,
                               const VoxelDistanceStats& st) {
    require(voxel_train_points.rows() >= 2, "vtpm_classify: voxel has < 2 training points");
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < voxel_train_points.rows(); ++i)
        best = std::min(best, (voxel_train_points.row(i) - z.transpose()).squaredNorm());
    const double d_z = std::sqrt(best);
    if (d_z >= st.p97_5) return VtpmClass::isolated;
    if (d_z <= st.p2_5) return VtpmClass::p_hacking;
    return VtpmClass::valid;
}

struct VoxelOccupancy {
    std::string name;
    Index train_count = 0;
    Index test_count = 0;
};

struct VtpmReport {
    std::vector<VtpmClass> test_class;  // aligned with split.test_indices
    double valid_fraction = 0.0;
    double isolated_fraction = 0.0;
    double phacking_fraction = 0.0;
    double residual_fraction = 0.0;
    stats::TestResult chi2;
    bool chi2_ok = false;               // false when the test was not computable
    bool adequate = false;
    std::vector<std::string> flagged_voxels;  // disproportionally few training points
    std::vector<VoxelOccupancy> occupancy;
    int voxel_count = 0;
};

// Full split-adequacy audit: voxelize on the categorical variables, compare
// occupancy distributions, classify every test point by proximity inside its
// voxel. Distances are Euclidean over minmax-normalized numeric features,
// the normalizer being fitted on the training rows only.
inline VtpmReport vtpm_report(const SplitResult& split, const Dataset& ds,
                              const VtpmOptions& opt = {}, std::uint64_t seed = 0) {
    const auto cat_cols = ds.categorical_columns();
    require(!cat_cols.empty(), "vtpm_report: no categorical columns declared");
    const auto num_cols = ds.numeric_columns();

    Matrix numerics(ds.rows(), static_cast<Index>(num_cols.size()));
    for (std::size_t c = 0; c < num_cols.size(); ++c)
        numerics.col(static_cast<Index>(c)) = ds.X.col(num_cols[c]);
    Matrix train_numerics(static_cast<Index>(split.train_indices.size()), numerics.cols());
    for (std::size_t i = 0; i < split.train_indices.size(); ++i)
        train_numerics.row(static_cast<Index>(i)) = numerics.row(split.train_indices[i]);
    Matrix norm_all;
    if (numerics.cols() > 0) {
        auto nz = Normalizer::fit(train_numerics, Normalizer::Method::minmax);
        norm_all = nz.apply(numerics);
    } else {
        norm_all = Matrix::Zero(ds.rows(), 0);
    }

    VoxelTable train_table = voxelize(ds, split.train_indices, cat_cols);
    VoxelTable test_table;
    test_table.columns = train_table.columns;
    for (Index r : split.test_indices) {
        auto key = voxel_key_of(ds, r, cat_cols);
        if (train_table.voxels.count(key)) test_table.voxels[key].push_back(r);
        else test_table.residual.push_back(r);
    }

    VtpmReport rep;
    rep.voxel_count = static_cast<int>(train_table.voxels.size());
    rep.test_class.assign(split.test_indices.size(), VtpmClass::residual_voxel);
    std::map<Index, std::size_t> pos_of;
    for (std::size_t i = 0; i < split.test_indices.size(); ++i)
        pos_of[split.test_indices[i]] = i;

    struct Job {
        const VoxelKey* key;
        const std::vector<Index>* train_rows;
        const std::vector<Index>* test_rows;
    };
    std::vector<Job> jobs_list;
    for (const auto& [key, test_rows] : test_table.voxels)
        jobs_list.push_back({&key, &train_table.voxels.at(key), &test_rows});

    parallel_for(jobs_list.size(), opt.jobs, [&](std::size_t ji) {
        const auto& job = jobs_list[ji];
        const auto& train_rows = *job.train_rows;
        if (train_rows.size() < 2) {
            // cannot form a distance distribution; conservative
            for (Index r : *job.test_rows) rep.test_class[pos_of.at(r)] = VtpmClass::isolated;
            return;
        }
        std::vector<Index> rows = train_rows;
        if (static_cast<int>(rows.size()) > opt.subsample_cap) {
            auto rng = make_rng(seed, ji);
            std::shuffle(rows.begin(), rows.end(), rng);
            rows.resize(static_cast<std::size_t>(opt.subsample_cap));
        }
        Matrix pts(static_cast<Index>(rows.size()), norm_all.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            pts.row(static_cast<Index>(i)) = norm_all.row(rows[i]);
        const auto st = voxel_distance_stats(pts, opt);
        for (Index r : *job.test_rows) {
            Vector z = norm_all.row(r);
            rep.test_class[pos_of.at(r)] = vtpm_classify(z, pts, st);
        }
    });

    const double n_test = static_cast<double>(split.test_indices.size());
    double n_valid = 0, n_iso = 0, n_hack = 0;
    for (auto c : rep.test_class) {
        n_valid += c == VtpmClass::valid;
        n_iso += c == VtpmClass::isolated;
        n_hack += c == VtpmClass::p_hacking;
    }
    rep.valid_fraction = n_valid / n_test;
    rep.isolated_fraction = n_iso / n_test;
    rep.phacking_fraction = n_hack / n_test;
    rep.residual_fraction = static_cast<double>(test_table.residual.size()) / n_test;

    try {
        rep.chi2 = voxel_chi2(train_table, test_table);
        rep.chi2_ok = true;
    } catch (const std::invalid_argument&) {
        rep.chi2 = {0.0, 1.0, "chi2-two-sample", 0.0, 0.0};
        rep.chi2_ok = false;
    }

    // occupancy + voxels with disproportionally few training points
    const double total_train = static_cast<double>(split.train_indices.size());
    const double total = total_train + n_test;
    for (const auto& [key, rows] : train_table.voxels) {
        const auto it = test_table.voxels.find(key);
        const double t = static_cast<double>(rows.size());
        const double s = it != test_table.voxels.end()
                             ? static_cast<double>(it->second.size()) : 0.0;
        rep.occupancy.push_back({voxel_key_name(ds, cat_cols, key),
                                 static_cast<Index>(rows.size()), static_cast<Index>(s)});
        const double e_train = total_train * (t + s) / total;
        if (e_train > 0 && (t - e_train) / std::sqrt(e_train) < -2.0)
            rep.flagged_voxels.push_back(voxel_key_name(ds, cat_cols, key));
    }
    if (!test_table.residual.empty())
        rep.occupancy.push_back({"<residual>", 0, static_cast<Index>(test_table.residual.size())});

    rep.adequate = rep.valid_fraction >= opt.min_valid_fraction &&
                   rep.residual_fraction <= opt.max_residual_fraction;
    return rep;
}

}  // namespace modval
