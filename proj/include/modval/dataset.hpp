#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "modval/common.hpp"
#include "modval/csv.hpp"

namespace modval {

enum class ColumnKind { numeric, ordinal, cyclic, nominal };

inline std::string kind_name(ColumnKind k) {
    switch (k) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::ordinal: return "categorical-ordinal";
        case ColumnKind::cyclic: return "categorical-cyclic";
        case ColumnKind::nominal: return "categorical-nominal";
    }
    return "?";
}

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    int cycle_length = 0;                  // cyclic only (q)
    std::string ci_lower, ci_upper;        // optional CI95 column bindings
    std::vector<std::string> levels;       // optional declared level order

    bool has_ci() const { return !ci_lower.empty() && !ci_upper.empty(); }
    bool categorical() const { return kind != ColumnKind::numeric; }
};

struct Schema {
    std::vector<ColumnSpec> features;
    std::vector<ColumnSpec> outputs;
};

// Tabular dataset. Cells are stored numerically: raw value for numeric
// columns, level rank for ordinal/nominal, the integer index x for cyclic
// columns (the angle is never stored). CI matrices hold NaN where a cell
// carries no uncertainty.
struct Dataset {
    Schema schema;
    Matrix X;                                            // N x n
    Matrix Y;                                            // N x m
    Matrix x_ci_lo, x_ci_hi, y_ci_lo, y_ci_hi;           // N x n / N x m or empty
    std::vector<std::vector<std::string>> feature_levels;  // per feature column

    Index rows() const { return X.rows(); }
    int n() const { return static_cast<int>(schema.features.size()); }
    int m() const { return static_cast<int>(schema.outputs.size()); }
    bool has_ci() const { return x_ci_lo.size() > 0; }

    std::vector<int> categorical_columns() const {
        std::vector<int> cols;
        for (int j = 0; j < n(); ++j)
            if (schema.features[j].categorical()) cols.push_back(j);
        return cols;
    }
    std::vector<int> numeric_columns() const {
        std::vector<int> cols;
        for (int j = 0; j < n(); ++j)
            if (!schema.features[j].categorical()) cols.push_back(j);
        return cols;
    }

    const std::string& level_name(int col, int level) const {
        return feature_levels[static_cast<std::size_t>(col)][static_cast<std::size_t>(level)];
    }

    Dataset select_rows(std::span<const Index> idx) const {
        Dataset out;
        out.schema = schema;
        out.feature_levels = feature_levels;
        out.X.resize(static_cast<Index>(idx.size()), X.cols());
        out.Y.resize(static_cast<Index>(idx.size()), Y.cols());
        const bool ci = has_ci();
        if (ci) {
            out.x_ci_lo.resize(out.X.rows(), X.cols());
            out.x_ci_hi.resize(out.X.rows(), X.cols());
            out.y_ci_lo.resize(out.X.rows(), Y.cols());
            out.y_ci_hi.resize(out.X.rows(), Y.cols());
        }
        for (Index r = 0; r < static_cast<Index>(idx.size()); ++r) {
            out.X.row(r) = X.row(idx[r]);
            out.Y.row(r) = Y.row(idx[r]);
            if (ci) {
                out.x_ci_lo.row(r) = x_ci_lo.row(idx[r]);
                out.x_ci_hi.row(r) = x_ci_hi.row(idx[r]);
                out.y_ci_lo.row(r) = y_ci_lo.row(idx[r]);
                out.y_ci_hi.row(r) = y_ci_hi.row(idx[r]);
            }
        }
        return out;
    }
};

namespace detail {

// Levels sort numerically when every level parses as a number, otherwise
// lexicographically; either way the inventory is independent of row order.
inline std::vector<std::string> sorted_levels(const std::set<std::string>& uniq) {
    std::vector<std::string> v(uniq.begin(), uniq.end());
    bool numeric = true;
    std::vector<std::pair<double, std::string>> keyed;
    for (const auto& s : v) {
        double d;
        if (!parse_double(s, d)) { numeric = false; break; }
        keyed.push_back({d, s});
    }
    if (numeric) {
        std::sort(keyed.begin(), keyed.end());
        v.clear();
        for (auto& [d, s] : keyed) v.push_back(s);
    }
    return v;
}

}  // namespace detail

// Loads an RFC-4180 CSV with a header row against the declared schema.
inline Dataset load_dataset(const std::string& path, const Schema& schema,
                            int nominal_level_cap = 32) {
    auto records = csv::parse_file(path);
    if (records.empty()) throw std::runtime_error("load_dataset: no rows in " + path);
    const auto& header = records.front();
    std::map<std::string, std::size_t> col_of;
    for (std::size_t i = 0; i < header.size(); ++i) col_of[header[i]] = i;
    auto find_col = [&](const std::string& name) {
        auto it = col_of.find(name);
        if (it == col_of.end())
            throw std::runtime_error("load_dataset: missing column '" + name + "'");
        return it->second;
    };

    const std::size_t nrows = records.size() - 1;
    if (nrows == 0) throw std::runtime_error("load_dataset: no rows in " + path);
    const int n = static_cast<int>(schema.features.size());
    const int m = static_cast<int>(schema.outputs.size());
    require(n >= 1 && m >= 1, "load_dataset: schema needs features and outputs");

    Dataset ds;
    ds.schema = schema;
    ds.X.resize(static_cast<Index>(nrows), n);
    ds.Y.resize(static_cast<Index>(nrows), m);
    ds.feature_levels.resize(static_cast<std::size_t>(n));

    bool any_ci = false;
    for (const auto& c : schema.features) any_ci |= c.has_ci();
    for (const auto& c : schema.outputs) any_ci |= c.has_ci();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (any_ci) {
        ds.x_ci_lo = Matrix::Constant(static_cast<Index>(nrows), n, nan);
        ds.x_ci_hi = Matrix::Constant(static_cast<Index>(nrows), n, nan);
        ds.y_ci_lo = Matrix::Constant(static_cast<Index>(nrows), m, nan);
        ds.y_ci_hi = Matrix::Constant(static_cast<Index>(nrows), m, nan);
    }

    auto cell = [&](std::size_t rec, std::size_t col) -> const std::string& {
        const auto& row = records[rec + 1];
        if (col >= row.size())
            throw std::runtime_error("load_dataset: row " + std::to_string(rec + 1) +
                                     " has too few fields");
        return row[col];
    };
    auto numeric_cell = [&](std::size_t rec, std::size_t col, const std::string& name) {
        double d;
        if (!detail::parse_double(cell(rec, col), d))
            throw std::runtime_error("load_dataset: unparseable cell at row " +
                                     std::to_string(rec + 1) + ", column '" + name + "'");
        return d;
    };

    // first pass: level inventories for ordinal/nominal columns
    for (int j = 0; j < n; ++j) {
        const auto& spec = schema.features[static_cast<std::size_t>(j)];
        if (spec.kind != ColumnKind::ordinal && spec.kind != ColumnKind::nominal) continue;
        if (!spec.levels.empty()) {
            ds.feature_levels[static_cast<std::size_t>(j)] = spec.levels;
        } else {
            std::set<std::string> uniq;
            const std::size_t col = find_col(spec.name);
            for (std::size_t r = 0; r < nrows; ++r) uniq.insert(cell(r, col));
            ds.feature_levels[static_cast<std::size_t>(j)] = detail::sorted_levels(uniq);
        }
        if (spec.kind == ColumnKind::nominal &&
            static_cast<int>(ds.feature_levels[static_cast<std::size_t>(j)].size()) >
                nominal_level_cap) {
            throw std::runtime_error(
                "load_dataset: nominal column '" + spec.name + "' has " +
                std::to_string(ds.feature_levels[static_cast<std::size_t>(j)].size()) +
                " levels (cap " + std::to_string(nominal_level_cap) +
                "); one-hot encoding would blow up the ambient dimension -- declare it "
                "ordinal, raise the cap, or drop the column");
        }
    }

    auto fill = [&](const std::vector<ColumnSpec>& specs, Matrix& dst, Matrix* ci_lo,
                    Matrix* ci_hi, bool is_feature) {
        for (std::size_t j = 0; j < specs.size(); ++j) {
            const auto& spec = specs[j];
            const std::size_t col = find_col(spec.name);
            std::size_t lo_col = 0, hi_col = 0;
            if (spec.has_ci()) {
                lo_col = find_col(spec.ci_lower);
                hi_col = find_col(spec.ci_upper);
            }
            for (std::size_t r = 0; r < nrows; ++r) {
                double v;
                switch (spec.kind) {
                    case ColumnKind::numeric:
                        v = numeric_cell(r, col, spec.name);
                        break;
                    case ColumnKind::cyclic: {
                        const double raw = numeric_cell(r, col, spec.name);
                        if (raw != std::floor(raw))
                            throw std::runtime_error("load_dataset: cyclic cell not an integer at row " +
                                                     std::to_string(r + 1) + ", column '" +
                                                     spec.name + "'");
                        v = raw;
                        break;
                    }
                    case ColumnKind::ordinal:
                    case ColumnKind::nominal: {
                        const auto& levels = ds.feature_levels[j];
                        const auto& s = cell(r, col);
                        auto it = std::find(levels.begin(), levels.end(), s);
                        if (it == levels.end())
                            throw std::runtime_error("load_dataset: level '" + s +
                                                     "' not in declared levels of column '" +
                                                     spec.name + "' (row " + std::to_string(r + 1) +
                                                     ")");
                        v = static_cast<double>(it - levels.begin());
                        break;
                    }
                }
                dst(static_cast<Index>(r), static_cast<Index>(j)) = v;
                if (spec.has_ci()) {
                    // empty bound cells mean "no uncertainty attached to this row"
                    if (cell(r, lo_col).empty() && cell(r, hi_col).empty()) continue;
                    const double lo = numeric_cell(r, lo_col, spec.ci_lower);
                    const double hi = numeric_cell(r, hi_col, spec.ci_upper);
                    if (!(lo <= v && v <= hi))
                        throw std::runtime_error("load_dataset: CI bounds violated at row " +
                                                 std::to_string(r + 1) + ", column '" + spec.name +
                                                 "' (lower <= value <= upper required)");
                    (*ci_lo)(static_cast<Index>(r), static_cast<Index>(j)) = lo;
                    (*ci_hi)(static_cast<Index>(r), static_cast<Index>(j)) = hi;
                }
            }
            (void)is_feature;
        }
    };
    fill(schema.features, ds.X, any_ci ? &ds.x_ci_lo : nullptr, any_ci ? &ds.x_ci_hi : nullptr, true);
    fill(schema.outputs, ds.Y, any_ci ? &ds.y_ci_lo : nullptr, any_ci ? &ds.y_ci_hi : nullptr, false);
    return ds;
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

struct EncodedColumn {
    int source = 0;              // feature column in the schema
    std::string name;
    enum class Part { value, cos_part, sin_part, onehot } part = Part::value;
    int level = -1;              // onehot only
};

struct EncodedMatrix {
    Matrix values;                          // N x d
    std::vector<EncodedColumn> provenance;  // one entry per encoded column
    int source_count = 0;

    Index d() const { return values.cols(); }

    // encoded columns belonging to one source feature, in order
    std::vector<int> columns_of(int source) const {
        std::vector<int> cols;
        for (std::size_t c = 0; c < provenance.size(); ++c)
            if (provenance[c].source == source) cols.push_back(static_cast<int>(c));
        return cols;
    }
};

// Encodes features numerically: ordinal -> rank, cyclic -> (cos, sin) on the
// unit circle, nominal -> one-hot. `inventory` supplies the frozen level sets
// (defaults to the dataset's own).
inline EncodedMatrix encode(const Dataset& ds, const Dataset* inventory = nullptr) {
    const Dataset& ref = inventory ? *inventory : ds;
    require(ref.schema.features.size() == ds.schema.features.size(),
            "encode: inventory schema mismatch");
    std::vector<EncodedColumn> prov;
    for (int j = 0; j < ds.n(); ++j) {
        const auto& spec = ds.schema.features[static_cast<std::size_t>(j)];
        switch (spec.kind) {
            case ColumnKind::numeric:
            case ColumnKind::ordinal:
                prov.push_back({j, spec.name, EncodedColumn::Part::value, -1});
                break;
            case ColumnKind::cyclic:
                prov.push_back({j, spec.name + ".cos", EncodedColumn::Part::cos_part, -1});
                prov.push_back({j, spec.name + ".sin", EncodedColumn::Part::sin_part, -1});
                break;
            case ColumnKind::nominal: {
                const auto& levels = ref.feature_levels[static_cast<std::size_t>(j)];
                for (int l = 0; l < static_cast<int>(levels.size()); ++l)
                    prov.push_back({j, spec.name + "=" + levels[static_cast<std::size_t>(l)],
                                    EncodedColumn::Part::onehot, l});
                break;
            }
        }
    }
    EncodedMatrix out;
    out.provenance = std::move(prov);
    out.source_count = ds.n();
    out.values = Matrix::Zero(ds.rows(), static_cast<Index>(out.provenance.size()));
    Index c = 0;
    for (int j = 0; j < ds.n(); ++j) {
        const auto& spec = ds.schema.features[static_cast<std::size_t>(j)];
        switch (spec.kind) {
            case ColumnKind::numeric:
            case ColumnKind::ordinal: {
                if (spec.kind == ColumnKind::ordinal && inventory) {
                    // re-map this dataset's rank to the frozen inventory's rank
                    const auto& mine = ds.feature_levels[static_cast<std::size_t>(j)];
                    const auto& theirs = ref.feature_levels[static_cast<std::size_t>(j)];
                    for (Index r = 0; r < ds.rows(); ++r) {
                        const auto& s = mine[static_cast<std::size_t>(ds.X(r, j))];
                        auto it = std::find(theirs.begin(), theirs.end(), s);
                        if (it == theirs.end())
                            throw std::runtime_error("encode: unseen level '" + s +
                                                     "' in column '" + spec.name + "'");
                        out.values(r, c) = static_cast<double>(it - theirs.begin());
                    }
                } else {
                    out.values.col(c) = ds.X.col(j);
                }
                ++c;
                break;
            }
            case ColumnKind::cyclic: {
                require(spec.cycle_length >= 2, "encode: cyclic column needs cycle_length >= 2");
                const double q = static_cast<double>(spec.cycle_length);
                for (Index r = 0; r < ds.rows(); ++r) {
                    const double theta = 2.0 * M_PI * ds.X(r, j) / q;
                    out.values(r, c) = std::cos(theta);
                    out.values(r, c + 1) = std::sin(theta);
                }
                c += 2;
                break;
            }
            case ColumnKind::nominal: {
                const auto& levels = ref.feature_levels[static_cast<std::size_t>(j)];
                const auto& mine = ds.feature_levels[static_cast<std::size_t>(j)];
                for (Index r = 0; r < ds.rows(); ++r) {
                    int level = static_cast<int>(ds.X(r, j));
                    if (inventory) {
                        const auto& s = mine[static_cast<std::size_t>(level)];
                        auto it = std::find(levels.begin(), levels.end(), s);
                        if (it == levels.end())
                            throw std::runtime_error("encode: unseen nominal level '" + s +
                                                     "' in column '" + spec.name + "'");
                        level = static_cast<int>(it - levels.begin());
                    }
                    out.values(r, c + level) = 1.0;
                }
                c += static_cast<Index>(levels.size());
                break;
            }
        }
    }
    return out;
}

// Inverse of the cyclic encoding, up to cycle aliasing.
inline int cyclic_decode(double cos_v, double sin_v, int q) {
    double theta = std::atan2(sin_v, cos_v);
    if (theta < 0) theta += 2.0 * M_PI;
    const int x = static_cast<int>(std::lround(theta * q / (2.0 * M_PI)));
    return x % q;
}

// ---------------------------------------------------------------------------
// Normalization (statistics learned from the fitting set only)
// ---------------------------------------------------------------------------

struct Normalizer {
    enum class Method { minmax, zscore } method = Method::minmax;
    Vector a, b;  // minmax: min/max; zscore: mean/std

    static Normalizer fit(const Matrix& train, Method method,
                          const std::vector<EncodedColumn>* names = nullptr) {
        require(train.rows() >= 1, "normalizer: empty fitting set");
        Normalizer nz;
        nz.method = method;
        const Index d = train.cols();
        nz.a.resize(d);
        nz.b.resize(d);
        for (Index c = 0; c < d; ++c) {
            if (method == Method::minmax) {
                nz.a(c) = train.col(c).minCoeff();
                nz.b(c) = train.col(c).maxCoeff();
            } else {
                const double mean = train.col(c).mean();
                const double denom = std::max<double>(1, train.rows() - 1);
                const double sd =
                    std::sqrt((train.col(c).array() - mean).square().sum() / denom);
                if (sd <= 0.0) {
                    std::string which = names && static_cast<std::size_t>(c) < names->size()
                                            ? (*names)[static_cast<std::size_t>(c)].name
                                            : std::to_string(c);
                    throw std::invalid_argument("normalizer: zero-variance column under zscore: " +
                                                which);
                }
                nz.a(c) = mean;
                nz.b(c) = sd;
            }
        }
        return nz;
    }

    Matrix apply(const Matrix& data) const {
        require(data.cols() == a.size(), "normalizer: dimension mismatch");
        Matrix out(data.rows(), data.cols());
        for (Index c = 0; c < data.cols(); ++c) {
            if (method == Method::minmax) {
                const double range = b(c) - a(c);
                // constant training column maps to 0
                if (range <= 0.0) out.col(c).setZero();
                else out.col(c) = (data.col(c).array() - a(c)) / range;
            } else {
                out.col(c) = (data.col(c).array() - a(c)) / b(c);
            }
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// PCA (eigendecomposition of the sample covariance, N-1 denominator)
// ---------------------------------------------------------------------------

struct PcaModel {
    Vector mean;
    Matrix components;        // d x k, orthonormal columns
    Vector explained_ratio;   // k entries, non-increasing
    int input_dims = 0;

    int k() const { return static_cast<int>(components.cols()); }
};

inline PcaModel fit_pca(const Matrix& train, double variance_threshold) {
    require(variance_threshold > 0.0 && variance_threshold <= 1.0,
            "fit_pca: threshold outside (0,1]");
    require(train.rows() >= 2, "fit_pca: need N >= 2");
    const Index d = train.cols();
    PcaModel pca;
    pca.input_dims = static_cast<int>(d);
    pca.mean = train.colwise().mean();
    Matrix centered = train.rowwise() - pca.mean.transpose();
    Matrix cov = centered.transpose() * centered / static_cast<double>(train.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    require(eig.info() == Eigen::Success, "fit_pca: eigendecomposition failed");
    Vector vals = eig.eigenvalues().reverse();          // descending
    Matrix vecs = eig.eigenvectors().rowwise().reverse();
    vals = vals.cwiseMax(0.0);
    const double total = vals.sum();
    require(total > 0.0, "fit_pca: zero total variance");
    int k = static_cast<int>(d);
    double cum = 0.0;
    for (Index i = 0; i < d; ++i) {
        cum += vals(i) / total;
        if (cum >= variance_threshold - 1e-12) {
            k = static_cast<int>(i) + 1;
            break;
        }
    }
    pca.components = vecs.leftCols(k);
    // sign convention: largest-magnitude loading positive
    for (Index c = 0; c < pca.components.cols(); ++c) {
        Index arg = 0;
        pca.components.col(c).cwiseAbs().maxCoeff(&arg);
        if (pca.components(arg, c) < 0.0) pca.components.col(c) = -pca.components.col(c);
    }
    pca.explained_ratio = vals.head(k) / total;
    return pca;
}

inline Matrix pca_project(const PcaModel& pca, const Matrix& data) {
    require(data.cols() == pca.mean.size(), "pca_project: dimension mismatch");
    return (data.rowwise() - pca.mean.transpose()) * pca.components;
}

inline Matrix pca_reconstruct(const PcaModel& pca, const Matrix& projected) {
    return (projected * pca.components.transpose()).rowwise() + pca.mean.transpose();
}

// ---------------------------------------------------------------------------
// Latin hypercube sampling
// ---------------------------------------------------------------------------

// count x dims matrix in [0,1); per dimension exactly one sample per stratum.
inline Matrix lhs_sample(int count, int dims, std::uint64_t seed) {
    require(count >= 1, "lhs_sample: count must be >= 1");
    require(dims >= 1, "lhs_sample: dims must be >= 1");
    Matrix out(count, dims);
    for (int d = 0; d < dims; ++d) {
        auto rng = make_rng(seed, static_cast<std::uint64_t>(d));
        std::vector<int> strata(static_cast<std::size_t>(count));
        std::iota(strata.begin(), strata.end(), 0);
        std::shuffle(strata.begin(), strata.end(), rng);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (int i = 0; i < count; ++i) {
            double u = unif(rng);
            if (u >= 1.0) u = std::nextafter(1.0, 0.0);
            out(i, d) = (static_cast<double>(strata[static_cast<std::size_t>(i)]) + u) /
                        static_cast<double>(count);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Uncertainty-driven augmentation
// ---------------------------------------------------------------------------

enum class CiSampling { gaussian, uniform };

namespace detail {

inline double draw_ci(double value, double lo, double hi, CiSampling how,
                      std::mt19937_64& rng) {
    if (hi <= lo) return value;
    if (how == CiSampling::uniform) {
        std::uniform_real_distribution<double> unif(lo, hi);
        return unif(rng);
    }
    // CI95 maps to sigma = (hi - lo) / (2 * 1.96)
    const double sigma = (hi - lo) / 3.92;
    std::normal_distribution<double> gauss(value, sigma);
    return gauss(rng);
}

}  // namespace detail

// For every row carrying a CI on at least one input and one output cell,
// draws q input variants x q output variants and appends the q^2 replicas
// (CIs stripped); categorical coordinates are copied unchanged.
inline Dataset augment_from_uncertainty(const Dataset& ds, int q, std::uint64_t seed,
                                        CiSampling how = CiSampling::gaussian) {
    require(q >= 1, "augment_from_uncertainty: q must be >= 1");
    if (!ds.has_ci()) return ds;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<Index> ci_rows;
    for (Index r = 0; r < ds.rows(); ++r) {
        bool in_ci = false, out_ci = false;
        for (Index c = 0; c < ds.X.cols(); ++c)
            if (!std::isnan(ds.x_ci_lo(r, c))) in_ci = true;
        for (Index c = 0; c < ds.Y.cols(); ++c)
            if (!std::isnan(ds.y_ci_lo(r, c))) out_ci = true;
        if (in_ci && out_ci) ci_rows.push_back(r);
    }
    const Index extra = static_cast<Index>(ci_rows.size()) * q * q;
    Dataset out;
    out.schema = ds.schema;
    out.feature_levels = ds.feature_levels;
    out.X.resize(ds.rows() + extra, ds.X.cols());
    out.Y.resize(ds.rows() + extra, ds.Y.cols());
    out.X.topRows(ds.rows()) = ds.X;
    out.Y.topRows(ds.rows()) = ds.Y;
    out.x_ci_lo = Matrix::Constant(ds.rows() + extra, ds.X.cols(), nan);
    out.x_ci_hi = Matrix::Constant(ds.rows() + extra, ds.X.cols(), nan);
    out.y_ci_lo = Matrix::Constant(ds.rows() + extra, ds.Y.cols(), nan);
    out.y_ci_hi = Matrix::Constant(ds.rows() + extra, ds.Y.cols(), nan);
    out.x_ci_lo.topRows(ds.rows()) = ds.x_ci_lo;
    out.x_ci_hi.topRows(ds.rows()) = ds.x_ci_hi;
    out.y_ci_lo.topRows(ds.rows()) = ds.y_ci_lo;
    out.y_ci_hi.topRows(ds.rows()) = ds.y_ci_hi;

    Index w = ds.rows();
    for (Index r : ci_rows) {
        auto rng = make_rng(seed, static_cast<std::uint64_t>(r));
        std::vector<Vector> x_draws(static_cast<std::size_t>(q)),
            y_draws(static_cast<std::size_t>(q));
        for (int a = 0; a < q; ++a) {
            Vector x = ds.X.row(r);
            for (Index c = 0; c < ds.X.cols(); ++c)
                if (!std::isnan(ds.x_ci_lo(r, c)))
                    x(c) = detail::draw_ci(ds.X(r, c), ds.x_ci_lo(r, c), ds.x_ci_hi(r, c), how, rng);
            x_draws[static_cast<std::size_t>(a)] = x;
        }
        for (int b = 0; b < q; ++b) {
            Vector y = ds.Y.row(r);
            for (Index c = 0; c < ds.Y.cols(); ++c)
                if (!std::isnan(ds.y_ci_lo(r, c)))
                    y(c) = detail::draw_ci(ds.Y(r, c), ds.y_ci_lo(r, c), ds.y_ci_hi(r, c), how, rng);
            y_draws[static_cast<std::size_t>(b)] = y;
        }
        for (int a = 0; a < q; ++a)
            for (int b = 0; b < q; ++b) {
                out.X.row(w) = x_draws[static_cast<std::size_t>(a)];
                out.Y.row(w) = y_draws[static_cast<std::size_t>(b)];
                ++w;
            }
    }
    return out;
}

}  // namespace modval
