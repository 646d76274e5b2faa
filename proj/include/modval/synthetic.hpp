#pragma once

#include <array>
#include <string>
#include <vector>

#include "modval/common.hpp"
#include "modval/dataset.hpp"

namespace modval {

// Synthetic analogue of the aerostructural case study: numeric load features,
// an ordinal frame coordinate, a cyclic stringer coordinate, and m smooth
// correlated outputs in [0, 5] (low values = high failure risk).
struct SyntheticOptions {
    Index rows = 20000;
    int numeric_features = 24;     // plus frame and stringer = 26 features
    int frame_levels = 8;
    int stringers = 12;            // cyclic q
    int outputs = 6;
    double noise_scale = 0.05;
    bool heteroscedastic = true;   // noise grows with the output value
    double ci_fraction = 0.0;      // fraction of rows given CI bounds on one
                                   // input and one output cell
};

struct SyntheticCase {
    Dataset data;
    Matrix target_correlation;     // expected Pearson matrix of the outputs
};

namespace detail {

// Ground truth: outputs are affine mixes of five standardized latent signals
//   g0 = w0 . x            (linear load combination)
//   g1 = sin(2 pi w1 . x)  (smooth nonlinearity)
//   g2 = (w2 . x - 1/2)^2  (curvature)
//   g3 = cos(theta - 0.3)  (stringer effect)
//   g4 = frame trend
// plus Gaussian noise, clipped to [0, 5]. Latent standardization constants
// and the expected output correlation come from a fixed-seed pilot sample,
// so the generator knows its own correlation structure.
struct SyntheticModel {
    static constexpr int kLatents = 5;
    Matrix loadings;               // m x kLatents
    Vector noise_sigma;            // m
    Vector w0, w1, w2;
    Vector latent_mean, latent_std;
    Matrix target_correlation;

    static SyntheticModel build(const SyntheticOptions& opt) {
        SyntheticModel mdl;
        const int p = opt.numeric_features;
        auto rng = make_rng(0xC0FFEEULL);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        auto draw_weights = [&](Vector& w) {
            w.resize(p);
            for (int i = 0; i < p; ++i) w(i) = unif(rng);
            w /= std::max(1e-12, w.norm());
        };
        draw_weights(mdl.w0);
        draw_weights(mdl.w1);
        draw_weights(mdl.w2);

        mdl.loadings.resize(opt.outputs, kLatents);
        mdl.noise_sigma.resize(opt.outputs);
        // fixed loading pattern, recycled beyond six outputs
        const double base[6][kLatents] = {
            {0.55, 0.20, 0.10, 0.25, 0.15},  {0.50, 0.25, 0.15, -0.20, 0.10},
            {0.15, 0.55, 0.20, 0.10, -0.15}, {-0.40, 0.30, 0.35, 0.15, 0.20},
            {0.10, -0.15, 0.55, 0.30, 0.10}, {0.30, 0.30, -0.30, 0.25, 0.35}};
        for (int k = 0; k < opt.outputs; ++k) {
            for (int f = 0; f < kLatents; ++f) mdl.loadings(k, f) = base[k % 6][f];
            mdl.noise_sigma(k) = opt.noise_scale * (1.0 + 0.1 * (k % 3));
        }

        // pilot pass standardizes the latents and pins the expected correlations
        const Index pilot_n = 4096;
        Matrix latents(pilot_n, kLatents);
        auto prng = make_rng(0xC0FFEEULL, 1);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (Index r = 0; r < pilot_n; ++r) {
            Vector x(p);
            for (int i = 0; i < p; ++i) x(i) = u01(prng);
            const int frame = static_cast<int>(u01(prng) * opt.frame_levels) % opt.frame_levels;
            const int str = static_cast<int>(u01(prng) * opt.stringers) % opt.stringers;
            latents.row(r) = mdl.raw_latents(x, frame, str, opt).transpose();
        }
        mdl.latent_mean = latents.colwise().mean();
        mdl.latent_std.resize(kLatents);
        for (int f = 0; f < kLatents; ++f) {
            const double var =
                (latents.col(f).array() - mdl.latent_mean(f)).square().sum() / (pilot_n - 1);
            mdl.latent_std(f) = std::sqrt(std::max(var, 1e-12));
        }
        Matrix std_lat = latents;
        for (int f = 0; f < kLatents; ++f)
            std_lat.col(f) = (latents.col(f).array() - mdl.latent_mean(f)) / mdl.latent_std(f);
        Matrix lat_cov = std_lat.transpose() * std_lat / static_cast<double>(pilot_n - 1);

        Matrix ycov = mdl.loadings * lat_cov * mdl.loadings.transpose();
        // heteroscedastic noise variance averaged over the pilot
        for (int k = 0; k < opt.outputs; ++k) {
            double s2 = mdl.noise_sigma(k) * mdl.noise_sigma(k);
            if (opt.heteroscedastic) s2 *= 0.55;  // E[(0.3 + 0.7 u)^2] with u ~ U[0,1]-ish
            ycov(k, k) += s2;
        }
        mdl.target_correlation.resize(opt.outputs, opt.outputs);
        for (int i = 0; i < opt.outputs; ++i)
            for (int j = 0; j < opt.outputs; ++j)
                mdl.target_correlation(i, j) = ycov(i, j) / std::sqrt(ycov(i, i) * ycov(j, j));
        return mdl;
    }

    Vector raw_latents(const Vector& x, int frame, int stringer,
                       const SyntheticOptions& opt) const {
        Vector g(kLatents);
        g(0) = w0.dot(x);
        g(1) = std::sin(2.0 * M_PI * w1.dot(x));
        const double u = w2.dot(x) - 0.5;
        g(2) = u * u;
        const double theta = 2.0 * M_PI * stringer / opt.stringers;
        g(3) = std::cos(theta - 0.3);
        g(4) = opt.frame_levels > 1
                   ? static_cast<double>(frame) / (opt.frame_levels - 1) - 0.5
                   : 0.0;
        return g;
    }

    Vector latents(const Vector& x, int frame, int stringer, const SyntheticOptions& opt) const {
        Vector g = raw_latents(x, frame, stringer, opt);
        for (int f = 0; f < kLatents; ++f) g(f) = (g(f) - latent_mean(f)) / latent_std(f);
        return g;
    }
};

}  // namespace detail

inline SyntheticCase generate_synthetic_case(std::uint64_t seed, const SyntheticOptions& opt = {}) {
    require(opt.rows >= 1000, "generate_synthetic_case: need N >= 1000");
    require(opt.numeric_features >= 3, "generate_synthetic_case: need >= 3 numeric features");
    require(opt.frame_levels >= 2 && opt.stringers >= 2,
            "generate_synthetic_case: need >= 2 categorical levels");
    require(opt.outputs >= 1, "generate_synthetic_case: need >= 1 output");
    const auto mdl = detail::SyntheticModel::build(opt);

    SyntheticCase out;
    out.target_correlation = mdl.target_correlation;
    Dataset& ds = out.data;
    const int p = opt.numeric_features;
    const int n_feat = p + 2;
    for (int i = 0; i < p; ++i) {
        char name[16];
        std::snprintf(name, sizeof name, "load%02d", i + 1);
        ds.schema.features.push_back({name, ColumnKind::numeric, 0, "", "", {}});
    }
    ColumnSpec frame_spec{"frame", ColumnKind::ordinal, 0, "", "", {}};
    for (int f = 0; f < opt.frame_levels; ++f) {
        char lv[16];
        std::snprintf(lv, sizeof lv, "F%02d", f + 1);
        frame_spec.levels.push_back(lv);
    }
    ds.schema.features.push_back(frame_spec);
    ds.schema.features.push_back({"stringer", ColumnKind::cyclic, opt.stringers, "", "", {}});
    for (int k = 0; k < opt.outputs; ++k)
        ds.schema.outputs.push_back({"rf" + std::to_string(k + 1), ColumnKind::numeric, 0, "", "", {}});
    ds.feature_levels.resize(static_cast<std::size_t>(n_feat));
    ds.feature_levels[static_cast<std::size_t>(p)] = frame_spec.levels;

    ds.X.resize(opt.rows, n_feat);
    ds.Y.resize(opt.rows, opt.outputs);
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> frame_pick(0, opt.frame_levels - 1);
    std::uniform_int_distribution<int> str_pick(0, opt.stringers - 1);
    for (Index r = 0; r < opt.rows; ++r) {
        Vector x(p);
        for (int i = 0; i < p; ++i) x(i) = u01(rng);
        const int frame = frame_pick(rng);
        const int stringer = str_pick(rng);
        ds.X.row(r).head(p) = x;
        ds.X(r, p) = frame;
        ds.X(r, p + 1) = stringer;
        const Vector g = mdl.latents(x, frame, stringer, opt);
        for (int k = 0; k < opt.outputs; ++k) {
            const double base = 2.5 + mdl.loadings.row(k).dot(g);
            double sigma = mdl.noise_sigma(k);
            if (opt.heteroscedastic)
                sigma *= 0.3 + 0.7 * std::clamp(base, 0.0, 5.0) / 5.0;
            ds.Y(r, k) = std::clamp(base + sigma * gauss(rng), 0.0, 5.0);
        }
    }

    if (opt.ci_fraction > 0.0) {
        ds.schema.features[0].ci_lower = ds.schema.features[0].name + "_lo";
        ds.schema.features[0].ci_upper = ds.schema.features[0].name + "_hi";
        ds.schema.outputs[0].ci_lower = ds.schema.outputs[0].name + "_lo";
        ds.schema.outputs[0].ci_upper = ds.schema.outputs[0].name + "_hi";
        const double nan = std::numeric_limits<double>::quiet_NaN();
        ds.x_ci_lo = Matrix::Constant(opt.rows, n_feat, nan);
        ds.x_ci_hi = Matrix::Constant(opt.rows, n_feat, nan);
        ds.y_ci_lo = Matrix::Constant(opt.rows, opt.outputs, nan);
        ds.y_ci_hi = Matrix::Constant(opt.rows, opt.outputs, nan);
        auto crng = make_rng(seed, 77);
        std::uniform_real_distribution<double> pick(0.0, 1.0);
        for (Index r = 0; r < opt.rows; ++r) {
            if (pick(crng) >= opt.ci_fraction) continue;
            const double half_x = 1.96 * 0.02;
            ds.x_ci_lo(r, 0) = ds.X(r, 0) - half_x;
            ds.x_ci_hi(r, 0) = ds.X(r, 0) + half_x;
            const double half_y = 1.96 * 0.05;
            ds.y_ci_lo(r, 0) = std::max(0.0, ds.Y(r, 0) - half_y);
            ds.y_ci_hi(r, 0) = std::min(5.0, ds.Y(r, 0) + half_y);
        }
    }
    return out;
}

// CSV writer matching the load_dataset schema conventions (ordinal/nominal
// cells as level names, cyclic cells as integer indices).
inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_dataset_csv: cannot write " + path);
    std::vector<std::string> header;
    for (const auto& c : ds.schema.features) header.push_back(c.name);
    for (const auto& c : ds.schema.outputs) header.push_back(c.name);
    for (const auto& c : ds.schema.features)
        if (c.has_ci()) {
            header.push_back(c.ci_lower);
            header.push_back(c.ci_upper);
        }
    for (const auto& c : ds.schema.outputs)
        if (c.has_ci()) {
            header.push_back(c.ci_lower);
            header.push_back(c.ci_upper);
        }
    csv::write_row(out, header);
    for (Index r = 0; r < ds.rows(); ++r) {
        std::vector<std::string> row;
        for (int j = 0; j < ds.n(); ++j) {
            const auto& spec = ds.schema.features[static_cast<std::size_t>(j)];
            if (spec.kind == ColumnKind::ordinal || spec.kind == ColumnKind::nominal)
                row.push_back(ds.level_name(j, static_cast<int>(ds.X(r, j))));
            else if (spec.kind == ColumnKind::cyclic)
                row.push_back(std::to_string(static_cast<long>(ds.X(r, j))));
            else
                row.push_back(csv::format_double(ds.X(r, j)));
        }
        for (int j = 0; j < ds.m(); ++j) row.push_back(csv::format_double(ds.Y(r, j)));
        auto push_ci = [&](const Matrix& lo, const Matrix& hi, Index col) {
            if (lo.size() == 0 || std::isnan(lo(r, col))) {
                row.push_back("");  // no uncertainty on this row
                row.push_back("");
            } else {
                row.push_back(csv::format_double(lo(r, col)));
                row.push_back(csv::format_double(hi(r, col)));
            }
        };
        for (int j = 0; j < ds.n(); ++j)
            if (ds.schema.features[static_cast<std::size_t>(j)].has_ci())
                push_ci(ds.x_ci_lo, ds.x_ci_hi, j);
        for (int j = 0; j < ds.m(); ++j)
            if (ds.schema.outputs[static_cast<std::size_t>(j)].has_ci())
                push_ci(ds.y_ci_lo, ds.y_ci_hi, j);
        csv::write_row(out, row);
    }
}

}  // namespace modval
