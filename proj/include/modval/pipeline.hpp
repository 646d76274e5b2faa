#pragma once

#include <array>
#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "modval/report.hpp"
#include "modval/synthetic.hpp"

namespace modval {

// ---------------------------------------------------------------------------
// Configuration (JSON grammar documented in the README, complete example
// emitted by `modval generate --emit-config`)
// ---------------------------------------------------------------------------

struct PipelineConfig {
    // data source: a CSV+schema or the synthetic generator
    std::optional<std::string> dataset_path;
    Schema schema;
    int nominal_level_cap = 32;
    std::optional<SyntheticOptions> synthetic;
    bool augment_enabled = false;
    int augment_q = 2;
    CiSampling augment_sampling = CiSampling::gaussian;

    // splitting
    double holdout_fraction = 0.8;
    SplitStrategy strategy = SplitStrategy::random;
    std::array<double, 3> three_way{0.6, 0.2, 0.2};
    VtpmOptions vtpm;

    // preprocessing
    Normalizer::Method normalize = Normalizer::Method::minmax;
    std::optional<double> pca_variance;

    // surrogate
    TrainingConfig model;

    // analysis
    std::map<std::string, bool> boxes;  // defaults to all enabled
    int bins = 10;
    int bootstrap_b = 2000;
    int ad_replicates = 200;
    int pfi_repeats = 10;
    int imum_top_k = 5;
    bool condition_output_on_truth = false;  // diagnostic y-mode for box 7 / oMUM
    std::optional<std::pair<std::string, std::string>> pair_columns;
    std::vector<int> curve_sizes;
    int curve_seeds = 2;
    double low_error_tol = 0.1;
    int hull_train_cap = 1500;
    Index hull_query_cap = 500;

    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::string out_dir;
    std::vector<std::string> formats{"json", "csv"};

    static const std::vector<std::string>& box_names() {
        static const std::vector<std::string> names{
            "data",       "split_audit",       "model",
            "pointwise",  "marginal",          "input_conditioned",
            "output_conditioned", "xai",       "boosting",
            "uncertainty"};
        return names;
    }

    // direct prerequisites within the ten-box graph
    static const std::map<std::string, std::string>& box_parent() {
        static const std::map<std::string, std::string> deps{
            {"split_audit", "data"},        {"model", "split_audit"},
            {"pointwise", "model"},         {"marginal", "pointwise"},
            {"input_conditioned", "pointwise"}, {"output_conditioned", "pointwise"},
            {"xai", "model"},               {"boosting", "model"},
            {"uncertainty", "model"}};
        return deps;
    }

    // requested toggles with dependency cascade applied; notes record boxes
    // disabled because a prerequisite is off
    std::map<std::string, bool> effective_boxes(std::vector<std::string>* notes = nullptr) const {
        std::map<std::string, bool> on;
        for (const auto& b : box_names()) {
            auto it = boxes.find(b);
            on[b] = it == boxes.end() ? true : it->second;
        }
        for (const auto& b : box_names()) {
            auto dep = box_parent().find(b);
            if (dep == box_parent().end()) continue;
            if (on[b] && !on.at(dep->second)) {
                on[b] = false;
                if (notes)
                    notes->push_back("box '" + b + "' disabled: prerequisite '" + dep->second +
                                     "' is off");
            }
        }
        return on;
    }
};

inline ColumnKind column_kind_from_string(const std::string& s) {
    if (s == "numeric") return ColumnKind::numeric;
    if (s == "ordinal") return ColumnKind::ordinal;
    if (s == "cyclic") return ColumnKind::cyclic;
    if (s == "nominal") return ColumnKind::nominal;
    throw std::invalid_argument("config: unknown column kind '" + s + "'");
}

inline std::string column_kind_to_string(ColumnKind k) {
    switch (k) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::ordinal: return "ordinal";
        case ColumnKind::cyclic: return "cyclic";
        case ColumnKind::nominal: return "nominal";
    }
    return "numeric";
}

inline json schema_to_json(const Schema& s) {
    auto cols = [](const std::vector<ColumnSpec>& specs) {
        json arr = json::array();
        for (const auto& c : specs) {
            json j{{"name", c.name}, {"kind", column_kind_to_string(c.kind)}};
            if (c.kind == ColumnKind::cyclic) j["cycle_length"] = c.cycle_length;
            if (c.has_ci()) j["ci"] = {c.ci_lower, c.ci_upper};
            if (!c.levels.empty()) j["levels"] = c.levels;
            arr.push_back(j);
        }
        return arr;
    };
    return {{"features", cols(s.features)}, {"outputs", cols(s.outputs)}};
}

inline Schema schema_from_json(const json& j) {
    Schema s;
    auto cols = [](const json& arr) {
        std::vector<ColumnSpec> specs;
        for (const auto& cj : arr) {
            ColumnSpec c;
            c.name = cj.at("name").get<std::string>();
            c.kind = column_kind_from_string(cj.value("kind", "numeric"));
            c.cycle_length = cj.value("cycle_length", 0);
            if (cj.contains("ci")) {
                c.ci_lower = cj["ci"].at(0).get<std::string>();
                c.ci_upper = cj["ci"].at(1).get<std::string>();
            }
            if (cj.contains("levels")) c.levels = cj["levels"].get<std::vector<std::string>>();
            specs.push_back(c);
        }
        return specs;
    };
    s.features = cols(j.at("features"));
    s.outputs = cols(j.at("outputs"));
    return s;
}

inline PipelineConfig config_from_json(const json& j) {
    PipelineConfig cfg;
    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        cfg.dataset_path = d.at("path").get<std::string>();
        cfg.schema = schema_from_json(d);
        cfg.nominal_level_cap = d.value("nominal_level_cap", 32);
    }
    if (j.contains("synthetic")) {
        const auto& s = j["synthetic"];
        SyntheticOptions so;
        so.rows = s.value("rows", Index{20000});
        so.numeric_features = s.value("numeric_features", 24);
        so.frame_levels = s.value("frame_levels", 8);
        so.stringers = s.value("stringers", 12);
        so.outputs = s.value("outputs", 6);
        so.noise_scale = s.value("noise_scale", 0.05);
        so.heteroscedastic = s.value("heteroscedastic", true);
        so.ci_fraction = s.value("ci_fraction", 0.0);
        cfg.synthetic = so;
    }
    require(cfg.dataset_path.has_value() || cfg.synthetic.has_value(),
            "config: need a dataset path or a synthetic block");
    if (j.contains("augment")) {
        cfg.augment_enabled = j["augment"].value("enabled", false);
        cfg.augment_q = j["augment"].value("q", 2);
        cfg.augment_sampling = j["augment"].value("sampling", "gaussian") == std::string("uniform")
                                   ? CiSampling::uniform
                                   : CiSampling::gaussian;
    }
    if (j.contains("split")) {
        const auto& s = j["split"];
        cfg.holdout_fraction = s.value("holdout_fraction", 0.8);
        cfg.strategy = s.value("strategy", "random") == std::string("lhs") ? SplitStrategy::lhs
                                                                           : SplitStrategy::random;
        if (s.contains("three_way")) {
            auto v = s["three_way"].get<std::vector<double>>();
            require(v.size() == 3, "config: split.three_way needs 3 fractions");
            cfg.three_way = {v[0], v[1], v[2]};
        }
        if (s.contains("vtpm_population"))
            cfg.vtpm.population =
                s["vtpm_population"] == std::string("all-pairs")
                    ? VtpmOptions::Population::all_pairs
                    : VtpmOptions::Population::nearest_neighbor;
        cfg.vtpm.subsample_cap = s.value("vtpm_subsample_cap", cfg.vtpm.subsample_cap);
    }
    if (j.contains("preprocess")) {
        const auto& p = j["preprocess"];
        cfg.normalize = p.value("normalize", "minmax") == std::string("zscore")
                            ? Normalizer::Method::zscore
                            : Normalizer::Method::minmax;
        if (p.contains("pca_variance") && !p["pca_variance"].is_null())
            cfg.pca_variance = p["pca_variance"].get<double>();
    }
    if (j.contains("model")) cfg.model = training_config_from_json(j["model"]);
    if (j.contains("analysis")) {
        const auto& a = j["analysis"];
        if (a.contains("boxes"))
            for (const auto& [k, v] : a["boxes"].items()) cfg.boxes[k] = v.get<bool>();
        cfg.bins = a.value("bins", 10);
        cfg.bootstrap_b = a.value("bootstrap", 2000);
        cfg.ad_replicates = a.value("ad_replicates", 200);
        cfg.pfi_repeats = a.value("pfi_repeats", 10);
        cfg.imum_top_k = a.value("imum_top_k", 5);
        cfg.condition_output_on_truth = a.value("condition_output_on_truth", false);
        if (a.contains("pair")) {
            auto v = a["pair"].get<std::vector<std::string>>();
            require(v.size() == 2, "config: analysis.pair needs 2 column names");
            cfg.pair_columns = {v[0], v[1]};
        }
        if (a.contains("curve_sizes")) cfg.curve_sizes = a["curve_sizes"].get<std::vector<int>>();
        cfg.curve_seeds = a.value("curve_seeds", 2);
        cfg.low_error_tol = a.value("low_error_tol", 0.1);
        cfg.hull_train_cap = a.value("hull_train_cap", 1500);
        cfg.hull_query_cap = a.value("hull_query_cap", Index{500});
    }
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.jobs = j.value("jobs", 1u);
    if (j.contains("output")) {
        cfg.out_dir = j["output"].value("dir", "");
        if (j["output"].contains("formats"))
            cfg.formats = j["output"]["formats"].get<std::vector<std::string>>();
    }
    return cfg;
}

inline std::string current_timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------
// Pipeline run
// ---------------------------------------------------------------------------

namespace detail {

struct PipelineState {
    Dataset ds;
    EncodedMatrix enc;
    Normalizer normalizer;
    std::optional<PcaModel> pca;
    Matrix features;  // normalized (and PCA-projected) encoding, all rows
    std::vector<Index> train_idx, test_idx, val_idx;
    SurrogateModel model;
    PredictionTable test_table;
    ResidueSet test_residues;

    Matrix rows_of(const Matrix& m, std::span<const Index> idx) const {
        Matrix out(static_cast<Index>(idx.size()), m.cols());
        for (std::size_t i = 0; i < idx.size(); ++i)
            out.row(static_cast<Index>(i)) = m.row(idx[i]);
        return out;
    }
};

inline std::vector<stats::Family> default_families() {
    return {stats::Family::normal, stats::Family::laplace, stats::Family::cauchy,
            stats::Family::johnson_su};
}

}  // namespace detail

// Executes the enabled boxes in graph order (1 data -> 2 split audit ->
// 3 model -> 4 point-wise -> 5 marginal -> 6/7 conditioned -> 8 XAI ->
// 9 boosting -> 10 uncertainty). A stage failure halts the run, writes the
// partial report when an output directory is configured and rethrows with
// the stage id. Boosting recommendations are emitted, never auto-applied.
inline PipelineReport run(const PipelineConfig& cfg) {
    PipelineReport rep;
    rep.seed = cfg.seed;
    rep.generated_at = current_timestamp_utc();
    std::vector<std::string> cascade_notes;
    const auto boxes = cfg.effective_boxes(&cascade_notes);
    rep.boxes_enabled = boxes;
    rep.notes = cascade_notes;

    detail::PipelineState st;
    std::string stage;
    try {
        // ---- box 1: data -------------------------------------------------
        if (boxes.at("data")) {
            stage = "1:data";
            if (cfg.synthetic) {
                auto synth = generate_synthetic_case(cfg.seed, *cfg.synthetic);
                st.ds = std::move(synth.data);
            } else {
                st.ds = load_dataset(*cfg.dataset_path, cfg.schema, cfg.nominal_level_cap);
            }
            rep.rows_loaded = st.ds.rows();
            if (cfg.augment_enabled && st.ds.has_ci()) {
                st.ds = augment_from_uncertainty(st.ds, cfg.augment_q, mix_seed(cfg.seed, 11),
                                                 cfg.augment_sampling);
                rep.notes.push_back("augmentation added " +
                                    std::to_string(st.ds.rows() - rep.rows_loaded) +
                                    " replica rows");
            }
            rep.rows_after_augment = st.ds.rows();
            rep.data_fingerprint = fingerprint(st.ds);
        }

        // ---- box 2: split + VTPM audit ------------------------------------
        const bool uncertainty_on = boxes.at("uncertainty");
        if (boxes.at("split_audit")) {
            stage = "2:split_audit";
            if (uncertainty_on) {
                auto tw = three_way_split(st.ds, cfg.three_way, mix_seed(cfg.seed, 21));
                st.train_idx = tw.train;
                st.test_idx = tw.calibration;  // calibration doubles as held-out test
                st.val_idx = tw.validation;
            } else {
                auto sp = holdout_split(st.ds, cfg.holdout_fraction, mix_seed(cfg.seed, 21),
                                        cfg.strategy);
                st.train_idx = sp.train_indices;
                st.test_idx = sp.test_indices;
            }
            rep.n_train = static_cast<Index>(st.train_idx.size());
            rep.n_test = static_cast<Index>(st.test_idx.size());
            rep.n_validation = static_cast<Index>(st.val_idx.size());
            VtpmOptions vopt = cfg.vtpm;
            vopt.jobs = cfg.jobs;
            SplitResult audit_split{st.train_idx, st.test_idx,
                                    static_cast<double>(st.train_idx.size()) /
                                        static_cast<double>(st.ds.rows())};
            rep.split_audit = vtpm_report(audit_split, st.ds, vopt, mix_seed(cfg.seed, 22));
            rep.verdicts["split_adequate"] = rep.split_audit->adequate;
            if (!st.val_idx.empty()) {
                SplitResult val_split{st.train_idx, st.val_idx, 0.0};
                rep.validation_audit =
                    vtpm_report(val_split, st.ds, vopt, mix_seed(cfg.seed, 23));
                rep.verdicts["validation_split_adequate"] = rep.validation_audit->adequate;
            }
            rep.split_json = {{"train", st.train_idx},
                              {"test", st.test_idx},
                              {"validation", st.val_idx}};
        }

        // ---- box 3: surrogate training ------------------------------------
        if (boxes.at("model")) {
            stage = "3:model";
            st.enc = encode(st.ds);
            Matrix train_enc = st.rows_of(st.enc.values, st.train_idx);
            st.normalizer = Normalizer::fit(train_enc, cfg.normalize, &st.enc.provenance);
            Matrix norm_all = st.normalizer.apply(st.enc.values);
            if (cfg.pca_variance) {
                st.pca = fit_pca(st.rows_of(norm_all, st.train_idx), *cfg.pca_variance);
                st.features = pca_project(*st.pca, norm_all);
                rep.notes.push_back("PCA kept " + std::to_string(st.pca->k()) + " of " +
                                    std::to_string(st.pca->input_dims) + " encoded dimensions");
            } else {
                st.features = norm_all;
            }
            Matrix xtr = st.rows_of(st.features, st.train_idx);
            Matrix ytr = st.rows_of(st.ds.Y, st.train_idx);
            Matrix xte = st.rows_of(st.features, st.test_idx);
            Matrix yte = st.rows_of(st.ds.Y, st.test_idx);
            TrainingConfig mcfg = cfg.model;
            mcfg.seed = mix_seed(cfg.seed, 31);
            auto res = train(xtr, ytr, mcfg, &xte, &yte);
            st.model = std::move(res.model);
            rep.training_trace = res.trace;
            rep.model_parameters = st.model.parameter_count();
            if (res.relative_excluded > 0)
                rep.notes.push_back(std::to_string(res.relative_excluded) +
                                    " cells below the relative-loss guard were excluded");
            if (res.corr_skipped_batches > 0)
                rep.notes.push_back(std::to_string(res.corr_skipped_batches) +
                                    " batches skipped the correlation penalty (zero variance)");
            rep.model_checkpoint = model_to_json(st.model, mcfg);

            std::vector<long> ids(st.test_idx.begin(), st.test_idx.end());
            st.test_table = make_prediction_table(st.model, xte, yte, &ids);
            st.test_residues = residues(st.test_table);
        }

        // ---- box 4: point-wise metrics ------------------------------------
        if (boxes.at("pointwise")) {
            stage = "4:pointwise";
            rep.metrics = pointwise_metrics(st.test_table);
            rep.test_y = st.test_table.Y;
            rep.test_yhat = st.test_table.Yhat;
        }

        // ---- box 5: marginal residue analysis ------------------------------
        if (boxes.at("marginal")) {
            stage = "5:marginal";
            const auto families = detail::default_families();
            for (int j = 0; j < st.test_residues.m(); ++j) {
                auto e = st.test_residues.output(j);
                rep.marginal.push_back(marginal_analysis(
                    e, families, cfg.bootstrap_b, mix_seed(cfg.seed, 50 + j),
                    cfg.ad_replicates, cfg.jobs));
                try {
                    rep.outliers.push_back(detect_outliers(st.test_residues, j));
                } catch (const std::exception& ex) {
                    OutlierScan s;
                    s.method = std::string("skipped: ") + ex.what();
                    rep.outliers.push_back(s);
                }
            }
        }

        // ---- box 6: conditioning on the input space -----------------------
        if (boxes.at("input_conditioned")) {
            stage = "6:input_conditioned";
            for (int j = 0; j < st.test_residues.m(); ++j) {
                for (int c = 0; c < st.ds.n(); ++c) {
                    try {
                        if (st.ds.schema.features[static_cast<std::size_t>(c)].categorical())
                            rep.input_conditioned.push_back(
                                condition_on_categorical(st.test_residues, j, st.ds, c));
                        else
                            rep.input_conditioned.push_back(
                                condition_on_numeric(st.test_residues, j, st.ds, c, 5));
                    } catch (const std::invalid_argument& ex) {
                        rep.notes.push_back("box 6: column " + std::to_string(c) + " output " +
                                            std::to_string(j) + " skipped: " + ex.what());
                    }
                }
            }
            // one user-specified categorical pair (frame x stringer analogue)
            auto cats = st.ds.categorical_columns();
            int pa = -1, pb = -1;
            if (cfg.pair_columns) {
                for (int c = 0; c < st.ds.n(); ++c) {
                    const auto& nm = st.ds.schema.features[static_cast<std::size_t>(c)].name;
                    if (nm == cfg.pair_columns->first) pa = c;
                    if (nm == cfg.pair_columns->second) pb = c;
                }
            } else if (cats.size() >= 2) {
                pa = cats[0];
                pb = cats[1];
            }
            if (pa >= 0 && pb >= 0 && pa != pb)
                rep.pair_table = condition_on_pair(st.test_residues, st.ds, pa, pb);
        }

        // ---- box 7: conditioning on the output space ----------------------
        if (boxes.at("output_conditioned")) {
            stage = "7:output_conditioned";
            const auto families = detail::default_families();
            for (int j = 0; j < st.test_residues.m(); ++j) {
                auto e = st.test_residues.output(j);
                std::vector<double> cond =
                    cfg.condition_output_on_truth
                        ? to_vector(st.test_table.Y.col(j))
                        : to_vector(st.test_table.Yhat.col(j));
                rep.output_conditioned.push_back(condition_on_output(
                    e, cond, families, {BinSpec::Mode::equal_count, cfg.bins, 30}));
            }
        }

        // ---- box 8: permutation feature importance ------------------------
        if (boxes.at("xai")) {
            stage = "8:xai";
            EncodedMatrix test_enc{st.rows_of(st.enc.values, st.test_idx), st.enc.provenance,
                                   st.enc.source_count};
            auto predict_fn = [&](const Matrix& raw_encoded) {
                Matrix f = st.normalizer.apply(raw_encoded);
                if (st.pca) f = pca_project(*st.pca, f);
                return st.model.predict(f);
            };
            rep.pfi = permutation_importance(predict_fn, test_enc,
                                             st.rows_of(st.ds.Y, st.test_idx), cfg.pfi_repeats,
                                             mix_seed(cfg.seed, 81), cfg.jobs);
        }

        // ---- box 9: boosting diagnostics ----------------------------------
        if (boxes.at("boosting")) {
            stage = "9:boosting";
            Matrix xtr = st.rows_of(st.features, st.train_idx);
            Matrix ytr = st.rows_of(st.ds.Y, st.train_idx);
            Matrix xte = st.rows_of(st.features, st.test_idx);
            Matrix yte = st.rows_of(st.ds.Y, st.test_idx);
            std::vector<int> sizes = cfg.curve_sizes;
            if (sizes.empty()) {
                const int n = static_cast<int>(xtr.rows());
                for (int div : {16, 8, 4, 2, 1}) {
                    const int s = std::max(64, n / div);
                    if (sizes.empty() || s > sizes.back()) sizes.push_back(s);
                }
            }
            if (sizes.size() >= 3) {
                rep.curve = learning_curves(xtr, ytr, xte, yte, cfg.model, sizes,
                                            cfg.curve_seeds, mix_seed(cfg.seed, 91), cfg.jobs);
                rep.regime = diagnose_regime(*rep.curve, 0.05, 0.20, cfg.low_error_tol);
            } else {
                rep.notes.push_back("box 9: too few usable curve sizes, learning curves skipped");
            }

            // applicability domains on the training data
            ApplicabilityStats app;
            const auto num_cols = st.ds.numeric_columns();
            Matrix train_raw(static_cast<Index>(st.train_idx.size()),
                             static_cast<Index>(num_cols.size()));
            Matrix test_raw(static_cast<Index>(st.test_idx.size()),
                            static_cast<Index>(num_cols.size()));
            for (std::size_t c = 0; c < num_cols.size(); ++c) {
                for (std::size_t i = 0; i < st.train_idx.size(); ++i)
                    train_raw(static_cast<Index>(i), static_cast<Index>(c)) =
                        st.ds.X(st.train_idx[i], num_cols[c]);
                for (std::size_t i = 0; i < st.test_idx.size(); ++i)
                    test_raw(static_cast<Index>(i), static_cast<Index>(c)) =
                        st.ds.X(st.test_idx[i], num_cols[c]);
            }
            app.row_ids.assign(st.test_idx.begin(), st.test_idx.end());
            app.in_hypercube.assign(st.test_idx.size(), 1);
            app.in_hull.assign(st.test_idx.size(), -1);  // -1: beyond the query cap
            if (train_raw.cols() > 0) {
                auto cube = fit_hypercube(train_raw);
                Index inside = 0;
                for (Index i = 0; i < test_raw.rows(); ++i) {
                    const bool in = hypercube_contains(cube, test_raw.row(i).transpose());
                    app.in_hypercube[static_cast<std::size_t>(i)] = in ? 1 : 0;
                    inside += in;
                }
                app.hypercube_inside =
                    static_cast<double>(inside) / static_cast<double>(test_raw.rows());
            }
            {
                Matrix train_f = st.rows_of(st.features, st.train_idx);
                if (train_f.rows() > cfg.hull_train_cap) {
                    auto rng = make_rng(cfg.seed, 92);
                    std::vector<Index> ridx(static_cast<std::size_t>(train_f.rows()));
                    std::iota(ridx.begin(), ridx.end(), Index{0});
                    std::shuffle(ridx.begin(), ridx.end(), rng);
                    ridx.resize(static_cast<std::size_t>(cfg.hull_train_cap));
                    Matrix sub(cfg.hull_train_cap, train_f.cols());
                    for (Index i = 0; i < cfg.hull_train_cap; ++i)
                        sub.row(i) = train_f.row(ridx[static_cast<std::size_t>(i)]);
                    train_f = std::move(sub);
                    rep.notes.push_back(
                        "box 9: hull fitted on a training subsample (conservative)");
                }
                auto hull = fit_hull(train_f);
                Matrix test_f = st.rows_of(st.features, st.test_idx);
                const Index nq = std::min<Index>(cfg.hull_query_cap, test_f.rows());
                Index inside = 0;
                int failures = 0;
                std::vector<int> results(static_cast<std::size_t>(nq), 0);
                parallel_for(static_cast<std::size_t>(nq), cfg.jobs, [&](std::size_t i) {
                    try {
                        results[i] = hull_contains(hull, test_f.row(static_cast<Index>(i))
                                                             .transpose())
                                         ? 1 : 0;
                    } catch (const std::runtime_error&) {
                        results[i] = -2;
                    }
                });
                for (std::size_t i = 0; i < results.size(); ++i) {
                    app.in_hull[i] = results[i];
                    if (results[i] == 1) ++inside;
                    else if (results[i] == -2) ++failures;
                }
                app.hull_queries = nq;
                app.hull_failures = failures;
                app.hull_inside = nq > 0 ? static_cast<double>(inside) /
                                               static_cast<double>(nq) : 0.0;
            }
            rep.applicability = app;

            // recommendations: emitted for the human-in-the-loop cycle
            if (rep.split_audit && !rep.split_audit->flagged_voxels.empty()) {
                std::string msg = "augment training data in under-represented voxels:";
                int shown = 0;
                for (const auto& v : rep.split_audit->flagged_voxels) {
                    if (shown++ == 8) { msg += " ..."; break; }
                    msg += " " + v;
                }
                rep.recommendations.push_back(msg);
            }
            if (rep.regime) {
                switch (rep.regime->regime) {
                    case Regime::needs_more_data:
                        rep.recommendations.push_back(
                            "test error still improving with size: extend the training set "
                            "(or augment flagged voxels)");
                        break;
                    case Regime::high_variance_plateau:
                        rep.recommendations.push_back(
                            "high variance: increase lambda, reduce capacity, or drop "
                            "low-importance features");
                        break;
                    case Regime::high_bias_plateau:
                        rep.recommendations.push_back(
                            "high bias: increase capacity or reduce lambda");
                        break;
                    case Regime::converged:
                        break;
                }
            }
            if (rep.pfi) {
                const double top = rep.pfi->entries.front().delta;
                std::string drop;
                for (const auto& e : rep.pfi->entries)
                    if (e.delta <= 0.01 * std::max(top, 1e-12)) drop += " " + e.name;
                if (!drop.empty())
                    rep.recommendations.push_back("candidate features to drop (PFI ~ 0):" + drop);
            }
            if (cfg.model.reg == RegKind::l1) {
                EncodedMatrix prov{Matrix(), st.enc.provenance, st.enc.source_count};
                if (!st.pca) {
                    auto discard = l1_feature_selection(st.model, 1e-3, &prov);
                    if (!discard.empty()) {
                        std::string msg = "L1 first-layer weights mark features discardable:";
                        for (int f : discard)
                            msg += " " +
                                   st.ds.schema.features[static_cast<std::size_t>(f)].name;
                        rep.recommendations.push_back(msg);
                    }
                }
            }
            if (!rep.output_conditioned.empty()) {
                for (std::size_t j = 0; j < rep.output_conditioned.size(); ++j) {
                    double lo = 1e300, hi = 0.0;
                    for (const auto& b : rep.output_conditioned[j].bins) {
                        if (b.count < 2) continue;
                        lo = std::min(lo, b.residue_std);
                        hi = std::max(hi, b.residue_std);
                    }
                    if (hi > 2.0 * lo && lo < 1e299) {
                        rep.recommendations.push_back(
                            "output " + std::to_string(j + 1) +
                            " residues are heteroscedastic (per-bin std ratio > 2): prefer "
                            "oMUM/FUM intervals; consider the relative-error loss");
                        break;
                    }
                }
            }
            if (st.ds.m() >= 2 && cfg.model.gamma == 0.0 && st.test_table.rows() >= 3) {
                try {
                    const double gap = correlation_penalty(st.test_table.Y, st.test_table.Yhat);
                    if (gap > 0.25)
                        rep.recommendations.push_back(
                            "output correlation structure drifts (Frobenius gap " +
                            std::to_string(gap) + "): consider the correlation regularizer "
                            "gamma > 0");
                } catch (const std::invalid_argument&) {
                }
            }
        }

        // ---- box 10: uncertainty models + coverage -------------------------
        if (boxes.at("uncertainty")) {
            stage = "10:uncertainty";
            require(!st.val_idx.empty(), "uncertainty: three-way split missing");
            Matrix xval = st.rows_of(st.features, st.val_idx);
            Matrix yval = st.rows_of(st.ds.Y, st.val_idx);
            Matrix yhat_val = st.model.predict(xval);

            // iMUM features: top-k PFI-ranked numeric features (fallback: first k)
            std::vector<int> imum_feats;
            const auto num_cols = st.ds.numeric_columns();
            if (rep.pfi) {
                for (const auto& e : rep.pfi->entries) {
                    if (static_cast<int>(imum_feats.size()) >= cfg.imum_top_k) break;
                    if (!st.ds.schema.features[static_cast<std::size_t>(e.feature)].categorical())
                        imum_feats.push_back(e.feature);
                }
            } else {
                for (int c : num_cols) {
                    if (static_cast<int>(imum_feats.size()) >= cfg.imum_top_k) break;
                    imum_feats.push_back(c);
                }
            }

            for (int j = 0; j < st.ds.m(); ++j) {
                UncertaintyResult ur;
                ur.output = j;
                ur.name = st.ds.schema.outputs[static_cast<std::size_t>(j)].name;
                auto e_cal = st.test_residues.output(j);
                auto yhat_cal = to_vector(st.test_table.Yhat.col(j));
                ur.calibration_hash = hash_doubles(e_cal);
                const auto useed = mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(j));

                ur.gum = build_gum(e_cal, cfg.bootstrap_b, mix_seed(useed, 1), 0.95, false,
                                   cfg.jobs);
                std::vector<double> yv = to_vector(yval.col(j));
                std::vector<double> yhv = to_vector(yhat_val.col(j));
                ur.gum_coverage = validate_coverage(ur.gum, yv, yhv, cfg.bootstrap_b,
                                                    mix_seed(useed, 2), cfg.jobs);
                rep.verdicts["coverage_gum_" + ur.name] = ur.gum_coverage.pass;

                std::vector<double> cond_cal = cfg.condition_output_on_truth
                                                   ? to_vector(st.test_table.Y.col(j))
                                                   : yhat_cal;
                std::vector<double> cond_val =
                    cfg.condition_output_on_truth ? yv : yhv;
                ur.omum = build_mum(e_cal, cond_cal, ConditionalIntervalModel::Kind::output,
                                    cfg.condition_output_on_truth ? "y" : "yhat", cfg.bins, 50,
                                    cfg.bootstrap_b, mix_seed(useed, 3), 0.95, false, cfg.jobs);
                ur.omum_coverage = validate_coverage(*ur.omum, cond_val, yv, yhv,
                                                     cfg.bootstrap_b, mix_seed(useed, 4),
                                                     cfg.jobs);
                rep.verdicts["coverage_omum_" + ur.name] = ur.omum_coverage->pass;

                for (int f : imum_feats) {
                    std::vector<double> cond(st.test_idx.size());
                    for (std::size_t i = 0; i < st.test_idx.size(); ++i)
                        cond[i] = st.ds.X(st.test_idx[i], f);
                    auto im = build_mum(
                        e_cal, cond, ConditionalIntervalModel::Kind::input,
                        st.ds.schema.features[static_cast<std::size_t>(f)].name, cfg.bins, 50,
                        cfg.bootstrap_b, mix_seed(useed, 10 + static_cast<std::uint64_t>(f)),
                        0.95, false, cfg.jobs);
                    im.feature_column = f;
                    ur.imums.push_back(std::move(im));
                }

                FullUncertaintyModel fum;
                fum.gum = ur.gum;
                fum.omum = ur.omum;
                fum.imums = ur.imums;
                Index fallbacks = 0;
                auto fum_of = [&](Index i) {
                    Vector xrow = st.ds.X.row(st.val_idx[static_cast<std::size_t>(i)]);
                    auto fi = fum_interval(fum, yhv[static_cast<std::size_t>(i)], &xrow);
                    if (fi.fell_back) ++fallbacks;
                    return fi.interval;
                };
                ur.fum_coverage = validate_coverage(fum_of, yv, yhv, cfg.bootstrap_b,
                                                    mix_seed(useed, 5), 0.95, cfg.jobs);
                ur.fum_fallbacks = fallbacks;
                ur.fum_note =
                    "intersection narrows the interval, so FUM coverage is bounded by the "
                    "smallest component coverage; reported for diagnosis, not gated";
                rep.uncertainty.push_back(std::move(ur));
            }
        }
    } catch (const std::exception& ex) {
        rep.failed_stage = stage;
        rep.failure_reason = ex.what();
        if (!cfg.out_dir.empty()) {
            try {
                emit_reports(rep, cfg.out_dir, cfg.formats);
            } catch (...) {
            }
        }
        throw std::runtime_error("pipeline halted at box " + stage + ": " + ex.what());
    }
    return rep;
}

}  // namespace modval
