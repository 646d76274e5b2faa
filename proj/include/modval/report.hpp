#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "modval/boosting.hpp"
#include "modval/errors.hpp"
#include "modval/splitting.hpp"
#include "modval/stats.hpp"
#include "modval/surrogate.hpp"
#include "modval/uncertainty.hpp"
#include "modval/xai.hpp"

namespace modval {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON serialization of analysis results
// ---------------------------------------------------------------------------

inline json to_json(const stats::TestResult& t) {
    return {{"statistic", t.statistic}, {"pvalue", t.pvalue}, {"test", t.name},
            {"df1", t.df1}, {"df2", t.df2}};
}

inline json to_json(const stats::DistributionFit& f) {
    json params;
    switch (f.family) {
        case stats::Family::normal: params = {{"mu", f.params[0]}, {"sigma", f.params[1]}}; break;
        case stats::Family::laplace:
        case stats::Family::cauchy:
            params = {{"loc", f.params[0]}, {"scale", f.params[1]}};
            break;
        case stats::Family::johnson_su:
            params = {{"gamma", f.params[0]}, {"delta", f.params[1]}, {"xi", f.params[2]},
                      {"lambda", f.params[3]}};
            break;
    }
    return {{"family", stats::family_name(f.family)}, {"params", params}, {"method", f.method}};
}

inline json to_json(const stats::BootstrapResult& b) {
    return {{"point_estimate", b.point_estimate}, {"bootstrap_mean", b.bootstrap_mean},
            {"ci95", {b.ci_lo, b.ci_hi}}, {"replicates", b.replicates},
            {"statistic", b.statistic}};
}

inline json to_json(const FamilyFit& ff) {
    json j{{"family", stats::family_name(ff.family)}, {"ok", ff.ok}};
    if (ff.ok) {
        j["fit"] = to_json(ff.fit);
        j["ks"] = to_json(ff.ks);
        if (ff.ad.name == "ad") j["ad"] = to_json(ff.ad);
    } else {
        j["error"] = ff.error;
    }
    return j;
}

inline json to_json(const MarginalAnalysis& ma) {
    json fits = json::array();
    for (const auto& f : ma.fits) fits.push_back(to_json(f));
    json pct = json::object();
    for (const auto& [p, b] : ma.percentiles) {
        char key[16];
        std::snprintf(key, sizeof key, "p%g", p * 100.0);
        pct[key] = to_json(b);
    }
    return {{"fits", fits}, {"percentiles", pct}};
}

inline json to_json(const MetricsSummary& ms) {
    json arr = json::array();
    for (const auto& om : ms.per_output) {
        json j{{"mse", om.mse}, {"mae", om.mae}, {"mean_residue", om.mean_residue},
               {"residue_std", om.residue_std}};
        if (om.r2) j["r2"] = *om.r2;
        else j["r2"] = nullptr;
        arr.push_back(j);
    }
    return {{"per_output", arr}};
}

inline json to_json(const VtpmReport& v) {
    json occ = json::array();
    for (const auto& o : v.occupancy)
        occ.push_back({{"voxel", o.name}, {"train", o.train_count}, {"test", o.test_count}});
    return {{"valid_fraction", v.valid_fraction},
            {"isolated_fraction", v.isolated_fraction},
            {"phacking_fraction", v.phacking_fraction},
            {"residual_fraction", v.residual_fraction},
            {"chi2", to_json(v.chi2)},
            {"chi2_ok", v.chi2_ok},
            {"adequate", v.adequate},
            {"voxel_count", v.voxel_count},
            {"flagged_voxels", v.flagged_voxels},
            {"occupancy", occ}};
}

inline json to_json(const GroupSummary& g) {
    return {{"label", g.label}, {"count", g.count}, {"mean", g.mean}, {"stddev", g.stddev},
            {"min", g.min},     {"q1", g.q1},       {"median", g.median}, {"q3", g.q3},
            {"max", g.max}};
}

inline json to_json(const ConditionedReport& c) {
    json groups = json::array();
    for (const auto& g : c.groups) groups.push_back(to_json(g));
    json j{{"variable", c.variable},
           {"mode", c.mode == ConditionedReport::Mode::categorical ? "categorical" : "numeric-binned"},
           {"groups", groups},
           {"anova", to_json(c.anova)},
           {"levene", to_json(c.levene)}};
    if (c.pearson) j["pearson"] = to_json(*c.pearson);
    if (c.spearman) j["spearman"] = to_json(*c.spearman);
    if (!c.bin_edges.empty()) j["bin_edges"] = c.bin_edges;
    return j;
}

inline json to_json(const BinFitTable& t) {
    json bins = json::array();
    for (const auto& b : t.bins) {
        json fits = json::array();
        for (const auto& f : b.fits) fits.push_back(to_json(f));
        bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count},
                        {"residue_std", b.residue_std}, {"fits", fits}});
    }
    return {{"edges", t.edges}, {"bins", bins}};
}

inline json to_json(const PfiRanking& p) {
    json arr = json::array();
    for (const auto& e : p.entries)
        arr.push_back({{"rank", e.rank}, {"feature", e.feature}, {"name", e.name},
                       {"baseline_mse", e.baseline_mse}, {"permuted_mse", e.permuted_mse},
                       {"delta", e.delta}});
    return {{"baseline_mse", p.baseline_mse}, {"repeats", p.repeats}, {"seed", p.seed},
            {"entries", arr}};
}

inline json to_json(const LearningCurve& c) {
    json pts = json::array();
    for (const auto& p : c.points)
        pts.push_back({{"size", p.size}, {"train_error", p.train_error},
                       {"test_error", p.test_error}});
    return {{"metric", c.metric}, {"seeds_per_size", c.seeds_per_size}, {"points", pts}};
}

inline json to_json(const RegimeDiagnosis& d) {
    return {{"regime", regime_name(d.regime)},
            {"train_plateaued", d.train_plateaued},
            {"test_plateaued", d.test_plateaued},
            {"gap", d.gap},
            {"final_train", d.final_train},
            {"final_test", d.final_test},
            {"thresholds",
             {{"plateau_tol", d.plateau_tol}, {"gap_tol", d.gap_tol},
              {"low_error_tol", d.low_error_tol}}}};
}

inline json to_json(const PredictionInterval& iv) {
    return {{"eps_lo", iv.eps_lo}, {"eps_hi", iv.eps_hi}, {"level", iv.level},
            {"conservative", iv.conservative}, {"clamped", iv.clamped}};
}

inline json to_json(const ConditionalIntervalModel& m) {
    json bins = json::array();
    for (std::size_t b = 0; b < m.per_bin.size(); ++b)
        bins.push_back({{"lo", m.edges[b]}, {"hi", m.edges[b + 1]},
                        {"interval", to_json(m.per_bin[b])}});
    return {{"kind", m.kind == ConditionalIntervalModel::Kind::input ? "iMUM" : "oMUM"},
            {"variable", m.variable},
            {"feature_column", m.feature_column},
            {"degenerate_fallback", m.degenerate_fallback},
            {"fallback", to_json(m.fallback)},
            {"bins", bins}};
}

inline json to_json(const CoverageReport& c) {
    json j{{"coverage", c.coverage}, {"ci95", {c.ci_lo, c.ci_hi}}, {"pass", c.pass},
           {"n", c.n}};
    if (!c.per_bin.empty()) {
        json bins = json::array();
        for (const auto& b : c.per_bin)
            bins.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count},
                            {"coverage", b.coverage}});
        j["per_bin"] = bins;
    }
    return j;
}

inline json to_json(const DatasetFingerprint& fp) {
    auto cols = [](const std::vector<ColumnMoments>& v) {
        json arr = json::array();
        for (const auto& c : v)
            arr.push_back({{"name", c.name}, {"mean", c.mean}, {"stddev", c.stddev},
                           {"min", c.min}, {"max", c.max}});
        return arr;
    };
    return {{"rows", fp.rows}, {"features", cols(fp.features)}, {"outputs", cols(fp.outputs)}};
}

inline json to_json(const OutlierScan& s) {
    return {{"flagged_ids", s.flagged_ids}, {"method", s.method},
            {"johnson_normalized", s.johnson_normalized}};
}

inline json to_json(const PairConditionReport& p) {
    json cells = json::array();
    for (Index a = 0; a < p.worst_output.rows(); ++a)
        for (Index b = 0; b < p.worst_output.cols(); ++b) {
            if (p.worst_output(a, b) < 0) continue;
            cells.push_back({{"a", p.a_levels[static_cast<std::size_t>(a)]},
                             {"b", p.b_levels[static_cast<std::size_t>(b)]},
                             {"worst_output", p.worst_output(a, b)},
                             {"value", p.metric_value(a, b)}});
        }
    const char* metric = p.metric == PairMetric::max_abs
                             ? "max_abs"
                             : (p.metric == PairMetric::mean_abs ? "mean_abs" : "max_relative");
    return {{"var_a", p.var_a}, {"var_b", p.var_b}, {"metric", metric}, {"cells", cells}};
}

struct ApplicabilityStats {
    double hypercube_inside = 0.0;
    double hull_inside = 0.0;
    Index hull_queries = 0;
    int hull_failures = 0;   // LP iteration-limit errors (reported, not guessed)
    // per-row verdicts for the audited rows; hull entries: 1 inside, 0 outside,
    // -1 not queried (beyond the query cap), -2 LP failure
    std::vector<long> row_ids;
    std::vector<int> in_hypercube;
    std::vector<int> in_hull;
};

inline json to_json(const ApplicabilityStats& a) {
    return {{"hypercube_inside_fraction", a.hypercube_inside},
            {"hull_inside_fraction", a.hull_inside},
            {"hull_queries", a.hull_queries},
            {"hull_failures", a.hull_failures}};
}

struct UncertaintyResult {
    int output = 0;
    std::string name;
    std::uint64_t calibration_hash = 0;  // provenance of the calibration residues
    PredictionInterval gum;
    CoverageReport gum_coverage;
    std::optional<ConditionalIntervalModel> omum;
    std::optional<CoverageReport> omum_coverage;
    std::vector<ConditionalIntervalModel> imums;
    std::optional<CoverageReport> fum_coverage;
    Index fum_fallbacks = 0;
    std::string fum_note;
};

inline json to_json(const UncertaintyResult& u) {
    json j{{"output", u.output},
           {"name", u.name},
           {"calibration_hash", u.calibration_hash},
           {"gum", to_json(u.gum)},
           {"gum_coverage", to_json(u.gum_coverage)}};
    if (u.omum) j["omum"] = to_json(*u.omum);
    if (u.omum_coverage) j["omum_coverage"] = to_json(*u.omum_coverage);
    json ims = json::array();
    for (const auto& im : u.imums) ims.push_back(to_json(im));
    j["imums"] = ims;
    if (u.fum_coverage) j["fum_coverage"] = to_json(*u.fum_coverage);
    j["fum_fallbacks"] = u.fum_fallbacks;
    if (!u.fum_note.empty()) j["fum_note"] = u.fum_note;
    return j;
}

// ---------------------------------------------------------------------------
// Pipeline report
// ---------------------------------------------------------------------------

struct PipelineReport {
    std::string generated_at;  // the only field that varies between identical runs
    std::uint64_t seed = 0;
    json config_echo;
    std::map<std::string, bool> boxes_enabled;
    std::vector<std::string> notes;
    std::map<std::string, bool> verdicts;

    std::optional<DatasetFingerprint> data_fingerprint;   // box 1
    Index rows_loaded = 0, rows_after_augment = 0;
    std::optional<VtpmReport> split_audit;                // box 2
    std::optional<VtpmReport> validation_audit;
    Index n_train = 0, n_test = 0, n_validation = 0;
    std::vector<EpochPoint> training_trace;               // box 3
    std::size_t model_parameters = 0;
    std::optional<MetricsSummary> metrics;                // box 4
    Matrix test_y, test_yhat;                             // scatter source data
    std::vector<MarginalAnalysis> marginal;               // box 5, per output
    std::vector<OutlierScan> outliers;
    std::vector<ConditionedReport> input_conditioned;     // box 6
    std::optional<PairConditionReport> pair_table;
    std::vector<BinFitTable> output_conditioned;          // box 7, per output
    std::optional<PfiRanking> pfi;                        // box 8
    std::optional<LearningCurve> curve;                   // box 9
    std::optional<RegimeDiagnosis> regime;
    std::optional<ApplicabilityStats> applicability;
    std::vector<std::string> recommendations;
    std::vector<UncertaintyResult> uncertainty;           // box 10, per output

    json split_json;        // full index lists, written as split.json
    json model_checkpoint;  // written as model.json

    std::string failed_stage;   // non-empty for partial reports
    std::string failure_reason;
};

inline json to_json(const PipelineReport& r) {
    json j;
    j["generated_at"] = r.generated_at;
    j["seed"] = r.seed;
    j["config"] = r.config_echo;
    j["boxes_enabled"] = r.boxes_enabled;
    j["notes"] = r.notes;
    j["verdicts"] = r.verdicts;
    if (!r.failed_stage.empty()) {
        j["failed_stage"] = r.failed_stage;
        j["failure_reason"] = r.failure_reason;
    }
    json boxes;
    if (r.data_fingerprint)
        boxes["1_data"] = {{"fingerprint", to_json(*r.data_fingerprint)},
                           {"rows_loaded", r.rows_loaded},
                           {"rows_after_augment", r.rows_after_augment}};
    if (r.split_audit) {
        boxes["2_split_audit"] = {{"vtpm", to_json(*r.split_audit)},
                                  {"n_train", r.n_train},
                                  {"n_test", r.n_test},
                                  {"n_validation", r.n_validation}};
        if (r.validation_audit)
            boxes["2_split_audit"]["validation_vtpm"] = to_json(*r.validation_audit);
    }
    if (!r.training_trace.empty()) {
        json pts = json::array();
        for (const auto& p : r.training_trace) {
            json pj{{"epoch", p.epoch}, {"train_error", p.train_error}};
            if (std::isfinite(p.eval_error)) pj["test_error"] = p.eval_error;
            pts.push_back(pj);
        }
        boxes["3_model"] = {{"trace", pts}, {"parameters", r.model_parameters}};
    }
    if (r.metrics) boxes["4_pointwise"] = to_json(*r.metrics);
    if (!r.marginal.empty()) {
        json arr = json::array();
        for (const auto& m : r.marginal) arr.push_back(to_json(m));
        json outl = json::array();
        for (const auto& o : r.outliers) outl.push_back(to_json(o));
        boxes["5_marginal"] = {{"per_output", arr}, {"outliers", outl}};
    }
    if (!r.input_conditioned.empty()) {
        json arr = json::array();
        for (const auto& c : r.input_conditioned) arr.push_back(to_json(c));
        boxes["6_input_conditioned"] = {{"reports", arr}};
        if (r.pair_table) boxes["6_input_conditioned"]["pair_table"] = to_json(*r.pair_table);
    }
    if (!r.output_conditioned.empty()) {
        json arr = json::array();
        for (const auto& t : r.output_conditioned) arr.push_back(to_json(t));
        boxes["7_output_conditioned"] = {{"per_output", arr}};
    }
    if (r.pfi) boxes["8_xai"] = to_json(*r.pfi);
    if (r.curve || r.applicability) {
        json b9;
        if (r.curve) b9["learning_curve"] = to_json(*r.curve);
        if (r.regime) b9["regime"] = to_json(*r.regime);
        if (r.applicability) b9["applicability"] = to_json(*r.applicability);
        b9["recommendations"] = r.recommendations;
        boxes["9_boosting"] = b9;
    }
    if (!r.uncertainty.empty()) {
        json arr = json::array();
        for (const auto& u : r.uncertainty) arr.push_back(to_json(u));
        boxes["10_uncertainty"] = {{"per_output", arr}};
    }
    j["boxes"] = boxes;
    return j;
}

// ---------------------------------------------------------------------------
// Minimal SVG renderings (figure analogues)
// ---------------------------------------------------------------------------

namespace svg {

struct Series {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<std::pair<double, double>> xy;
};

inline void write_chart(const std::string& path, const std::string& title,
                        const std::vector<Series>& series, bool bars = false) {
    const double w = 720, h = 440, ml = 70, mr = 20, mt = 40, mb = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (auto [x, y] : s.xy) {
            xmin = std::min(xmin, x); xmax = std::max(xmax, x);
            ymin = std::min(ymin, y); ymax = std::max(ymax, y);
        }
    if (!(xmax > xmin)) { xmax = xmin + 1; }
    if (!(ymax > ymin)) { ymax = ymin + 1; }
    ymin = std::min(ymin, 0.0);
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };
    std::ofstream out(path);
    if (!out) throw std::runtime_error("svg: cannot write " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << w / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
        << "</text>\n";
    out << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
        << "' stroke='black'/>\n";
    out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
        << "' stroke='black'/>\n";
    char buf[64];
    for (int i = 0; i <= 4; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        std::snprintf(buf, sizeof buf, "%.3g", xv);
        out << "<text x='" << px(xv) << "' y='" << h - mb + 18
            << "' text-anchor='middle' font-size='11'>" << buf << "</text>\n";
        std::snprintf(buf, sizeof buf, "%.3g", yv);
        out << "<text x='" << ml - 8 << "' y='" << py(yv) + 4
            << "' text-anchor='end' font-size='11'>" << buf << "</text>\n";
    }
    double legend_y = mt;
    for (const auto& s : series) {
        if (bars) {
            const double bw = (w - ml - mr) / std::max<std::size_t>(1, s.xy.size()) * 0.8;
            for (auto [x, y] : s.xy)
                out << "<rect x='" << px(x) - bw / 2 << "' y='" << py(y) << "' width='" << bw
                    << "' height='" << (py(ymin) - py(y)) << "' fill='" << s.color
                    << "' opacity='0.8'/>\n";
        } else {
            out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.6' points='";
            for (auto [x, y] : s.xy) out << px(x) << "," << py(y) << " ";
            out << "'/>\n";
        }
        out << "<text x='" << w - mr - 150 << "' y='" << legend_y << "' font-size='12' fill='"
            << s.color << "'>" << s.label << "</text>\n";
        legend_y += 16;
    }
    out << "</svg>\n";
}

}  // namespace svg

// ---------------------------------------------------------------------------
// Artifact emission: JSON report, per-figure CSVs, optional SVGs, manifest
// ---------------------------------------------------------------------------

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("emit_reports: cannot write " + p.string());
    out << text;
}

}  // namespace detail

// Writes every artifact for the enabled boxes and returns the manifest file
// list. An existing manifest.json is versioned to manifest.<k>.json first.
inline std::vector<std::string> emit_reports(const PipelineReport& report,
                                             const std::string& out_dir,
                                             const std::vector<std::string>& formats = {"json",
                                                                                        "csv"}) {
    namespace fs = std::filesystem;
    fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("emit_reports: cannot create " + out_dir);
    const bool want_json = std::count(formats.begin(), formats.end(), "json") > 0;
    const bool want_csv = std::count(formats.begin(), formats.end(), "csv") > 0;
    const bool want_svg = std::count(formats.begin(), formats.end(), "svg") > 0;
    std::vector<std::string> files;

    auto add_csv = [&](const std::string& name, const std::vector<std::vector<std::string>>& rows) {
        std::ofstream out(dir / name);
        if (!out) throw std::runtime_error("emit_reports: cannot write " + name);
        for (const auto& r : rows) csv::write_row(out, r);
        files.push_back(name);
    };
    auto fd = [](double v) { return csv::format_double(v); };

    if (want_json) {
        detail::write_text(dir / "report.json", to_json(report).dump(2) + "\n");
        files.push_back("report.json");
        if (!report.split_json.is_null()) {
            detail::write_text(dir / "split.json", report.split_json.dump(2) + "\n");
            files.push_back("split.json");
        }
        if (!report.model_checkpoint.is_null()) {
            detail::write_text(dir / "model.json", report.model_checkpoint.dump(2) + "\n");
            files.push_back("model.json");
        }
    }

    if (want_csv) {
        if (report.split_audit) {
            std::vector<std::vector<std::string>> rows{{"voxel", "train_count", "test_count"}};
            for (const auto& o : report.split_audit->occupancy)
                rows.push_back({o.name, std::to_string(o.train_count),
                                std::to_string(o.test_count)});
            add_csv("voxel_occupancy.csv", rows);
        }
        if (!report.training_trace.empty()) {
            std::vector<std::vector<std::string>> rows{{"epoch", "train_error", "test_error"}};
            for (const auto& p : report.training_trace)
                rows.push_back({std::to_string(p.epoch), fd(p.train_error),
                                std::isfinite(p.eval_error) ? fd(p.eval_error) : ""});
            add_csv("epochs_trace.csv", rows);
        }
        if (report.test_y.size() > 0) {
            for (Index j = 0; j < report.test_y.cols(); ++j) {
                std::vector<std::vector<std::string>> rows{{"y", "yhat", "residue"}};
                for (Index i = 0; i < report.test_y.rows(); ++i)
                    rows.push_back({fd(report.test_y(i, j)), fd(report.test_yhat(i, j)),
                                    fd(report.test_y(i, j) - report.test_yhat(i, j))});
                add_csv("scatter_output" + std::to_string(j + 1) + ".csv", rows);
            }
        }
        if (!report.marginal.empty() && report.test_y.size() > 0) {
            // residue histogram + fitted pdf curves per output
            for (std::size_t j = 0; j < report.marginal.size(); ++j) {
                Vector e = report.test_y.col(static_cast<Index>(j)) -
                           report.test_yhat.col(static_cast<Index>(j));
                const double lo = e.minCoeff(), hi = e.maxCoeff();
                const int nb = 60;
                std::vector<double> counts(nb, 0.0);
                for (Index i = 0; i < e.size(); ++i) {
                    int b = hi > lo ? static_cast<int>((e(i) - lo) / (hi - lo) * nb) : 0;
                    counts[static_cast<std::size_t>(std::clamp(b, 0, nb - 1))] += 1.0;
                }
                const double width = (hi - lo) / nb;
                std::vector<std::string> head{"bin_center", "density"};
                for (const auto& f : report.marginal[j].fits)
                    if (f.ok) head.push_back("pdf_" + stats::family_name(f.family));
                std::vector<std::vector<std::string>> rows{head};
                for (int b = 0; b < nb; ++b) {
                    const double center = lo + (b + 0.5) * width;
                    std::vector<std::string> row{
                        fd(center),
                        fd(counts[static_cast<std::size_t>(b)] /
                           (static_cast<double>(e.size()) * std::max(width, 1e-300)))};
                    for (const auto& f : report.marginal[j].fits)
                        if (f.ok) row.push_back(fd(f.fit.pdf(center)));
                    rows.push_back(row);
                }
                add_csv("residue_hist_output" + std::to_string(j + 1) + ".csv", rows);
            }
        }
        if (!report.input_conditioned.empty()) {
            std::vector<std::vector<std::string>> rows{
                {"variable", "output", "group", "count", "mean", "stddev", "min", "q1", "median",
                 "q3", "max"}};
            int k = 0;
            for (const auto& rep : report.input_conditioned) {
                for (const auto& g : rep.groups)
                    rows.push_back({rep.variable, std::to_string(k % 1000), g.label,
                                    std::to_string(g.count), fd(g.mean), fd(g.stddev), fd(g.min),
                                    fd(g.q1), fd(g.median), fd(g.q3), fd(g.max)});
                ++k;
            }
            add_csv("conditioned_boxplots.csv", rows);
        }
        if (!report.output_conditioned.empty()) {
            std::vector<std::vector<std::string>> rows{
                {"output", "bin_lo", "bin_hi", "count", "residue_std", "family", "ks_pvalue"}};
            for (std::size_t j = 0; j < report.output_conditioned.size(); ++j)
                for (const auto& b : report.output_conditioned[j].bins)
                    for (const auto& f : b.fits)
                        rows.push_back({std::to_string(j + 1), fd(b.lo), fd(b.hi),
                                        std::to_string(b.count), fd(b.residue_std),
                                        stats::family_name(f.family),
                                        f.ok ? fd(f.ks.pvalue) : "nan"});
            add_csv("bin_fit_table.csv", rows);
        }
        if (report.pfi) {
            std::vector<std::vector<std::string>> rows{
                {"rank", "feature", "name", "baseline_mse", "permuted_mse", "delta"}};
            for (const auto& e : report.pfi->entries)
                rows.push_back({std::to_string(e.rank), std::to_string(e.feature), e.name,
                                fd(e.baseline_mse), fd(e.permuted_mse), fd(e.delta)});
            add_csv("pfi.csv", rows);
        }
        if (report.curve) {
            std::vector<std::vector<std::string>> rows{{"size", "train_error", "test_error"}};
            for (const auto& p : report.curve->points)
                rows.push_back({std::to_string(p.size), fd(p.train_error), fd(p.test_error)});
            add_csv("learning_curve.csv", rows);
        }
        if (report.applicability && !report.applicability->row_ids.empty()) {
            const auto& a = *report.applicability;
            std::vector<std::vector<std::string>> rows{{"row_id", "in_hypercube", "in_hull"}};
            auto hull_str = [](int v) -> std::string {
                if (v == 1) return "1";
                if (v == 0) return "0";
                return v == -2 ? "lp-limit" : "";
            };
            for (std::size_t i = 0; i < a.row_ids.size(); ++i)
                rows.push_back({std::to_string(a.row_ids[i]),
                                std::to_string(a.in_hypercube[i]), hull_str(a.in_hull[i])});
            add_csv("applicability.csv", rows);
        }
        if (!report.uncertainty.empty()) {
            std::vector<std::vector<std::string>> rows{
                {"output", "model", "bin_lo", "bin_hi", "eps_lo", "eps_hi"}};
            for (const auto& u : report.uncertainty) {
                rows.push_back({u.name, "GUM", "", "", fd(u.gum.eps_lo), fd(u.gum.eps_hi)});
                if (u.omum && !u.omum->degenerate_fallback)
                    for (std::size_t b = 0; b < u.omum->per_bin.size(); ++b)
                        rows.push_back({u.name, "oMUM", fd(u.omum->edges[b]),
                                        fd(u.omum->edges[b + 1]), fd(u.omum->per_bin[b].eps_lo),
                                        fd(u.omum->per_bin[b].eps_hi)});
                for (const auto& im : u.imums)
                    if (!im.degenerate_fallback)
                        for (std::size_t b = 0; b < im.per_bin.size(); ++b)
                            rows.push_back({u.name, "iMUM:" + im.variable, fd(im.edges[b]),
                                            fd(im.edges[b + 1]), fd(im.per_bin[b].eps_lo),
                                            fd(im.per_bin[b].eps_hi)});
            }
            add_csv("uncertainty_bands.csv", rows);
        }
    }

    if (want_svg) {
        if (report.curve) {
            svg::Series tr{"train error", "#1f77b4", {}}, te{"test error", "#d62728", {}};
            for (const auto& p : report.curve->points) {
                tr.xy.push_back({static_cast<double>(p.size), p.train_error});
                te.xy.push_back({static_cast<double>(p.size), p.test_error});
            }
            svg::write_chart((dir / "learning_curve.svg").string(), "learning curves", {tr, te});
            files.push_back("learning_curve.svg");
        }
        if (!report.training_trace.empty()) {
            svg::Series tr{"train error", "#1f77b4", {}}, te{"test error", "#d62728", {}};
            for (const auto& p : report.training_trace) {
                tr.xy.push_back({static_cast<double>(p.epoch), p.train_error});
                if (std::isfinite(p.eval_error))
                    te.xy.push_back({static_cast<double>(p.epoch), p.eval_error});
            }
            svg::write_chart((dir / "epochs_trace.svg").string(), "error vs epochs", {tr, te});
            files.push_back("epochs_trace.svg");
        }
        if (report.pfi) {
            svg::Series bars{"importance (MSE increase)", "#2ca02c", {}};
            for (const auto& e : report.pfi->entries)
                bars.xy.push_back({static_cast<double>(e.rank), e.delta});
            svg::write_chart((dir / "pfi.svg").string(), "permutation feature importance", {bars},
                             true);
            files.push_back("pfi.svg");
        }
    }

    // versioned manifest
    fs::path manifest = dir / "manifest.json";
    if (fs::exists(manifest)) {
        int k = 1;
        while (fs::exists(dir / ("manifest." + std::to_string(k) + ".json"))) ++k;
        fs::rename(manifest, dir / ("manifest." + std::to_string(k) + ".json"));
    }
    json mj{{"generated_at", report.generated_at}, {"files", files}};
    detail::write_text(manifest, mj.dump(2) + "\n");
    files.push_back("manifest.json");
    return files;
}

}  // namespace modval
