// Command-line front end for the validation pipeline: synthetic data
// generation, full runs, and focused subcommands for the individual boxes.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "modval/pipeline.hpp"

namespace {

modval::PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    nlohmann::json j;
    in >> j;
    return modval::config_from_json(j);
}

void apply_overrides(modval::PipelineConfig& cfg, const std::optional<std::uint64_t>& seed,
                     const std::string& out, const std::vector<std::string>& formats,
                     unsigned jobs) {
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.out_dir = out;
    if (!formats.empty()) cfg.formats = formats;
    if (jobs > 0) cfg.jobs = jobs;
}

int run_and_report(modval::PipelineConfig cfg, const std::vector<std::string>& only_boxes) {
    if (!only_boxes.empty()) {
        for (const auto& b : modval::PipelineConfig::box_names()) cfg.boxes[b] = false;
        for (const auto& b : only_boxes) cfg.boxes[b] = true;
        // prerequisites of the requested boxes
        const auto& parent = modval::PipelineConfig::box_parent();
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& [box, dep] : parent)
                if (cfg.boxes[box] && !cfg.boxes[dep]) {
                    cfg.boxes[dep] = true;
                    changed = true;
                }
        }
    }
    auto report = modval::run(cfg);
    if (!cfg.out_dir.empty()) {
        auto files = modval::emit_reports(report, cfg.out_dir, cfg.formats);
        std::cout << "wrote " << files.size() << " files to " << cfg.out_dir << "\n";
    } else {
        std::cout << modval::to_json(report).dump(2) << "\n";
    }
    bool all_pass = true;
    for (const auto& [name, pass] : report.verdicts) {
        std::cout << (pass ? "[pass] " : "[FAIL] ") << name << "\n";
        all_pass = all_pass && pass;
    }
    return all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"surrogate-model statistical validation pipeline"};
    app.require_subcommand(1);

    std::string config_path, out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> formats;
    unsigned jobs = 0;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "pipeline config (JSON)")->required();
        cmd->add_option("--seed", seed, "override the config seed");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--format", formats, "json|csv|svg (repeatable)");
        cmd->add_option("--jobs", jobs, "worker threads");
    };

    auto* cmd_run = app.add_subcommand("run", "run the full ten-box pipeline");
    add_common(cmd_run);
    auto* cmd_audit = app.add_subcommand("audit-split", "boxes 1-2: split adequacy audit (VTPM)");
    add_common(cmd_audit);
    auto* cmd_unc = app.add_subcommand("uncertainty", "boxes 1-3 + 10: uncertainty models and coverage");
    add_common(cmd_unc);
    auto* cmd_pfi = app.add_subcommand("pfi", "boxes 1-3 + 8: permutation feature importance");
    add_common(cmd_pfi);
    auto* cmd_curves = app.add_subcommand("curves", "boxes 1-3 + 9: learning curves and applicability");
    add_common(cmd_curves);

    auto* cmd_gen = app.add_subcommand("generate", "generate the synthetic case study");
    std::string gen_out = "synthetic.csv", emit_config;
    modval::SyntheticOptions so;
    std::uint64_t gen_seed = 1;
    bool homoscedastic = false;
    cmd_gen->add_option("--out", gen_out, "output CSV path");
    cmd_gen->add_option("--rows", so.rows, "number of rows (>= 1000)");
    cmd_gen->add_option("--numeric", so.numeric_features, "numeric feature count");
    cmd_gen->add_option("--frames", so.frame_levels, "frame levels (ordinal)");
    cmd_gen->add_option("--stringers", so.stringers, "stringer count (cyclic q)");
    cmd_gen->add_option("--outputs", so.outputs, "output count");
    cmd_gen->add_option("--noise", so.noise_scale, "noise scale");
    cmd_gen->add_flag("--homoscedastic", homoscedastic, "disable heteroscedastic noise");
    cmd_gen->add_option("--ci-fraction", so.ci_fraction, "fraction of rows given CI bounds");
    cmd_gen->add_option("--seed", gen_seed, "generator seed");
    cmd_gen->add_option("--emit-config", emit_config, "also write a ready-to-run config JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_gen->parsed()) {
            so.heteroscedastic = !homoscedastic;
            auto synth = modval::generate_synthetic_case(gen_seed, so);
            modval::write_dataset_csv(synth.data, gen_out);
            std::cout << "wrote " << synth.data.rows() << " rows to " << gen_out << "\n";
            if (!emit_config.empty()) {
                nlohmann::json dataset = modval::schema_to_json(synth.data.schema);
                dataset["path"] = gen_out;
                nlohmann::json cfg{
                    {"dataset", dataset},
                    {"split", {{"holdout_fraction", 0.8}, {"strategy", "random"},
                               {"three_way", {0.6, 0.2, 0.2}}}},
                    {"preprocess", {{"normalize", "minmax"}, {"pca_variance", nullptr}}},
                    {"model", modval::training_config_to_json({.hidden = {32, 16},
                                                               .learning_rate = 3e-3,
                                                               .batch_size = 256,
                                                               .epochs = 40})},
                    {"analysis", {{"bins", 10}, {"bootstrap", 2000}, {"pfi_repeats", 10},
                                  {"imum_top_k", 5}, {"pair", {"frame", "stringer"}}}},
                    {"seed", gen_seed},
                    {"jobs", 1},
                    {"output", {{"dir", "out"}, {"formats", {"json", "csv"}}}}};
                std::ofstream cf(emit_config);
                if (!cf) throw std::runtime_error("cannot write " + emit_config);
                cf << cfg.dump(2) << "\n";
                std::cout << "wrote config template to " << emit_config << "\n";
            }
            return 0;
        }

        auto cfg = load_config(config_path);
        apply_overrides(cfg, seed, out, formats, jobs);
        if (cmd_run->parsed()) return run_and_report(cfg, {});
        if (cmd_audit->parsed()) return run_and_report(cfg, {"data", "split_audit"});
        if (cmd_unc->parsed()) return run_and_report(cfg, {"uncertainty"});
        if (cmd_pfi->parsed()) return run_and_report(cfg, {"xai"});
        if (cmd_curves->parsed()) return run_and_report(cfg, {"boosting"});
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 1;
}
