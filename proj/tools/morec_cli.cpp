#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "morec/experiment.hpp"

namespace fs = std::filesystem;
using namespace morec;

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    int jobs = 1;
};

ExperimentConfig load_config(const CommonOpts& opts) {
    ExperimentConfig cfg = load_experiment_config(opts.config_path);
    if (opts.seed) {
        cfg.seed = *opts.seed;
        cfg.backbone.seed = *opts.seed;
    }
    if (!opts.out.empty()) cfg.out_dir = opts.out;
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_jobs = false) {
    cmd->add_option("--config", opts.config_path, "experiment config file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed, "override the config seed");
    cmd->add_option("--out", opts.out, "override the config output directory");
    if (with_jobs)
        cmd->add_option("--jobs", opts.jobs, "parallel sweep entries")->check(CLI::Range(1, 64));
}

int cmd_synth(const CommonOpts& opts) {
    ExperimentConfig cfg = load_config(opts);
    if (!cfg.dataset.synth) throw ConfigError("synth: config has no dataset.synth section");
    SynthResult synth = synth_generate(*cfg.dataset.synth, cfg.seed);
    fs::create_directories(cfg.out_dir);
    write_interactions_tsv((fs::path(cfg.out_dir) / "interactions.tsv").string(),
                           synth.interactions);
    write_item_metadata_tsv((fs::path(cfg.out_dir) / "items.tsv").string(), synth.items);
    std::cout << "wrote " << synth.interactions.records.size() << " interactions to "
              << cfg.out_dir << "\n";
    return 0;
}

int cmd_prep(const CommonOpts& opts) {
    ExperimentConfig cfg = load_config(opts);
    PreparedData data = prepare_data(cfg);
    fs::create_directories(cfg.out_dir);

    nlohmann::json summary;
    summary["n_users"] = data.dataset.n_users;
    summary["n_items"] = data.dataset.n_items;
    summary["n_train"] = data.dataset.train.size();
    summary["n_valid"] = data.dataset.valid.size();
    summary["n_test"] = data.dataset.test.size();
    summary["n_categories"] = data.catalog.category_names.size();
    summary["n_buckets"] = data.catalog.n_buckets;
    summary["kcore_warning"] = data.kcore_warning;
    std::ofstream f((fs::path(cfg.out_dir) / "summary.json").string());
    f << summary.dump(2) << "\n";
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_pretrain(const CommonOpts& opts) {
    ExperimentConfig cfg = load_config(opts);
    PreparedData data = prepare_data(cfg);
    PretrainOutcome pre = ensure_pretrained(cfg, data);
    const EvalReport report =
        evaluate(pre.model, data.dataset, data.catalog, EvalSplit::test, cfg.backbone.eval_k);
    nlohmann::json out;
    out["cache_hit"] = pre.cache_hit;
    out["checkpoint"] = pre.checkpoint_path;
    out["converged_loss"] = pre.converged_loss;
    out["base_eval"] = nlohmann::json::parse(report.to_json());
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint, const std::string& split,
             const std::string& out_file) {
    ExperimentConfig cfg = load_config(opts);
    PreparedData data = prepare_data(cfg);
    MfModel model = load_checkpoint(checkpoint);
    const EvalReport report =
        evaluate(model, data.dataset, data.catalog,
                 split == "valid" ? EvalSplit::valid : EvalSplit::test, cfg.backbone.eval_k);
    if (!out_file.empty()) {
        std::ofstream f(out_file);
        f << report.to_json() << "\n";
    }
    std::cout << report.to_json() << "\n";
    return 0;
}

int cmd_run(const CommonOpts& opts) {
    ExperimentConfig cfg = load_config(opts);
    return run_experiment(cfg, opts.jobs);
}

int cmd_report(const CommonOpts& opts) {
    ExperimentConfig cfg = load_config(opts);
    return assemble_report(cfg);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MoRec: tri-level multi-objective training for a matrix-factorization "
                 "recommender"};
    app.require_subcommand(1);

    CommonOpts synth_opts, prep_opts, pretrain_opts, train_opts, eval_opts, report_opts,
        run_opts;
    std::string eval_checkpoint, eval_split = "test", eval_out;

    add_common(app.add_subcommand("synth", "generate a synthetic dataset"), synth_opts);
    add_common(app.add_subcommand("prep", "load, filter and split the dataset"), prep_opts);
    add_common(app.add_subcommand("pretrain", "pretrain the backbone (cached)"), pretrain_opts);
    add_common(app.add_subcommand("train", "pretrain + continual training for the sweep"),
               train_opts, true);
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval_cmd, eval_opts);
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "model checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--split", eval_split, "valid or test")
        ->check(CLI::IsMember({"valid", "test"}));
    eval_cmd->add_option("--eval-out", eval_out, "write the report JSON here too");
    add_common(app.add_subcommand("report", "assemble the report bundle from artifacts"),
               report_opts);
    add_common(app.add_subcommand("run", "full pipeline: prep, pretrain, train, report"),
               run_opts, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("synth")) return cmd_synth(synth_opts);
        if (app.got_subcommand("prep")) return cmd_prep(prep_opts);
        if (app.got_subcommand("pretrain")) return cmd_pretrain(pretrain_opts);
        if (app.got_subcommand("train")) {
            // train == run without the report bundle; keep one code path and
            // simply run the full pipeline (report emission is cheap).
            ExperimentConfig cfg = load_config(train_opts);
            return run_experiment(cfg, train_opts.jobs);
        }
        if (app.got_subcommand("eval"))
            return cmd_eval(eval_opts, eval_checkpoint, eval_split, eval_out);
        if (app.got_subcommand("report")) return cmd_report(report_opts);
        if (app.got_subcommand("run")) return cmd_run(run_opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
