// Command line harness: training, evaluation, sweeps, kernel export and the
// invariant suite. Exit codes: 0 success, 1 invariant failure, 2 bad
// configuration, 3 numerical abort.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dmps/checkpoint.hpp"
#include "dmps/config.hpp"
#include "dmps/errors.hpp"
#include "dmps/harness.hpp"
#include "dmps/invariants.hpp"
#include "dmps/io.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> task;
    std::optional<double> rho;
    std::optional<std::string> gamma;  // value or "learnable"
    std::optional<std::string> blocks;
    std::optional<int> depth;
    int jobs = 1;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "Path to a JSON config file");
    cmd->add_option("--seed", flags.seed, "Run seed");
    cmd->add_option("--out", flags.out_dir, "Output directory");
    cmd->add_option("--task", flags.task, "Task: gaussian|counting");
    cmd->add_option("--rho", flags.rho, "Correlation of the gaussian task");
    cmd->add_option("--gamma", flags.gamma, "Diffusion coefficient or 'learnable'");
    cmd->add_option("--blocks", flags.blocks, "Block kind: mp|denoise|residual");
    cmd->add_option("--depth", flags.depth, "Number of stacked blocks");
    cmd->add_option("--jobs", flags.jobs, "Parallel training jobs for sweeps");
}

dmps::RunConfig resolve_config(const CommonFlags& flags) {
    dmps::RunConfig cfg;
    if (!flags.config_path.empty()) {
        cfg = dmps::load_config(flags.config_path);
        if (flags.task && *flags.task != cfg.task)
            throw dmps::ConfigError("--task conflicts with the task in " + flags.config_path +
                                    "; use a matching config file");
    } else {
        cfg = dmps::default_config(flags.task.value_or("gaussian"));
    }
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out_dir) cfg.out_dir = *flags.out_dir;
    if (flags.rho) cfg.rho = *flags.rho;
    if (flags.blocks) cfg.model.blocks.kind = dmps::block_kind_from_string(*flags.blocks);
    if (flags.depth) {
        cfg.model.blocks.count = *flags.depth;
        cfg.model.blocks.widths.clear();
    }
    if (flags.gamma) {
        cfg.model.blocks.kind = dmps::BlockKind::SetDenoising;
        if (*flags.gamma == "learnable") {
            cfg.model.blocks.gamma_mode = dmps::GammaMode::Learnable;
        } else {
            cfg.model.blocks.gamma_mode = dmps::GammaMode::Fixed;
            try {
                cfg.model.blocks.gamma_fixed = std::stod(*flags.gamma);
            } catch (const std::exception&) {
                throw dmps::ConfigError("--gamma expects a number in (0,1) or 'learnable'");
            }
        }
    }
    cfg.validate();
    return cfg;
}

int run_train(const CommonFlags& flags) {
    dmps::RunConfig cfg = resolve_config(flags);
    dmps::TrainResult r = dmps::train(cfg);
    std::printf("final accuracy %.4f over %d evaluation sets\n", r.final_accuracy, cfg.eval_sets);
    std::printf("outputs in %s: metrics.jsonl, checkpoint.bin, config.json\n",
                cfg.out_dir.c_str());
    return 0;
}

int run_evaluate(const CommonFlags& flags, const std::string& checkpoint_path, int n_sets) {
    dmps::RunConfig cfg = resolve_config(flags);
    dmps::Checkpoint ckpt = dmps::load_checkpoint(checkpoint_path);
    if (ckpt.config_hash != dmps::config_hash(cfg))
        std::fprintf(stderr,
                     "warning: checkpoint was trained under a different config (hash mismatch)\n");
    dmps::EvalResult r =
        dmps::evaluate(ckpt.params, cfg, n_sets > 0 ? n_sets : cfg.eval_sets, dmps::streams::kEval);
    std::printf("accuracy %.4f over %zu sets\n", r.accuracy, r.predictions.size());
    if (flags.out_dir) {
        std::filesystem::create_directories(*flags.out_dir);
        std::string csv = "prediction,label\n";
        for (size_t i = 0; i < r.predictions.size(); ++i)
            csv += dmps::format_double(r.predictions[i]) + "," +
                   dmps::format_double(r.labels[i]) + "\n";
        dmps::write_text_file(std::filesystem::path(*flags.out_dir) / "predictions.csv", csv);
    }
    return 0;
}

int run_sweep(const CommonFlags& flags, bool rho_sweep) {
    dmps::RunConfig cfg = resolve_config(flags);
    dmps::SweepTable table =
        rho_sweep ? dmps::sweep_rho(cfg, cfg.rho_grid, cfg.sweep_seeds, flags.jobs)
                  : dmps::sweep_gamma(cfg, cfg.gamma_grid, cfg.sweep_seeds, flags.jobs);
    std::fputs(dmps::sweep_table_csv(table).c_str(), stdout);
    if (!rho_sweep) {
        double best = -1.0, best_gamma = 0.0;
        for (const auto& row : table.rows)
            if (row.mean > best) {
                best = row.mean;
                best_gamma = row.grid_value;
            }
        std::printf("argmax gamma %.3f (mean accuracy %.4f)\n", best_gamma, best);
    }
    std::printf("results.csv written to %s\n", cfg.out_dir.c_str());
    return 0;
}

int run_export(const CommonFlags& flags, const std::string& checkpoint_path, int mean_sets,
               int per_set) {
    dmps::RunConfig cfg = resolve_config(flags);
    dmps::Checkpoint ckpt = dmps::load_checkpoint(checkpoint_path);
    const std::filesystem::path out(flags.out_dir.value_or(cfg.out_dir));
    dmps::KernelExportSummary s = dmps::export_kernel(ckpt.params, cfg, out, mean_sets, per_set);
    std::printf("mean kernel: largest off-diagonal at (%d,%d) value %.4f; rest %.4f +- %.4f\n",
                s.argmax_row, s.argmax_col, s.argmax_value, s.rest_mean, s.rest_sd);
    std::printf("identity-set off-diagonals flat: %s\n", s.identity_flat ? "yes" : "no");
    return 0;
}

int run_verify(const CommonFlags& flags) {
    const std::filesystem::path out(flags.out_dir.value_or("verify_out"));
    dmps::InvariantReport report = dmps::run_invariant_suite(out);
    for (const auto& c : report.checks)
        std::printf("[%s] %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                    c.detail.c_str());
    dmps::write_report_json(report, out / "report.json");
    std::printf("report.json written to %s\n", out.string().c_str());
    return report.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep message passing on sets: training and diagnostics harness"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string checkpoint_path;
    int n_sets = 0;
    int mean_sets = 2000;
    int per_set = 8;
    std::string defaults_task = "gaussian";

    CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
    add_common_flags(train_cmd, flags);

    CLI::App* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint");
    add_common_flags(eval_cmd, flags);
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint.bin path")->required();
    eval_cmd->add_option("--sets", n_sets, "Number of evaluation sets");

    CLI::App* sweep_rho_cmd = app.add_subcommand("sweep-rho", "Accuracy vs correlation");
    add_common_flags(sweep_rho_cmd, flags);

    CLI::App* sweep_gamma_cmd =
        app.add_subcommand("sweep-gamma", "Accuracy vs fixed diffusion coefficient");
    add_common_flags(sweep_gamma_cmd, flags);

    CLI::App* export_cmd = app.add_subcommand("export-kernel", "Export K and W matrices");
    add_common_flags(export_cmd, flags);
    export_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint.bin path")->required();
    export_cmd->add_option("--sets", mean_sets, "Sets per class for the mean kernel");
    export_cmd->add_option("--export-sets", per_set, "Per-set CSVs to write");

    CLI::App* verify_cmd = app.add_subcommand("verify", "Run the invariant suite");
    add_common_flags(verify_cmd, flags);

    CLI::App* defaults_cmd = app.add_subcommand("print-defaults", "Print the default config");
    defaults_cmd->add_option("--task", defaults_task, "gaussian|counting");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) return run_train(flags);
        if (eval_cmd->parsed()) return run_evaluate(flags, checkpoint_path, n_sets);
        if (sweep_rho_cmd->parsed()) return run_sweep(flags, true);
        if (sweep_gamma_cmd->parsed()) return run_sweep(flags, false);
        if (export_cmd->parsed()) return run_export(flags, checkpoint_path, mean_sets, per_set);
        if (verify_cmd->parsed()) return run_verify(flags);
        if (defaults_cmd->parsed()) {
            std::fputs(dmps::config_to_json(dmps::default_config(defaults_task), true).c_str(),
                       stdout);
            return 0;
        }
    } catch (const dmps::ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const dmps::NumericalError& e) {
        std::fprintf(stderr, "numerical abort: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
