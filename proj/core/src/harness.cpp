#include "dmps/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dmps/blocks.hpp"
#include "dmps/checkpoint.hpp"
#include "dmps/errors.hpp"
#include "dmps/io.hpp"
#include "dmps/optim.hpp"
#include "dmps/tape.hpp"

namespace dmps {

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point start = clock::now();
    return std::chrono::duration<double>(clock::now() - start).count();
}

std::optional<double> current_gamma(const ParamStore& params, const ModelConfig& cfg) {
    if (cfg.blocks.kind != BlockKind::SetDenoising ||
        cfg.blocks.gamma_mode != GammaMode::Learnable || cfg.blocks.gamma_per_block)
        return std::nullopt;
    return gamma_value(params.value("blocks.gamma_raw").item());
}

}  // namespace

SetInstance training_set(const RunConfig& cfg, const GaussianSetSampler* sigma_sampler,
                         const GaussianSetSampler* identity_sampler, uint64_t batch, int index,
                         const SplitRng& train_rng) {
    SplitRng rng = train_rng.split(batch, static_cast<uint64_t>(index));
    if (cfg.task == "gaussian") {
        const bool correlated = index >= cfg.batch_size / 2;
        SetInstance set;
        set.elements = correlated ? sigma_sampler->sample(rng) : identity_sampler->sample(rng);
        set.label = correlated ? 1.0 : 0.0;
        return set;
    }
    CountingSample s = sample_counting_set(cfg.counting, rng);
    return {std::move(s.elements), static_cast<double>(s.count)};
}

TrainResult train(const RunConfig& cfg, bool write_outputs, bool quiet) {
    cfg.validate();
    SplitRng root(cfg.seed);
    SplitRng init_rng = root.split(streams::kInit);
    SplitRng train_rng = root.split(streams::kTrain);

    TrainResult result;
    result.params = init_model_params(cfg.model, init_rng);
    OptimizerState opt = make_optimizer(cfg.optim.learning_rate);

    std::optional<GaussianSetSampler> sigma_sampler;
    std::optional<GaussianSetSampler> identity_sampler;
    if (cfg.task == "gaussian") {
        sigma_sampler.emplace(build_covariance(cfg.rho));
        identity_sampler.emplace(build_covariance(0.0));
    }

    Tape tape;
    double window_loss = 0.0;
    int window_count = 0;
    double window_report = 0.0;
    int report_count = 0;

    for (int b = 0; b < cfg.batches; ++b) {
        tape.clear();
        Value batch_loss;
        try {
            Value total = tape.constant(0.0);
            for (int i = 0; i < cfg.batch_size; ++i) {
                SetInstance set = training_set(cfg, sigma_sampler ? &*sigma_sampler : nullptr,
                                               identity_sampler ? &*identity_sampler : nullptr,
                                               static_cast<uint64_t>(b), i, train_rng);
                Value pred = dmps_forward(tape, set.elements, result.params, cfg.model);
                Value loss = cfg.task == "gaussian"
                                 ? tape.binary_cross_entropy(pred, set.label)
                                 : tape.poisson_nll(pred, static_cast<int>(set.label));
                total = tape.add(total, loss);
            }
            batch_loss = tape.scale(total, 1.0 / cfg.batch_size);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (training batch " + std::to_string(b) +
                                 ")");
        }
        const double loss_value = tape.value(batch_loss).item();
        if (!std::isfinite(loss_value))
            throw NumericalError("non-finite training loss at batch " + std::to_string(b));

        result.params.zero_grads();
        tape.backward(batch_loss);
        adam_step(result.params, opt);

        window_loss += loss_value;
        window_report += loss_value;
        ++window_count;
        ++report_count;

        if (cfg.optim.scheduler && window_count == cfg.optim.scheduler_interval) {
            plateau_scheduler(opt, window_loss / window_count, cfg.optim.scheduler_factor,
                              cfg.optim.scheduler_patience);
            window_loss = 0.0;
            window_count = 0;
        }

        const int step = b + 1;
        if (step % cfg.log_interval == 0 || step == cfg.batches) {
            MetricsRecord rec;
            rec.step = step;
            rec.train_loss = window_report / report_count;
            rec.learning_rate = opt.learning_rate;
            rec.gamma = current_gamma(result.params, cfg.model);
            rec.wall_clock_s = now_seconds();
            if (cfg.eval_interval > 0 && (step % cfg.eval_interval == 0 || step == cfg.batches)) {
                const int quick_sets = std::min(cfg.eval_sets, 200);
                rec.eval_accuracy =
                    evaluate(result.params, cfg, quick_sets, streams::kEval).accuracy;
            }
            if (!quiet) {
                std::fprintf(stderr, "[train] step %d loss %.6f lr %.3e%s (%.1fs)\n", rec.step,
                             rec.train_loss, rec.learning_rate,
                             rec.eval_accuracy ? (" acc " + std::to_string(*rec.eval_accuracy)).c_str()
                                               : "",
                             rec.wall_clock_s);
            }
            result.metrics.push_back(rec);
            window_report = 0.0;
            report_count = 0;
        }
    }

    EvalResult final_eval = evaluate(result.params, cfg, cfg.eval_sets, streams::kEval);
    result.final_accuracy = final_eval.accuracy;
    result.final_loss = result.metrics.empty() ? 0.0 : result.metrics.back().train_loss;

    if (write_outputs) {
        const std::filesystem::path out(cfg.out_dir);
        std::filesystem::create_directories(out);
        write_metrics_jsonl(result.metrics, out / "metrics.jsonl");
        save_checkpoint(result.params, config_hash(cfg), out / "checkpoint.bin");
        save_config(cfg, out / "config.json");
    }
    return result;
}

EvalResult evaluate(ParamStore& params, const RunConfig& cfg, int n_sets, uint64_t stream_tag) {
    cfg.validate();
    SplitRng eval_rng = SplitRng(cfg.seed).split(stream_tag);
    EvalResult result;
    result.predictions.reserve(static_cast<size_t>(n_sets));
    result.labels.reserve(static_cast<size_t>(n_sets));

    int correct = 0;
    if (cfg.task == "gaussian") {
        GaussianSetSampler sigma_sampler(build_covariance(cfg.rho));
        GaussianSetSampler identity_sampler(build_covariance(0.0));
        for (int j = 0; j < n_sets; ++j) {
            SplitRng rng = eval_rng.split(static_cast<uint64_t>(j));
            const bool correlated = j >= n_sets / 2;
            const Tensor x = correlated ? sigma_sampler.sample(rng) : identity_sampler.sample(rng);
            const double p = dmps_predict(x, params, cfg.model).item();
            const int decided = p > 0.5 ? 1 : 0;
            correct += decided == (correlated ? 1 : 0);
            result.predictions.push_back(p);
            result.labels.push_back(correlated ? 1.0 : 0.0);
        }
    } else {
        for (int j = 0; j < n_sets; ++j) {
            SplitRng rng = eval_rng.split(static_cast<uint64_t>(j));
            CountingSample s = sample_counting_set(cfg.counting, rng);
            const double lambda = dmps_predict(s.elements, params, cfg.model).item();
            const long decided = std::lround(lambda);
            correct += decided == s.count;
            result.predictions.push_back(lambda);
            result.labels.push_back(static_cast<double>(s.count));
        }
    }
    result.accuracy = static_cast<double>(correct) / n_sets;
    return result;
}

std::string sweep_table_csv(const SweepTable& table) {
    std::ostringstream out;
    out << table.grid_name;
    for (uint64_t s : table.seeds) out << ",seed_" << s;
    out << ",mean,sd\n";
    for (const auto& row : table.rows) {
        out << format_double(row.grid_value);
        for (double a : row.per_seed_accuracy) out << ',' << format_double(a);
        out << ',' << format_double(row.mean) << ',' << format_double(row.sd) << '\n';
    }
    return out.str();
}

namespace {

SweepTable run_sweep(const RunConfig& base, const std::string& grid_name,
                     const std::vector<double>& grid, const std::vector<uint64_t>& seeds,
                     int parallel_jobs, bool write_outputs) {
    if (grid.empty()) throw ConfigError("sweep grid must not be empty");
    if (seeds.empty()) throw ConfigError("sweep needs at least one seed");

    SweepTable table;
    table.grid_name = grid_name;
    table.seeds = seeds;
    table.rows.resize(grid.size());

    struct Job {
        size_t row;
        size_t seed_index;
        RunConfig cfg;
    };
    std::vector<Job> jobs;
    for (size_t gi = 0; gi < grid.size(); ++gi) {
        table.rows[gi].grid_value = grid[gi];
        table.rows[gi].per_seed_accuracy.resize(seeds.size());
        for (size_t si = 0; si < seeds.size(); ++si) {
            RunConfig cfg = base;
            cfg.seed = seeds[si];
            if (grid_name == "rho") {
                cfg.rho = grid[gi];
            } else {
                cfg.model.blocks.kind = BlockKind::SetDenoising;
                cfg.model.blocks.gamma_mode = GammaMode::Fixed;
                cfg.model.blocks.gamma_fixed = grid[gi];
            }
            cfg.validate();
            jobs.push_back({gi, si, std::move(cfg)});
        }
    }

    const int workers = std::max(1, parallel_jobs);
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t k = next.fetch_add(1);
            if (k >= jobs.size()) return;
            const Job& job = jobs[k];
            TrainResult r = train(job.cfg, /*write_outputs=*/false, /*quiet=*/true);
            table.rows[job.row].per_seed_accuracy[job.seed_index] = r.final_accuracy;
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::future<void>> pool;
        for (int w = 0; w < workers; ++w) pool.push_back(std::async(std::launch::async, worker));
        for (auto& f : pool) f.get();
    }

    for (auto& row : table.rows) {
        double sum = 0.0;
        for (double a : row.per_seed_accuracy) sum += a;
        row.mean = sum / row.per_seed_accuracy.size();
        double var = 0.0;
        for (double a : row.per_seed_accuracy) var += (a - row.mean) * (a - row.mean);
        row.sd = row.per_seed_accuracy.size() > 1
                     ? std::sqrt(var / (row.per_seed_accuracy.size() - 1))
                     : 0.0;
    }

    if (write_outputs) {
        std::filesystem::create_directories(base.out_dir);
        write_text_file(std::filesystem::path(base.out_dir) / "results.csv",
                        sweep_table_csv(table));
    }
    return table;
}

}  // namespace

SweepTable sweep_rho(const RunConfig& cfg, const std::vector<double>& grid,
                     const std::vector<uint64_t>& seeds, int parallel_jobs, bool write_outputs) {
    if (cfg.task != "gaussian") throw ConfigError("sweep-rho applies to the gaussian task");
    return run_sweep(cfg, "rho", grid, seeds, parallel_jobs, write_outputs);
}

SweepTable sweep_gamma(const RunConfig& cfg, const std::vector<double>& grid,
                       const std::vector<uint64_t>& seeds, int parallel_jobs,
                       bool write_outputs) {
    if (cfg.task != "counting") throw ConfigError("sweep-gamma applies to the counting task");
    for (double g : grid)
        if (!(g > 0.0 && g < 1.0)) throw ConfigError("gamma grid values must lie in (0, 1)");
    return run_sweep(cfg, "gamma", grid, seeds, parallel_jobs, write_outputs);
}

LatentGraph model_latent_graph(const Tensor& set_elements, ParamStore& params,
                               const ModelConfig& cfg) {
    Tape tape;
    Value h = tape.input(set_elements);
    for (size_t l = 0; l + 1 < cfg.encoder.dims.size(); ++l) {
        const std::string idx = std::to_string(l);
        h = tape.add_row_bias(tape.matmul(h, tape.param(params, "encoder.w" + idx)),
                              tape.param(params, "encoder.b" + idx));
        h = tape.elementwise(cfg.encoder.activation, h);
    }
    TrackedLatentGraph g = build_latent_graph(tape, h, params, cfg.kernel);
    return {tape.value(g.kernel), tape.value(g.weights), set_elements.rows()};
}

KernelExportSummary export_kernel(ParamStore& params, const RunConfig& cfg,
                                  const std::filesystem::path& out_dir, int mean_sets,
                                  int per_set_exports) {
    if (cfg.task != "gaussian") throw ConfigError("export-kernel applies to the gaussian task");
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    GaussianSetSampler sigma_sampler(build_covariance(cfg.rho));
    GaussianSetSampler identity_sampler(build_covariance(0.0));
    SplitRng root(cfg.seed);
    SplitRng sigma_rng = root.split(streams::kExportSigma);
    SplitRng identity_rng = root.split(streams::kExportIdentity);

    const int p = sigma_sampler.dim();
    Tensor mean_sigma(p, p);
    Tensor mean_identity(p, p);
    for (int j = 0; j < mean_sets; ++j) {
        SplitRng rng_s = sigma_rng.split(static_cast<uint64_t>(j));
        SplitRng rng_i = identity_rng.split(static_cast<uint64_t>(j));
        const Tensor xs = sigma_sampler.sample(rng_s);
        const Tensor xi = identity_sampler.sample(rng_i);
        LatentGraph gs = model_latent_graph(xs, params, cfg.model);
        LatentGraph gi = model_latent_graph(xi, params, cfg.model);
        mean_sigma = add(mean_sigma, gs.kernel);
        mean_identity = add(mean_identity, gi.kernel);
        if (j < per_set_exports) {
            write_matrix_csv(gs.kernel, out_dir / ("kernel_set_" + std::to_string(j) + ".csv"));
            write_matrix_csv(gs.weights, out_dir / ("weights_set_" + std::to_string(j) + ".csv"));
        }
    }
    mean_sigma = scale(mean_sigma, 1.0 / mean_sets);
    mean_identity = scale(mean_identity, 1.0 / mean_sets);
    write_matrix_csv(mean_sigma, out_dir / "kernel_mean_sigma.csv");
    write_matrix_csv(mean_identity, out_dir / "kernel_mean_identity.csv");

    KernelExportSummary summary;
    // Largest off-diagonal of the sigma-set mean kernel (unordered pairs).
    double best = -1.0;
    std::vector<double> rest;
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (mean_sigma.at(i, j) > best) {
                best = mean_sigma.at(i, j);
                summary.argmax_row = i + 1;
                summary.argmax_col = j + 1;
                summary.argmax_value = best;
            }
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (!(i + 1 == summary.argmax_row && j + 1 == summary.argmax_col))
                rest.push_back(mean_sigma.at(i, j));
    double mean = 0.0;
    for (double v : rest) mean += v;
    mean /= rest.size();
    double var = 0.0;
    for (double v : rest) var += (v - mean) * (v - mean);
    summary.rest_mean = mean;
    summary.rest_sd = std::sqrt(var / (rest.size() > 1 ? rest.size() - 1 : 1));

    // Flatness of the identity-set mean kernel: each off-diagonal against the
    // mean + 4 sd of the remaining ones.
    summary.identity_flat = true;
    std::vector<double> identity_off;
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j) identity_off.push_back(mean_identity.at(i, j));
    for (size_t k = 0; k < identity_off.size(); ++k) {
        double m = 0.0;
        for (size_t l = 0; l < identity_off.size(); ++l)
            if (l != k) m += identity_off[l];
        m /= identity_off.size() - 1;
        double v = 0.0;
        for (size_t l = 0; l < identity_off.size(); ++l)
            if (l != k) v += (identity_off[l] - m) * (identity_off[l] - m);
        const double sd = std::sqrt(v / (identity_off.size() - 2));
        if (identity_off[k] > m + 4.0 * sd) summary.identity_flat = false;
    }

    nlohmann::ordered_json report;
    report["argmax_offdiagonal"] = {summary.argmax_row, summary.argmax_col};
    report["argmax_value"] = summary.argmax_value;
    report["rest_mean"] = summary.rest_mean;
    report["rest_sd"] = summary.rest_sd;
    report["identity_flat"] = summary.identity_flat;
    report["mean_sets"] = mean_sets;
    write_text_file(out_dir / "kernel_report.json", report.dump(2) + "\n");
    return summary;
}

}  // namespace dmps
