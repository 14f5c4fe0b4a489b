#include "dmps/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "dmps/errors.hpp"
#include "dmps/io.hpp"

namespace dmps {

using nlohmann::ordered_json;

void RunConfig::validate() const {
    if (task != "gaussian" && task != "counting")
        throw ConfigError("unknown task: " + task + " (expected gaussian|counting)");
    model.validate();
    if (task == "gaussian" && !(rho >= 0.0 && rho < 1.0))
        throw ConfigError("rho must lie in [0, 1)");
    if (batches < 1 || batch_size < 1) throw ConfigError("batches and batch_size must be positive");
    if (!(optim.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(optim.scheduler_factor > 0.0 && optim.scheduler_factor <= 1.0))
        throw ConfigError("scheduler factor must lie in (0, 1]");
    if (optim.scheduler_patience < 0) throw ConfigError("scheduler patience must be nonnegative");
    if (optim.scheduler_interval < 1) throw ConfigError("scheduler interval must be positive");
    if (eval_sets < 1) throw ConfigError("eval_sets must be positive");
    if (log_interval < 1) throw ConfigError("log_interval must be positive");
    if (eval_interval < 0) throw ConfigError("eval_interval must be nonnegative");
    for (double g : gamma_grid)
        if (!(g > 0.0 && g < 1.0)) throw ConfigError("gamma grid values must lie in (0, 1)");
    for (double r : rho_grid)
        if (!(r >= 0.0 && r < 1.0)) throw ConfigError("rho grid values must lie in [0, 1)");
    if (sweep_seeds.empty()) throw ConfigError("sweep needs at least one seed");
}

RunConfig default_config(const std::string& task) {
    RunConfig cfg;
    cfg.task = task;
    if (task == "gaussian") {
        cfg.model.encoder = {{1, 32}, Activation::Relu};
        cfg.model.kernel = {32, 64, 128, Activation::Relu, Activation::Relu, 1.0, 0.0};
        cfg.model.blocks.kind = BlockKind::MessagePassing;
        cfg.model.blocks.count = 3;
        cfg.model.blocks.nonlinearity = Activation::Relu;
        cfg.model.pooling = PoolMode::Max;
        cfg.model.head = {1, HeadTransform::Sigmoid};
        cfg.optim.learning_rate = 1e-3;
        cfg.optim.scheduler = true;
        cfg.batches = 10000;
        cfg.batch_size = 128;
    } else if (task == "counting") {
        cfg.model.encoder = {{2, 64}, Activation::Tanh};
        cfg.model.kernel = {64, 64, 64, Activation::Tanh, Activation::Tanh, 1.0, 0.0};
        cfg.model.blocks.kind = BlockKind::SetDenoising;
        cfg.model.blocks.count = 3;
        cfg.model.blocks.nonlinearity = Activation::Tanh;
        cfg.model.blocks.gamma_mode = GammaMode::Fixed;
        cfg.model.blocks.gamma_fixed = 0.5;
        cfg.model.pooling = PoolMode::Sum;
        cfg.model.head = {1, HeadTransform::Exp};
        cfg.optim.learning_rate = 1e-3;
        cfg.optim.scheduler = false;  // constant rate for the counting protocol
        cfg.batches = 20000;
        cfg.batch_size = 32;
    } else {
        throw ConfigError("unknown task: " + task);
    }
    return cfg;
}

namespace {

void check_keys(const ordered_json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok && it.key() != "_notes")
            throw ConfigError("unknown config key '" + it.key() + "' in " + where);
    }
}

Activation act_from(const ordered_json& j) { return activation_from_string(j.get<std::string>()); }

void parse_model(const ordered_json& j, ModelConfig& m) {
    check_keys(j, {"encoder", "kernel", "blocks", "pooling", "head"}, "model");
    if (j.contains("encoder")) {
        const auto& e = j["encoder"];
        check_keys(e, {"dims", "activation"}, "model.encoder");
        if (e.contains("dims")) m.encoder.dims = e["dims"].get<std::vector<int>>();
        if (e.contains("activation")) m.encoder.activation = act_from(e["activation"]);
    }
    if (j.contains("kernel")) {
        const auto& k = j["kernel"];
        check_keys(k, {"input_dim", "hidden_dim", "output_dim", "f1", "f2", "sigma0", "delta"},
                   "model.kernel");
        if (k.contains("input_dim")) m.kernel.input_dim = k["input_dim"].get<int>();
        if (k.contains("hidden_dim")) m.kernel.hidden_dim = k["hidden_dim"].get<int>();
        if (k.contains("output_dim")) m.kernel.output_dim = k["output_dim"].get<int>();
        if (k.contains("f1")) m.kernel.f1 = act_from(k["f1"]);
        if (k.contains("f2")) m.kernel.f2 = act_from(k["f2"]);
        if (k.contains("sigma0")) m.kernel.sigma0 = k["sigma0"].get<double>();
        if (k.contains("delta")) m.kernel.delta = k["delta"].get<double>();
    }
    if (j.contains("blocks")) {
        const auto& b = j["blocks"];
        check_keys(b, {"kind", "count", "widths", "nonlinearity", "gamma_mode", "gamma",
                       "gamma_per_block"},
                   "model.blocks");
        if (b.contains("kind")) m.blocks.kind = block_kind_from_string(b["kind"].get<std::string>());
        if (b.contains("count")) m.blocks.count = b["count"].get<int>();
        if (b.contains("widths")) m.blocks.widths = b["widths"].get<std::vector<int>>();
        if (b.contains("nonlinearity")) m.blocks.nonlinearity = act_from(b["nonlinearity"]);
        if (b.contains("gamma_mode")) {
            const std::string mode = b["gamma_mode"].get<std::string>();
            if (mode == "fixed")
                m.blocks.gamma_mode = GammaMode::Fixed;
            else if (mode == "learnable")
                m.blocks.gamma_mode = GammaMode::Learnable;
            else
                throw ConfigError("unknown gamma_mode: " + mode);
        }
        if (b.contains("gamma")) m.blocks.gamma_fixed = b["gamma"].get<double>();
        if (b.contains("gamma_per_block")) m.blocks.gamma_per_block = b["gamma_per_block"].get<bool>();
    }
    if (j.contains("pooling")) m.pooling = pool_mode_from_string(j["pooling"].get<std::string>());
    if (j.contains("head")) {
        const auto& h = j["head"];
        check_keys(h, {"output_dim", "transform"}, "model.head");
        if (h.contains("output_dim")) m.head.output_dim = h["output_dim"].get<int>();
        if (h.contains("transform"))
            m.head.transform = head_transform_from_string(h["transform"].get<std::string>());
    }
}

ordered_json model_to_json(const ModelConfig& m) {
    ordered_json j;
    j["encoder"] = {{"dims", m.encoder.dims}, {"activation", to_string(m.encoder.activation)}};
    j["kernel"] = {{"input_dim", m.kernel.input_dim},   {"hidden_dim", m.kernel.hidden_dim},
                   {"output_dim", m.kernel.output_dim}, {"f1", to_string(m.kernel.f1)},
                   {"f2", to_string(m.kernel.f2)},      {"sigma0", m.kernel.sigma0},
                   {"delta", m.kernel.delta}};
    j["blocks"] = {{"kind", to_string(m.blocks.kind)},
                   {"count", m.blocks.count},
                   {"widths", m.blocks.widths},
                   {"nonlinearity", to_string(m.blocks.nonlinearity)},
                   {"gamma_mode", m.blocks.gamma_mode == GammaMode::Fixed ? "fixed" : "learnable"},
                   {"gamma", m.blocks.gamma_fixed},
                   {"gamma_per_block", m.blocks.gamma_per_block}};
    j["pooling"] = to_string(m.pooling);
    j["head"] = {{"output_dim", m.head.output_dim}, {"transform", to_string(m.head.transform)}};
    return j;
}

}  // namespace

RunConfig parse_config_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    check_keys(j,
               {"task", "seed", "out_dir", "batches", "batch_size", "rho", "eval_sets",
                "log_interval", "eval_interval", "model", "optim", "counting", "rho_grid",
                "gamma_grid", "sweep_seeds"},
               "top level");
    RunConfig cfg = default_config(j.value("task", std::string("gaussian")));
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("batches")) cfg.batches = j["batches"].get<int>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
    if (j.contains("rho")) cfg.rho = j["rho"].get<double>();
    if (j.contains("eval_sets")) cfg.eval_sets = j["eval_sets"].get<int>();
    if (j.contains("log_interval")) cfg.log_interval = j["log_interval"].get<int>();
    if (j.contains("eval_interval")) cfg.eval_interval = j["eval_interval"].get<int>();
    if (j.contains("model")) parse_model(j["model"], cfg.model);
    if (j.contains("optim")) {
        const auto& o = j["optim"];
        check_keys(o,
                   {"learning_rate", "scheduler", "scheduler_factor", "scheduler_patience",
                    "scheduler_interval"},
                   "optim");
        if (o.contains("learning_rate")) cfg.optim.learning_rate = o["learning_rate"].get<double>();
        if (o.contains("scheduler")) cfg.optim.scheduler = o["scheduler"].get<bool>();
        if (o.contains("scheduler_factor"))
            cfg.optim.scheduler_factor = o["scheduler_factor"].get<double>();
        if (o.contains("scheduler_patience"))
            cfg.optim.scheduler_patience = o["scheduler_patience"].get<int>();
        if (o.contains("scheduler_interval"))
            cfg.optim.scheduler_interval = o["scheduler_interval"].get<int>();
    }
    if (j.contains("counting")) {
        const auto& c = j["counting"];
        check_keys(c,
                   {"n_min", "n_max", "element_dim", "center_low", "center_high",
                    "min_separation", "noise_scale"},
                   "counting");
        if (c.contains("n_min")) cfg.counting.n_min = c["n_min"].get<int>();
        if (c.contains("n_max")) cfg.counting.n_max = c["n_max"].get<int>();
        if (c.contains("element_dim")) cfg.counting.element_dim = c["element_dim"].get<int>();
        if (c.contains("center_low")) cfg.counting.center_low = c["center_low"].get<double>();
        if (c.contains("center_high")) cfg.counting.center_high = c["center_high"].get<double>();
        if (c.contains("min_separation"))
            cfg.counting.min_separation = c["min_separation"].get<double>();
        if (c.contains("noise_scale")) cfg.counting.noise_scale = c["noise_scale"].get<double>();
    }
    if (j.contains("rho_grid")) cfg.rho_grid = j["rho_grid"].get<std::vector<double>>();
    if (j.contains("gamma_grid")) cfg.gamma_grid = j["gamma_grid"].get<std::vector<double>>();
    if (j.contains("sweep_seeds")) cfg.sweep_seeds = j["sweep_seeds"].get<std::vector<uint64_t>>();
    cfg.validate();
    return cfg;
}

std::string config_to_json(const RunConfig& cfg, bool annotated) {
    ordered_json j;
    j["task"] = cfg.task;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["batches"] = cfg.batches;
    j["batch_size"] = cfg.batch_size;
    j["rho"] = cfg.rho;
    j["eval_sets"] = cfg.eval_sets;
    j["log_interval"] = cfg.log_interval;
    j["eval_interval"] = cfg.eval_interval;
    j["model"] = model_to_json(cfg.model);
    j["optim"] = {{"learning_rate", cfg.optim.learning_rate},
                  {"scheduler", cfg.optim.scheduler},
                  {"scheduler_factor", cfg.optim.scheduler_factor},
                  {"scheduler_patience", cfg.optim.scheduler_patience},
                  {"scheduler_interval", cfg.optim.scheduler_interval}};
    j["counting"] = {{"n_min", cfg.counting.n_min},
                     {"n_max", cfg.counting.n_max},
                     {"element_dim", cfg.counting.element_dim},
                     {"center_low", cfg.counting.center_low},
                     {"center_high", cfg.counting.center_high},
                     {"min_separation", cfg.counting.min_separation},
                     {"noise_scale", cfg.counting.noise_scale}};
    j["rho_grid"] = cfg.rho_grid;
    j["gamma_grid"] = cfg.gamma_grid;
    j["sweep_seeds"] = cfg.sweep_seeds;
    if (annotated) {
        j["_notes"] = {
            {"optim", "Adam, initial rate 1e-3; ReduceLROnPlateau factor 0.9 patience 1 when "
                      "scheduler=true; counting runs use a constant rate"},
            {"batches", "desk budget: gaussian 10000x128, counting 20000x32"},
            {"model", "gaussian: 1->32 relu encoder, 32/64/128 relu kernel embedding, 3 mp "
                      "blocks, max pool, sigmoid head; counting: 2->64 tanh encoder, 64/64/64 "
                      "tanh embedding, 3 denoising blocks (gamma 0.5), sum pool, exp head"},
            {"gamma", "fixed denoising coefficient 0.5; gamma_mode=learnable shares one "
                      "sigmoid-parameterized coefficient across blocks"},
            {"eval_sets", "held-out sets per evaluation; decisions: sigmoid threshold 0.5, "
                          "counting prediction round(lambda)"}};
    }
    return j.dump(2) + "\n";
}

RunConfig load_config(const std::filesystem::path& path) {
    return parse_config_json(read_text_file(path));
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
    write_text_file(path, config_to_json(cfg));
}

uint64_t config_hash(const RunConfig& cfg) {
    const std::string canon = config_to_json(cfg, false);
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace dmps
