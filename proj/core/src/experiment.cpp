#include "pf/experiment.hpp"

#include <set>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "pf/errors.hpp"
#include "pf/rng.hpp"

namespace pf {

namespace {

[[noreturn]] void bad(const std::string& origin, const std::string& msg) {
    throw ConfigError(origin + ": " + msg);
}

void expect_keys(const YAML::Node& node, const std::set<std::string>& allowed,
                 const std::string& origin, const std::string& where) {
    for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        if (!allowed.count(key)) {
            bad(origin, "unknown " + where + " key '" + key + "'");
        }
    }
}

template <typename T>
T fetch(const YAML::Node& node, const char* key, const std::string& origin, T fallback) {
    if (!node[key]) return fallback;
    try {
        return node[key].template as<T>();
    } catch (const YAML::Exception&) {
        bad(origin, std::string("cannot parse value of '") + key + "'");
    }
}

ModelSpec parse_model(const YAML::Node& node, const std::string& origin) {
    if (node.IsScalar()) {
        const std::string name = node.as<std::string>();
        if (name == "reference") return reference_spec();
        bad(origin, "model must be 'reference' or an inline mapping, got '" + name + "'");
    }
    if (!node.IsMap()) bad(origin, "model must be 'reference' or an inline mapping");
    expect_keys(node,
                {"n_layers", "d_model", "n_heads", "d_ff", "vocab_size", "max_seq",
                 "tie_output_head", "ln_eps"},
                origin, "model");
    ModelSpec spec = reference_spec();
    spec.n_layers = fetch(node, "n_layers", origin, spec.n_layers);
    spec.d_model = fetch(node, "d_model", origin, spec.d_model);
    spec.n_heads = fetch(node, "n_heads", origin, spec.n_heads);
    spec.d_ff = fetch(node, "d_ff", origin, spec.d_ff);
    spec.vocab_size = fetch(node, "vocab_size", origin, spec.vocab_size);
    spec.max_seq = fetch(node, "max_seq", origin, spec.max_seq);
    spec.tie_output_head = fetch(node, "tie_output_head", origin, spec.tie_output_head);
    spec.ln_eps = fetch(node, "ln_eps", origin, spec.ln_eps);
    return spec;
}

std::string scalar_or_join(const YAML::Node& node, const std::string& origin,
                           const std::string& key) {
    if (node.IsScalar()) return node.as<std::string>();
    if (node.IsSequence()) {
        std::string out;
        for (const auto& item : node) {
            if (!out.empty()) out += ",";
            out += item.as<std::string>();
        }
        return out;
    }
    bad(origin, "method key '" + key + "' must be a scalar or a list");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_yaml_file(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
        throw ConfigError("config file does not exist: " + path.string());
    }
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::Exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    std::ostringstream text;
    text << root;
    return from_yaml_string(text.str(), path.string());
}

ExperimentConfig ExperimentConfig::from_yaml_string(const std::string& text,
                                                    const std::string& origin) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    if (!root.IsMap()) bad(origin, "top level must be a mapping");
    expect_keys(root, {"model", "method", "dataset", "train", "eval", "output_dir"}, origin,
                "top-level");

    ExperimentConfig config;

    if (!root["model"]) bad(origin, "missing 'model'");
    config.model = parse_model(root["model"], origin);

    if (!root["method"] || !root["method"].IsMap()) bad(origin, "missing 'method' mapping");
    for (const auto& kv : root["method"]) {
        const std::string key = kv.first.as<std::string>();
        if (key == "peft_type") {
            config.peft_type = kv.second.as<std::string>();
        } else {
            config.method_raw[key] = scalar_or_join(kv.second, origin, key);
        }
    }
    if (config.peft_type.empty()) bad(origin, "method.peft_type is required");

    if (!root["dataset"]) bad(origin, "missing 'dataset'");
    const YAML::Node ds = root["dataset"];
    if (ds.IsScalar()) {
        config.dataset = ds.as<std::string>();
    } else if (ds.IsMap()) {
        expect_keys(ds, {"name", "eval_splits"}, origin, "dataset");
        if (!ds["name"]) bad(origin, "dataset.name is required");
        config.dataset = ds["name"].as<std::string>();
        if (ds["eval_splits"]) {
            config.eval_splits.clear();
            for (const auto& s : ds["eval_splits"]) {
                config.eval_splits.push_back(s.as<std::string>());
            }
            if (config.eval_splits.empty()) bad(origin, "dataset.eval_splits is empty");
        }
    } else {
        bad(origin, "dataset must be a name or a mapping");
    }

    if (!root["train"] || !root["train"].IsMap()) bad(origin, "missing 'train' mapping");
    const YAML::Node tr = root["train"];
    expect_keys(tr,
                {"steps", "epochs", "batch_size", "lr", "schedule", "warmup_steps", "seed",
                 "optimizer", "weight_decay"},
                origin, "train");
    if (tr["steps"]) config.train.steps = tr["steps"].as<int>();
    if (tr["epochs"]) config.train.epochs = tr["epochs"].as<int>();
    config.train.batch_size = fetch(tr, "batch_size", origin, config.train.batch_size);
    config.train.lr = fetch(tr, "lr", origin, config.train.lr);
    if (tr["schedule"]) {
        const std::string s = tr["schedule"].as<std::string>();
        if (s == "constant") {
            config.train.schedule = TrainSettings::Schedule::constant;
        } else if (s == "linear_warmup") {
            config.train.schedule = TrainSettings::Schedule::linear_warmup;
        } else {
            bad(origin, "train.schedule must be constant or linear_warmup, got '" + s + "'");
        }
    }
    config.train.warmup_steps = fetch(tr, "warmup_steps", origin, config.train.warmup_steps);
    if (tr["seed"]) {
        config.train.seed = tr["seed"].as<std::uint64_t>();
        config.train.seed_given = true;
    }
    if (tr["optimizer"]) {
        const std::string o = tr["optimizer"].as<std::string>();
        if (o == "adamw") {
            config.train.optimizer = OptimizerSettings::Kind::adamw;
        } else if (o == "sgd") {
            config.train.optimizer = OptimizerSettings::Kind::sgd;
        } else {
            bad(origin, "train.optimizer must be adamw or sgd, got '" + o + "'");
        }
    }
    config.train.weight_decay = fetch(tr, "weight_decay", origin, config.train.weight_decay);

    if (root["eval"]) {
        const YAML::Node ev = root["eval"];
        if (!ev.IsMap()) bad(origin, "'eval' must be a mapping");
        expect_keys(ev,
                    {"max_new_tokens", "compute_classification_metrics", "compute_pscp",
                     "pscp_cp", "pscp_cf", "pscp_cm", "pscp_bp", "pscp_bf", "pscp_bm"},
                    origin, "eval");
        config.eval.max_new_tokens = fetch(ev, "max_new_tokens", origin,
                                           config.eval.max_new_tokens);
        config.eval.compute_classification_metrics =
            fetch(ev, "compute_classification_metrics", origin,
                  config.eval.compute_classification_metrics);
        config.eval.compute_pscp = fetch(ev, "compute_pscp", origin, config.eval.compute_pscp);
        config.eval.pscp.c_p = fetch(ev, "pscp_cp", origin, config.eval.pscp.c_p);
        config.eval.pscp.c_f = fetch(ev, "pscp_cf", origin, config.eval.pscp.c_f);
        config.eval.pscp.c_m = fetch(ev, "pscp_cm", origin, config.eval.pscp.c_m);
        config.eval.pscp.b_p = fetch(ev, "pscp_bp", origin, config.eval.pscp.b_p);
        config.eval.pscp.b_f = fetch(ev, "pscp_bf", origin, config.eval.pscp.b_f);
        config.eval.pscp.b_m = fetch(ev, "pscp_bm", origin, config.eval.pscp.b_m);
    }

    if (!root["output_dir"]) bad(origin, "missing 'output_dir'");
    config.output_dir = root["output_dir"].as<std::string>();

    config.validate();
    return config;
}

void ExperimentConfig::validate() const {
    model.validate();
    if (static_cast<bool>(train.steps) == static_cast<bool>(train.epochs)) {
        throw ConfigError("exactly one of train.steps / train.epochs must be set");
    }
    if (train.steps && *train.steps <= 0) throw ConfigError("train.steps must be positive");
    if (train.epochs && *train.epochs <= 0) throw ConfigError("train.epochs must be positive");
    if (!train.seed_given) throw ConfigError("train.seed is required");
    if (train.batch_size <= 0) throw ConfigError("train.batch_size must be positive");
    if (train.lr <= 0.0) throw ConfigError("train.lr must be positive");
    if (train.schedule == TrainSettings::Schedule::linear_warmup && train.warmup_steps <= 0) {
        throw ConfigError("linear_warmup schedule needs positive train.warmup_steps");
    }
    if (eval.max_new_tokens <= 0) throw ConfigError("eval.max_new_tokens must be positive");
    eval.pscp.validate();
    if (dataset.empty()) throw ConfigError("dataset name is required");
    if (output_dir.empty()) throw ConfigError("output_dir is required");
}

std::string ExperimentConfig::fingerprint() const {
    std::ostringstream canon;
    canon << "model:" << model.n_layers << ',' << model.d_model << ',' << model.n_heads << ','
          << model.d_ff << ',' << model.vocab_size << ',' << model.max_seq << ','
          << model.tie_output_head << ',' << model.ln_eps << ';';
    canon << "method:" << peft_type << ';';
    for (const auto& [k, v] : method_raw) canon << k << '=' << v << ';';
    canon << "dataset:" << dataset << ';';
    for (const auto& s : eval_splits) canon << s << ',';
    canon << "train:" << (train.steps ? *train.steps : -1) << ','
          << (train.epochs ? *train.epochs : -1) << ',' << train.batch_size << ',' << train.lr
          << ',' << static_cast<int>(train.schedule) << ',' << train.warmup_steps << ','
          << train.seed << ',' << static_cast<int>(train.optimizer) << ','
          << train.weight_decay << ';';
    canon << "eval:" << eval.max_new_tokens << ',' << eval.compute_classification_metrics << ','
          << eval.compute_pscp << ',' << eval.pscp.c_p << ',' << eval.pscp.c_f << ','
          << eval.pscp.c_m << ',' << eval.pscp.b_p << ',' << eval.pscp.b_f << ','
          << eval.pscp.b_m;
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canon.str())));
    return hex;
}

std::string RunReport::to_json() const {
    nlohmann::ordered_json out;
    out["config_fingerprint"] = config_fingerprint;
    out["batch_schedule_fingerprint"] = batch_schedule_fingerprint;
    out["final_train_loss"] = final_train_loss;
    out["trainable_params"] = trainable_params;
    out["total_params"] = total_params;
    out["train_time_s"] = train_time_s;
    nlohmann::ordered_json splits = nlohmann::ordered_json::object();
    for (const auto& [split, report] : metrics) {
        splits[split] = nlohmann::ordered_json::parse(report.to_json());
    }
    out["metrics"] = splits;
    return out.dump(2);
}

}  // namespace pf
