#include "pf/tuner.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "pf/errors.hpp"
#include "pf/methods.hpp"

namespace pf {

namespace {

std::string join(const std::vector<std::string>& items, const char* sep = ", ") {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += sep;
        out += s;
    }
    return out;
}

std::string trim_copy(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

Value parse_raw_value(const HyperparamSchema& schema, const std::string& raw,
                      const std::string& method) {
    auto bad = [&](const std::string& why) -> ConfigError {
        return ConfigError("method " + method + ": hyperparameter '" + schema.name + "': " + why);
    };
    switch (schema.kind) {
        case ParamKind::int_k: {
            const std::string t = trim_copy(raw);
            std::size_t pos = 0;
            std::int64_t v = 0;
            try {
                v = std::stoll(t, &pos);
            } catch (const std::exception&) {
                throw bad("'" + raw + "' is not an integer");
            }
            if (pos != t.size()) throw bad("'" + raw + "' is not an integer");
            return Value(v);
        }
        case ParamKind::float_k: {
            const std::string t = trim_copy(raw);
            char* end = nullptr;
            const double v = std::strtod(t.c_str(), &end);
            if (end != t.c_str() + t.size() || t.empty()) {
                throw bad("'" + raw + "' is not a number");
            }
            return Value(v);
        }
        case ParamKind::string_k:
            return Value(trim_copy(raw));
        case ParamKind::string_list_k:
        case ParamKind::pattern_k: {
            std::vector<std::string> items;
            std::string cur;
            for (char c : raw + ",") {
                if (c == ',') {
                    const std::string item = trim_copy(cur);
                    if (!item.empty()) items.push_back(item);
                    cur.clear();
                } else {
                    cur += c;
                }
            }
            if (items.empty()) throw bad("list value is empty");
            return Value(std::move(items));
        }
    }
    throw bad("unhandled kind");
}

void check_constraints(const HyperparamSchema& schema, const Value& value,
                       const std::string& method) {
    auto bad = [&](const std::string& why) -> ConfigError {
        return ConfigError("method " + method + ": hyperparameter '" + schema.name + "': " + why);
    };
    if (schema.kind == ParamKind::int_k || schema.kind == ParamKind::float_k) {
        const double v = value.as_float();
        if (schema.min && v < *schema.min) {
            throw bad("value " + value.repr() + " below minimum " + std::to_string(*schema.min));
        }
        if (schema.max && v > *schema.max) {
            throw bad("value " + value.repr() + " above maximum " + std::to_string(*schema.max));
        }
        if (schema.gt && v <= *schema.gt) {
            throw bad("value " + value.repr() + " must be greater than " +
                      std::to_string(*schema.gt));
        }
    }
    if (!schema.choices.empty()) {
        if (std::find(schema.choices.begin(), schema.choices.end(), value.as_string()) ==
            schema.choices.end()) {
            throw bad("'" + value.as_string() + "' is not one of: " + join(schema.choices));
        }
    }
}

/// Per-step argument lookup: step literal, then $ref, then a config key
/// of the same name, then the caller-provided fallback.
class StepArgs {
   public:
    StepArgs(const ImplStep& step, const TunerConfig& config) : step_(step), config_(config) {}

    std::int64_t get_int(const std::string& name, std::optional<std::int64_t> fallback = {}) const {
        if (const Value* v = find(name)) return v->as_int();
        if (fallback) return *fallback;
        throw missing(name);
    }
    double get_float(const std::string& name, std::optional<double> fallback = {}) const {
        if (const Value* v = find(name)) return v->as_float();
        if (fallback) return *fallback;
        throw missing(name);
    }
    std::string get_string(const std::string& name, std::optional<std::string> fallback = {}) const {
        if (const Value* v = find(name)) return v->as_string();
        if (fallback) return *fallback;
        throw missing(name);
    }
    std::vector<std::string> get_list(const std::string& name) const {
        if (const Value* v = find(name)) return v->as_list();
        throw missing(name);
    }

   private:
    const Value* find(const std::string& name) const {
        if (auto it = step_.literals.find(name); it != step_.literals.end()) return &it->second;
        if (auto it = step_.refs.find(name); it != step_.refs.end()) {
            auto cv = config_.values.find(it->second);
            if (cv != config_.values.end()) return &cv->second;
        }
        if (auto it = config_.values.find(name); it != config_.values.end()) return &it->second;
        return nullptr;
    }
    ConfigError missing(const std::string& name) const {
        return ConfigError("method " + config_.peft_type + ": primitive '" + step_.primitive +
                           "' lacks required arg '" + name + "'");
    }

    const ImplStep& step_;
    const TunerConfig& config_;
};

}  // namespace

std::int64_t TunerConfig::get_int(const std::string& name) const {
    return values.at(name).as_int();
}
double TunerConfig::get_float(const std::string& name) const {
    return values.at(name).as_float();
}
const std::string& TunerConfig::get_string(const std::string& name) const {
    return values.at(name).as_string();
}
const std::vector<std::string>& TunerConfig::get_list(const std::string& name) const {
    return values.at(name).as_list();
}

TunerConfig parse_config(const MethodRegistry& registry, const std::string& peft_type,
                         const std::map<std::string, std::string>& raw) {
    if (!registry.contains(peft_type)) {
        throw ConfigError("unknown method '" + peft_type +
                          "'; registered methods: " + join(registry.method_names()));
    }
    const MethodManifest& manifest = registry.manifest(peft_type);
    TunerConfig config;
    config.peft_type = peft_type;
    for (const auto& [key, raw_value] : raw) {
        const HyperparamSchema* schema = manifest.find_hyperparameter(key);
        if (!schema) {
            const auto names = manifest.hyperparameter_names();
            throw ConfigError("method " + peft_type + ": unknown hyperparameter '" + key +
                              "'; valid keys: " +
                              (names.empty() ? std::string("(none)") : join(names)));
        }
        Value value = parse_raw_value(*schema, raw_value, peft_type);
        check_constraints(*schema, value, peft_type);
        config.values.emplace(key, std::move(value));
    }
    for (const auto& schema : manifest.hyperparameters) {
        if (!config.values.count(schema.name)) {
            config.values.emplace(schema.name, schema.default_value);
        }
    }
    return config;
}

std::vector<std::string> AttachHandle::trainable_names() const {
    std::vector<std::string> out = injected;
    out.insert(out.end(), unfrozen_base.begin(), unfrozen_base.end());
    std::sort(out.begin(), out.end());
    return out;
}

AttachHandle attach(TransformerModel& model, const MethodRegistry& registry,
                    const TunerConfig& config) {
    if (model.attached()) {
        throw StateError("model already carries an attachment; rebuild to detach");
    }
    const MethodManifest& manifest = registry.manifest(config.peft_type);

    AttachHandle handle;
    handle.peft_type = config.peft_type;
    handle.config = config;

    model.freeze_all();
    Rng rng = Rng::seeded(model.seed()).derive("attach:" + config.peft_type);
    methods::StepContext ctx{model, rng, manifest.prefix, handle};

    for (const auto& step : manifest.steps) {
        StepArgs args(step, config);
        if (step.primitive == "unfreeze") {
            methods::apply_unfreeze(ctx, args.get_list("patterns"));
        } else if (step.primitive == "low_rank_delta") {
            methods::apply_low_rank_delta(ctx, args.get_int("r"), args.get_float("alpha"),
                                          args.get_list("targets"));
        } else if (step.primitive == "rescale") {
            methods::apply_rescale(ctx, args.get_list("sites"));
        } else if (step.primitive == "bottleneck") {
            methods::apply_bottleneck(ctx, args.get_int("bottleneck_dim"),
                                      args.get_string("placement"));
        } else if (step.primitive == "virtual_tokens") {
            methods::apply_virtual_tokens(ctx, args.get_int("num_virtual_tokens"),
                                          args.get_string("init", "random"),
                                          args.get_string("encoder", "none"),
                                          args.get_int("encoder_hidden", 32));
        } else if (step.primitive == "kv_prefix") {
            methods::apply_kv_prefix(ctx, args.get_int("prefix_len"),
                                     args.get_string("reparam", "flat"),
                                     args.get_int("mlp_hidden", 32));
        } else {
            throw ConfigError("method " + config.peft_type + ": unknown primitive '" +
                              step.primitive + "'");
        }
    }

    const std::set<std::string> unfrozen(handle.unfrozen_base.begin(),
                                         handle.unfrozen_base.end());
    for (const auto& name : model.base_parameter_names()) {
        if (!unfrozen.count(name)) handle.frozen_base.push_back(name);
    }
    model.set_attached(true);
    return handle;
}

void merge(TransformerModel& model, const AttachHandle& handle) {
    if (!handle.mergeable) {
        throw CapabilityError("method '" + handle.peft_type + "' does not support merging");
    }
    for (const auto& rec : handle.lora_sites) {
        Tensor w = model.param(rec.site + ".weight");
        const Tensor a = model.param(rec.a_name);
        const Tensor b = model.param(rec.b_name);
        const int d_in = w.dim(0), d_out = w.dim(1);
        const int r = a.dim(0);
        auto wv = w.mutable_data();
        auto av = a.data();
        auto bv = b.data();
        for (int i = 0; i < d_in; ++i) {
            for (int j = 0; j < d_out; ++j) {
                double delta = 0.0;
                for (int c = 0; c < r; ++c) delta += av[c * d_in + i] * bv[j * r + c];
                wv[i * d_out + j] += rec.scaling * delta;
            }
        }
    }
    model.clear_attachment();
    for (const auto& name : model.base_parameter_names()) {
        model.param(name).set_requires_grad(true);
    }
}

}  // namespace pf
