#include "pf/methods.hpp"

#include <algorithm>

#include "pf/errors.hpp"
#include "pf/ops.hpp"

namespace pf::methods {

namespace {

void note_injected(StepContext& ctx, const std::string& name, Tensor t) {
    t.set_requires_grad(true);
    ctx.model.add_injected(name, t);
    ctx.handle.injected.push_back(name);
}

std::vector<std::string> resolve_suffixes(const std::vector<std::string>& patterns,
                                          const std::vector<std::string>& names,
                                          const char* what) {
    std::vector<std::string> matched;
    for (const auto& name : names) {
        for (const auto& pattern : patterns) {
            if (name.ends_with(pattern)) {
                matched.push_back(name);
                break;
            }
        }
    }
    if (matched.empty()) {
        std::string joined;
        for (const auto& p : patterns) {
            if (!joined.empty()) joined += ", ";
            joined += p;
        }
        throw ConfigError(std::string(what) + " patterns [" + joined + "] matched nothing");
    }
    return matched;
}

Tensor mlp2(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
            const Tensor& b2) {
    return add(matmul(gelu(add(matmul(x, w1), b1)), w2), b2);
}

}  // namespace

void apply_unfreeze(StepContext& ctx, const std::vector<std::string>& patterns) {
    const auto matched =
        resolve_suffixes(patterns, ctx.model.base_parameter_names(), "unfreeze");
    for (const auto& name : matched) {
        ctx.model.param(name).set_requires_grad(true);
        ctx.handle.unfrozen_base.push_back(name);
    }
    ctx.handle.hook_records.push_back("unfreeze: " + std::to_string(matched.size()) +
                                      " parameters");
}

void apply_low_rank_delta(StepContext& ctx, std::int64_t r, double alpha,
                          const std::vector<std::string>& targets) {
    if (r < 1) throw ConfigError("low_rank_delta: rank must be >= 1");
    if (alpha <= 0.0) throw ConfigError("low_rank_delta: alpha must be positive");
    const auto sites = resolve_suffixes(targets, ctx.model.linear_sites(), "target");
    const double scaling = alpha / static_cast<double>(r);
    for (const auto& site : sites) {
        const Tensor w = ctx.model.param(site + ".weight");
        const int d_in = w.dim(0), d_out = w.dim(1);
        Tensor a = Tensor::randn({static_cast<int>(r), d_in}, 0.02, ctx.rng);
        Tensor b = Tensor::zeros({d_out, static_cast<int>(r)});
        const std::string a_name = ctx.prefix + site + ".A";
        const std::string b_name = ctx.prefix + site + ".B";
        note_injected(ctx, a_name, a);
        note_injected(ctx, b_name, b);
        ctx.model.add_site_transform(site, [a, b, scaling](const Tensor& in, const Tensor& out) {
            return add(out, scale(matmul_nt(matmul_nt(in, a), b), scaling));
        });
        ctx.handle.lora_sites.push_back({site, a_name, b_name, scaling});
        ctx.handle.hook_records.push_back("low_rank_delta on " + site);
    }
    ctx.handle.mergeable = true;
}

void apply_rescale(StepContext& ctx, const std::vector<std::string>& sites) {
    const auto resolved = resolve_suffixes(sites, ctx.model.rescale_sites(), "rescale");
    for (const auto& site : resolved) {
        Tensor l = Tensor::ones({ctx.model.site_output_dim(site)});
        note_injected(ctx, ctx.prefix + site + ".scale", l);
        ctx.model.add_site_transform(
            site, [l](const Tensor&, const Tensor& out) { return mul(out, l); });
        ctx.handle.hook_records.push_back("rescale on " + site);
    }
}

void apply_bottleneck(StepContext& ctx, std::int64_t bottleneck_dim,
                      const std::string& placement) {
    if (bottleneck_dim < 1) throw ConfigError("bottleneck: bottleneck_dim must be >= 1");
    if (placement != "sequential" && placement != "parallel") {
        throw ConfigError("bottleneck: placement must be sequential or parallel, got '" +
                          placement + "'");
    }
    const int d = ctx.model.spec().d_model;
    const int b = static_cast<int>(bottleneck_dim);
    const bool parallel = placement == "parallel";
    for (int i = 0; i < ctx.model.spec().n_layers; ++i) {
        const std::string layer = "layers." + std::to_string(i) + ".";
        const std::vector<std::string> sublayers =
            parallel ? std::vector<std::string>{"ffn"} : std::vector<std::string>{"attn", "ffn"};
        for (const auto& sub : sublayers) {
            const std::string site = layer + sub;
            const std::string base = ctx.prefix + site + ".";
            Tensor down_w = Tensor::randn({d, b}, 0.02, ctx.rng);
            Tensor down_b = Tensor::zeros({b});
            // Zero up-projection and bias keep the block an exact
            // identity until training moves them.
            Tensor up_w = Tensor::zeros({b, d});
            Tensor up_b = Tensor::zeros({d});
            note_injected(ctx, base + "down.weight", down_w);
            note_injected(ctx, base + "down.bias", down_b);
            note_injected(ctx, base + "up.weight", up_w);
            note_injected(ctx, base + "up.bias", up_b);
            auto delta = [down_w, down_b, up_w, up_b](const Tensor& h) {
                return mlp2(h, down_w, down_b, up_w, up_b);
            };
            if (parallel) {
                ctx.model.add_site_transform(
                    site, [delta](const Tensor& in, const Tensor& out) {
                        return add(out, delta(in));
                    });
            } else {
                ctx.model.add_site_transform(
                    site, [delta](const Tensor&, const Tensor& out) {
                        return add(out, delta(out));
                    });
            }
            ctx.handle.hook_records.push_back("bottleneck(" + placement + ") on " + site);
        }
    }
}

void apply_virtual_tokens(StepContext& ctx, std::int64_t num_virtual_tokens,
                          const std::string& init, const std::string& encoder,
                          std::int64_t encoder_hidden) {
    if (num_virtual_tokens < 1) {
        throw ConfigError("virtual_tokens: num_virtual_tokens must be >= 1");
    }
    if (init != "random" && init != "vocab_sample") {
        throw ConfigError("virtual_tokens: init must be random or vocab_sample, got '" + init +
                          "'");
    }
    if (encoder != "none" && encoder != "mlp") {
        throw ConfigError("virtual_tokens: encoder must be none or mlp, got '" + encoder + "'");
    }
    const int n = static_cast<int>(num_virtual_tokens);
    const int d = ctx.model.spec().d_model;
    if (n >= ctx.model.spec().max_seq) {
        throw ConfigError("virtual_tokens: " + std::to_string(n) +
                          " virtual tokens leave no room under max_seq=" +
                          std::to_string(ctx.model.spec().max_seq));
    }

    auto initial_rows = [&]() {
        if (init == "random") return Tensor::randn({n, d}, 0.02, ctx.rng);
        // vocab_sample: copy embedding rows chosen by a seeded draw
        // without replacement.
        const Tensor emb = ctx.model.param("emb.weight");
        const int vocab = emb.dim(0);
        std::vector<int> ids(static_cast<std::size_t>(vocab));
        for (int i = 0; i < vocab; ++i) ids[static_cast<std::size_t>(i)] = i;
        ctx.rng.shuffle(ids);
        std::vector<double> rows(static_cast<std::size_t>(n) * d);
        for (int i = 0; i < n; ++i) {
            const int row = ids[static_cast<std::size_t>(i % vocab)];
            std::copy_n(emb.data().begin() + row * d, d, rows.begin() + i * d);
        }
        return Tensor::from_data({n, d}, std::move(rows));
    };

    if (encoder == "none") {
        Tensor p = initial_rows();
        note_injected(ctx, ctx.prefix + "embeddings", p);
        ctx.model.set_prepend_supplier([p]() { return p; });
        ctx.handle.hook_records.push_back("virtual_tokens: " + std::to_string(n) + " rows");
    } else {
        if (encoder_hidden < 1) {
            throw ConfigError("virtual_tokens: encoder_hidden must be >= 1");
        }
        const int h = static_cast<int>(encoder_hidden);
        Tensor seeds = Tensor::randn({n, d}, 0.02, ctx.rng);
        Tensor w1 = Tensor::randn({d, h}, 0.02, ctx.rng);
        Tensor b1 = Tensor::zeros({h});
        Tensor w2 = Tensor::randn({h, d}, 0.02, ctx.rng);
        Tensor b2 = Tensor::zeros({d});
        note_injected(ctx, ctx.prefix + "seeds", seeds);
        note_injected(ctx, ctx.prefix + "encoder.in.weight", w1);
        note_injected(ctx, ctx.prefix + "encoder.in.bias", b1);
        note_injected(ctx, ctx.prefix + "encoder.out.weight", w2);
        note_injected(ctx, ctx.prefix + "encoder.out.bias", b2);
        // Virtual rows are re-encoded from the seeds on every forward.
        ctx.model.set_prepend_supplier(
            [seeds, w1, b1, w2, b2]() { return mlp2(seeds, w1, b1, w2, b2); });
        ctx.handle.hook_records.push_back("virtual_tokens via mlp encoder: " +
                                          std::to_string(n) + " rows");
    }
    ctx.handle.virtual_tokens = n;
}

void apply_kv_prefix(StepContext& ctx, std::int64_t prefix_len, const std::string& reparam,
                     std::int64_t mlp_hidden) {
    if (prefix_len < 1) throw ConfigError("kv_prefix: prefix_len must be >= 1");
    if (reparam != "flat" && reparam != "mlp") {
        throw ConfigError("kv_prefix: reparam must be flat or mlp, got '" + reparam + "'");
    }
    const int p = static_cast<int>(prefix_len);
    const int d = ctx.model.spec().d_model;
    const int layers = ctx.model.spec().n_layers;

    if (reparam == "flat") {
        std::vector<std::pair<Tensor, Tensor>> blocks;
        blocks.reserve(static_cast<std::size_t>(layers));
        for (int i = 0; i < layers; ++i) {
            const std::string base = ctx.prefix + "layers." + std::to_string(i) + ".";
            Tensor k = Tensor::randn({p, d}, 0.02, ctx.rng);
            Tensor v = Tensor::randn({p, d}, 0.02, ctx.rng);
            note_injected(ctx, base + "k", k);
            note_injected(ctx, base + "v", v);
            blocks.emplace_back(k, v);
        }
        ctx.model.set_kv_prefix_supplier(
            [blocks](int layer) { return blocks[static_cast<std::size_t>(layer)]; });
        ctx.handle.hook_records.push_back("kv_prefix(flat): " + std::to_string(p) +
                                          " rows per layer");
    } else {
        if (mlp_hidden < 1) throw ConfigError("kv_prefix: mlp_hidden must be >= 1");
        const int h = static_cast<int>(mlp_hidden);
        Tensor seed = Tensor::randn({p, d}, 0.02, ctx.rng);
        Tensor w1 = Tensor::randn({d, h}, 0.02, ctx.rng);
        Tensor b1 = Tensor::zeros({h});
        note_injected(ctx, ctx.prefix + "seed", seed);
        note_injected(ctx, ctx.prefix + "encoder.in.weight", w1);
        note_injected(ctx, ctx.prefix + "encoder.in.bias", b1);
        struct Head {
            Tensor kw, kb, vw, vb;
        };
        std::vector<Head> heads;
        heads.reserve(static_cast<std::size_t>(layers));
        for (int i = 0; i < layers; ++i) {
            const std::string base = ctx.prefix + "encoder.layers." + std::to_string(i) + ".";
            Head head{Tensor::randn({h, d}, 0.02, ctx.rng), Tensor::zeros({d}),
                      Tensor::randn({h, d}, 0.02, ctx.rng), Tensor::zeros({d})};
            note_injected(ctx, base + "k.weight", head.kw);
            note_injected(ctx, base + "k.bias", head.kb);
            note_injected(ctx, base + "v.weight", head.vw);
            note_injected(ctx, base + "v.bias", head.vb);
            heads.push_back(head);
        }
        ctx.model.set_kv_prefix_supplier([seed, w1, b1, heads](int layer) {
            Tensor hidden = gelu(add(matmul(seed, w1), b1));
            const Head& head = heads[static_cast<std::size_t>(layer)];
            Tensor k = add(matmul(hidden, head.kw), head.kb);
            Tensor v = add(matmul(hidden, head.vw), head.vb);
            return std::make_pair(k, v);
        });
        ctx.handle.hook_records.push_back("kv_prefix(mlp): " + std::to_string(p) +
                                          " rows per layer");
    }
}

}  // namespace pf::methods

namespace pf {

const std::map<std::string, std::pair<std::string, std::string>>& builtin_method_sources() {
    static const std::map<std::string, std::pair<std::string, std::string>> sources = {
        {"lora",
         {R"(
[method]
peft_type = "lora"
family = "reparametrized"
prefix = "lora."

[hyperparameters.r]
kind = "int"
default = 2
min = 1

[hyperparameters.alpha]
kind = "float"
default = 4.0
gt = 0.0

[hyperparameters.targets]
kind = "pattern"
default = ["attn.q", "attn.v"]
)",
          R"(
[[impl]]
primitive = "low_rank_delta"
)"}},
        {"prompt_tuning",
         {R"(
[method]
peft_type = "prompt_tuning"
family = "soft_prompt"
prefix = "prompt."

[hyperparameters.num_virtual_tokens]
kind = "int"
default = 8
min = 1

[hyperparameters.init]
kind = "string"
default = "random"
choices = ["random", "vocab_sample"]
)",
          R"(
[[impl]]
primitive = "virtual_tokens"
encoder = "none"
)"}},
        {"prefix_tuning",
         {R"(
[method]
peft_type = "prefix_tuning"
family = "soft_prompt"
prefix = "prefix."

[hyperparameters.prefix_len]
kind = "int"
default = 4
min = 1

[hyperparameters.reparam]
kind = "string"
default = "flat"
choices = ["flat", "mlp"]

[hyperparameters.mlp_hidden]
kind = "int"
default = 32
min = 1
)",
          R"(
[[impl]]
primitive = "kv_prefix"
)"}},
        {"p_tuning",
         {R"(
[method]
peft_type = "p_tuning"
family = "soft_prompt"
prefix = "ptuning."

[hyperparameters.num_virtual_tokens]
kind = "int"
default = 8
min = 1

[hyperparameters.encoder_hidden]
kind = "int"
default = 32
min = 1
)",
          R"(
[[impl]]
primitive = "virtual_tokens"
encoder = "mlp"
)"}},
        {"ia3",
         {R"(
[method]
peft_type = "ia3"
family = "adapter"
prefix = "ia3."
)",
          R"(
[[impl]]
primitive = "rescale"
sites = ["attn.k", "attn.v", "ffn.act"]
)"}},
        {"bottleneck",
         {R"(
[method]
peft_type = "bottleneck"
family = "adapter"
prefix = "adapter."

[hyperparameters.bottleneck_dim]
kind = "int"
default = 4
min = 1
)",
          R"(
[[impl]]
primitive = "bottleneck"
placement = "sequential"
)"}},
        {"parallel_adapter",
         {R"(
[method]
peft_type = "parallel_adapter"
family = "adapter"
prefix = "padapter."

[hyperparameters.bottleneck_dim]
kind = "int"
default = 4
min = 1
)",
          R"(
[[impl]]
primitive = "bottleneck"
placement = "parallel"
)"}},
        {"bitfit",
         {R"(
[method]
peft_type = "bitfit"
family = "selective"
prefix = "bitfit."
)",
          R"(
[[impl]]
primitive = "unfreeze"
patterns = [".bias", ".beta"]
)"}},
        {"lntuning",
         {R"(
[method]
peft_type = "lntuning"
family = "selective"
prefix = "lntuning."
)",
          R"(
[[impl]]
primitive = "unfreeze"
patterns = [".gamma", ".beta"]
)"}},
    };
    return sources;
}

}  // namespace pf
