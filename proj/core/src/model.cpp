#include "pf/model.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "pf/errors.hpp"

namespace pf {

void ModelSpec::validate() const {
    auto positive = [](int v, const char* name) {
        if (v <= 0) throw ConfigError(std::string("model spec: ") + name + " must be positive");
    };
    positive(n_layers, "n_layers");
    positive(d_model, "d_model");
    positive(n_heads, "n_heads");
    positive(d_ff, "d_ff");
    positive(vocab_size, "vocab_size");
    positive(max_seq, "max_seq");
    if (d_model % n_heads != 0) {
        throw ConfigError("model spec: n_heads=" + std::to_string(n_heads) +
                          " does not divide d_model=" + std::to_string(d_model));
    }
    if (ln_eps <= 0.0) throw ConfigError("model spec: ln_eps must be positive");
}

std::uint64_t ModelSpec::fingerprint() const {
    std::uint64_t h = fnv1a64("model-spec-v1");
    h = fnv1a64_mix(h, static_cast<std::uint64_t>(n_layers));
    h = fnv1a64_mix(h, static_cast<std::uint64_t>(d_model));
    h = fnv1a64_mix(h, static_cast<std::uint64_t>(n_heads));
    h = fnv1a64_mix(h, static_cast<std::uint64_t>(d_ff));
    h = fnv1a64_mix(h, static_cast<std::uint64_t>(vocab_size));
    h = fnv1a64_mix(h, static_cast<std::uint64_t>(max_seq));
    h = fnv1a64_mix(h, tie_output_head ? 1u : 0u);
    std::uint64_t eps_bits;
    static_assert(sizeof(eps_bits) == sizeof(ln_eps));
    std::memcpy(&eps_bits, &ln_eps, sizeof(eps_bits));
    h = fnv1a64_mix(h, eps_bits);
    return h;
}

ModelSpec reference_spec() { return ModelSpec{}; }

TransformerModel::TransformerModel(ModelSpec spec, std::uint64_t seed)
    : spec_(spec), seed_(seed) {
    spec_.validate();
    Rng rng = Rng::seeded(seed);
    const int d = spec_.d_model;
    const double std_init = 0.02;

    auto weight = [&](const std::string& name, int rows, int cols) {
        params_.emplace(name, Tensor::randn({rows, cols}, std_init, rng, true));
    };
    auto bias = [&](const std::string& name, int n) {
        params_.emplace(name, Tensor::zeros({n}, true));
    };
    auto norm = [&](const std::string& prefix) {
        params_.emplace(prefix + ".gamma", Tensor::ones({d}, true));
        params_.emplace(prefix + ".beta", Tensor::zeros({d}, true));
    };

    weight("emb.weight", spec_.vocab_size, d);
    weight("pos.weight", spec_.max_seq, d);
    for (int i = 0; i < spec_.n_layers; ++i) {
        const std::string base = "layers." + std::to_string(i) + ".";
        for (const char* proj : {"q", "k", "v", "o"}) {
            weight(base + "attn." + proj + ".weight", d, d);
            bias(base + "attn." + proj + ".bias", d);
        }
        norm(base + "ln1");
        norm(base + "ln2");
        weight(base + "ffn.up.weight", d, spec_.d_ff);
        bias(base + "ffn.up.bias", spec_.d_ff);
        weight(base + "ffn.down.weight", spec_.d_ff, d);
        bias(base + "ffn.down.bias", d);
    }
    norm("ln_f");
    if (!spec_.tie_output_head) weight("head.weight", spec_.vocab_size, d);
}

Tensor TransformerModel::param(const std::string& name) const {
    if (auto it = params_.find(name); it != params_.end()) return it->second;
    if (auto it = injected_.find(name); it != injected_.end()) return it->second;
    throw StateError("unknown parameter: " + name);
}

bool TransformerModel::has_param(const std::string& name) const {
    return params_.count(name) != 0 || injected_.count(name) != 0;
}

std::vector<std::string> TransformerModel::parameter_names() const {
    std::vector<std::string> out;
    out.reserve(params_.size() + injected_.size());
    for (const auto& [name, t] : params_) out.push_back(name);
    for (const auto& [name, t] : injected_) out.push_back(name);
    return out;
}

std::vector<std::string> TransformerModel::base_parameter_names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, t] : params_) out.push_back(name);
    return out;
}

std::vector<std::string> TransformerModel::injected_parameter_names() const {
    std::vector<std::string> out;
    out.reserve(injected_.size());
    for (const auto& [name, t] : injected_) out.push_back(name);
    return out;
}

std::int64_t TransformerModel::count_parameters(bool trainable_only) const {
    std::int64_t total = 0;
    for (const auto* table : {&params_, &injected_}) {
        for (const auto& [name, t] : *table) {
            if (!trainable_only || t.requires_grad()) total += t.numel();
        }
    }
    return total;
}

std::vector<std::pair<std::string, Tensor>> TransformerModel::trainable_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto* table : {&params_, &injected_}) {
        for (const auto& [name, t] : *table) {
            if (t.requires_grad()) out.emplace_back(name, t);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

void TransformerModel::freeze_all() {
    for (auto& [name, t] : params_) t.set_requires_grad(false);
    for (auto& [name, t] : injected_) t.set_requires_grad(false);
}

void TransformerModel::add_injected(const std::string& name, Tensor t) {
    if (has_param(name)) throw StateError("parameter already exists: " + name);
    injected_.emplace(name, std::move(t));
}

void TransformerModel::add_site_transform(const std::string& site, SiteTransform fn) {
    site_transforms_[site].push_back(std::move(fn));
}

void TransformerModel::set_kv_prefix_supplier(KvPrefixSupplier fn) { kv_prefix_ = std::move(fn); }

void TransformerModel::set_prepend_supplier(PrependSupplier fn) { prepend_ = std::move(fn); }

void TransformerModel::clear_attachment() {
    injected_.clear();
    site_transforms_.clear();
    kv_prefix_ = nullptr;
    prepend_ = nullptr;
    attached_ = false;
}

std::vector<std::string> TransformerModel::linear_sites() const {
    std::vector<std::string> out;
    for (int i = 0; i < spec_.n_layers; ++i) {
        const std::string base = "layers." + std::to_string(i) + ".";
        for (const char* s : {"attn.q", "attn.k", "attn.v", "attn.o", "ffn.up", "ffn.down"}) {
            out.push_back(base + s);
        }
    }
    return out;
}

std::vector<std::string> TransformerModel::rescale_sites() const {
    std::vector<std::string> out = linear_sites();
    for (int i = 0; i < spec_.n_layers; ++i) {
        out.push_back("layers." + std::to_string(i) + ".ffn.act");
    }
    std::sort(out.begin(), out.end());
    return out;
}

int TransformerModel::site_output_dim(const std::string& site) const {
    if (site.ends_with("ffn.up") || site.ends_with("ffn.act")) return spec_.d_ff;
    return spec_.d_model;
}

Tensor TransformerModel::apply_site(const std::string& site, const Tensor& in, Tensor out) const {
    auto it = site_transforms_.find(site);
    if (it == site_transforms_.end()) return out;
    for (const auto& fn : it->second) out = fn(in, out);
    return out;
}

Tensor TransformerModel::attention_block(int layer, const Tensor& ln1) const {
    const std::string base = "layers." + std::to_string(layer) + ".";
    auto proj = [&](const char* name) {
        const std::string site = base + "attn." + name;
        Tensor y = add(matmul(ln1, param(site + ".weight")), param(site + ".bias"));
        return apply_site(site, ln1, std::move(y));
    };
    Tensor q = proj("q");
    Tensor k = proj("k");
    Tensor v = proj("v");
    if (kv_prefix_) {
        auto [kp, vp] = kv_prefix_(layer);
        k = concat_rows(kp, k);
        v = concat_rows(vp, v);
    }
    Tensor attn = causal_attention(q, k, v, spec_.n_heads);
    const std::string o_site = base + "attn.o";
    Tensor o = add(matmul(attn, param(o_site + ".weight")), param(o_site + ".bias"));
    o = apply_site(o_site, attn, std::move(o));
    return apply_site(base + "attn", ln1, std::move(o));
}

Tensor TransformerModel::ffn_block(int layer, const Tensor& ln2) const {
    const std::string base = "layers." + std::to_string(layer) + ".";
    Tensor u = add(matmul(ln2, param(base + "ffn.up.weight")), param(base + "ffn.up.bias"));
    u = apply_site(base + "ffn.up", ln2, std::move(u));
    Tensor a = apply_site(base + "ffn.act", u, gelu(u));
    Tensor dn = add(matmul(a, param(base + "ffn.down.weight")), param(base + "ffn.down.bias"));
    dn = apply_site(base + "ffn.down", a, std::move(dn));
    return apply_site(base + "ffn", ln2, std::move(dn));
}

Tensor TransformerModel::forward(const std::vector<int>& tokens) const {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] < 0 || tokens[i] >= spec_.vocab_size) {
            throw DataError("token id " + std::to_string(tokens[i]) + " at position " +
                            std::to_string(i) + " outside vocabulary of " +
                            std::to_string(spec_.vocab_size));
        }
    }
    Tensor x = embedding(param("emb.weight"), tokens);
    if (prepend_) {
        Tensor virtual_rows = prepend_();
        x = concat_rows(virtual_rows, x);
    }
    const int total_len = x.dim(0);
    if (total_len > spec_.max_seq) {
        throw LengthError("sequence of " + std::to_string(total_len) +
                          " positions (including virtual tokens) exceeds max_seq=" +
                          std::to_string(spec_.max_seq));
    }
    std::vector<int> positions(static_cast<std::size_t>(total_len));
    std::iota(positions.begin(), positions.end(), 0);
    x = add(x, embedding(param("pos.weight"), positions));

    for (int i = 0; i < spec_.n_layers; ++i) {
        const std::string base = "layers." + std::to_string(i) + ".";
        Tensor ln1 = layer_norm(x, param(base + "ln1.gamma"), param(base + "ln1.beta"),
                                spec_.ln_eps);
        x = add(x, attention_block(i, ln1));
        Tensor ln2 = layer_norm(x, param(base + "ln2.gamma"), param(base + "ln2.beta"),
                                spec_.ln_eps);
        x = add(x, ffn_block(i, ln2));
    }
    x = layer_norm(x, param("ln_f.gamma"), param("ln_f.beta"), spec_.ln_eps);
    const Tensor& head = spec_.tie_output_head ? param("emb.weight") : param("head.weight");
    return matmul_nt(x, head);
}

TransformerModel build_model(const ModelSpec& spec, std::uint64_t seed) {
    return TransformerModel(spec, seed);
}

}  // namespace pf
