#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pf/ops.hpp"
#include "pf/tensor.hpp"

namespace pf {

/// Architecture hyperparameters of the toy decoder-only LM.
struct ModelSpec {
    int n_layers = 2;
    int d_model = 16;
    int n_heads = 2;
    int d_ff = 64;
    int vocab_size = 64;
    int max_seq = 64;
    bool tie_output_head = true;
    double ln_eps = 1e-5;

    /// Throws ConfigError naming the violated constraint.
    void validate() const;

    /// Stable hash of the spec fields; checkpoint compatibility key.
    std::uint64_t fingerprint() const;

    bool operator==(const ModelSpec&) const = default;
};

/// The fixed reference spec used throughout the bundled tests and docs.
ModelSpec reference_spec();

/// Wrapper applied to a named computation site. Receives the site input
/// and the untransformed output; returns the replacement output.
using SiteTransform = std::function<Tensor(const Tensor& input, const Tensor& output)>;

/// Per-layer supplier of prepended key/value rows, shapes [p,d] each.
using KvPrefixSupplier = std::function<std::pair<Tensor, Tensor>(int layer)>;

/// Supplier of virtual-token embeddings [n,d] prepended to the input.
using PrependSupplier = std::function<Tensor()>;

/// Decoder-only transformer with named parameters and per-site hook
/// slots. Parameter names are dotted paths (layers.1.attn.q.weight) and
/// the name set is a pure function of the spec. With every hook slot
/// empty, forward is the plain transformer forward.
class TransformerModel {
   public:
    TransformerModel(ModelSpec spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }

    /// Logits over the vocabulary, shape [T', vocab] where T' is the
    /// token count plus any prepended virtual tokens.
    Tensor forward(const std::vector<int>& tokens) const;

    // --- parameters ---
    Tensor param(const std::string& name) const;
    bool has_param(const std::string& name) const;
    std::vector<std::string> parameter_names() const;       // base + injected
    std::vector<std::string> base_parameter_names() const;
    std::vector<std::string> injected_parameter_names() const;
    std::int64_t count_parameters(bool trainable_only) const;

    /// All trainable tensors by name, in sorted-name order.
    std::vector<std::pair<std::string, Tensor>> trainable_parameters() const;

    // --- tuner attachment surface ---
    void freeze_all();
    void add_injected(const std::string& name, Tensor t);
    void add_site_transform(const std::string& site, SiteTransform fn);
    void set_kv_prefix_supplier(KvPrefixSupplier fn);
    void set_prepend_supplier(PrependSupplier fn);
    /// Drops injected tensors and all hooks; parameters stay as-is.
    void clear_attachment();

    bool attached() const { return attached_; }
    void set_attached(bool v) { attached_ = v; }

    /// Names of linear computation sites (layers.0.attn.q, ...), the
    /// resolvable targets for weight-delta tuners.
    std::vector<std::string> linear_sites() const;
    /// Names of rescalable sites: every linear site plus layers.i.ffn.act.
    std::vector<std::string> rescale_sites() const;
    /// Output width of a site (d_model, or d_ff for ffn.up / ffn.act).
    int site_output_dim(const std::string& site) const;

   private:
    Tensor apply_site(const std::string& site, const Tensor& in, Tensor out) const;
    Tensor attention_block(int layer, const Tensor& ln1) const;
    Tensor ffn_block(int layer, const Tensor& ln2) const;

    ModelSpec spec_;
    std::uint64_t seed_;
    std::map<std::string, Tensor> params_;
    std::map<std::string, Tensor> injected_;
    std::map<std::string, std::vector<SiteTransform>> site_transforms_;
    KvPrefixSupplier kv_prefix_;
    PrependSupplier prepend_;
    bool attached_ = false;
};

/// Builds a model with normal(0, 0.02) weights, unit layer-norm gains,
/// zero biases; deterministic in the seed.
TransformerModel build_model(const ModelSpec& spec, std::uint64_t seed);

}  // namespace pf
