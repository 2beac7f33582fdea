#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pf/manifest.hpp"
#include "pf/model.hpp"
#include "pf/registry.hpp"

namespace pf {

/// A resolved hyperparameter set: every schema key present, either
/// user-supplied or defaulted, all constraints checked.
struct TunerConfig {
    std::string peft_type;
    std::map<std::string, Value> values;

    std::int64_t get_int(const std::string& name) const;
    double get_float(const std::string& name) const;
    const std::string& get_string(const std::string& name) const;
    const std::vector<std::string>& get_list(const std::string& name) const;
};

/// Schema-driven parse of raw key->string settings. Unknown keys and
/// constraint violations raise ConfigError; omitted keys take the
/// manifest defaults. List-valued settings are comma-separated.
TunerConfig parse_config(const MethodRegistry& registry, const std::string& peft_type,
                         const std::map<std::string, std::string>& raw);

/// A low-rank delta applied to one linear site; retained for merging.
struct LoraSiteRecord {
    std::string site;
    std::string a_name;
    std::string b_name;
    double scaling = 0.0;
};

/// Live attachment of one tuner to one model: the trainable/frozen
/// partition plus the structural records needed for save and merge.
struct AttachHandle {
    std::string peft_type;
    TunerConfig config;
    std::vector<std::string> injected;       // names carry the manifest prefix
    std::vector<std::string> unfrozen_base;  // selective methods train these
    std::vector<std::string> frozen_base;
    std::vector<std::string> hook_records;   // structural description, for audits
    std::vector<LoraSiteRecord> lora_sites;
    int virtual_tokens = 0;  // prepended positions the loss must skip
    bool mergeable = false;

    /// injected + unfrozen_base, sorted; exactly the persisted set.
    std::vector<std::string> trainable_names() const;
};

/// Freezes the base model, injects the method's tensors and hooks, and
/// returns the partition record. The model must not already carry an
/// attachment; detaching means dropping the handle and rebuilding.
AttachHandle attach(TransformerModel& model, const MethodRegistry& registry,
                    const TunerConfig& config);

/// Writes the adapter checkpoint: versioned header (magic, format
/// version, spec fingerprint, tuner config) followed by the named
/// trainable tensors as little-endian f64 payloads.
void save_adapter(const TransformerModel& model, const AttachHandle& handle,
                  const std::filesystem::path& path);

/// Re-attaches the checkpointed method to a fresh model built from the
/// same spec and restores the saved tensors bit-exactly.
AttachHandle load_adapter(TransformerModel& model, const MethodRegistry& registry,
                          const std::filesystem::path& path);

/// Folds a mergeable method's delta into the base weights, removes the
/// attachment, and returns the model to a fresh fully-trainable state.
void merge(TransformerModel& model, const AttachHandle& handle);

}  // namespace pf
