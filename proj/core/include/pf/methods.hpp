#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pf/rng.hpp"
#include "pf/tuner.hpp"

namespace pf::methods {

/// Shared state threaded through the tuner primitives during attach.
struct StepContext {
    TransformerModel& model;
    Rng& rng;
    const std::string& prefix;
    AttachHandle& handle;
};

void apply_unfreeze(StepContext& ctx, const std::vector<std::string>& patterns);
void apply_low_rank_delta(StepContext& ctx, std::int64_t r, double alpha,
                          const std::vector<std::string>& targets);
void apply_rescale(StepContext& ctx, const std::vector<std::string>& sites);
void apply_bottleneck(StepContext& ctx, std::int64_t bottleneck_dim,
                      const std::string& placement);
void apply_virtual_tokens(StepContext& ctx, std::int64_t num_virtual_tokens,
                          const std::string& init, const std::string& encoder,
                          std::int64_t encoder_hidden);
void apply_kv_prefix(StepContext& ctx, std::int64_t prefix_len, const std::string& reparam,
                     std::int64_t mlp_hidden);

}  // namespace pf::methods

namespace pf {

/// Descriptor sources (schema text, composition text) for the nine
/// built-in methods, keyed by peft_type.
const std::map<std::string, std::pair<std::string, std::string>>& builtin_method_sources();

}  // namespace pf
