#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pf/metrics.hpp"
#include "pf/model.hpp"
#include "pf/optimizer.hpp"

namespace pf {

struct TrainSettings {
    std::optional<int> steps;   // exactly one of steps / epochs
    std::optional<int> epochs;
    int batch_size = 8;
    double lr = 5e-3;
    enum class Schedule { constant, linear_warmup };
    Schedule schedule = Schedule::constant;
    int warmup_steps = 0;
    std::uint64_t seed = 0;
    bool seed_given = false;  // seed is required; 0 is a valid value
    OptimizerSettings::Kind optimizer = OptimizerSettings::Kind::adamw;
    double weight_decay = 0.0;
};

struct EvalSettings {
    int max_new_tokens = 4;
    bool compute_classification_metrics = true;
    bool compute_pscp = false;
    PSCPConstants pscp;

    bool operator==(const EvalSettings&) const = default;
};

/// One experiment: model, method, dataset, training and evaluation
/// settings. Parsed strictly from YAML: unknown keys anywhere are
/// config errors.
struct ExperimentConfig {
    ModelSpec model;
    std::string peft_type;
    std::map<std::string, std::string> method_raw;  // raw hyperparameters
    std::string dataset;
    std::vector<std::string> eval_splits = {"test"};
    TrainSettings train;
    EvalSettings eval;
    std::filesystem::path output_dir;

    static ExperimentConfig from_yaml_file(const std::filesystem::path& path);
    static ExperimentConfig from_yaml_string(const std::string& text,
                                             const std::string& origin = "<config>");

    void validate() const;

    /// Stable hash of the resolved settings (output_dir excluded), so
    /// reordering keys in the YAML cannot change it.
    std::string fingerprint() const;
};

struct RunReport {
    std::string config_fingerprint;
    std::string batch_schedule_fingerprint;
    double final_train_loss = 0.0;
    std::int64_t trainable_params = 0;
    std::int64_t total_params = 0;
    double train_time_s = 0.0;  // informational; excluded from determinism
    std::map<std::string, MetricReport> metrics;  // per evaluated split

    std::string to_json() const;
};

}  // namespace pf
