#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pf/experiment.hpp"

namespace pf {

/// Builds the model from the config seed, attaches the method, trains
/// over seeded shuffled batches, evaluates the configured splits, and
/// writes adapter.ckpt plus report.json into output_dir.
RunReport train(const ExperimentConfig& config);

/// Loads an adapter checkpoint into a fresh model built from the same
/// config and evaluates the configured splits; writes report.json.
RunReport predict(const ExperimentConfig& config, const std::filesystem::path& checkpoint);

struct BenchCell {
    std::string method;
    std::string dataset;
    bool ok = false;
    double macro_f1 = 0.0;
    double pscp_value = 0.0;
    bool has_pscp = false;
    std::string batch_schedule_fingerprint;
};

struct BenchResult {
    std::vector<std::string> methods;   // row order
    std::vector<std::string> datasets;  // column order
    std::vector<BenchCell> cells;
    bool all_ok = true;
    std::string markdown;
    std::string json;
};

/// Runs train+eval per config and assembles a methods x datasets
/// macro-F1 table. All configs must share eval settings. Failed runs
/// mark their cell and flip all_ok. Writes bench.md and bench.json next
/// to the runs (parent of the first config's output_dir).
BenchResult bench(const std::vector<ExperimentConfig>& configs);

}  // namespace pf
