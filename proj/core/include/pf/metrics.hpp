#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pf {

struct ClassCounts {
    int tp = 0;
    int fp = 0;
    int fn = 0;
};

/// Evaluation outputs. Classification fields stay empty when the run
/// computes token accuracy only.
struct MetricReport {
    std::optional<double> token_accuracy;
    std::optional<double> accuracy;
    std::optional<double> macro_f1;
    std::optional<double> pscp;
    double invalid_rate = 0.0;
    int n_examples = 0;
    std::map<std::string, ClassCounts> class_counts;

    /// Flat JSON text: scalar keys plus dotted per-class count keys.
    std::string to_json() const;
};

/// Normalization applied to predictions and labels before matching:
/// trim whitespace, lowercase.
std::string normalize_label(const std::string& s);

/// Scores generated texts against gold labels over a label set.
/// A prediction outside the set is invalid: it counts as incorrect and
/// contributes a false negative to the gold class but a false positive
/// to no class. Macro-F1 averages per-class F1 over the label set,
/// excluding classes absent from both golds and predictions.
MetricReport classification_scores(const std::vector<std::string>& preds,
                                   const std::vector<std::string>& golds,
                                   const std::vector<std::string>& label_set);

/// Fraction of supervised positions where the predicted id equals gold.
double token_accuracy(const std::vector<int>& pred_ids, const std::vector<int>& gold_ids,
                      const std::vector<bool>& supervised);

/// Reference constants and importance exponents of the efficiency score.
struct PSCPConstants {
    double c_p = 1000.0;  // trainable-parameter scale
    double c_f = 0.01;    // seconds-per-example scale
    double c_m = 1e8;     // peak-memory scale, bytes
    double b_p = 1.0;
    double b_f = 1.0;
    double b_m = 1.0;

    void validate() const;  // C > 0, beta >= 0
};

/// performance * prod_j (C_j / (C_j + x_j))^beta_j over the three
/// efficiency inputs. A zero exponent removes its factor; positive
/// exponents make the score strictly decreasing in that input.
double pscp(double performance, double trainable_params, double time_per_example,
            double peak_memory_bytes, const PSCPConstants& constants);

}  // namespace pf
