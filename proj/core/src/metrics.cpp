#include "pf/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <json.hpp>

#include "pf/errors.hpp"

namespace pf {

std::string MetricReport::to_json() const {
    nlohmann::ordered_json out;
    out["n_examples"] = n_examples;
    if (token_accuracy) out["token_accuracy"] = *token_accuracy;
    if (accuracy) out["accuracy"] = *accuracy;
    if (macro_f1) out["macro_f1"] = *macro_f1;
    out["invalid_rate"] = invalid_rate;
    if (pscp) out["pscp"] = *pscp;
    for (const auto& [label, counts] : class_counts) {
        out["tp." + label] = counts.tp;
        out["fp." + label] = counts.fp;
        out["fn." + label] = counts.fn;
    }
    return out.dump();
}

std::string normalize_label(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out = s.substr(b, e - b);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

MetricReport classification_scores(const std::vector<std::string>& preds,
                                   const std::vector<std::string>& golds,
                                   const std::vector<std::string>& label_set) {
    if (preds.size() != golds.size()) {
        throw DataError("classification_scores: " + std::to_string(preds.size()) +
                        " predictions vs " + std::to_string(golds.size()) + " golds");
    }
    if (label_set.empty()) throw DataError("classification_scores: empty label set");

    std::set<std::string> labels;
    for (const auto& l : label_set) labels.insert(normalize_label(l));

    MetricReport report;
    report.n_examples = static_cast<int>(preds.size());
    for (const auto& l : labels) report.class_counts[l] = {};

    std::set<std::string> touched;
    int correct = 0, invalid = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const std::string gold = normalize_label(golds[i]);
        if (!labels.count(gold)) {
            throw DataError("classification_scores: gold '" + golds[i] +
                            "' outside the label set");
        }
        const std::string pred = normalize_label(preds[i]);
        touched.insert(gold);
        if (!labels.count(pred)) {
            ++invalid;
            ++report.class_counts[gold].fn;
            continue;
        }
        touched.insert(pred);
        if (pred == gold) {
            ++correct;
            ++report.class_counts[gold].tp;
        } else {
            ++report.class_counts[pred].fp;
            ++report.class_counts[gold].fn;
        }
    }

    const double n = static_cast<double>(preds.size());
    report.accuracy = n > 0 ? correct / n : 0.0;
    report.invalid_rate = n > 0 ? invalid / n : 0.0;

    double f1_sum = 0.0;
    int f1_classes = 0;
    for (const auto& [label, counts] : report.class_counts) {
        if (!touched.count(label)) continue;  // absent from golds and preds
        double f1 = 0.0;
        if (counts.tp > 0) {
            const double precision = static_cast<double>(counts.tp) / (counts.tp + counts.fp);
            const double recall = static_cast<double>(counts.tp) / (counts.tp + counts.fn);
            f1 = 2.0 * precision * recall / (precision + recall);
        }
        f1_sum += f1;
        ++f1_classes;
    }
    report.macro_f1 = f1_classes > 0 ? f1_sum / f1_classes : 0.0;
    return report;
}

double token_accuracy(const std::vector<int>& pred_ids, const std::vector<int>& gold_ids,
                      const std::vector<bool>& supervised) {
    if (pred_ids.size() != gold_ids.size() || gold_ids.size() != supervised.size()) {
        throw DataError("token_accuracy: misaligned inputs");
    }
    int total = 0, correct = 0;
    for (std::size_t i = 0; i < supervised.size(); ++i) {
        if (!supervised[i]) continue;
        ++total;
        if (pred_ids[i] == gold_ids[i]) ++correct;
    }
    if (total == 0) throw DataError("token_accuracy: zero supervised positions");
    return static_cast<double>(correct) / total;
}

void PSCPConstants::validate() const {
    if (c_p <= 0.0 || c_f <= 0.0 || c_m <= 0.0) {
        throw ConfigError("pscp: reference constants must be positive");
    }
    if (b_p < 0.0 || b_f < 0.0 || b_m < 0.0) {
        throw ConfigError("pscp: importance exponents must be nonnegative");
    }
}

double pscp(double performance, double trainable_params, double time_per_example,
            double peak_memory_bytes, const PSCPConstants& constants) {
    constants.validate();
    if (performance < 0.0 || performance > 1.0) {
        throw DataError("pscp: performance must lie in [0,1]");
    }
    if (trainable_params < 0.0 || time_per_example < 0.0 || peak_memory_bytes < 0.0) {
        throw DataError("pscp: efficiency inputs must be nonnegative");
    }
    auto factor = [](double c, double x, double beta) {
        return beta == 0.0 ? 1.0 : std::pow(c / (c + x), beta);
    };
    return performance * factor(constants.c_p, trainable_params, constants.b_p) *
           factor(constants.c_f, time_per_example, constants.b_f) *
           factor(constants.c_m, peak_memory_bytes, constants.b_m);
}

}  // namespace pf
