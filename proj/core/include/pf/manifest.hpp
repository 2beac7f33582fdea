#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pf {

/// A typed manifest or config value: integer, float, string, or list of
/// strings.
class Value {
   public:
    Value() : v_(std::string{}) {}
    explicit Value(std::int64_t i) : v_(i) {}
    explicit Value(double f) : v_(f) {}
    explicit Value(std::string s) : v_(std::move(s)) {}
    explicit Value(std::vector<std::string> l) : v_(std::move(l)) {}

    bool is_int() const { return std::holds_alternative<std::int64_t>(v_); }
    bool is_float() const { return std::holds_alternative<double>(v_); }
    bool is_string() const { return std::holds_alternative<std::string>(v_); }
    bool is_list() const { return std::holds_alternative<std::vector<std::string>>(v_); }

    std::int64_t as_int() const { return std::get<std::int64_t>(v_); }
    double as_float() const {
        if (is_int()) return static_cast<double>(as_int());
        return std::get<double>(v_);
    }
    const std::string& as_string() const { return std::get<std::string>(v_); }
    const std::vector<std::string>& as_list() const {
        return std::get<std::vector<std::string>>(v_);
    }

    /// Canonical text used in listings and fingerprints.
    std::string repr() const;

    bool operator==(const Value&) const = default;

   private:
    std::variant<std::int64_t, double, std::string, std::vector<std::string>> v_;
};

/// Hyperparameter kinds supported by method schemas.
enum class ParamKind { int_k, float_k, string_k, string_list_k, pattern_k };

std::string param_kind_name(ParamKind k);
std::optional<ParamKind> param_kind_from_name(const std::string& name);

/// One entry of a method's hyperparameter schema.
struct HyperparamSchema {
    std::string name;
    ParamKind kind = ParamKind::string_k;
    Value default_value;
    std::optional<double> min;       // inclusive, numeric kinds
    std::optional<double> max;       // inclusive, numeric kinds
    std::optional<double> gt;        // exclusive lower bound
    std::vector<std::string> choices;  // string kind only; empty = free

    bool operator==(const HyperparamSchema&) const = default;
};

/// One step of the declarative tuner composition. Args bind either
/// literal values or $name references into the resolved config.
struct ImplStep {
    std::string primitive;
    std::map<std::string, Value> literals;
    std::map<std::string, std::string> refs;  // arg -> hyperparameter name
    int line = 0;

    bool operator==(const ImplStep&) const = default;
};

/// A discovered (or built-in) method: identity, schema, and composition.
struct MethodManifest {
    std::string peft_type;
    std::string family;  // reparametrized | soft_prompt | adapter | selective
    std::string prefix;  // parameter-name prefix of injected tensors
    std::vector<HyperparamSchema> hyperparameters;
    std::vector<ImplStep> steps;
    std::string origin;  // "builtin" or source directory

    const HyperparamSchema* find_hyperparameter(const std::string& name) const;
    std::vector<std::string> hyperparameter_names() const;

    bool equivalent_to(const MethodManifest& other) const;  // ignores origin
};

/// Parses the two-file method descriptor (schema file + composition
/// file). Throws ConfigError carrying <origin>:<line> on syntax or
/// validation failures.
MethodManifest parse_method_manifest(const std::string& manifest_text,
                                     const std::string& impl_text, const std::string& origin);

/// Names of the tuner primitives the composition language understands.
const std::vector<std::string>& known_primitives();

}  // namespace pf
