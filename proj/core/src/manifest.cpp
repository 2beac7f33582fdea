#include "pf/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

#include "pf/errors.hpp"

namespace pf {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

struct RawEntry {
    Value value;
    int line = 0;
};

struct RawTable {
    std::vector<std::string> path;
    bool array_elem = false;
    int line = 0;
    std::map<std::string, RawEntry> entries;
};

std::vector<std::string> split_path(const std::string& s, const std::string& origin, int line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == '.') {
            if (cur.empty()) fail(origin, line, "empty section path component");
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (cur.empty()) fail(origin, line, "empty section path component");
    out.push_back(cur);
    return out;
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_quote = !in_quote;
        if (line[i] == '#' && !in_quote) return line.substr(0, i);
    }
    return line;
}

std::string parse_quoted(const std::string& s, std::size_t& pos, const std::string& origin,
                         int line) {
    if (s[pos] != '"') fail(origin, line, "expected quoted string");
    ++pos;
    std::string out;
    while (pos < s.size() && s[pos] != '"') {
        if (s[pos] == '\\' && pos + 1 < s.size()) {
            ++pos;
            switch (s[pos]) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: fail(origin, line, std::string("unknown escape \\") + s[pos]);
            }
        } else {
            out += s[pos];
        }
        ++pos;
    }
    if (pos >= s.size()) fail(origin, line, "unterminated string");
    ++pos;  // closing quote
    return out;
}

Value parse_value(const std::string& text, const std::string& origin, int line) {
    const std::string s = trim(text);
    if (s.empty()) fail(origin, line, "missing value");
    if (s.front() == '"') {
        std::size_t pos = 0;
        std::string str = parse_quoted(s, pos, origin, line);
        if (trim(s.substr(pos)).size()) fail(origin, line, "trailing characters after string");
        return Value(std::move(str));
    }
    if (s.front() == '[') {
        if (s.back() != ']') fail(origin, line, "unterminated list");
        std::vector<std::string> items;
        std::size_t pos = 1;
        while (true) {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
            if (pos >= s.size() - 1 || s[pos] == ']') break;
            if (s[pos] != '"') fail(origin, line, "list items must be quoted strings");
            items.push_back(parse_quoted(s, pos, origin, line));
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
            if (pos < s.size() && s[pos] == ',') {
                ++pos;
            }
        }
        return Value(std::move(items));
    }
    // integer
    {
        std::size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
        bool digits_only = i < s.size();
        for (std::size_t j = i; j < s.size(); ++j) {
            if (!std::isdigit(static_cast<unsigned char>(s[j]))) {
                digits_only = false;
                break;
            }
        }
        if (digits_only) return Value(static_cast<std::int64_t>(std::stoll(s)));
    }
    // float
    {
        char* end = nullptr;
        const double d = std::strtod(s.c_str(), &end);
        if (end == s.c_str() + s.size()) return Value(d);
    }
    fail(origin, line, "cannot parse value '" + s + "'");
}

std::vector<RawTable> parse_tables(const std::string& text, const std::string& origin) {
    std::vector<RawTable> tables;
    std::istringstream in(text);
    std::string raw_line;
    int line_no = 0;
    while (std::getline(in, raw_line)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw_line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            RawTable table;
            table.line = line_no;
            std::string inner;
            if (line.starts_with("[[")) {
                if (!line.ends_with("]]")) fail(origin, line_no, "malformed section header");
                table.array_elem = true;
                inner = trim(line.substr(2, line.size() - 4));
            } else {
                if (!line.ends_with("]")) fail(origin, line_no, "malformed section header");
                inner = trim(line.substr(1, line.size() - 2));
            }
            if (inner.empty()) fail(origin, line_no, "empty section name");
            table.path = split_path(inner, origin, line_no);
            tables.push_back(std::move(table));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(origin, line_no, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) fail(origin, line_no, "empty key");
        if (tables.empty()) fail(origin, line_no, "key outside any section");
        Value v = parse_value(line.substr(eq + 1), origin, line_no);
        auto [it, inserted] = tables.back().entries.emplace(key, RawEntry{std::move(v), line_no});
        if (!inserted) fail(origin, line_no, "duplicate key '" + key + "'");
    }
    return tables;
}

const std::vector<std::string> kFamilies = {"reparametrized", "soft_prompt", "adapter",
                                            "selective"};

struct ArgSpec {
    std::string name;
    ParamKind kind;
    bool required;
};

const std::map<std::string, std::vector<ArgSpec>>& primitive_args() {
    static const std::map<std::string, std::vector<ArgSpec>> specs = {
        {"unfreeze", {{"patterns", ParamKind::pattern_k, true}}},
        {"low_rank_delta",
         {{"r", ParamKind::int_k, true},
          {"alpha", ParamKind::float_k, true},
          {"targets", ParamKind::pattern_k, true}}},
        {"rescale", {{"sites", ParamKind::pattern_k, true}}},
        {"bottleneck",
         {{"bottleneck_dim", ParamKind::int_k, true},
          {"placement", ParamKind::string_k, true}}},
        {"virtual_tokens",
         {{"num_virtual_tokens", ParamKind::int_k, true},
          {"init", ParamKind::string_k, false},
          {"encoder", ParamKind::string_k, false},
          {"encoder_hidden", ParamKind::int_k, false}}},
        {"kv_prefix",
         {{"prefix_len", ParamKind::int_k, true},
          {"reparam", ParamKind::string_k, false},
          {"mlp_hidden", ParamKind::int_k, false}}},
    };
    return specs;
}

bool value_matches_kind(const Value& v, ParamKind kind) {
    switch (kind) {
        case ParamKind::int_k: return v.is_int();
        case ParamKind::float_k: return v.is_int() || v.is_float();
        case ParamKind::string_k: return v.is_string();
        case ParamKind::string_list_k:
        case ParamKind::pattern_k: return v.is_list();
    }
    return false;
}

}  // namespace

std::string Value::repr() const {
    if (is_int()) return std::to_string(as_int());
    if (is_float()) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", std::get<double>(v_));
        return buf;
    }
    if (is_string()) return as_string();
    std::string out;
    for (const auto& s : as_list()) {
        if (!out.empty()) out += ",";
        out += s;
    }
    return out;
}

std::string param_kind_name(ParamKind k) {
    switch (k) {
        case ParamKind::int_k: return "int";
        case ParamKind::float_k: return "float";
        case ParamKind::string_k: return "string";
        case ParamKind::string_list_k: return "string_list";
        case ParamKind::pattern_k: return "pattern";
    }
    return "?";
}

std::optional<ParamKind> param_kind_from_name(const std::string& name) {
    if (name == "int") return ParamKind::int_k;
    if (name == "float") return ParamKind::float_k;
    if (name == "string") return ParamKind::string_k;
    if (name == "string_list") return ParamKind::string_list_k;
    if (name == "pattern") return ParamKind::pattern_k;
    return std::nullopt;
}

const HyperparamSchema* MethodManifest::find_hyperparameter(const std::string& name) const {
    for (const auto& h : hyperparameters) {
        if (h.name == name) return &h;
    }
    return nullptr;
}

std::vector<std::string> MethodManifest::hyperparameter_names() const {
    std::vector<std::string> out;
    out.reserve(hyperparameters.size());
    for (const auto& h : hyperparameters) out.push_back(h.name);
    return out;
}

bool MethodManifest::equivalent_to(const MethodManifest& other) const {
    return peft_type == other.peft_type && family == other.family && prefix == other.prefix &&
           hyperparameters == other.hyperparameters && steps == other.steps;
}

const std::vector<std::string>& known_primitives() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [name, spec] : primitive_args()) out.push_back(name);
        return out;
    }();
    return names;
}

MethodManifest parse_method_manifest(const std::string& manifest_text,
                                     const std::string& impl_text, const std::string& origin) {
    MethodManifest m;
    m.origin = origin;

    // --- schema file ---
    for (const auto& table : parse_tables(manifest_text, origin)) {
        if (table.array_elem) fail(origin, table.line, "unexpected array section in manifest");
        if (table.path.size() == 1 && table.path[0] == "method") {
            for (const auto& [key, entry] : table.entries) {
                if (!entry.value.is_string()) {
                    fail(origin, entry.line, "[method] values must be strings");
                }
                if (key == "peft_type") m.peft_type = entry.value.as_string();
                else if (key == "family") m.family = entry.value.as_string();
                else if (key == "prefix") m.prefix = entry.value.as_string();
                else fail(origin, entry.line, "unknown [method] key '" + key + "'");
            }
        } else if (table.path.size() == 2 && table.path[0] == "hyperparameters") {
            HyperparamSchema h;
            h.name = table.path[1];
            bool has_kind = false, has_default = false;
            for (const auto& [key, entry] : table.entries) {
                if (key == "kind") {
                    if (!entry.value.is_string()) fail(origin, entry.line, "kind must be a string");
                    auto k = param_kind_from_name(entry.value.as_string());
                    if (!k) {
                        fail(origin, entry.line,
                             "unknown kind '" + entry.value.as_string() + "'");
                    }
                    h.kind = *k;
                    has_kind = true;
                } else if (key == "default") {
                    h.default_value = entry.value;
                    has_default = true;
                } else if (key == "min" || key == "max" || key == "gt") {
                    if (!entry.value.is_int() && !entry.value.is_float()) {
                        fail(origin, entry.line, key + " must be numeric");
                    }
                    const double bound = entry.value.as_float();
                    if (key == "min") h.min = bound;
                    else if (key == "max") h.max = bound;
                    else h.gt = bound;
                } else if (key == "choices") {
                    if (!entry.value.is_list()) fail(origin, entry.line, "choices must be a list");
                    h.choices = entry.value.as_list();
                } else {
                    fail(origin, entry.line, "unknown hyperparameter key '" + key + "'");
                }
            }
            if (!has_kind) fail(origin, table.line, "hyperparameter '" + h.name + "' lacks kind");
            if (!has_default) {
                fail(origin, table.line, "hyperparameter '" + h.name + "' lacks a default");
            }
            if (!value_matches_kind(h.default_value, h.kind)) {
                fail(origin, table.line, "default for '" + h.name + "' does not match kind " +
                                             param_kind_name(h.kind));
            }
            if (!h.choices.empty()) {
                if (h.kind != ParamKind::string_k) {
                    fail(origin, table.line, "choices apply to string hyperparameters only");
                }
                if (std::find(h.choices.begin(), h.choices.end(),
                              h.default_value.as_string()) == h.choices.end()) {
                    fail(origin, table.line, "default for '" + h.name + "' not among choices");
                }
            }
            if ((h.min || h.max || h.gt) &&
                h.kind != ParamKind::int_k && h.kind != ParamKind::float_k) {
                fail(origin, table.line, "bounds apply to numeric hyperparameters only");
            }
            if (m.find_hyperparameter(h.name)) {
                fail(origin, table.line, "duplicate hyperparameter '" + h.name + "'");
            }
            m.hyperparameters.push_back(std::move(h));
        } else {
            fail(origin, table.line, "unknown manifest section");
        }
    }

    if (m.peft_type.empty()) throw ConfigError(origin + ": missing or empty peft_type");
    if (m.prefix.empty()) throw ConfigError(origin + ": missing or empty prefix");
    if (std::find(kFamilies.begin(), kFamilies.end(), m.family) == kFamilies.end()) {
        throw ConfigError(origin + ": family '" + m.family +
                          "' is not one of reparametrized/soft_prompt/adapter/selective");
    }

    // --- composition file ---
    for (const auto& table : parse_tables(impl_text, origin)) {
        if (!table.array_elem || table.path != std::vector<std::string>{"impl"}) {
            fail(origin, table.line, "composition file allows only [[impl]] sections");
        }
        ImplStep step;
        step.line = table.line;
        for (const auto& [key, entry] : table.entries) {
            if (key == "primitive") {
                if (!entry.value.is_string()) fail(origin, entry.line, "primitive must be a string");
                step.primitive = entry.value.as_string();
            } else if (entry.value.is_string() && entry.value.as_string().starts_with("$")) {
                step.refs[key] = entry.value.as_string().substr(1);
            } else {
                step.literals[key] = entry.value;
            }
        }
        if (step.primitive.empty()) fail(origin, table.line, "step lacks a primitive");
        auto spec_it = primitive_args().find(step.primitive);
        if (spec_it == primitive_args().end()) {
            fail(origin, table.line, "unknown primitive '" + step.primitive + "'");
        }
        const auto& specs = spec_it->second;
        auto arg_spec = [&](const std::string& name) -> const ArgSpec* {
            for (const auto& a : specs)
                if (a.name == name) return &a;
            return nullptr;
        };
        for (const auto& [key, value] : step.literals) {
            const ArgSpec* a = arg_spec(key);
            if (!a) fail(origin, table.line,
                         "primitive '" + step.primitive + "' takes no arg '" + key + "'");
            if (!value_matches_kind(value, a->kind)) {
                fail(origin, table.line, "arg '" + key + "' must be " + param_kind_name(a->kind));
            }
        }
        for (const auto& [key, ref] : step.refs) {
            const ArgSpec* a = arg_spec(key);
            if (!a) fail(origin, table.line,
                         "primitive '" + step.primitive + "' takes no arg '" + key + "'");
            const HyperparamSchema* h = m.find_hyperparameter(ref);
            if (!h) fail(origin, table.line, "$" + ref + " does not name a hyperparameter");
        }
        for (const auto& a : specs) {
            if (!a.required) continue;
            const bool bound = step.literals.count(a.name) || step.refs.count(a.name) ||
                               m.find_hyperparameter(a.name) != nullptr;
            if (!bound) {
                fail(origin, table.line, "primitive '" + step.primitive + "' requires arg '" +
                                             a.name + "' (literal, $ref, or hyperparameter)");
            }
        }
        m.steps.push_back(std::move(step));
    }
    if (m.steps.empty()) throw ConfigError(origin + ": composition defines no steps");
    return m;
}

}  // namespace pf
