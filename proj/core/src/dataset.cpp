#include "pf/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "pf/errors.hpp"

namespace pf {

void DatasetDescriptor::validate() const {
    if (name.empty()) throw ConfigError("dataset descriptor lacks a name");
    if (input_cols.empty()) throw ConfigError("dataset " + name + ": input_cols is empty");
    if (output_col.empty()) throw ConfigError("dataset " + name + ": output_col is empty");
    for (const auto& col : input_cols) {
        if (col == output_col) {
            throw ConfigError("dataset " + name + ": output_col '" + output_col +
                              "' also appears in input_cols");
        }
    }
    if (!label_verbalizer.empty()) {
        std::set<std::string> seen;
        for (const auto& [raw, text] : label_verbalizer) {
            if (!seen.insert(text).second) {
                throw ConfigError("dataset " + name + ": verbalizer is not injective ('" +
                                  text + "' appears twice)");
            }
        }
    }
    if (source == Source::file && split_files.empty()) {
        throw ConfigError("dataset " + name + ": file source declares no splits");
    }
}

std::vector<std::string> DatasetDescriptor::label_texts() const {
    std::vector<std::string> out;
    for (const auto& [raw, text] : label_verbalizer) out.push_back(text);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> DatasetDescriptor::split_names() const {
    std::vector<std::string> out;
    if (source == Source::builtin) {
        for (const auto& [split, size] : split_sizes) out.push_back(split);
    } else {
        for (const auto& [split, file] : split_files) out.push_back(split);
    }
    return out;
}

Example convert(const DatasetDescriptor& descriptor, const Record& record,
                std::size_t record_index) {
    Example out;
    std::string joined;
    for (const auto& col : descriptor.input_cols) {
        auto it = record.find(col);
        if (it == record.end()) {
            throw DataError("dataset " + descriptor.name + ": record " +
                            std::to_string(record_index) + " lacks column '" + col + "'");
        }
        if (!joined.empty()) joined += " [SEP] ";
        joined += it->second;
    }
    out.input = descriptor.instruction ? *descriptor.instruction + "\n" + joined : joined;

    auto it = record.find(descriptor.output_col);
    if (it == record.end()) {
        throw DataError("dataset " + descriptor.name + ": record " +
                        std::to_string(record_index) + " lacks column '" +
                        descriptor.output_col + "'");
    }
    if (!descriptor.label_verbalizer.empty()) {
        auto v = descriptor.label_verbalizer.find(it->second);
        if (v == descriptor.label_verbalizer.end()) {
            throw DataError("dataset " + descriptor.name + ": record " +
                            std::to_string(record_index) + " has label '" + it->second +
                            "' absent from the verbalizer");
        }
        out.output = v->second;
    } else {
        out.output = it->second;
    }
    if (out.input.empty() || out.output.empty()) {
        throw DataError("dataset " + descriptor.name + ": record " +
                        std::to_string(record_index) + " converts to an empty field");
    }
    return out;
}

namespace {

std::string scalar_to_text(const nlohmann::json& v, const std::string& context) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number_float()) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", v.get<double>());
        return buf;
    }
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    throw DataError(context + ": value is not a scalar");
}

std::vector<Record> load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<Record> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
        if (trimmed.empty()) continue;
        nlohmann::json parsed = nlohmann::json::parse(trimmed, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object()) {
            throw DataError(path.string() + ": malformed record at line " +
                            std::to_string(line_no));
        }
        Record record;
        for (const auto& [key, value] : parsed.items()) {
            record[key] = scalar_to_text(value, path.string() + ":" + std::to_string(line_no));
        }
        records.push_back(std::move(record));
    }
    return records;
}

}  // namespace

std::vector<Example> load_split(const DatasetDescriptor& descriptor, const std::string& split,
                                std::uint64_t seed) {
    descriptor.validate();
    std::vector<Record> records;
    if (descriptor.source == DatasetDescriptor::Source::builtin) {
        if (!descriptor.split_sizes.count(split)) {
            throw ConfigError("dataset " + descriptor.name + ": unknown split '" + split + "'");
        }
        records = corpora::generate(descriptor.builtin_id, split, seed);
    } else {
        auto it = descriptor.split_files.find(split);
        if (it == descriptor.split_files.end()) {
            throw ConfigError("dataset " + descriptor.name + ": unknown split '" + split + "'");
        }
        records = load_jsonl(descriptor.base_dir / it->second);
    }
    std::vector<Example> out;
    out.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        out.push_back(convert(descriptor, records[i], i));
    }
    return out;
}

DatasetCatalog DatasetCatalog::bundled() {
    DatasetCatalog catalog;
    for (auto& d : corpora::descriptors()) {
        d.validate();
        catalog.entries_.emplace(d.name, std::move(d));
    }
    return catalog;
}

DatasetCatalog DatasetCatalog::with_registry_file(const std::filesystem::path& datasets_json) {
    DatasetCatalog catalog = bundled();
    std::ifstream in(datasets_json);
    if (!in) throw IoError("cannot read " + datasets_json.string());
    nlohmann::json parsed = nlohmann::json::parse(in, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
        throw ConfigError(datasets_json.string() + " is not a JSON object");
    }
    for (const auto& [name, body] : parsed.items()) {
        DatasetDescriptor d;
        d.name = name;
        d.source = DatasetDescriptor::Source::file;
        d.base_dir = datasets_json.parent_path();
        if (!body.is_object()) {
            throw ConfigError(datasets_json.string() + ": entry '" + name +
                              "' is not an object");
        }
        for (const auto& [key, value] : body.items()) {
            if (key == "source") {
                for (const auto& [split, file] : value.items()) {
                    d.split_files[split] = file.get<std::string>();
                }
            } else if (key == "input_cols") {
                for (const auto& col : value) d.input_cols.push_back(col.get<std::string>());
            } else if (key == "output_col") {
                d.output_col = value.get<std::string>();
            } else if (key == "instruction") {
                d.instruction = value.get<std::string>();
            } else if (key == "label_verbalizer") {
                for (const auto& [raw, text] : value.items()) {
                    d.label_verbalizer[raw] = text.get<std::string>();
                }
            } else if (key == "task_kind") {
                const std::string kind = value.get<std::string>();
                if (kind == "classification") {
                    d.task_kind = DatasetDescriptor::TaskKind::classification;
                } else if (kind == "generation") {
                    d.task_kind = DatasetDescriptor::TaskKind::generation;
                } else {
                    throw ConfigError("dataset " + name + ": unknown task_kind '" + kind + "'");
                }
            } else {
                throw ConfigError("dataset " + name + ": unknown descriptor key '" + key + "'");
            }
        }
        d.validate();
        if (catalog.entries_.count(name)) {
            throw ConfigError("dataset '" + name + "' collides with a bundled corpus");
        }
        catalog.entries_.emplace(name, std::move(d));
    }
    return catalog;
}

DatasetCatalog DatasetCatalog::from_working_directory() {
    const std::filesystem::path registry = "datasets.json";
    std::error_code ec;
    if (std::filesystem::exists(registry, ec)) return with_registry_file(registry);
    return bundled();
}

const DatasetDescriptor& DatasetCatalog::descriptor(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
        std::string known;
        for (const auto& [n, d] : entries_) {
            if (!known.empty()) known += ", ";
            known += n;
        }
        throw ConfigError("unknown dataset '" + name + "'; available: " + known);
    }
    return it->second;
}

std::vector<std::string> DatasetCatalog::names() const {
    std::vector<std::string> out;
    for (const auto& [name, d] : entries_) out.push_back(name);
    return out;
}

}  // namespace pf
