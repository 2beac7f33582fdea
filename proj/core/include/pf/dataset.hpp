#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pf/tokenizer.hpp"

namespace pf {

/// A raw record: column name -> scalar rendered as text.
using Record = std::map<std::string, std::string>;

/// Column mapping, optional instruction, and split layout of a dataset.
struct DatasetDescriptor {
    enum class Source { builtin, file };
    enum class TaskKind { classification, generation };

    std::string name;
    Source source = Source::builtin;
    std::string builtin_id;                            // source == builtin
    std::map<std::string, std::string> split_files;    // source == file
    std::filesystem::path base_dir;                    // resolves split_files
    std::vector<std::string> input_cols;
    std::string output_col;
    std::optional<std::string> instruction;
    std::map<std::string, std::string> label_verbalizer;  // raw -> text, injective
    std::map<std::string, int> split_sizes;               // builtin split layout
    TaskKind task_kind = TaskKind::classification;

    void validate() const;

    /// Label surface texts (sorted verbalizer values); empty when no
    /// verbalizer is declared.
    std::vector<std::string> label_texts() const;

    std::vector<std::string> split_names() const;
};

/// Applies the two-column conversion: instruction prepended with a
/// newline, input columns joined by " [SEP] ", output verbalized.
Example convert(const DatasetDescriptor& descriptor, const Record& record,
                std::size_t record_index);

/// Loads and converts one split. Built-in corpora generate
/// deterministically from the seed; file sources keep file order.
std::vector<Example> load_split(const DatasetDescriptor& descriptor, const std::string& split,
                                std::uint64_t seed);

/// Name -> descriptor lookup over the bundled corpora plus an optional
/// datasets.json registry file.
class DatasetCatalog {
   public:
    /// Bundled corpora only.
    static DatasetCatalog bundled();
    /// Bundled corpora plus entries from a datasets.json registry.
    static DatasetCatalog with_registry_file(const std::filesystem::path& datasets_json);
    /// Bundled corpora plus ./datasets.json when present.
    static DatasetCatalog from_working_directory();

    const DatasetDescriptor& descriptor(const std::string& name) const;  // ConfigError
    std::vector<std::string> names() const;

   private:
    std::map<std::string, DatasetDescriptor> entries_;
};

namespace corpora {

/// Every word the bundled corpora can emit (template words, digits,
/// label texts); the bundled tokenizer is built from this.
std::vector<std::string> lexicon();

/// Descriptors of the bundled corpora: toy-sentiment, parity, copy,
/// toy-arith.
std::vector<DatasetDescriptor> descriptors();

/// Raw records of one split of a bundled corpus, deterministic in seed.
std::vector<Record> generate(const std::string& builtin_id, const std::string& split,
                             std::uint64_t seed);

}  // namespace corpora

}  // namespace pf
