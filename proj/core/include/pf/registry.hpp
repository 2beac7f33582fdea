#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pf/manifest.hpp"

namespace pf {

/// A subdirectory skipped during discovery, and why.
struct DiscoveryDiagnostic {
    std::string directory;
    std::string message;
};

/// Immutable map peft_type -> manifest. Built-ins are always present;
/// discovery adds validated plugin manifests. No mutation is exposed
/// after construction.
class MethodRegistry {
   public:
    bool contains(const std::string& peft_type) const;
    const MethodManifest& manifest(const std::string& peft_type) const;  // RegistryError
    std::vector<std::string> method_names() const;                       // sorted
    std::size_t size() const { return methods_.size(); }

    const std::vector<DiscoveryDiagnostic>& diagnostics() const { return diagnostics_; }

   private:
    std::map<std::string, MethodManifest> methods_;
    std::vector<DiscoveryDiagnostic> diagnostics_;

    void register_manifest(MethodManifest m);  // RegistrationError on duplicate

    friend MethodRegistry builtin_registry();
    friend MethodRegistry discover_methods(const std::filesystem::path&);
};

/// The nine built-in methods, loaded through the same manifest parser a
/// plugin directory would go through.
MethodRegistry builtin_registry();

/// Source texts of the built-in method descriptors (schema file,
/// composition file) keyed by peft_type. Exposed so the loader path can
/// be exercised from real directories.
const std::map<std::string, std::pair<std::string, std::string>>& builtin_method_sources();

/// Scans peft_dir for method subdirectories. A subdirectory registers
/// iff it contains both descriptor files ("manifest" and "impl") and
/// both validate; anything else is skipped with a diagnostic. Duplicate
/// peft_type entries (including shadowing a built-in) raise a
/// RegistrationError once the scan completes. A nonexistent default
/// directory yields built-ins only; an explicitly configured but
/// unreadable directory is an IoError.
MethodRegistry discover_methods(const std::filesystem::path& peft_dir);

/// Resolves the plugin directory from PEFT_DIR (default "./peft") and
/// discovers. A missing default directory is treated as empty.
MethodRegistry discover_methods_from_env();

}  // namespace pf
