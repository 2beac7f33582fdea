#include "pf/registry.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pf/errors.hpp"
#include "pf/methods.hpp"

namespace pf {

namespace fs = std::filesystem;

bool MethodRegistry::contains(const std::string& peft_type) const {
    return methods_.count(peft_type) != 0;
}

const MethodManifest& MethodRegistry::manifest(const std::string& peft_type) const {
    auto it = methods_.find(peft_type);
    if (it == methods_.end()) {
        throw RegistryError("no registered method named '" + peft_type + "'");
    }
    return it->second;
}

std::vector<std::string> MethodRegistry::method_names() const {
    std::vector<std::string> out;
    out.reserve(methods_.size());
    for (const auto& [name, m] : methods_) out.push_back(name);
    return out;
}

void MethodRegistry::register_manifest(MethodManifest m) {
    const std::string name = m.peft_type;
    auto [it, inserted] = methods_.emplace(name, std::move(m));
    if (!inserted) {
        throw RegistrationError("duplicate peft_type '" + name + "' (" +
                                it->second.origin + " already provides it)");
    }
}

MethodRegistry builtin_registry() {
    MethodRegistry registry;
    for (const auto& [name, sources] : builtin_method_sources()) {
        registry.register_manifest(
            parse_method_manifest(sources.first, sources.second, "builtin"));
    }
    return registry;
}

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

MethodRegistry discover_methods(const fs::path& peft_dir) {
    MethodRegistry registry = builtin_registry();

    std::error_code ec;
    if (!fs::exists(peft_dir, ec)) {
        throw IoError("PEFT method directory does not exist: " + peft_dir.string());
    }
    if (!fs::is_directory(peft_dir, ec)) {
        throw IoError("PEFT method path is not a directory: " + peft_dir.string());
    }

    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(peft_dir, ec)) {
        if (entry.is_directory()) subdirs.push_back(entry.path());
    }
    if (ec) throw IoError("cannot scan " + peft_dir.string() + ": " + ec.message());
    std::sort(subdirs.begin(), subdirs.end());

    std::vector<std::string> duplicate_errors;
    for (const auto& dir : subdirs) {
        const fs::path manifest_path = dir / "manifest";
        const fs::path impl_path = dir / "impl";
        const std::string dirname = dir.filename().string();
        if (!fs::is_regular_file(manifest_path) || !fs::is_regular_file(impl_path)) {
            std::string missing;
            if (!fs::is_regular_file(manifest_path)) missing = "manifest";
            if (!fs::is_regular_file(impl_path)) {
                if (!missing.empty()) missing += " and ";
                missing += "impl";
            }
            registry.diagnostics_.push_back(
                {dirname, "skipped: missing " + missing + " descriptor"});
            continue;
        }
        MethodManifest m;
        try {
            m = parse_method_manifest(read_file(manifest_path), read_file(impl_path),
                                      dir.string());
        } catch (const ConfigError& e) {
            registry.diagnostics_.push_back({dirname, std::string("skipped: ") + e.what()});
            continue;
        }
        if (registry.contains(m.peft_type)) {
            duplicate_errors.push_back("'" + m.peft_type + "' from " + dir.string() +
                                       " collides with " +
                                       registry.manifest(m.peft_type).origin);
            continue;
        }
        registry.register_manifest(std::move(m));
    }

    if (!duplicate_errors.empty()) {
        std::string msg = "duplicate peft_type registration: ";
        for (std::size_t i = 0; i < duplicate_errors.size(); ++i) {
            if (i) msg += "; ";
            msg += duplicate_errors[i];
        }
        throw RegistrationError(msg);
    }
    return registry;
}

MethodRegistry discover_methods_from_env() {
    const char* env = std::getenv("PEFT_DIR");
    if (env && *env) return discover_methods(env);
    const fs::path default_dir = "./peft";
    std::error_code ec;
    if (!fs::exists(default_dir, ec)) return builtin_registry();
    return discover_methods(default_dir);
}

}  // namespace pf
