#include <cstring>
#include <fstream>
#include <set>

#include "pf/errors.hpp"
#include "pf/tuner.hpp"

namespace pf {

namespace {

constexpr char kMagic[8] = {'P', 'F', 'A', 'D', 'A', 'P', 'T', '1'};
constexpr std::uint32_t kFormatVersion = 1;

// Explicit little-endian encoding keeps the file layout independent of
// the host.
void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    put_u64(out, bits);
}

void put_string(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

class Reader {
   public:
    Reader(std::string bytes, std::string path)
        : bytes_(std::move(bytes)), path_(std::move(path)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
                 << (8 * i);
        }
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
                 << (8 * i);
        }
        pos_ += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, sizeof(d));
        return d;
    }
    std::string str() {
        const std::uint32_t len = u32();
        need(len);
        std::string s = bytes_.substr(pos_, len);
        pos_ += len;
        return s;
    }
    std::uint8_t byte() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    void expect_magic() {
        need(8);
        if (std::memcmp(bytes_.data(), kMagic, 8) != 0) {
            throw CompatibilityError(path_ + " is not an adapter checkpoint");
        }
        pos_ += 8;
    }
    bool exhausted() const { return pos_ == bytes_.size(); }

   private:
    void need(std::size_t n) {
        if (pos_ + n > bytes_.size()) {
            throw CompatibilityError(path_ + ": truncated checkpoint");
        }
    }
    std::string bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

enum class ValueTag : std::uint8_t { int_t = 0, float_t = 1, string_t = 2, list_t = 3 };

void put_value(std::string& out, const Value& v) {
    if (v.is_int()) {
        out.push_back(static_cast<char>(ValueTag::int_t));
        put_u64(out, static_cast<std::uint64_t>(v.as_int()));
    } else if (v.is_float()) {
        out.push_back(static_cast<char>(ValueTag::float_t));
        put_f64(out, v.as_float());
    } else if (v.is_string()) {
        out.push_back(static_cast<char>(ValueTag::string_t));
        put_string(out, v.as_string());
    } else {
        out.push_back(static_cast<char>(ValueTag::list_t));
        put_u32(out, static_cast<std::uint32_t>(v.as_list().size()));
        for (const auto& s : v.as_list()) put_string(out, s);
    }
}

Value read_value(Reader& r, const std::string& path) {
    const auto tag = static_cast<ValueTag>(r.byte());
    switch (tag) {
        case ValueTag::int_t: return Value(static_cast<std::int64_t>(r.u64()));
        case ValueTag::float_t: return Value(r.f64());
        case ValueTag::string_t: return Value(r.str());
        case ValueTag::list_t: {
            const std::uint32_t n = r.u32();
            std::vector<std::string> items;
            items.reserve(n);
            for (std::uint32_t i = 0; i < n; ++i) items.push_back(r.str());
            return Value(std::move(items));
        }
    }
    throw CompatibilityError(path + ": unknown value tag in checkpoint");
}

}  // namespace

void save_adapter(const TransformerModel& model, const AttachHandle& handle,
                  const std::filesystem::path& path) {
    std::string out;
    out.append(kMagic, 8);
    put_u32(out, kFormatVersion);
    put_u64(out, model.spec().fingerprint());
    put_string(out, handle.peft_type);
    put_u32(out, static_cast<std::uint32_t>(handle.config.values.size()));
    for (const auto& [key, value] : handle.config.values) {
        put_string(out, key);
        put_value(out, value);
    }

    const auto names = handle.trainable_names();
    put_u32(out, static_cast<std::uint32_t>(names.size()));
    for (const auto& name : names) {
        const Tensor t = model.param(name);
        put_string(out, name);
        put_u32(out, static_cast<std::uint32_t>(t.ndim()));
        for (std::size_t i = 0; i < t.ndim(); ++i) {
            put_u64(out, static_cast<std::uint64_t>(t.dim(static_cast<int>(i))));
        }
        for (double d : t.data()) put_f64(out, d);
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("failed writing " + path.string());
}

AttachHandle load_adapter(TransformerModel& model, const MethodRegistry& registry,
                          const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot read " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

    Reader r(std::move(bytes), path.string());
    r.expect_magic();
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion) {
        throw CompatibilityError(path.string() + ": unsupported checkpoint version " +
                                 std::to_string(version));
    }
    const std::uint64_t fingerprint = r.u64();
    if (fingerprint != model.spec().fingerprint()) {
        throw CompatibilityError(path.string() +
                                 ": checkpoint was written for a different model spec");
    }
    const std::string peft_type = r.str();
    if (!registry.contains(peft_type)) {
        throw RegistryError("checkpoint needs method '" + peft_type +
                            "' which is not registered");
    }

    TunerConfig config;
    config.peft_type = peft_type;
    const std::uint32_t n_values = r.u32();
    for (std::uint32_t i = 0; i < n_values; ++i) {
        std::string key = r.str();
        config.values.emplace(std::move(key), read_value(r, path.string()));
    }

    AttachHandle handle = attach(model, registry, config);

    std::set<std::string> trainable;
    for (const auto& name : handle.trainable_names()) trainable.insert(name);

    const std::uint32_t n_tensors = r.u32();
    std::set<std::string> seen;
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        const std::string name = r.str();
        if (!trainable.count(name)) {
            throw CompatibilityError(path.string() + ": checkpoint tensor '" + name +
                                     "' is not a trainable parameter of this attachment");
        }
        Tensor t = model.param(name);
        const std::uint32_t rank = r.u32();
        std::vector<int> extents(rank);
        for (auto& e : extents) e = static_cast<int>(r.u64());
        if (extents != t.shape()) {
            throw CompatibilityError(path.string() + ": tensor '" + name + "' has shape " +
                                     shape_str(extents) + ", expected " + shape_str(t.shape()));
        }
        auto dst = t.mutable_data();
        for (auto& d : dst) d = r.f64();
        seen.insert(name);
    }
    if (seen.size() != trainable.size()) {
        throw CompatibilityError(path.string() + ": checkpoint is missing trainable tensors");
    }
    return handle;
}

}  // namespace pf
