#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "reswvl/core/errors.hpp"
#include "reswvl/core/tensor.hpp"

namespace reswvl {

/// Named-tensor archive: the single container used for checkpoints and
/// exported weights. Layout: magic, version, JSON manifest, then tensors
/// sorted by name (so identical content produces identical bytes).
///
///   "RSWVARC1" | u32 version | u64 manifest_len | manifest JSON
///   u64 tensor_count
///   per tensor: u32 name_len | name | u8 dtype | u32 ndim | u64 dims[] | data
///
/// Data is stored in native little-endian layout; this library targets
/// little-endian hosts only.
class Archive {
public:
    using TensorAny = std::variant<Tensor<float>, Tensor<double>, Tensor<std::int64_t>>;

    nlohmann::json manifest = nlohmann::json::object();

    template <typename T>
    void put(const std::string& name, Tensor<T> t) {
        tensors_[name] = TensorAny(std::move(t));
    }

    bool has(const std::string& name) const { return tensors_.count(name) > 0; }

    template <typename T>
    const Tensor<T>& get(const std::string& name) const {
        auto it = tensors_.find(name);
        if (it == tensors_.end())
            throw DataError("archive: missing tensor '" + name + "'");
        const auto* t = std::get_if<Tensor<T>>(&it->second);
        if (!t)
            throw DataError("archive: tensor '" + name + "' has a different dtype");
        return *t;
    }

    const std::map<std::string, TensorAny>& tensors() const { return tensors_; }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("archive: cannot open for writing: " + path.string());
        out.write(kMagic, 8);
        write_u32(out, kVersion);
        const std::string m = manifest.dump();
        write_u64(out, m.size());
        out.write(m.data(), static_cast<std::streamsize>(m.size()));
        write_u64(out, tensors_.size());
        for (const auto& [name, any] : tensors_) {
            write_u32(out, static_cast<std::uint32_t>(name.size()));
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
            std::visit([&](const auto& t) { write_tensor(out, t); }, any);
        }
        if (!out) throw DataError("archive: write failed: " + path.string());
    }

    static Archive load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("archive: file not found or unreadable: " + path.string());
        char magic[8] = {};
        in.read(magic, 8);
        if (!in || std::string(magic, 8) != kMagic)
            throw DataError("archive: bad magic in " + path.string() +
                            " (not a tensor archive, or corrupt)");
        const std::uint32_t version = read_u32(in, path);
        if (version != kVersion)
            throw DataError("archive: unsupported version " + std::to_string(version) +
                            " in " + path.string());
        Archive a;
        const std::uint64_t mlen = read_u64(in, path);
        std::string m(mlen, '\0');
        in.read(m.data(), static_cast<std::streamsize>(mlen));
        if (!in) throw DataError("archive: truncated manifest in " + path.string());
        try {
            a.manifest = nlohmann::json::parse(m);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("archive: corrupt manifest in " + path.string() + ": " + e.what());
        }
        const std::uint64_t count = read_u64(in, path);
        for (std::uint64_t i = 0; i < count; ++i) {
            const std::uint32_t nlen = read_u32(in, path);
            std::string name(nlen, '\0');
            in.read(name.data(), nlen);
            std::uint8_t dtype = 0;
            in.read(reinterpret_cast<char*>(&dtype), 1);
            const std::uint32_t ndim = read_u32(in, path);
            std::vector<std::size_t> shape(ndim);
            for (auto& d : shape) d = read_u64(in, path);
            if (!in) throw DataError("archive: truncated tensor header in " + path.string());
            switch (dtype) {
                case 0: a.tensors_[name] = read_data<float>(in, shape, path); break;
                case 1: a.tensors_[name] = read_data<double>(in, shape, path); break;
                case 2: a.tensors_[name] = read_data<std::int64_t>(in, shape, path); break;
                default:
                    throw DataError("archive: unknown dtype " + std::to_string(dtype) +
                                    " in " + path.string());
            }
        }
        return a;
    }

private:
    static constexpr const char* kMagic = "RSWVARC1";
    static constexpr std::uint32_t kVersion = 1;

    std::map<std::string, TensorAny> tensors_;

    template <typename T>
    static std::uint8_t dtype_of() {
        if constexpr (std::is_same_v<T, float>) return 0;
        else if constexpr (std::is_same_v<T, double>) return 1;
        else return 2;
    }

    static void write_u32(std::ofstream& out, std::uint32_t v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    static void write_u64(std::ofstream& out, std::uint64_t v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    static std::uint32_t read_u32(std::ifstream& in, const std::filesystem::path& p) {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!in) throw DataError("archive: truncated file: " + p.string());
        return v;
    }
    static std::uint64_t read_u64(std::ifstream& in, const std::filesystem::path& p) {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!in) throw DataError("archive: truncated file: " + p.string());
        return v;
    }

    template <typename T>
    static void write_tensor(std::ofstream& out, const Tensor<T>& t) {
        const std::uint8_t dt = dtype_of<T>();
        out.write(reinterpret_cast<const char*>(&dt), 1);
        write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) write_u64(out, d);
        out.write(reinterpret_cast<const char*>(t.ptr()),
                  static_cast<std::streamsize>(t.numel() * sizeof(T)));
    }

    template <typename T>
    static Tensor<T> read_data(std::ifstream& in, std::vector<std::size_t> shape,
                               const std::filesystem::path& p) {
        Tensor<T> t(std::move(shape));
        in.read(reinterpret_cast<char*>(t.ptr()),
                static_cast<std::streamsize>(t.numel() * sizeof(T)));
        if (!in) throw DataError("archive: truncated tensor data in " + p.string());
        return t;
    }
};

}  // namespace reswvl
