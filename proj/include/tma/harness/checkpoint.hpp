#pragma once

// Checkpoint container. Layout (little-endian):
//
//   "TMACKPT\0"  u32 format_version  u32 record_count
//   per record:  u32 name_len  name  u8 kind
//                kind 0 (tensor): u64 rows  u64 cols  rows*cols f64, row-major
//                kind 1 (text):   u64 len   bytes
//
// Records are written in name order, so identical contents give identical bytes.

#include "tma/errors.hpp"
#include "tma/model.hpp"
#include "tma/tensor.hpp"
#include "tma/tkg_embedding.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>

namespace tma {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'T', 'M', 'A', 'C', 'K', 'P', 'T', '\0'};

class Archive {
public:
    void put(const std::string& name, Matrix m) { tensors_[name] = std::move(m); }
    void put_flat(const std::string& name, std::span<const double> values) {
        Matrix m(static_cast<Eigen::Index>(values.size()), 1);
        std::copy(values.begin(), values.end(), m.data());
        tensors_[name] = std::move(m);
    }
    void put_text(const std::string& name, std::string text) { texts_[name] = std::move(text); }

    bool has_tensor(const std::string& name) const { return tensors_.count(name) > 0; }
    bool has_text(const std::string& name) const { return texts_.count(name) > 0; }

    const Matrix& tensor(const std::string& name) const {
        auto it = tensors_.find(name);
        if (it == tensors_.end()) throw ParseError("checkpoint has no tensor '" + name + "'");
        return it->second;
    }
    const std::string& text(const std::string& name) const {
        auto it = texts_.find(name);
        if (it == texts_.end()) throw ParseError("checkpoint has no text record '" + name + "'");
        return it->second;
    }

    /// Copies a stored tensor into `dest`, which must already have the same element count.
    void read_into(const std::string& name, std::span<double> dest) const {
        const Matrix& m = tensor(name);
        if (static_cast<std::size_t>(m.size()) != dest.size()) {
            throw ShapeError("checkpoint tensor '" + name + "' has " + std::to_string(m.size()) + " values, expected " +
                             std::to_string(dest.size()));
        }
        std::copy(m.data(), m.data() + m.size(), dest.begin());
    }

    std::uint32_t version() const noexcept { return version_; }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw InputError("cannot write " + path.string());
        out.write(kCheckpointMagic, sizeof kCheckpointMagic);
        write_pod(out, kCheckpointVersion);
        write_pod(out, static_cast<std::uint32_t>(tensors_.size() + texts_.size()));
        // tensors and texts share one name-ordered stream
        auto t = tensors_.begin();
        auto s = texts_.begin();
        while (t != tensors_.end() || s != texts_.end()) {
            if (s == texts_.end() || (t != tensors_.end() && t->first < s->first)) {
                write_name(out, t->first);
                write_pod(out, std::uint8_t{0});
                write_pod(out, static_cast<std::uint64_t>(t->second.rows()));
                write_pod(out, static_cast<std::uint64_t>(t->second.cols()));
                out.write(reinterpret_cast<const char*>(t->second.data()),
                          static_cast<std::streamsize>(t->second.size() * sizeof(double)));
                ++t;
            } else {
                write_name(out, s->first);
                write_pod(out, std::uint8_t{1});
                write_pod(out, static_cast<std::uint64_t>(s->second.size()));
                out.write(s->second.data(), static_cast<std::streamsize>(s->second.size()));
                ++s;
            }
        }
        if (!out) throw InputError("write failed for " + path.string());
    }

    static Archive load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw InputError("cannot open " + path.string());
        char magic[8];
        in.read(magic, sizeof magic);
        if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
            throw ParseError(path.string() + ": not a checkpoint file");
        }
        Archive a;
        a.version_ = read_pod<std::uint32_t>(in);
        if (a.version_ != kCheckpointVersion) {
            throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(a.version_));
        }
        const auto count = read_pod<std::uint32_t>(in);
        for (std::uint32_t i = 0; i < count; ++i) {
            const auto name_len = read_pod<std::uint32_t>(in);
            std::string name(name_len, '\0');
            in.read(name.data(), name_len);
            const auto kind = read_pod<std::uint8_t>(in);
            if (kind == 0) {
                const auto rows = read_pod<std::uint64_t>(in);
                const auto cols = read_pod<std::uint64_t>(in);
                Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
                in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
                a.tensors_[name] = std::move(m);
            } else if (kind == 1) {
                const auto len = read_pod<std::uint64_t>(in);
                std::string text(len, '\0');
                in.read(text.data(), static_cast<std::streamsize>(len));
                a.texts_[name] = std::move(text);
            } else {
                throw ParseError(path.string() + ": unknown record kind");
            }
            if (!in) throw ParseError(path.string() + ": truncated checkpoint");
        }
        return a;
    }

private:
    template <class T>
    static void write_pod(std::ostream& out, T v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    template <class T>
    static T read_pod(std::istream& in) {
        T v{};
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!in) throw ParseError("truncated checkpoint");
        return v;
    }
    static void write_name(std::ostream& out, const std::string& name) {
        write_pod(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
    }

    std::map<std::string, Matrix> tensors_;
    std::map<std::string, std::string> texts_;
    std::uint32_t version_ = kCheckpointVersion;
};

inline void put_tables(Archive& a, const TkgTables& tables) {
    a.put("kg.entities.real", tables.entities.real);
    a.put("kg.entities.imag", tables.entities.imag);
    a.put("kg.predicates.real", tables.predicates.real);
    a.put("kg.predicates.imag", tables.predicates.imag);
    a.put("kg.timestamps.real", tables.timestamps.real);
    a.put("kg.timestamps.imag", tables.timestamps.imag);
    nlohmann::json meta = {{"dim", tables.dim()},
                           {"entities", tables.entity_count()},
                           {"predicates", tables.predicate_count()},
                           {"timestamps", tables.time_count()}};
    a.put_text("kg.meta", meta.dump());
}

inline TkgTables get_tables(const Archive& a) {
    TkgTables t;
    t.entities.real = a.tensor("kg.entities.real");
    t.entities.imag = a.tensor("kg.entities.imag");
    t.predicates.real = a.tensor("kg.predicates.real");
    t.predicates.imag = a.tensor("kg.predicates.imag");
    t.timestamps.real = a.tensor("kg.timestamps.real");
    t.timestamps.imag = a.tensor("kg.timestamps.imag");
    const auto meta = nlohmann::json::parse(a.text("kg.meta"));
    if (meta.at("dim").get<Eigen::Index>() != t.dim() || meta.at("entities").get<Eigen::Index>() != t.entity_count() ||
        meta.at("timestamps").get<Eigen::Index>() != t.time_count() ||
        meta.at("predicates").get<Eigen::Index>() != t.predicate_count()) {
        throw ParseError("checkpoint: KG table shapes disagree with kg.meta");
    }
    for (const auto* table : {&t.entities, &t.predicates, &t.timestamps}) {
        if (table->real.rows() != table->imag.rows() || table->real.cols() != table->imag.cols() ||
            table->dim() != t.dim()) {
            throw ParseError("checkpoint: real/imag shape mismatch");
        }
    }
    return t;
}

inline void put_model(Archive& a, TmaModel& model) {
    for (const auto& t : model.tensors()) a.put_flat("model." + t.name, t.values);
}

/// Loads parameters into a model whose configuration determines the shapes.
inline void get_model(const Archive& a, TmaModel& model) {
    for (const auto& t : model.tensors()) a.read_into("model." + t.name, t.values);
}

}  // namespace tma
