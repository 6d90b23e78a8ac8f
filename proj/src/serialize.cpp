#include "funl/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "funl/errors.hpp"

namespace funl {

namespace {

constexpr char kMagic[4] = {'F', 'U', 'N', 'L'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
    }
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
    }
}

void put_str(std::vector<std::uint8_t>& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

struct Reader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > bytes.size()) {
            throw FormatError("model file truncated");
        }
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
        }
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
        }
        pos += 8;
        return std::bit_cast<double>(v);
    }
    std::string str() {
        const std::uint32_t len = u32();
        need(len);
        std::string s(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
        return s;
    }
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& m) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kVersion);
    put_str(out, m.arch_id());
    put_u32(out, static_cast<std::uint32_t>(m.params().size()));
    for (const NamedParam& p : m.params()) {
        put_str(out, p.name);
        const Shape& s = p.tensor.shape();
        put_u32(out, static_cast<std::uint32_t>(s.size()));
        for (Dim d : s) {
            put_u32(out, static_cast<std::uint32_t>(d));
        }
        for (double v : p.tensor.data()) {
            put_f64(out, v);
        }
    }
    return out;
}

Model deserialize_model(const std::vector<std::uint8_t>& bytes) {
    Reader r{bytes};
    r.need(4);
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("not a model file (bad magic)");
    }
    r.pos = 4;
    const std::uint16_t version = r.u16();
    if (version != kVersion) {
        throw FormatError("unsupported model file version " + std::to_string(version));
    }
    const std::string arch_id = r.str();
    Model m = model_from_arch_id(arch_id);
    const std::uint32_t count = r.u32();
    if (count != m.params().size()) {
        throw FormatError("model file has " + std::to_string(count) + " params, arch '" +
                          arch_id + "' expects " + std::to_string(m.params().size()));
    }
    for (NamedParam& p : m.params()) {
        const std::string name = r.str();
        if (name != p.name) {
            throw FormatError("model file param '" + name + "' does not match arch param '" +
                              p.name + "'");
        }
        const std::uint32_t rank = r.u32();
        Shape shape(rank);
        for (std::uint32_t i = 0; i < rank; ++i) {
            shape[i] = static_cast<Dim>(r.u32());
        }
        if (shape != p.tensor.shape()) {
            throw FormatError("model file param '" + name + "' shape " + shape_str(shape) +
                              " does not match arch shape " + shape_str(p.tensor.shape()));
        }
        for (double& v : p.tensor.data()) {
            v = r.f64();
        }
    }
    if (r.pos != bytes.size()) {
        throw FormatError("model file has trailing bytes");
    }
    return m;
}

void save_model(const Model& m, const std::string& path) {
    const std::vector<std::uint8_t> bytes = serialize_model(m);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) {
        throw IoError("write failed for '" + path + "'");
    }
}

Model load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open '" + path + "'");
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

Model load_model(const std::string& path, const std::string& expected_arch_id) {
    Model m = load_model(path);
    if (m.arch_id() != expected_arch_id) {
        throw FormatError("model file '" + path + "' holds arch '" + m.arch_id() +
                          "', expected '" + expected_arch_id + "'");
    }
    return m;
}

std::size_t serialized_size(const Model& m) {
    std::size_t n = 4 + 2 + 4 + m.arch_id().size() + 4;
    for (const NamedParam& p : m.params()) {
        n += 4 + p.name.size();
        n += 4 + 4 * p.tensor.shape().size();
        n += 8 * static_cast<std::size_t>(p.tensor.numel());
    }
    return n;
}

ModelDelta ModelDelta::between(const Model& from, const Model& to) {
    if (from.params().size() != to.params().size()) {
        throw ShapeError("ModelDelta: parameter sets differ in size");
    }
    ModelDelta d;
    for (std::size_t i = 0; i < from.params().size(); ++i) {
        const NamedParam& a = from.params()[i];
        const NamedParam& b = to.params()[i];
        if (a.name != b.name || a.tensor.shape() != b.tensor.shape()) {
            throw ShapeError("ModelDelta: parameter '" + a.name + "' does not align with '" +
                             b.name + "'");
        }
        std::vector<double> diff(a.tensor.data().size());
        for (std::size_t j = 0; j < diff.size(); ++j) {
            diff[j] = b.tensor.data()[j] - a.tensor.data()[j];
        }
        d.entries.emplace_back(a.name, std::move(diff));
    }
    return d;
}

void ModelDelta::apply_to(Model& m) const {
    if (entries.size() != m.params().size()) {
        throw ShapeError("ModelDelta: parameter sets differ in size");
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        NamedParam& p = m.params()[i];
        if (entries[i].first != p.name ||
            entries[i].second.size() != p.tensor.data().size()) {
            throw ShapeError("ModelDelta: entry '" + entries[i].first +
                             "' does not align with param '" + p.name + "'");
        }
        for (std::size_t j = 0; j < entries[i].second.size(); ++j) {
            p.tensor.data()[j] += entries[i].second[j];
        }
    }
}

std::size_t ModelDelta::byte_size() const {
    std::size_t n = 0;
    for (const auto& [name, values] : entries) {
        n += name.size() + 8 * values.size();
    }
    return n;
}

}  // namespace funl
