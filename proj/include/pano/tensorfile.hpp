// Bit-exact container for named dense tensors.
//
// File layout: magic "PSWT", one version byte (currently 1), then a sequence
// of records until end of file. Each record is
//
//   name length : u16 little-endian
//   name        : that many bytes
//   dtype       : u8 (0 = f32, 1 = u32, 2 = u8)
//   ndim        : u8
//   dims        : ndim x u32 little-endian
//   payload     : product(dims) values, row-major, little-endian
//
// Reads and writes go through whole-buffer memcpy, so the format is only
// implemented for little-endian hosts; the static_assert below keeps a port
// to a big-endian machine from silently producing byte-swapped files.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pano/pixelgrid.hpp"

namespace pano {

static_assert(std::endian::native == std::endian::little,
              "tensor container assumes a little-endian host");

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct bad_magic_error : io_error {
    using io_error::io_error;
};
struct bad_version_error : io_error {
    using io_error::io_error;
};
struct truncated_file_error : io_error {
    using io_error::io_error;
};
struct duplicate_name_error : io_error {
    using io_error::io_error;
};
struct unknown_dtype_error : io_error {
    using io_error::io_error;
};
// missing or wrongly shaped tensor inside a structurally valid file
struct format_error : io_error {
    using io_error::io_error;
};

inline constexpr char kTensorMagic[4] = {'P', 'S', 'W', 'T'};
inline constexpr uint8_t kTensorVersion = 1;

enum class Dtype : uint8_t { f32 = 0, u32 = 1, u8 = 2 };

inline size_t dtype_size(Dtype d) {
    switch (d) {
        case Dtype::f32: return 4;
        case Dtype::u32: return 4;
        case Dtype::u8: return 1;
    }
    throw unknown_dtype_error("unknown dtype code");
}

struct StoredTensor {
    std::string name;
    std::vector<uint32_t> dims;
    std::variant<std::vector<float>, std::vector<uint32_t>, std::vector<uint8_t>> data;

    Dtype dtype() const { return static_cast<Dtype>(data.index()); }

    uint64_t count() const {
        uint64_t n = 1;
        for (uint32_t d : dims) n *= d;
        return n;
    }

    const std::vector<float>& f32() const { return std::get<std::vector<float>>(data); }
    const std::vector<uint32_t>& u32() const { return std::get<std::vector<uint32_t>>(data); }
    const std::vector<uint8_t>& u8() const { return std::get<std::vector<uint8_t>>(data); }
};

namespace detail {

inline void append_bytes(std::vector<uint8_t>& out, const void* p, size_t n) {
    if (n == 0) return;
    const size_t at = out.size();
    out.resize(at + n);
    std::memcpy(out.data() + at, p, n);
}

template <typename T>
inline void append_value(std::vector<uint8_t>& out, T v) {
    append_bytes(out, &v, sizeof(T));
}

struct Cursor {
    const uint8_t* p;
    size_t left;

    void take(void* dst, size_t n) {
        if (n > left) throw truncated_file_error("tensor file ends mid-record");
        if (n == 0) return;
        std::memcpy(dst, p, n);
        p += n;
        left -= n;
    }

    template <typename T>
    T value() {
        T v;
        take(&v, sizeof(T));
        return v;
    }
};

}  // namespace detail

inline std::vector<uint8_t> serialize_tensors(const std::vector<StoredTensor>& tensors) {
    for (size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i].name.empty() || tensors[i].name.size() > 0xffff)
            throw std::invalid_argument("tensor name must be 1..65535 bytes");
        for (size_t j = 0; j < i; ++j)
            if (tensors[j].name == tensors[i].name)
                throw std::invalid_argument("duplicate tensor name: " + tensors[i].name);
        const size_t stored = std::visit([](const auto& v) { return v.size(); },
                                         tensors[i].data);
        if (stored != tensors[i].count())
            throw std::invalid_argument("payload size does not match dims: " +
                                        tensors[i].name);
    }

    std::vector<uint8_t> out;
    detail::append_bytes(out, kTensorMagic, 4);
    detail::append_value<uint8_t>(out, kTensorVersion);
    for (const StoredTensor& t : tensors) {
        detail::append_value<uint16_t>(out, static_cast<uint16_t>(t.name.size()));
        detail::append_bytes(out, t.name.data(), t.name.size());
        detail::append_value<uint8_t>(out, static_cast<uint8_t>(t.dtype()));
        detail::append_value<uint8_t>(out, static_cast<uint8_t>(t.dims.size()));
        for (uint32_t d : t.dims) detail::append_value<uint32_t>(out, d);
        std::visit(
            [&](const auto& v) {
                detail::append_bytes(out, v.data(), v.size() * sizeof(v[0]));
            },
            t.data);
    }
    return out;
}

inline std::vector<StoredTensor> parse_tensors(const std::vector<uint8_t>& bytes) {
    detail::Cursor c{bytes.data(), bytes.size()};
    char magic[4];
    if (c.left < 4) throw truncated_file_error("file shorter than the magic");
    c.take(magic, 4);
    if (std::memcmp(magic, kTensorMagic, 4) != 0)
        throw bad_magic_error("not a tensor container file");
    if (c.value<uint8_t>() != kTensorVersion)
        throw bad_version_error("unsupported container version");

    std::vector<StoredTensor> out;
    while (c.left > 0) {
        StoredTensor t;
        const uint16_t name_len = c.value<uint16_t>();
        t.name.resize(name_len);
        c.take(t.name.data(), name_len);
        const uint8_t code = c.value<uint8_t>();
        if (code > 2) throw unknown_dtype_error("unknown dtype code in " + t.name);
        const uint8_t ndim = c.value<uint8_t>();
        t.dims.resize(ndim);
        for (uint8_t i = 0; i < ndim; ++i) t.dims[i] = c.value<uint32_t>();
        uint64_t n = 1;
        for (uint32_t d : t.dims) n *= d;
        // cheap sanity bound before allocating: every element needs a byte
        if (n > c.left) throw truncated_file_error("tensor file ends mid-record");
        switch (static_cast<Dtype>(code)) {
            case Dtype::f32: {
                std::vector<float> v(n);
                c.take(v.data(), n * 4);
                t.data = std::move(v);
                break;
            }
            case Dtype::u32: {
                std::vector<uint32_t> v(n);
                c.take(v.data(), n * 4);
                t.data = std::move(v);
                break;
            }
            case Dtype::u8: {
                std::vector<uint8_t> v(n);
                c.take(v.data(), n);
                t.data = std::move(v);
                break;
            }
        }
        for (const StoredTensor& seen : out)
            if (seen.name == t.name)
                throw duplicate_name_error("duplicate tensor name: " + t.name);
        out.push_back(std::move(t));
    }
    return out;
}

inline void write_tensors(const std::string& path, const std::vector<StoredTensor>& tensors) {
    const std::vector<uint8_t> bytes = serialize_tensors(tensors);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw io_error("write failed: " + path);
}

inline std::vector<StoredTensor> read_tensors(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    return parse_tensors(bytes);
}

// -- lookup and conversion helpers -----------------------------------------

inline const StoredTensor& find_tensor(const std::vector<StoredTensor>& tensors,
                                       const std::string& name) {
    for (const StoredTensor& t : tensors)
        if (t.name == name) return t;
    throw format_error("missing tensor: " + name);
}

inline const StoredTensor* find_tensor_opt(const std::vector<StoredTensor>& tensors,
                                           const std::string& name) {
    for (const StoredTensor& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

inline StoredTensor store_tensor3(const std::string& name, const Tensor3& t) {
    StoredTensor out;
    out.name = name;
    out.dims = {static_cast<uint32_t>(t.channels), static_cast<uint32_t>(t.height),
                static_cast<uint32_t>(t.width)};
    out.data = t.data;
    return out;
}

inline Tensor3 load_tensor3(const StoredTensor& t) {
    if (t.dtype() != Dtype::f32 || t.dims.size() != 3)
        throw format_error("expected f32 tensor of rank 3: " + t.name);
    return Tensor3(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                   static_cast<int>(t.dims[2]), t.f32());
}

inline StoredTensor store_labels(const std::string& name, const LabelGrid& g) {
    StoredTensor out;
    out.name = name;
    out.dims = {static_cast<uint32_t>(g.height), static_cast<uint32_t>(g.width)};
    out.data = g.data;
    return out;
}

inline LabelGrid load_labels(const StoredTensor& t) {
    if (t.dtype() != Dtype::u32 || t.dims.size() != 2)
        throw format_error("expected u32 tensor of rank 2: " + t.name);
    return LabelGrid(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), t.u32());
}

inline StoredTensor store_bytes(const std::string& name, const std::vector<uint8_t>& v) {
    StoredTensor out;
    out.name = name;
    out.dims = {static_cast<uint32_t>(v.size())};
    out.data = v;
    return out;
}

inline std::vector<uint8_t> load_bytes(const StoredTensor& t) {
    if (t.dtype() != Dtype::u8 || t.dims.size() != 1)
        throw format_error("expected u8 tensor of rank 1: " + t.name);
    return t.u8();
}

}  // namespace pano
