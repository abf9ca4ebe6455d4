#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ovmae/tensor.hpp"

namespace ovmae {

// "OMNT" container: magic, version 0x01, dtype byte, ndim byte, ndim x u32
// little-endian extents, raw little-endian elements. Round-trips are
// bit-exact per dtype.
enum class OmntDtype : std::uint8_t { f32 = 0, f64 = 1, u8 = 2 };

namespace detail {

inline void put_u32_le(std::string& buf, std::uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
    buf.push_back(static_cast<char>((v >> 16) & 0xff));
    buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u64_le(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!in.good() && !in.eof()) throw IoError("read failed: " + path);
    return data;
}

inline void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out.good()) throw IoError("write failed: " + path);
}

} // namespace detail

inline void write_omnt(const std::string& path, const Tensor& t,
                       OmntDtype dtype = OmntDtype::f64) {
    if (t.ndim() > 255) throw ParamError("omnt: too many dims");
    std::string buf;
    buf.reserve(16 + t.size() * 8);
    buf += "OMNT";
    buf.push_back(0x01);
    buf.push_back(static_cast<char>(dtype));
    buf.push_back(static_cast<char>(t.ndim()));
    for (std::size_t d : t.dims()) {
        if (d > 0xffffffffULL) throw ParamError("omnt: extent exceeds u32");
        detail::put_u32_le(buf, static_cast<std::uint32_t>(d));
    }
    switch (dtype) {
        case OmntDtype::f64:
            for (std::size_t i = 0; i < t.size(); ++i) {
                std::uint64_t bits;
                double v = t[i];
                std::memcpy(&bits, &v, 8);
                detail::put_u64_le(buf, bits);
            }
            break;
        case OmntDtype::f32:
            for (std::size_t i = 0; i < t.size(); ++i) {
                float f = static_cast<float>(t[i]);
                std::uint32_t bits;
                std::memcpy(&bits, &f, 4);
                detail::put_u32_le(buf, bits);
            }
            break;
        case OmntDtype::u8:
            for (std::size_t i = 0; i < t.size(); ++i) {
                const double v = t[i];
                if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v))
                    throw ParamError("omnt: value not representable as u8");
                buf.push_back(static_cast<char>(static_cast<unsigned char>(v)));
            }
            break;
    }
    detail::write_file(path, buf);
}

struct OmntFile {
    OmntDtype dtype;
    Tensor tensor; // elements widened to double; exact for every dtype
};

inline OmntFile read_omnt(const std::string& path) {
    const std::string data = detail::read_file(path);
    const auto* p = reinterpret_cast<const unsigned char*>(data.data());
    if (data.size() < 7 || std::memcmp(p, "OMNT", 4) != 0)
        throw IoError("omnt: bad magic in " + path);
    if (p[4] != 0x01) throw IoError("omnt: unsupported version in " + path);
    if (p[5] > 2) throw IoError("omnt: unknown dtype in " + path);
    const OmntDtype dtype = static_cast<OmntDtype>(p[5]);
    const std::size_t ndim = p[6];
    std::size_t off = 7;
    if (data.size() < off + 4 * ndim) throw IoError("omnt: truncated header in " + path);
    std::vector<std::size_t> dims(ndim);
    std::size_t count = 1;
    for (std::size_t i = 0; i < ndim; ++i) {
        dims[i] = detail::get_u32_le(p + off);
        off += 4;
        count *= dims[i];
    }
    const std::size_t esize = dtype == OmntDtype::f64 ? 8 : (dtype == OmntDtype::f32 ? 4 : 1);
    if (data.size() != off + count * esize) throw IoError("omnt: payload size mismatch in " + path);
    Tensor t(dims);
    for (std::size_t i = 0; i < count; ++i) {
        switch (dtype) {
            case OmntDtype::f64: {
                const std::uint64_t bits = detail::get_u64_le(p + off + 8 * i);
                double v;
                std::memcpy(&v, &bits, 8);
                t[i] = v;
                break;
            }
            case OmntDtype::f32: {
                const std::uint32_t bits = detail::get_u32_le(p + off + 4 * i);
                float f;
                std::memcpy(&f, &bits, 4);
                t[i] = static_cast<double>(f);
                break;
            }
            case OmntDtype::u8:
                t[i] = static_cast<double>(p[off + i]);
                break;
        }
    }
    return OmntFile{dtype, std::move(t)};
}

// ---------------------------------------------------------------------------
// Binary PPM (P6, maxval 255). One frame per file, tensor shape H x W x 3.

inline void write_ppm(const std::string& path, const Tensor& frame) {
    if (frame.ndim() != 3 || frame.dim(2) != 3)
        throw ShapeError("ppm: expected HxWx3, got " + frame.shape_str());
    const std::size_t h = frame.dim(0), w = frame.dim(1);
    std::string buf = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    buf.reserve(buf.size() + h * w * 3);
    for (std::size_t i = 0; i < frame.size(); ++i) {
        const double v = std::llround(std::min(255.0, std::max(0.0, frame[i])));
        buf.push_back(static_cast<char>(static_cast<unsigned char>(v)));
    }
    detail::write_file(path, buf);
}

inline Tensor read_ppm(const std::string& path) {
    const std::string data = detail::read_file(path);
    std::size_t pos = 0;
    auto next_token = [&]() -> std::string {
        while (pos < data.size()) {
            if (data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        std::size_t start = pos;
        while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
        return data.substr(start, pos - start);
    };
    if (next_token() != "P6") throw IoError("ppm: not a P6 file: " + path);
    const std::string ws = next_token(), hs = next_token(), ms = next_token();
    if (ws.empty() || hs.empty() || ms.empty()) throw IoError("ppm: truncated header: " + path);
    const std::size_t w = std::stoul(ws), h = std::stoul(hs);
    if (std::stoul(ms) != 255) throw IoError("ppm: only maxval 255 supported: " + path);
    ++pos; // single whitespace after maxval
    if (data.size() < pos + h * w * 3) throw IoError("ppm: truncated payload: " + path);
    Tensor t({h, w, 3});
    for (std::size_t i = 0; i < h * w * 3; ++i)
        t[i] = static_cast<double>(static_cast<unsigned char>(data[pos + i]));
    return t;
}

} // namespace ovmae
