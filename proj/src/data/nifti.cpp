#include "daseg/data/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <string>

#include "daseg/error.hpp"

namespace daseg::nifti {

namespace {

constexpr int kHeaderSize = 348;
constexpr int kDataOffset = 352;

enum DataType : std::int16_t {
    DT_UINT8 = 2,
    DT_INT16 = 4,
    DT_INT32 = 8,
    DT_FLOAT32 = 16,
    DT_FLOAT64 = 64,
    DT_INT8 = 256,
    DT_UINT16 = 512,
    DT_UINT32 = 768,
};

struct GzCloser {
    void operator()(gzFile f) const {
        if (f) gzclose(f);
    }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

template <typename T>
T byteswap_value(T v) {
    std::array<unsigned char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    std::reverse(b.begin(), b.end());
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
}

template <typename T>
T field(const unsigned char* hdr, int offset, bool swap) {
    T v;
    std::memcpy(&v, hdr + offset, sizeof(T));
    return swap ? byteswap_value(v) : v;
}

template <typename T>
void put(unsigned char* hdr, int offset, T v) {
    if constexpr (std::endian::native == std::endian::big) v = byteswap_value(v);
    std::memcpy(hdr + offset, &v, sizeof(T));
}

void read_exact(gzFile f, void* dst, std::size_t n, const std::filesystem::path& path) {
    auto* out = static_cast<unsigned char*>(dst);
    while (n > 0) {
        const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
        const int got = gzread(f, out, chunk);
        if (got <= 0) throw DataError("truncated NIfTI file " + path.string());
        out += got;
        n -= static_cast<std::size_t>(got);
    }
}

template <typename T>
void decode(const std::vector<unsigned char>& raw, std::size_t count, bool swap, std::vector<float>& out) {
    out.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        T v;
        std::memcpy(&v, raw.data() + i * sizeof(T), sizeof(T));
        if (swap) v = byteswap_value(v);
        out[i] = static_cast<float>(v);
    }
}

}  // namespace

Image read(const std::filesystem::path& path) {
    GzHandle f(gzopen(path.string().c_str(), "rb"));
    if (!f) throw DataError("cannot open NIfTI file " + path.string());

    std::array<unsigned char, kHeaderSize> hdr{};
    read_exact(f.get(), hdr.data(), hdr.size(), path);

    bool swap = false;
    if (field<std::int32_t>(hdr.data(), 0, false) != kHeaderSize) {
        if (field<std::int32_t>(hdr.data(), 0, true) != kHeaderSize) {
            throw DataError("not a NIfTI-1 file: " + path.string());
        }
        swap = true;
    }
    if (std::memcmp(hdr.data() + 344, "n+1", 3) != 0 && std::memcmp(hdr.data() + 344, "ni1", 3) != 0) {
        throw DataError("bad NIfTI magic in " + path.string());
    }

    const auto ndim = field<std::int16_t>(hdr.data(), 40, swap);
    if (ndim < 1 || ndim > 7) throw DataError("invalid NIfTI dimensionality in " + path.string());
    Image img;
    for (int a = 0; a < 3; ++a) {
        const auto n = a < ndim ? field<std::int16_t>(hdr.data(), 42 + 2 * a, swap) : std::int16_t{1};
        if (n < 1) throw DataError("invalid NIfTI extent in " + path.string());
        img.dims[a] = n;
        const float pd = field<float>(hdr.data(), 80 + 4 * a, swap);
        img.spacing[a] = pd > 0.0f ? static_cast<double>(pd) : 1.0;
    }
    const auto datatype = field<std::int16_t>(hdr.data(), 70, swap);
    const auto vox_offset = static_cast<long>(field<float>(hdr.data(), 108, swap));
    const float slope = field<float>(hdr.data(), 112, swap);
    const float inter = field<float>(hdr.data(), 116, swap);

    // Skip extensions up to the data offset.
    const long skip = std::max<long>(vox_offset, kDataOffset) - kHeaderSize;
    std::vector<unsigned char> pad(static_cast<std::size_t>(skip));
    if (skip > 0) read_exact(f.get(), pad.data(), pad.size(), path);

    const auto count = static_cast<std::size_t>(voxel_count(img.dims));
    std::size_t elem = 0;
    switch (datatype) {
        case DT_UINT8:
        case DT_INT8: elem = 1; break;
        case DT_INT16:
        case DT_UINT16: elem = 2; break;
        case DT_INT32:
        case DT_UINT32:
        case DT_FLOAT32: elem = 4; break;
        case DT_FLOAT64: elem = 8; break;
        default: throw DataError("unsupported NIfTI datatype " + std::to_string(datatype) + " in " + path.string());
    }
    std::vector<unsigned char> raw(count * elem);
    read_exact(f.get(), raw.data(), raw.size(), path);

    std::vector<float> file_order;
    switch (datatype) {
        case DT_UINT8: decode<std::uint8_t>(raw, count, false, file_order); break;
        case DT_INT8: decode<std::int8_t>(raw, count, false, file_order); break;
        case DT_INT16: decode<std::int16_t>(raw, count, swap, file_order); break;
        case DT_UINT16: decode<std::uint16_t>(raw, count, swap, file_order); break;
        case DT_INT32: decode<std::int32_t>(raw, count, swap, file_order); break;
        case DT_UINT32: decode<std::uint32_t>(raw, count, swap, file_order); break;
        case DT_FLOAT32: decode<float>(raw, count, swap, file_order); break;
        case DT_FLOAT64: decode<double>(raw, count, swap, file_order); break;
        default: break;
    }
    if (slope != 0.0f && std::isfinite(slope) && !(slope == 1.0f && inter == 0.0f)) {
        for (auto& v : file_order) v = v * slope + inter;
    }

    // File order has the first axis fastest; transpose so the last axis is contiguous.
    const auto [ni, nj, nk] = img.dims;
    img.data.resize(count);
    for (std::int64_t k = 0; k < nk; ++k) {
        for (std::int64_t j = 0; j < nj; ++j) {
            for (std::int64_t i = 0; i < ni; ++i) {
                img.data[static_cast<std::size_t>((i * nj + j) * nk + k)] =
                    file_order[static_cast<std::size_t>((k * nj + j) * ni + i)];
            }
        }
    }
    return img;
}

void write(const std::filesystem::path& path, const Image& img, StorageType storage) {
    if (static_cast<std::int64_t>(img.data.size()) != voxel_count(img.dims)) {
        throw ShapeError("NIfTI image buffer does not match dims " + to_string(img.dims));
    }
    for (const auto n : img.dims) {
        if (n < 1 || n > 32767) throw ShapeError("NIfTI-1 extents must be in [1, 32767]");
    }

    std::array<unsigned char, kDataOffset> hdr{};
    put<std::int32_t>(hdr.data(), 0, kHeaderSize);
    put<std::int16_t>(hdr.data(), 40, 3);
    for (int a = 0; a < 3; ++a) put<std::int16_t>(hdr.data(), 42 + 2 * a, static_cast<std::int16_t>(img.dims[a]));
    for (int a = 3; a < 7; ++a) put<std::int16_t>(hdr.data(), 42 + 2 * a, 1);
    std::int16_t dt = DT_FLOAT32;
    std::int16_t bitpix = 32;
    if (storage == StorageType::uint8) {
        dt = DT_UINT8;
        bitpix = 8;
    } else if (storage == StorageType::int16) {
        dt = DT_INT16;
        bitpix = 16;
    }
    put<std::int16_t>(hdr.data(), 70, dt);
    put<std::int16_t>(hdr.data(), 72, bitpix);
    put<float>(hdr.data(), 76, 1.0f);
    for (int a = 0; a < 3; ++a) put<float>(hdr.data(), 80 + 4 * a, static_cast<float>(img.spacing[a]));
    put<float>(hdr.data(), 108, static_cast<float>(kDataOffset));
    put<float>(hdr.data(), 112, 1.0f);
    put<float>(hdr.data(), 116, 0.0f);
    hdr[123] = 2;  // millimetres
    put<std::int16_t>(hdr.data(), 254, 1);
    put<float>(hdr.data(), 280, static_cast<float>(img.spacing[0]));
    put<float>(hdr.data(), 300, static_cast<float>(img.spacing[1]));
    put<float>(hdr.data(), 320, static_cast<float>(img.spacing[2]));
    std::memcpy(hdr.data() + 344, "n+1\0", 4);

    const auto [ni, nj, nk] = img.dims;
    const std::size_t count = img.data.size();
    std::vector<unsigned char> raw(count * static_cast<std::size_t>(bitpix / 8));
    for (std::int64_t k = 0; k < nk; ++k) {
        for (std::int64_t j = 0; j < nj; ++j) {
            for (std::int64_t i = 0; i < ni; ++i) {
                const float v = img.data[static_cast<std::size_t>((i * nj + j) * nk + k)];
                const auto out = static_cast<std::size_t>((k * nj + j) * ni + i);
                if (storage == StorageType::uint8) {
                    raw[out] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
                } else if (storage == StorageType::int16) {
                    auto s = static_cast<std::int16_t>(std::clamp(std::lround(v), -32768L, 32767L));
                    if constexpr (std::endian::native == std::endian::big) s = byteswap_value(s);
                    std::memcpy(raw.data() + out * 2, &s, 2);
                } else {
                    float s = v;
                    if constexpr (std::endian::native == std::endian::big) s = byteswap_value(s);
                    std::memcpy(raw.data() + out * 4, &s, 4);
                }
            }
        }
    }

    const bool gz = path.extension() == ".gz";
    GzHandle f(gzopen(path.string().c_str(), gz ? "wb6" : "wbT"));
    if (!f) throw DataError("cannot write NIfTI file " + path.string());
    auto write_all = [&](const unsigned char* p, std::size_t n) {
        while (n > 0) {
            const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
            const int w = gzwrite(f.get(), p, chunk);
            if (w <= 0) throw DataError("write failed for " + path.string());
            p += w;
            n -= static_cast<std::size_t>(w);
        }
    };
    write_all(hdr.data(), hdr.size());
    write_all(raw.data(), raw.size());
}

}  // namespace daseg::nifti
