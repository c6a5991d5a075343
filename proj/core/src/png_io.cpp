#include "srnet/png_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace srnet {

namespace {

constexpr unsigned char kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

void put_u32_be(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

uint32_t read_u32_be(const unsigned char* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void append_chunk(std::vector<unsigned char>& out, const char type[4],
                  const unsigned char* data, size_t len) {
    put_u32_be(out, static_cast<uint32_t>(len));
    const size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data, data + len);
    uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + type_at, static_cast<uInt>(4 + len));
    put_u32_be(out, crc);
}

std::vector<unsigned char> zlib_inflate(const unsigned char* src, size_t len, size_t expect) {
    std::vector<unsigned char> out(expect);
    uLongf out_len = static_cast<uLongf>(expect);
    const int rc = uncompress(out.data(), &out_len, src, static_cast<uLong>(len));
    if (rc != Z_OK || out_len != expect) {
        throw std::runtime_error("png: corrupt or truncated image data");
    }
    return out;
}

std::vector<unsigned char> zlib_deflate(const unsigned char* src, size_t len) {
    uLongf bound = compressBound(static_cast<uLong>(len));
    std::vector<unsigned char> out(bound);
    const int rc = compress2(out.data(), &bound, src, static_cast<uLong>(len), 6);
    if (rc != Z_OK) throw std::runtime_error("png: deflate failed");
    out.resize(bound);
    return out;
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

void unfilter(std::vector<unsigned char>& raw, int64_t h, int64_t stride) {
    // raw: h rows of (1 filter byte + stride payload bytes), bpp = 3
    const int bpp = 3;
    std::vector<unsigned char> prev(static_cast<size_t>(stride), 0);
    for (int64_t y = 0; y < h; ++y) {
        unsigned char* row = raw.data() + y * (stride + 1);
        const int type = row[0];
        unsigned char* cur = row + 1;
        switch (type) {
            case 0:
                break;
            case 1:
                for (int64_t i = bpp; i < stride; ++i) cur[i] = static_cast<unsigned char>(cur[i] + cur[i - bpp]);
                break;
            case 2:
                for (int64_t i = 0; i < stride; ++i) cur[i] = static_cast<unsigned char>(cur[i] + prev[i]);
                break;
            case 3:
                for (int64_t i = 0; i < stride; ++i) {
                    const int left = i >= bpp ? cur[i - bpp] : 0;
                    cur[i] = static_cast<unsigned char>(cur[i] + (left + prev[i]) / 2);
                }
                break;
            case 4:
                for (int64_t i = 0; i < stride; ++i) {
                    const int left = i >= bpp ? cur[i - bpp] : 0;
                    const int ul = i >= bpp ? prev[i - bpp] : 0;
                    cur[i] = static_cast<unsigned char>(cur[i] + paeth(left, prev[i], ul));
                }
                break;
            default:
                throw std::runtime_error("png: unknown filter type " + std::to_string(type));
        }
        std::memcpy(prev.data(), cur, static_cast<size_t>(stride));
    }
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("png: cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("png: cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("png: short write to " + path.string());
}

}  // namespace

TensorF load_image(const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = read_file(path);
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0) {
        throw std::runtime_error("png: " + path.string() + " is not a PNG file");
    }

    int64_t w = 0, h = 0;
    std::vector<unsigned char> idat;
    bool saw_ihdr = false, saw_iend = false;
    size_t pos = 8;
    while (pos + 8 <= bytes.size() && !saw_iend) {
        const uint32_t len = read_u32_be(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw std::runtime_error("png: truncated chunk");
        const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
        const unsigned char* data = bytes.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw std::runtime_error("png: bad IHDR");
            w = read_u32_be(data);
            h = read_u32_be(data + 4);
            const int bit_depth = data[8], color_type = data[9], interlace = data[12];
            if (bit_depth != 8 || color_type != 2) {
                throw std::runtime_error("png: " + path.string() +
                                         " is not 8-bit RGB (bit depth " +
                                         std::to_string(bit_depth) + ", color type " +
                                         std::to_string(color_type) + ")");
            }
            if (interlace != 0) throw std::runtime_error("png: interlaced images unsupported");
            saw_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_iend = true;
        }
        pos += 12 + len;
    }
    if (!saw_ihdr || !saw_iend || w < 1 || h < 1) {
        throw std::runtime_error("png: malformed file " + path.string());
    }

    const int64_t stride = w * 3;
    std::vector<unsigned char> raw =
        zlib_inflate(idat.data(), idat.size(), static_cast<size_t>(h * (stride + 1)));
    unfilter(raw, h, stride);

    TensorF img({1, 3, h, w});
    for (int64_t y = 0; y < h; ++y) {
        const unsigned char* row = raw.data() + y * (stride + 1) + 1;
        for (int64_t x = 0; x < w; ++x) {
            for (int64_t c = 0; c < 3; ++c) {
                img.at(0, c, y, x) = static_cast<float>(row[x * 3 + c]) / 255.0f;
            }
        }
    }
    return img;
}

namespace {

unsigned char quantize(float v) {
    const float clamped = std::clamp(v, 0.0f, 1.0f);
    // round half away from zero (values are nonnegative here)
    const long q = std::lround(static_cast<double>(clamped) * 255.0);
    return static_cast<unsigned char>(std::clamp<long>(q, 0, 255));
}

void save_rgb(const TensorF& img, const std::filesystem::path& path) {
    const int64_t h = img.shape.h, w = img.shape.w;
    const int64_t stride = w * 3;
    std::vector<unsigned char> raw(static_cast<size_t>(h * (stride + 1)));
    for (int64_t y = 0; y < h; ++y) {
        unsigned char* row = raw.data() + y * (stride + 1);
        row[0] = 0;  // filter: none
        for (int64_t x = 0; x < w; ++x) {
            for (int64_t c = 0; c < 3; ++c) {
                row[1 + x * 3 + c] = quantize(img.at(0, c, y, x));
            }
        }
    }
    const std::vector<unsigned char> compressed = zlib_deflate(raw.data(), raw.size());

    std::vector<unsigned char> out(kSignature, kSignature + 8);
    unsigned char ihdr[13];
    ihdr[0] = static_cast<unsigned char>(w >> 24);
    ihdr[1] = static_cast<unsigned char>(w >> 16);
    ihdr[2] = static_cast<unsigned char>(w >> 8);
    ihdr[3] = static_cast<unsigned char>(w);
    ihdr[4] = static_cast<unsigned char>(h >> 24);
    ihdr[5] = static_cast<unsigned char>(h >> 16);
    ihdr[6] = static_cast<unsigned char>(h >> 8);
    ihdr[7] = static_cast<unsigned char>(h);
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 2;   // truecolor RGB
    ihdr[10] = 0;  // compression
    ihdr[11] = 0;  // filter
    ihdr[12] = 0;  // no interlace
    append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
    append_chunk(out, "IDAT", compressed.data(), compressed.size());
    append_chunk(out, "IEND", nullptr, 0);
    write_file(path, out);
}

}  // namespace

void save_image(const TensorF& img, const std::filesystem::path& path) {
    if (img.shape.n != 1 || img.shape.c != 3) {
        throw std::invalid_argument("save_image: want a (1,3,H,W) tensor, got " + img.shape.str());
    }
    save_rgb(img, path);
}

void save_image_gray_normalized(const TensorF& plane, const std::filesystem::path& path) {
    if (plane.shape.n != 1 || plane.shape.c != 1) {
        throw std::invalid_argument("save_image_gray_normalized: want (1,1,H,W), got " +
                                    plane.shape.str());
    }
    float lo = plane.data[0], hi = plane.data[0];
    for (float v : plane.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const float span = hi - lo;
    TensorF rgb({1, 3, plane.shape.h, plane.shape.w});
    for (int64_t y = 0; y < plane.shape.h; ++y) {
        for (int64_t x = 0; x < plane.shape.w; ++x) {
            const float v = span > 0 ? (plane.at(0, 0, y, x) - lo) / span : 0.0f;
            for (int64_t c = 0; c < 3; ++c) rgb.at(0, c, y, x) = v;
        }
    }
    save_rgb(rgb, path);
}

}  // namespace srnet
