#include "srnet/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace srnet {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void put_bytes(std::vector<unsigned char>& out, const void* p, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    out.insert(out.end(), b, b + n);
}

template <typename U>
void put_scalar(std::vector<unsigned char>& out, U v) {
    put_bytes(out, &v, sizeof(U));
}

class Reader {
public:
    Reader(const unsigned char* p, size_t n) : p_(p), n_(n) {}
    void read(void* dst, size_t n) {
        if (pos_ + n > n_) throw std::runtime_error("checkpoint: truncated file");
        std::memcpy(dst, p_ + pos_, n);
        pos_ += n;
    }
    template <typename U>
    U scalar() {
        U v;
        read(&v, sizeof(U));
        return v;
    }
    size_t pos() const { return pos_; }
    size_t remaining() const { return n_ - pos_; }

private:
    const unsigned char* p_;
    size_t n_;
    size_t pos_ = 0;
};

void serialize_config(std::vector<unsigned char>& out, const ModelConfig& c) {
    put_scalar<uint64_t>(out, static_cast<uint64_t>(c.width));
    put_scalar<uint64_t>(out, static_cast<uint64_t>(c.depth));
    put_scalar<uint64_t>(out, c.dilation_factors.size());
    for (int64_t df : c.dilation_factors) put_scalar<uint64_t>(out, static_cast<uint64_t>(df));
    const bool flags[6] = {c.multi_scale, c.encoder_decoder, c.use_maxunpool,
                           c.global_residual, c.local_skips, c.weight_sharing};
    for (bool f : flags) put_scalar<uint8_t>(out, f ? 1 : 0);
}

ModelConfig deserialize_config(Reader& r) {
    ModelConfig c;
    c.width = static_cast<int64_t>(r.scalar<uint64_t>());
    c.depth = static_cast<int64_t>(r.scalar<uint64_t>());
    const uint64_t n_dfs = r.scalar<uint64_t>();
    if (n_dfs == 0 || n_dfs > 64) throw std::runtime_error("checkpoint: bad config block");
    c.dilation_factors.clear();
    for (uint64_t i = 0; i < n_dfs; ++i) {
        c.dilation_factors.push_back(static_cast<int64_t>(r.scalar<uint64_t>()));
    }
    bool* flags[6] = {&c.multi_scale, &c.encoder_decoder, &c.use_maxunpool,
                      &c.global_residual, &c.local_skips, &c.weight_sharing};
    for (bool* f : flags) *f = r.scalar<uint8_t>() != 0;
    return c;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ParameterStore<T>& params) {
    std::vector<unsigned char> out;
    put_bytes(out, kCheckpointMagic, 4);
    put_scalar<uint32_t>(out, kCheckpointVersion);
    serialize_config(out, config);
    put_scalar<uint64_t>(out, params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        const std::string& name = params.name(i);
        put_scalar<uint32_t>(out, static_cast<uint32_t>(name.size()));
        put_bytes(out, name.data(), name.size());
        const Tensor<T>& t = params.value(i);
        put_scalar<uint64_t>(out, 4);  // rank
        for (int64_t e : {t.shape.n, t.shape.c, t.shape.h, t.shape.w}) {
            put_scalar<uint64_t>(out, static_cast<uint64_t>(e));
        }
        for (T v : t.data) put_scalar<float>(out, static_cast<float>(v));
    }
    uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data(), static_cast<uInt>(out.size()));
    put_scalar<uint32_t>(out, crc);

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("checkpoint: cannot write " + tmp.string());
        f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
        if (!f) throw std::runtime_error("checkpoint: short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12) throw std::runtime_error("checkpoint: truncated file");

    uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
    uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size() - 4));
    if (crc != stored_crc) {
        throw std::runtime_error("checkpoint: CRC mismatch in " + path.string() +
                                 " (corrupt or truncated)");
    }

    Reader r(bytes.data(), bytes.size() - 4);
    char magic[4];
    r.read(magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path.string());
    }
    const uint32_t version = r.scalar<uint32_t>();
    if (version != kCheckpointVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }

    CheckpointData data;
    data.config = deserialize_config(r);
    const uint64_t count = r.scalar<uint64_t>();
    for (uint64_t i = 0; i < count; ++i) {
        const uint32_t name_len = r.scalar<uint32_t>();
        if (name_len > 4096) throw std::runtime_error("checkpoint: implausible name length");
        std::string name(name_len, '\0');
        r.read(name.data(), name_len);
        const uint64_t rank = r.scalar<uint64_t>();
        if (rank != 4) throw std::runtime_error("checkpoint: tensor " + name + " has rank " +
                                                std::to_string(rank) + ", want 4");
        TensorShape shape;
        shape.n = static_cast<int64_t>(r.scalar<uint64_t>());
        shape.c = static_cast<int64_t>(r.scalar<uint64_t>());
        shape.h = static_cast<int64_t>(r.scalar<uint64_t>());
        shape.w = static_cast<int64_t>(r.scalar<uint64_t>());
        validate_shape(shape);
        if (static_cast<uint64_t>(shape.elems()) * 4 > r.remaining()) {
            throw std::runtime_error("checkpoint: truncated tensor payload for " + name);
        }
        TensorF t(shape);
        r.read(t.data.data(), t.data.size() * sizeof(float));
        data.params.add(std::move(name), std::move(t));
    }
    if (r.remaining() != 0) throw std::runtime_error("checkpoint: trailing bytes");
    return data;
}

template <typename T>
SrnetModel<T> load_model(const std::filesystem::path& path) {
    CheckpointData data = load_checkpoint(path);
    if constexpr (std::is_same_v<T, float>) {
        return SrnetModel<float>(data.config, std::move(data.params));
    } else {
        ParameterStore<T> converted;
        for (size_t i = 0; i < data.params.size(); ++i) {
            converted.add(data.params.name(i), cast<T>(data.params.value(i)));
        }
        return SrnetModel<T>(data.config, std::move(converted));
    }
}

template void save_checkpoint(const std::filesystem::path&, const ModelConfig&,
                              const ParameterStore<float>&);
template void save_checkpoint(const std::filesystem::path&, const ModelConfig&,
                              const ParameterStore<double>&);
template SrnetModel<float> load_model<float>(const std::filesystem::path&);
template SrnetModel<double> load_model<double>(const std::filesystem::path&);

}  // namespace srnet
