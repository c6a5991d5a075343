#include "srnet/patch.hpp"

#include <stdexcept>

namespace srnet {

std::pair<TensorF, TensorF> sample_patch_pair(const TensorF& rainy, const TensorF& clean,
                                              const PatchSampler& sampler, RngState& rng) {
    if (rainy.shape != clean.shape) {
        throw std::invalid_argument("sample_patch_pair: unaligned pair " + rainy.shape.str() +
                                    " vs " + clean.shape.str());
    }
    if (sampler.patch < 1 || sampler.align < 1) {
        throw std::invalid_argument("sample_patch_pair: bad sampler configuration");
    }
    const int64_t h = rainy.shape.h, w = rainy.shape.w, p = sampler.patch;
    if (h < p || w < p) {
        throw std::invalid_argument("sample_patch_pair: image " + rainy.shape.str() +
                                    " smaller than patch " + std::to_string(p));
    }
    const int64_t ny = (h - p) / sampler.align + 1;
    const int64_t nx = (w - p) / sampler.align + 1;
    const int64_t y0 = rng.uniform_int(0, ny - 1) * sampler.align;
    const int64_t x0 = rng.uniform_int(0, nx - 1) * sampler.align;

    auto crop = [&](const TensorF& src) {
        TensorF dst({src.shape.n, src.shape.c, p, p});
        for (int64_t b = 0; b < src.shape.n; ++b) {
            for (int64_t c = 0; c < src.shape.c; ++c) {
                for (int64_t y = 0; y < p; ++y) {
                    const float* s = src.plane(b, c) + (y0 + y) * w + x0;
                    float* d = dst.plane(b, c) + y * p;
                    for (int64_t x = 0; x < p; ++x) d[x] = s[x];
                }
            }
        }
        return dst;
    };
    return {crop(rainy), crop(clean)};
}

template <typename T>
Padded<T> pad_to_multiple(const Tensor<T>& img, int64_t m) {
    if (m < 1) throw std::invalid_argument("pad_to_multiple: m must be >= 1");
    const int64_t h = img.shape.h, w = img.shape.w;
    const int64_t ph = (h + m - 1) / m * m;
    const int64_t pw = (w + m - 1) / m * m;
    if (ph - h >= h || pw - w >= w) {
        throw std::invalid_argument("pad_to_multiple: image " + img.shape.str() +
                                    " too small to reflect-pad to a multiple of " +
                                    std::to_string(m));
    }
    Padded<T> r;
    r.orig_h = h;
    r.orig_w = w;
    if (ph == h && pw == w) {
        r.img = img;
        return r;
    }
    r.img = Tensor<T>({img.shape.n, img.shape.c, ph, pw});
    // reflect without repeating the edge row/column
    auto mirror = [](int64_t i, int64_t extent) { return i < extent ? i : 2 * extent - 2 - i; };
    for (int64_t b = 0; b < img.shape.n; ++b) {
        for (int64_t c = 0; c < img.shape.c; ++c) {
            const T* src = img.plane(b, c);
            T* dst = r.img.plane(b, c);
            for (int64_t y = 0; y < ph; ++y) {
                const int64_t sy = mirror(y, h);
                for (int64_t x = 0; x < pw; ++x) {
                    dst[y * pw + x] = src[sy * w + mirror(x, w)];
                }
            }
        }
    }
    return r;
}

template <typename T>
Tensor<T> crop_back(const Tensor<T>& img, int64_t orig_h, int64_t orig_w) {
    if (orig_h > img.shape.h || orig_w > img.shape.w) {
        throw std::invalid_argument("crop_back: target larger than padded image");
    }
    if (orig_h == img.shape.h && orig_w == img.shape.w) return img;
    Tensor<T> out({img.shape.n, img.shape.c, orig_h, orig_w});
    for (int64_t b = 0; b < img.shape.n; ++b) {
        for (int64_t c = 0; c < img.shape.c; ++c) {
            const T* src = img.plane(b, c);
            T* dst = out.plane(b, c);
            for (int64_t y = 0; y < orig_h; ++y) {
                for (int64_t x = 0; x < orig_w; ++x) dst[y * orig_w + x] = src[y * img.shape.w + x];
            }
        }
    }
    return out;
}

#define SRNET_INSTANTIATE(T)                                   \
    template struct Padded<T>;                                 \
    template Padded<T> pad_to_multiple(const Tensor<T>&, int64_t); \
    template Tensor<T> crop_back(const Tensor<T>&, int64_t, int64_t);

SRNET_INSTANTIATE(float)
SRNET_INSTANTIATE(double)
#undef SRNET_INSTANTIATE

}  // namespace srnet
