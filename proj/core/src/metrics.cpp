#include "srnet/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace srnet {

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<size_t>(size) * size);
    const double half = (size - 1) / 2.0;
    double total = 0.0;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dy = y - half, dx = x - half;
            const double v = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
            w[static_cast<size_t>(y) * size + x] = v;
            total += v;
        }
    }
    for (double& v : w) v /= total;
    return w;
}

// Per-window statistics needed by both the value and the gradient paths.
struct WindowMoments {
    double t1;  // sum w*x   (mu_x)
    double u1;  // sum w*y   (mu_y)
    double t2;  // sum w*x^2
    double t3;  // sum w*x*y
    double u2;  // sum w*y^2
};

template <typename T>
WindowMoments moments_at(const T* xp, const T* yp, int64_t w_img, int64_t y0, int64_t x0,
                         const std::vector<double>& win, int wsize) {
    WindowMoments m{0, 0, 0, 0, 0};
    for (int ky = 0; ky < wsize; ++ky) {
        const T* xr = xp + (y0 + ky) * w_img + x0;
        const T* yr = yp + (y0 + ky) * w_img + x0;
        const double* wr = win.data() + static_cast<size_t>(ky) * wsize;
        for (int kx = 0; kx < wsize; ++kx) {
            const double xv = xr[kx], yv = yr[kx], wv = wr[kx];
            m.t1 += wv * xv;
            m.u1 += wv * yv;
            m.t2 += wv * xv * xv;
            m.t3 += wv * xv * yv;
            m.u2 += wv * yv * yv;
        }
    }
    return m;
}

struct SsimTerms {
    double s;        // SSIM value of the window
    double d1, d2, d3;  // dS/d(t1), dS/d(t2), dS/d(t3)
};

SsimTerms ssim_terms(const WindowMoments& m, double c1, double c2, bool want_grad) {
    const double sig_xy = m.t3 - m.t1 * m.u1;
    const double sig_x2 = m.t2 - m.t1 * m.t1;
    const double sig_y2 = m.u2 - m.u1 * m.u1;
    const double a1 = 2.0 * m.t1 * m.u1 + c1;
    const double a2 = 2.0 * sig_xy + c2;
    const double b1 = m.t1 * m.t1 + m.u1 * m.u1 + c1;
    const double b2 = sig_x2 + sig_y2 + c2;
    SsimTerms t{};
    t.s = (a1 * a2) / (b1 * b2);
    if (want_grad) {
        t.d1 = 2.0 * m.u1 * (a2 - a1) / (b1 * b2) - 2.0 * m.t1 * t.s * (1.0 / b1 - 1.0 / b2);
        t.d2 = -t.s / b2;
        t.d3 = 2.0 * a1 / (b1 * b2);
    }
    return t;
}

template <typename T>
void check_ssim_inputs(const Tensor<T>& x, const Tensor<T>& y, const SsimConfig& cfg) {
    if (x.shape != y.shape) {
        throw std::invalid_argument("ssim: shape mismatch " + x.shape.str() + " vs " +
                                    y.shape.str());
    }
    if (x.shape.h < cfg.window || x.shape.w < cfg.window) {
        throw std::invalid_argument("ssim: image " + x.shape.str() + " smaller than the " +
                                    std::to_string(cfg.window) + "x" + std::to_string(cfg.window) +
                                    " window");
    }
}

// Shared driver: accumulates mean SSIM, optionally scattering the gradient.
template <typename T>
double ssim_impl(const Tensor<T>& x, const Tensor<T>& y, Tensor<T>* grad_x, const SsimConfig& cfg,
                 const ExecOpts& opts) {
    check_ssim_inputs(x, y, cfg);
    const std::vector<double> win = gaussian_window(cfg.window, cfg.sigma);
    const int ws = cfg.window;
    const double c1 = cfg.c1(), c2 = cfg.c2();

    const int64_t planes = x.shape.n * x.shape.c;
    const int64_t vh = x.shape.h - ws + 1, vw = x.shape.w - ws + 1;
    const double n_windows = static_cast<double>(planes) * vh * vw;

    if (grad_x) *grad_x = Tensor<T>::zeros(x.shape);
    std::vector<double> plane_sums(static_cast<size_t>(planes), 0.0);
    // Gradient scatters stay per-plane, so planes parallelize cleanly.
    parallel_for(0, planes, opts, [&](int64_t pl) {
        const int64_t b = pl / x.shape.c, c = pl % x.shape.c;
        const T* xp = x.plane(b, c);
        const T* yp = y.plane(b, c);
        double acc = 0.0;
        std::vector<double> gacc;
        if (grad_x) gacc.assign(static_cast<size_t>(x.shape.h * x.shape.w), 0.0);
        for (int64_t y0 = 0; y0 < vh; ++y0) {
            for (int64_t x0 = 0; x0 < vw; ++x0) {
                const WindowMoments m = moments_at(xp, yp, x.shape.w, y0, x0, win, ws);
                const SsimTerms t = ssim_terms(m, c1, c2, grad_x != nullptr);
                acc += t.s;
                if (grad_x) {
                    for (int ky = 0; ky < ws; ++ky) {
                        const int64_t qy = y0 + ky;
                        const double* wr = win.data() + static_cast<size_t>(ky) * ws;
                        for (int kx = 0; kx < ws; ++kx) {
                            const int64_t q = qy * x.shape.w + x0 + kx;
                            gacc[static_cast<size_t>(q)] +=
                                wr[kx] * (t.d1 + 2.0 * xp[q] * t.d2 + yp[q] * t.d3);
                        }
                    }
                }
            }
        }
        plane_sums[static_cast<size_t>(pl)] = acc;
        if (grad_x) {
            T* gp = grad_x->plane(b, c);
            for (size_t i = 0; i < gacc.size(); ++i) gp[i] = static_cast<T>(gacc[i] / n_windows);
        }
    });

    double total = 0.0;
    for (double s : plane_sums) total += s;
    return total / n_windows;
}

}  // namespace

template <typename T>
double ssim(const Tensor<T>& x, const Tensor<T>& y, const SsimConfig& cfg, const ExecOpts& opts) {
    return ssim_impl<T>(x, y, nullptr, cfg, opts);
}

template <typename T>
double ssim_with_grad(const Tensor<T>& x, const Tensor<T>& y, Tensor<T>& grad_x,
                      const SsimConfig& cfg, const ExecOpts& opts) {
    return ssim_impl<T>(x, y, &grad_x, cfg, opts);
}

template <typename T>
double negative_ssim_loss(const Tensor<T>& b_hat, const Tensor<T>& b, Tensor<T>& grad_b_hat,
                          const SsimConfig& cfg, const ExecOpts& opts) {
    const double s = ssim_impl<T>(b_hat, b, &grad_b_hat, cfg, opts);
    scale_(grad_b_hat, T(-1));
    return -s;
}

template <typename T>
Tensor<T> rgb_to_luma(const Tensor<T>& img) {
    if (img.shape.c != 3) {
        throw std::invalid_argument("rgb_to_luma: want 3 channels, got " + img.shape.str());
    }
    Tensor<T> out({img.shape.n, 1, img.shape.h, img.shape.w});
    const int64_t hw = img.shape.h * img.shape.w;
    for (int64_t b = 0; b < img.shape.n; ++b) {
        const T* r = img.plane(b, 0);
        const T* g = img.plane(b, 1);
        const T* bl = img.plane(b, 2);
        T* yp = out.plane(b, 0);
        for (int64_t i = 0; i < hw; ++i) {
            yp[i] = static_cast<T>(0.299 * r[i] + 0.587 * g[i] + 0.114 * bl[i]);
        }
    }
    return out;
}

template <typename T>
double psnr(const Tensor<T>& x, const Tensor<T>& y, double peak) {
    if (x.shape != y.shape) {
        throw std::invalid_argument("psnr: shape mismatch " + x.shape.str() + " vs " +
                                    y.shape.str());
    }
    double se = 0.0;
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double d = static_cast<double>(x.data[i]) - static_cast<double>(y.data[i]);
        se += d * d;
    }
    const double mse = se / static_cast<double>(x.data.size());
    if (mse == 0.0) return kPsnrCapDb;
    return std::min(10.0 * std::log10(peak * peak / mse), kPsnrCapDb);
}

double MetricReport::mean_psnr_y() const {
    double s = 0.0;
    for (const auto& r : rows) s += r.psnr_y;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

double MetricReport::mean_ssim_y() const {
    double s = 0.0;
    for (const auto& r : rows) s += r.ssim_y;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

double MetricReport::mean_psnr_y_in() const {
    double s = 0.0;
    int n = 0;
    for (const auto& r : rows) {
        if (r.psnr_y_in) {
            s += *r.psnr_y_in;
            ++n;
        }
    }
    return n == 0 ? 0.0 : s / n;
}

double MetricReport::mean_ssim_y_in() const {
    double s = 0.0;
    int n = 0;
    for (const auto& r : rows) {
        if (r.ssim_y_in) {
            s += *r.ssim_y_in;
            ++n;
        }
    }
    return n == 0 ? 0.0 : s / n;
}

std::string MetricReport::table() const {
    std::ostringstream os;
    const bool with_in = !rows.empty() && rows.front().psnr_y_in.has_value();
    os << std::left << std::setw(16) << "id" << std::right << std::setw(10) << "psnr_y"
       << std::setw(10) << "ssim_y";
    if (with_in) os << std::setw(12) << "psnr_y_in" << std::setw(12) << "ssim_y_in";
    os << "\n";
    os << std::fixed << std::setprecision(4);
    for (const auto& r : rows) {
        os << std::left << std::setw(16) << r.id << std::right << std::setw(10) << std::setprecision(2)
           << r.psnr_y << std::setw(10) << std::setprecision(4) << r.ssim_y;
        if (with_in) {
            os << std::setw(12) << std::setprecision(2) << r.psnr_y_in.value_or(0.0) << std::setw(12)
               << std::setprecision(4) << r.ssim_y_in.value_or(0.0);
        }
        os << "\n";
    }
    os << std::left << std::setw(16) << "mean" << std::right << std::setw(10)
       << std::setprecision(2) << mean_psnr_y() << std::setw(10) << std::setprecision(4)
       << mean_ssim_y();
    if (with_in) {
        os << std::setw(12) << std::setprecision(2) << mean_psnr_y_in() << std::setw(12)
           << std::setprecision(4) << mean_ssim_y_in();
    }
    os << "\n";
    return os.str();
}

std::string MetricReport::json() const {
    nlohmann::json j;
    j["psnr_y"] = mean_psnr_y();
    j["ssim_y"] = mean_ssim_y();
    j["n_images"] = rows.size();
    if (!rows.empty() && rows.front().psnr_y_in.has_value()) {
        j["psnr_y_input"] = mean_psnr_y_in();
        j["ssim_y_input"] = mean_ssim_y_in();
    }
    nlohmann::json per;
    for (const auto& r : rows) {
        nlohmann::json e;
        e["id"] = r.id;
        e["psnr_y"] = r.psnr_y;
        e["ssim_y"] = r.ssim_y;
        if (r.psnr_y_in) e["psnr_y_input"] = *r.psnr_y_in;
        if (r.ssim_y_in) e["ssim_y_input"] = *r.ssim_y_in;
        per.push_back(e);
    }
    j["images"] = per;
    return j.dump(2);
}

#define SRNET_INSTANTIATE(T)                                                                    \
    template double ssim(const Tensor<T>&, const Tensor<T>&, const SsimConfig&, const ExecOpts&); \
    template double ssim_with_grad(const Tensor<T>&, const Tensor<T>&, Tensor<T>&,              \
                                   const SsimConfig&, const ExecOpts&);                         \
    template double negative_ssim_loss(const Tensor<T>&, const Tensor<T>&, Tensor<T>&,          \
                                       const SsimConfig&, const ExecOpts&);                     \
    template Tensor<T> rgb_to_luma(const Tensor<T>&);                                           \
    template double psnr(const Tensor<T>&, const Tensor<T>&, double);

SRNET_INSTANTIATE(float)
SRNET_INSTANTIATE(double)
#undef SRNET_INSTANTIATE

}  // namespace srnet
