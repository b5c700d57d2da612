#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "error.hpp"
#include "image.hpp"

namespace spikenerf {

inline constexpr double kPsnrCap = 99.0;

inline double mse(const Image& pred, const Image& target) {
    detail::require(pred.width == target.width && pred.height == target.height &&
                        pred.rgb.size() == target.rgb.size(),
                    ErrorCode::shape_mismatch, "image dimensions differ");
    double acc = 0;
    for (std::size_t i = 0; i < pred.rgb.size(); ++i) {
        const double d = double(pred.rgb[i]) - double(target.rgb[i]);
        acc += d * d;
    }
    return pred.rgb.empty() ? 0.0 : acc / double(pred.rgb.size());
}

inline double psnr_from_mse(double m) {
    if (m <= 0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(m));
}

/// Peak signal-to-noise ratio for a [0, 1] range, capped at 99 dB.
inline double psnr(const Image& pred, const Image& target) {
    return psnr_from_mse(mse(pred, target));
}

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

namespace detail {

inline std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(size));
    const double c = 0.5 * (size - 1);
    double sum = 0;
    for (int i = 0; i < size; ++i) {
        k[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

/// Separable 'valid' filtering of a w x h plane.
inline std::vector<double> filter_valid(const std::vector<double>& src, int w, int h,
                                        const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int ow = w - n + 1, oh = h - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < n; ++i) s += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

} // namespace detail

/// Gaussian-windowed SSIM computed per channel over all fully contained
/// windows, then averaged across channels.
inline double ssim(const Image& pred, const Image& target, const SsimParams& p = {}) {
    detail::require(pred.width == target.width && pred.height == target.height,
                    ErrorCode::shape_mismatch, "image dimensions differ");
    detail::require(pred.width >= p.window && pred.height >= p.window,
                    ErrorCode::invalid_argument, "image smaller than the SSIM window");
    const int w = pred.width, h = pred.height;
    const auto k = detail::gaussian_kernel(p.window, p.sigma);
    const double c1 = p.k1 * p.k1, c2 = p.k2 * p.k2;
    double total = 0;
    for (int c = 0; c < 3; ++c) {
        const std::size_t n = static_cast<std::size_t>(w) * h;
        std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = pred.rgb[i * 3 + c];
            y[i] = target.rgb[i * 3 + c];
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        auto mx = detail::filter_valid(x, w, h, k), my = detail::filter_valid(y, w, h, k);
        auto sxx = detail::filter_valid(xx, w, h, k), syy = detail::filter_valid(yy, w, h, k);
        auto sxy = detail::filter_valid(xy, w, h, k);
        double acc = 0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i];
            const double vy = syy[i] - my[i] * my[i];
            const double cov = sxy[i] - mx[i] * my[i];
            acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
                   ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        total += acc / double(mx.size());
    }
    return total / 3.0;
}

} // namespace spikenerf
