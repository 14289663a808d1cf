#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "crlsc/error.hpp"
#include "crlsc/matrix.hpp"

namespace crlsc {

// H x W x C image with values in [0,1], row-major, channel-last.
struct Image {
    std::size_t h = 0, w = 0, ch = 0;
    std::vector<double> px;

    Image() = default;
    Image(std::size_t h_, std::size_t w_, std::size_t c_)
        : h(h_), w(w_), ch(c_), px(h_ * w_ * c_, 0.0) {}

    double& at(std::size_t y, std::size_t x, std::size_t c) {
        return px[(y * w + x) * ch + c];
    }
    double at(std::size_t y, std::size_t x, std::size_t c) const {
        return px[(y * w + x) * ch + c];
    }
    std::size_t size() const { return px.size(); }
};

struct AugmentationConfig {
    double crop_scale_lo = 0.6;
    double crop_scale_hi = 1.0;
    double flip_prob = 0.5;
    double brightness = 0.4;
    double contrast = 0.4;
    double saturation = 0.2;
    double blur_sigma_lo = 0.0;
    double blur_sigma_hi = 0.0;
    double grayscale_prob = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(crop_scale_lo > 0.0) || crop_scale_lo > crop_scale_hi || crop_scale_hi > 1.0)
            throw ValidationError("AugmentationConfig: empty crop scale range");
        auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!prob_ok(flip_prob) || !prob_ok(grayscale_prob))
            throw ValidationError("AugmentationConfig: probability out of [0,1]");
        if (blur_sigma_lo > blur_sigma_hi || blur_sigma_lo < 0.0)
            throw ValidationError("AugmentationConfig: bad blur sigma range");
    }
};

namespace detail {

inline double luminance(const Image& img, std::size_t y, std::size_t x) {
    if (img.ch == 3)
        return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
    double s = 0.0;
    for (std::size_t c = 0; c < img.ch; ++c) s += img.at(y, x, c);
    return s / static_cast<double>(img.ch);
}

inline double bilinear(const Image& img, double y, double x, std::size_t c) {
    const double yc = std::clamp(y, 0.0, static_cast<double>(img.h - 1));
    const double xc = std::clamp(x, 0.0, static_cast<double>(img.w - 1));
    const std::size_t y0 = static_cast<std::size_t>(yc);
    const std::size_t x0 = static_cast<std::size_t>(xc);
    const std::size_t y1 = std::min(y0 + 1, img.h - 1);
    const std::size_t x1 = std::min(x0 + 1, img.w - 1);
    const double fy = yc - static_cast<double>(y0);
    const double fx = xc - static_cast<double>(x0);
    return (1 - fy) * ((1 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c)) +
           fy * ((1 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c));
}

inline Image resized_crop(const Image& img, double scale, double ry, double rx) {
    const auto crop_h = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(std::sqrt(scale) * static_cast<double>(img.h))));
    const auto crop_w = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(std::sqrt(scale) * static_cast<double>(img.w))));
    const std::size_t y0 = static_cast<std::size_t>(ry * static_cast<double>(img.h - crop_h));
    const std::size_t x0 = static_cast<std::size_t>(rx * static_cast<double>(img.w - crop_w));

    if (crop_h == img.h && crop_w == img.w) return img;

    Image out(img.h, img.w, img.ch);
    for (std::size_t y = 0; y < img.h; ++y)
        for (std::size_t x = 0; x < img.w; ++x) {
            const double sy = static_cast<double>(y0) +
                              (img.h > 1 ? static_cast<double>(y) * (crop_h - 1.0) / (img.h - 1.0) : 0.0);
            const double sx = static_cast<double>(x0) +
                              (img.w > 1 ? static_cast<double>(x) * (crop_w - 1.0) / (img.w - 1.0) : 0.0);
            for (std::size_t c = 0; c < img.ch; ++c) out.at(y, x, c) = bilinear(img, sy, sx, c);
        }
    return out;
}

inline void gaussian_blur(Image& img, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    if (radius < 1) return;
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        ksum += kernel[i + radius];
    }
    for (double& k : kernel) k /= ksum;

    Image tmp = img;
    // horizontal
    for (std::size_t y = 0; y < img.h; ++y)
        for (std::size_t x = 0; x < img.w; ++x)
            for (std::size_t c = 0; c < img.ch; ++c) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const auto xi = std::clamp<long>(static_cast<long>(x) + i, 0,
                                                     static_cast<long>(img.w) - 1);
                    s += kernel[i + radius] * img.at(y, static_cast<std::size_t>(xi), c);
                }
                tmp.at(y, x, c) = s;
            }
    // vertical
    for (std::size_t y = 0; y < img.h; ++y)
        for (std::size_t x = 0; x < img.w; ++x)
            for (std::size_t c = 0; c < img.ch; ++c) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const auto yi = std::clamp<long>(static_cast<long>(y) + i, 0,
                                                     static_cast<long>(img.h) - 1);
                    s += kernel[i + radius] * tmp.at(static_cast<std::size_t>(yi), x, c);
                }
                img.at(y, x, c) = s;
            }
}

}  // namespace detail

// SimCLR-style chain: resized crop, horizontal flip, color jitter, gaussian
// blur, random grayscale. Output clamped to [0,1]; deterministic per rng.
inline Image augment(const Image& input, const AugmentationConfig& cfg, Rng& rng) {
    cfg.validate();
    for (double v : input.px)
        if (v < 0.0 || v > 1.0 || !std::isfinite(v))
            throw ValidationError("augment: pixel values must be in [0,1]");

    std::uniform_real_distribution<double> uni(0.0, 1.0);

    // random resized crop
    const double scale = cfg.crop_scale_lo + uni(rng) * (cfg.crop_scale_hi - cfg.crop_scale_lo);
    const double ry = uni(rng);
    const double rx = uni(rng);
    Image img = detail::resized_crop(input, scale, ry, rx);

    // horizontal flip
    if (uni(rng) < cfg.flip_prob) {
        for (std::size_t y = 0; y < img.h; ++y)
            for (std::size_t x = 0; x < img.w / 2; ++x)
                for (std::size_t c = 0; c < img.ch; ++c)
                    std::swap(img.at(y, x, c), img.at(y, img.w - 1 - x, c));
    }

    // color jitter: brightness, contrast, saturation
    auto jitter_factor = [&](double strength) {
        return strength > 0.0 ? 1.0 + (2.0 * uni(rng) - 1.0) * strength : 1.0;
    };
    const double fb = jitter_factor(cfg.brightness);
    const double fc = jitter_factor(cfg.contrast);
    const double fs = jitter_factor(cfg.saturation);
    if (fb != 1.0)
        for (double& v : img.px) v *= fb;
    if (fc != 1.0) {
        double mean = 0.0;
        for (std::size_t y = 0; y < img.h; ++y)
            for (std::size_t x = 0; x < img.w; ++x) mean += detail::luminance(img, y, x);
        mean /= static_cast<double>(img.h * img.w);
        for (double& v : img.px) v = mean + fc * (v - mean);
    }
    if (fs != 1.0 && img.ch == 3) {
        for (std::size_t y = 0; y < img.h; ++y)
            for (std::size_t x = 0; x < img.w; ++x) {
                const double g = detail::luminance(img, y, x);
                for (std::size_t c = 0; c < img.ch; ++c)
                    img.at(y, x, c) = g + fs * (img.at(y, x, c) - g);
            }
    }

    // gaussian blur
    if (cfg.blur_sigma_hi > 0.0) {
        const double sigma =
            cfg.blur_sigma_lo + uni(rng) * (cfg.blur_sigma_hi - cfg.blur_sigma_lo);
        if (sigma > 0.0) detail::gaussian_blur(img, sigma);
    }

    // random grayscale
    if (uni(rng) < cfg.grayscale_prob) {
        for (std::size_t y = 0; y < img.h; ++y)
            for (std::size_t x = 0; x < img.w; ++x) {
                const double g = detail::luminance(img, y, x);
                for (std::size_t c = 0; c < img.ch; ++c) img.at(y, x, c) = g;
            }
    }

    for (double& v : img.px) v = std::clamp(v, 0.0, 1.0);
    return img;
}

// Identity configuration: no crop, no flip, no jitter, no blur, no grayscale.
inline AugmentationConfig identity_augmentation() {
    AugmentationConfig cfg;
    cfg.crop_scale_lo = cfg.crop_scale_hi = 1.0;
    cfg.flip_prob = 0.0;
    cfg.brightness = cfg.contrast = cfg.saturation = 0.0;
    cfg.blur_sigma_lo = cfg.blur_sigma_hi = 0.0;
    cfg.grayscale_prob = 0.0;
    return cfg;
}

}  // namespace crlsc
