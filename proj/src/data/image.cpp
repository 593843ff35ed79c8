#include "fedstyle/data/image.hpp"

#include <algorithm>
#include <cmath>

namespace fedstyle::data {

SobelResponse sobel_gradients(const Image& img) {
    if (img.height < 3 || img.width < 3)
        throw std::invalid_argument("sobel_filter: image must be at least 3x3, got " +
                                    std::to_string(img.height) + "x" + std::to_string(img.width));
    const std::size_t h = img.height, w = img.width, ch = img.channels;
    std::vector<double> gray(h * w, 0.0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double s = 0.0;
            for (std::size_t c = 0; c < ch; ++c) s += img.at(y, x, c);
            gray[y * w + x] = s / static_cast<double>(ch);
        }
    auto px = [&](long y, long x) {
        y = std::clamp(y, 0L, static_cast<long>(h) - 1);
        x = std::clamp(x, 0L, static_cast<long>(w) - 1);
        return gray[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
    };
    SobelResponse r;
    r.gx.assign(h * w, 0.0);
    r.gy.assign(h * w, 0.0);
    r.magnitude.assign(h * w, 0.0);
    for (long y = 0; y < static_cast<long>(h); ++y)
        for (long x = 0; x < static_cast<long>(w); ++x) {
            const double gx = (px(y - 1, x + 1) + 2.0 * px(y, x + 1) + px(y + 1, x + 1)) -
                              (px(y - 1, x - 1) + 2.0 * px(y, x - 1) + px(y + 1, x - 1));
            const double gy = (px(y + 1, x - 1) + 2.0 * px(y + 1, x) + px(y + 1, x + 1)) -
                              (px(y - 1, x - 1) + 2.0 * px(y - 1, x) + px(y - 1, x + 1));
            const std::size_t i = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
            r.gx[i] = gx;
            r.gy[i] = gy;
            r.magnitude[i] = std::sqrt(gx * gx + gy * gy);
        }
    return r;
}

Image sobel_filter(const Image& img) {
    const SobelResponse r = sobel_gradients(img);
    const std::vector<double>& mag = r.magnitude;
    const double peak = *std::max_element(mag.begin(), mag.end());
    const std::size_t h = img.height, w = img.width, ch = img.channels;
    Image out(h, w, ch);
    for (std::size_t i = 0; i < h * w; ++i) {
        const double v = peak > 0.0 ? mag[i] / peak : 0.0;
        for (std::size_t c = 0; c < ch; ++c) out.pixels[i * ch + c] = v;
    }
    return out;
}

AugmentDraws draw_augment(const Image& img, Rng& rng) {
    const double W = static_cast<double>(img.width), H = static_cast<double>(img.height);
    AugmentDraws d;
    const double area = uniform(rng, 0.6, 1.0) * W * H;
    const double aspect = std::exp(uniform(rng, std::log(3.0 / 4.0), std::log(4.0 / 3.0)));
    d.crop_w = std::clamp(std::round(std::sqrt(area * aspect)), 1.0, W);
    d.crop_h = std::clamp(std::round(std::sqrt(area / aspect)), 1.0, H);
    d.crop_x = std::floor(uniform(rng, 0.0, W - d.crop_w + 1.0));
    d.crop_y = std::floor(uniform(rng, 0.0, H - d.crop_h + 1.0));
    d.flip = bernoulli(rng, 0.5);
    for (double& g : d.gains) g = 1.0 + uniform(rng, -0.3, 0.3);
    d.grayscale = bernoulli(rng, 0.2);
    return d;
}

AugmentDraws identity_augment(const Image& img) {
    AugmentDraws d;
    d.crop_w = static_cast<double>(img.width);
    d.crop_h = static_cast<double>(img.height);
    return d;
}

Image apply_augment(const Image& img, const AugmentDraws& d) {
    const std::size_t h = img.height, w = img.width, ch = img.channels;
    Image out(h, w, ch);
    const double sx = d.crop_w / static_cast<double>(w);
    const double sy = d.crop_h / static_cast<double>(h);
    for (std::size_t y = 0; y < h; ++y) {
        const double fy = std::clamp(d.crop_y + (static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                     static_cast<double>(h - 1));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double ty = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < w; ++x) {
            const double fx = std::clamp(d.crop_x + (static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                         static_cast<double>(w - 1));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double tx = fx - static_cast<double>(x0);
            const std::size_t ox = d.flip ? w - 1 - x : x;
            for (std::size_t c = 0; c < ch; ++c) {
                double v = img.at(y0, x0, c);
                if (tx != 0.0 || ty != 0.0) {
                    v = (1.0 - ty) * ((1.0 - tx) * img.at(y0, x0, c) + tx * img.at(y0, x1, c)) +
                        ty * ((1.0 - tx) * img.at(y1, x0, c) + tx * img.at(y1, x1, c));
                }
                out.at(y, ox, c) = v * d.gains[c % 3];
            }
        }
    }
    if (d.grayscale) {
        for (std::size_t i = 0; i < h * w; ++i) {
            double s = 0.0;
            for (std::size_t c = 0; c < ch; ++c) s += out.pixels[i * ch + c];
            for (std::size_t c = 0; c < ch; ++c) out.pixels[i * ch + c] = s / static_cast<double>(ch);
        }
    }
    for (double& v : out.pixels) v = std::clamp(v, 0.0, 1.0);
    return out;
}

ad::Tensor to_batch(std::span<const Image* const> images) {
    if (images.empty()) throw std::invalid_argument("to_batch: empty batch");
    const std::size_t d = images.front()->size();
    ad::Tensor out({images.size(), d});
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i]->size() != d) throw ad::ShapeError("to_batch: images differ in size");
        std::copy(images[i]->pixels.begin(), images[i]->pixels.end(), out.values().begin() + i * d);
    }
    return out;
}

ad::Tensor to_batch(std::span<const Image> images) {
    std::vector<const Image*> ptrs;
    ptrs.reserve(images.size());
    for (const auto& im : images) ptrs.push_back(&im);
    return to_batch(std::span<const Image* const>(ptrs));
}

}  // namespace fedstyle::data
