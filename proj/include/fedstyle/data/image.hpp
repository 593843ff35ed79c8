#pragma once

#include "fedstyle/ad/tensor.hpp"
#include "fedstyle/util/rng.hpp"

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

namespace fedstyle::data {

/// Height x width x channels image, pixels interleaved (HWC), values in [0,1].
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
        : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

    double& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
    double at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
    std::size_t size() const { return pixels.size(); }

    friend bool operator==(const Image&, const Image&) = default;
};

struct ImageSample {
    Image image;
    int content_label = 0;
    int style_id = 0;

    friend bool operator==(const ImageSample&, const ImageSample&) = default;
};

/// Raw Sobel responses of the grayscale image, row-major H x W.
struct SobelResponse {
    std::vector<double> gx, gy, magnitude;
};
SobelResponse sobel_gradients(const Image& img);

/// Grayscale (channel mean), 3x3 Sobel with edge-replicated borders, gradient
/// magnitude divided by its maximum (an all-zero response stays zero), and
/// replicated back to the input channel count. Requires H, W >= 3.
Image sobel_filter(const Image& img);

/// Random parameters of one augmentation; apply_augment is a pure function of them.
struct AugmentDraws {
    double crop_x = 0.0;  // top-left corner and extent of the crop, in pixels
    double crop_y = 0.0;
    double crop_w = 0.0;
    double crop_h = 0.0;
    bool flip = false;
    std::array<double, 3> gains{1.0, 1.0, 1.0};
    bool grayscale = false;
};

/// Random resized crop (area 0.6-1.0, aspect 3/4-4/3), horizontal flip
/// (p=0.5), per-channel gain in [0.7, 1.3] and grayscale (p=0.2).
AugmentDraws draw_augment(const Image& img, Rng& rng);
/// Draws that leave the image unchanged.
AugmentDraws identity_augment(const Image& img);
/// Crop + bilinear resize back to the input size, flip, gains, grayscale, clamp to [0,1].
Image apply_augment(const Image& img, const AugmentDraws& draws);

inline Image augment(const Image& img, Rng& rng) { return apply_augment(img, draw_augment(img, rng)); }

/// Stacks flattened images into a [B x H*W*C] tensor.
ad::Tensor to_batch(std::span<const Image> images);
ad::Tensor to_batch(std::span<const Image* const> images);

}  // namespace fedstyle::data
