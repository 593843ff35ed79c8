#include "fedstyle/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace fedstyle::data {

namespace {

struct Segment {
    double x0, y0, x1, y1;
};

constexpr std::size_t kStrokesPerGlyph = 3;
constexpr double kStrokeWidth = 0.8;

std::vector<Segment> glyph_strokes(const SyntheticSpec& spec, int content_class) {
    Rng rng = make_rng(spec.seed, {stream_tag("glyph"), static_cast<std::uint64_t>(content_class)});
    const double lo = 1.0, hi = static_cast<double>(spec.image_size) - 2.0;
    std::vector<Segment> strokes;
    for (std::size_t s = 0; s < kStrokesPerGlyph; ++s)
        strokes.push_back({uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)});
    return strokes;
}

double distance_to_segment(double px, double py, const Segment& s) {
    const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double cx = s.x0 + t * dx - px, cy = s.y0 + t * dy - py;
    return std::sqrt(cx * cx + cy * cy);
}

}  // namespace

int num_classes(const StyleDataset& ds) {
    int k = 0;
    for (const auto& s : ds.samples) k = std::max(k, s.content_label + 1);
    return k;
}

StyleTransform style_transform(int style_id, std::uint64_t seed) {
    switch (style_id) {
    case 0:  // light strokes on a dark, clean background
        return {{0.95, 0.95, 0.95}, {0.05, 0.05, 0.05}, 0, 0.02, 0.0, 0.0};
    case 1:  // inverted polarity on a warm cream background
        return {{0.10, 0.10, 0.25}, {0.90, 0.85, 0.70}, 0, 0.04, 0.05, 1.3};
    case 2:  // thick orange strokes on a textured blue background
        return {{0.95, 0.60, 0.15}, {0.15, 0.30, 0.55}, 1, 0.08, 0.15, 2.1};
    default:
        break;
    }
    Rng rng = make_rng(seed, {stream_tag("style"), static_cast<std::uint64_t>(style_id)});
    StyleTransform t;
    const bool dark_background = bernoulli(rng, 0.5);
    for (std::size_t c = 0; c < 3; ++c) {
        const double bg = uniform(rng, 0.0, 0.35);
        const double fg = uniform(rng, 0.65, 1.0);
        t.background[c] = dark_background ? bg : 1.0 - bg;
        t.foreground[c] = dark_background ? fg : 1.0 - fg;
    }
    t.dilation = style_id % 2;
    t.noise = uniform(rng, 0.0, 0.1);
    t.texture = uniform(rng, 0.0, 0.2);
    t.texture_freq = uniform(rng, 0.8, 2.5);
    return t;
}

Image render_content_mask(const SyntheticSpec& spec, int content_class, std::size_t instance) {
    const std::size_t n = spec.image_size;
    Rng rng = make_rng(spec.seed, {stream_tag("instance"), static_cast<std::uint64_t>(content_class), instance});
    const double shift_x = uniform(rng, -1.0, 1.0), shift_y = uniform(rng, -1.0, 1.0);
    const double intensity = uniform(rng, 0.8, 1.0);
    std::vector<Segment> strokes = glyph_strokes(spec, content_class);
    for (auto& s : strokes) {
        s.x0 += shift_x + uniform(rng, -0.4, 0.4);
        s.y0 += shift_y + uniform(rng, -0.4, 0.4);
        s.x1 += shift_x + uniform(rng, -0.4, 0.4);
        s.y1 += shift_y + uniform(rng, -0.4, 0.4);
    }
    Image mask(n, n, 1);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            double v = 0.0;
            for (const auto& s : strokes)
                v = std::max(v, 1.0 - distance_to_segment(static_cast<double>(x), static_cast<double>(y), s) / kStrokeWidth);
            mask.at(y, x, 0) = intensity * std::max(v, 0.0);
        }
    return mask;
}

Image apply_style(const Image& mask, const StyleTransform& style, std::size_t channels, std::uint64_t noise_seed) {
    const std::size_t h = mask.height, w = mask.width;
    Image grown = mask;
    for (int r = 0; r < style.dilation; ++r) {
        Image next = grown;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                double m = grown.at(y, x, 0);
                for (std::size_t yy = y ? y - 1 : 0; yy <= std::min(y + 1, h - 1); ++yy)
                    for (std::size_t xx = x ? x - 1 : 0; xx <= std::min(x + 1, w - 1); ++xx)
                        m = std::max(m, grown.at(yy, xx, 0));
                next.at(y, x, 0) = m;
            }
        grown = std::move(next);
    }
    Rng rng(noise_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    Image out(h, w, channels);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double m = grown.at(y, x, 0);
            const double tex = style.texture *
                               std::sin(style.texture_freq * static_cast<double>(x + y) + phase) * (1.0 - m);
            for (std::size_t c = 0; c < channels; ++c) {
                const std::size_t k = channels == 1 ? 0 : c % 3;
                double v = style.background[k] + (style.foreground[k] - style.background[k]) * m + tex;
                if (style.noise > 0.0) v += style.noise * gauss(rng);
                out.at(y, x, c) = std::clamp(v, 0.0, 1.0);
            }
        }
    return out;
}

std::vector<StyleDataset> generate_styled_dataset(const SyntheticSpec& spec) {
    if (spec.image_size < 8) throw std::invalid_argument("generate_styled_dataset: image_size must be >= 8");
    if (spec.num_classes < 2) throw std::invalid_argument("generate_styled_dataset: need at least 2 classes");
    if (spec.num_styles < 2) throw std::invalid_argument("generate_styled_dataset: need at least 2 styles");
    if (spec.per_class_count == 0) throw std::invalid_argument("generate_styled_dataset: per_class_count must be positive");
    if (spec.channels == 0) throw std::invalid_argument("generate_styled_dataset: channels must be positive");

    std::vector<Image> masks;
    for (int c = 0; c < spec.num_classes; ++c)
        for (std::size_t i = 0; i < spec.per_class_count; ++i) masks.push_back(render_content_mask(spec, c, i));

    std::vector<StyleDataset> out;
    for (int s = 0; s < spec.num_styles; ++s) {
        const StyleTransform style = style_transform(s, spec.seed);
        StyleDataset ds;
        ds.style_id = s;
        for (int c = 0; c < spec.num_classes; ++c)
            for (std::size_t i = 0; i < spec.per_class_count; ++i) {
                const std::uint64_t noise_seed = derive_seed(
                    spec.seed, {stream_tag("noise"), static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(c), i});
                const Image& mask = masks[static_cast<std::size_t>(c) * spec.per_class_count + i];
                ds.samples.push_back({apply_style(mask, style, spec.channels, noise_seed), c, s});
            }
        out.push_back(std::move(ds));
    }
    return out;
}

}  // namespace fedstyle::data
