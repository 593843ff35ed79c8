#pragma once

#include "fedstyle/data/image.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace fedstyle::data {

/// All samples of one style domain (one "style dataset").
struct StyleDataset {
    int style_id = 0;
    std::vector<ImageSample> samples;

    friend bool operator==(const StyleDataset&, const StyleDataset&) = default;
};

int num_classes(const StyleDataset& ds);

// --- procedural generator -------------------------------------------------

struct SyntheticSpec {
    int num_classes = 5;
    int num_styles = 3;
    std::size_t per_class_count = 100;
    std::size_t image_size = 10;
    std::size_t channels = 3;
    std::uint64_t seed = 0;
};

/// Pixel-level appearance of a style domain.
struct StyleTransform {
    std::array<double, 3> foreground{};
    std::array<double, 3> background{};
    int dilation = 0;              // stroke growth radius in pixels
    double noise = 0.0;            // per-pixel Gaussian noise std
    double texture = 0.0;          // amplitude of the background stripe texture
    double texture_freq = 0.0;
};

StyleTransform style_transform(int style_id, std::uint64_t seed);

/// Content mask of (class, instance): glyph strokes in [0,1], independent of style.
Image render_content_mask(const SyntheticSpec& spec, int content_class, std::size_t instance);

/// Renders a mask under a style; `instance` seeds the noise/texture draws.
Image apply_style(const Image& mask, const StyleTransform& style, std::size_t channels, std::uint64_t noise_seed);

/// One dataset per style; every style renders the same (class, instance)
/// content masks. Deterministic in the spec.
std::vector<StyleDataset> generate_styled_dataset(const SyntheticSpec& spec);

// --- partitioning ----------------------------------------------------------

struct PartitionSpec {
    std::size_t clients_per_style = 1;
    /// Dirichlet concentration; nullopt selects IID (equal per-class counts).
    std::optional<double> beta;
    std::size_t samples_per_client = 100;
    double test_fraction = 0.3;
    std::uint64_t seed = 0;
};

/// One client's data; all samples share the client's style.
struct DatasetShard {
    int client_id = 0;
    int style_id = 0;
    std::vector<ImageSample> samples;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Integer counts summing to `total` from proportions, by largest remainder
/// (ties go to the lower index).
std::vector<std::size_t> largest_remainder_counts(std::span<const double> proportions, std::size_t total);

/// Draws proportions from Dirichlet(beta * 1_K) via normalized Gamma draws.
std::vector<double> sample_dirichlet(std::size_t k, double beta, Rng& rng);

/// Splits one style dataset into clients_per_style shards with exactly
/// samples_per_client images each. Per-class counts follow Dirichlet
/// proportions (or IID balance). Within a style, classes are drawn without
/// replacement across clients until a class pool runs dry; after that the
/// pool is reshuffled and reused (duplicate sampling).
std::vector<DatasetShard> dirichlet_partition(const StyleDataset& dataset, const PartitionSpec& spec,
                                              int first_client_id = 0);

/// Partitions every style; client ids run style by style.
std::vector<DatasetShard> partition_all(std::span<const StyleDataset> datasets, const PartitionSpec& spec);

/// Shuffled train/test index split; test gets round(n * test_fraction).
struct Split {
    std::vector<std::size_t> train, test;
};
Split split_indices(std::size_t n, double test_fraction, Rng& rng);

// --- IDX ingestion ---------------------------------------------------------

class IdxError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parsed unsigned-byte IDX array.
struct IdxArray {
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> values;
};

IdxArray read_idx(const std::filesystem::path& path);

/// Images (magic 0x00000803) and labels (0x00000801) into one style
/// dataset with pixels scaled to [0,1] and a single channel.
StyleDataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                              int style_id);

// --- export ------------------------------------------------------------------

/// Writes style_<k>.bin (N x H x W x C little-endian f64) per style and a
/// manifest.json with shapes, labels, style ids and the seed.
void export_datasets(const std::filesystem::path& dir, std::span<const StyleDataset> datasets,
                     std::uint64_t seed);
std::vector<StyleDataset> import_datasets(const std::filesystem::path& dir);

}  // namespace fedstyle::data
