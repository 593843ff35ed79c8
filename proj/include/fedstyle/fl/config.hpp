#pragma once

#include "fedstyle/loss/losses.hpp"
#include "fedstyle/nn/models.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedstyle::fl {

enum class Method { fedavg, fedper, fedrep, fedprox, apfl, ditto, fedstyle };

Method parse_method(std::string_view name);
std::string_view to_string(Method m);

/// Raised with one line per offending field.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Every knob of one experiment. Protocol defaults follow the published
/// setup (100 rounds, 5 local epochs, batch 64, lr 0.1, tau 0.07, E_s 10);
/// data and model sizes default to desk scale.
struct ExperimentConfig {
    Method method = Method::fedstyle;
    loss::Variant variant = loss::Variant::simclr;

    // data
    std::string dataset = "synthetic";  // synthetic | idx | directory
    int num_classes = 5;
    int num_styles = 3;
    std::size_t per_class_count = 100;
    std::size_t image_size = 10;
    std::size_t channels = 3;
    std::vector<std::string> idx_images;  // one file per style (dataset = "idx")
    std::vector<std::string> idx_labels;
    std::string dataset_dir;               // output of gen-data (dataset = "directory")

    // partition
    std::size_t clients_per_style = 1;
    bool iid = true;
    double beta = 0.5;
    std::size_t samples_per_client = 150;
    double test_fraction = 0.3;

    // protocol
    std::size_t rounds = 100;        // E_g
    std::size_t local_epochs = 5;    // E_l
    std::size_t style_epochs = 10;   // E_s
    double sample_ratio = 1.0;       // alpha
    double lambda = 0.5;
    double tau = 0.07;
    std::optional<double> mu;        // unset: 0.2 for fedprox, 2 for ditto
    double apfl_alpha = 0.5;
    bool apfl_literal_views = false;
    bool freeze_generator_pretrain = false;

    // model
    std::vector<std::size_t> encoder_hidden{256, 128};
    std::size_t feature_dim = 64;
    std::size_t projector_hidden = 64;
    std::size_t projection_dim = 32;
    std::size_t generator_hidden = 64;
    std::size_t predictor_hidden = 16;

    // optimization
    double lr = 0.1;
    std::size_t batch_size = 64;

    // evaluation
    std::size_t probe_epochs = 100;
    double probe_lr = 0.1;
    bool stylized_feature = true;  // personalize FedStyle with h_c + G(h_c, h_s)

    // run
    std::vector<std::uint64_t> seeds{2011};
    std::string output_dir = "runs";
    std::size_t checkpoint_every = 0;  // 0: final checkpoint only
    std::size_t threads = 0;           // 0: hardware concurrency

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

double effective_mu(const ExperimentConfig& cfg);

/// Model dimensions for flattened inputs of `input` values.
nn::ModelDims model_dims(const ExperimentConfig& cfg, std::size_t input);

/// Throws ConfigError listing every invalid field.
void validate(const ExperimentConfig& cfg);

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Unknown keys and mistyped values are ConfigErrors naming the key.
ExperimentConfig from_json(const nlohmann::json& j, ExperimentConfig base = {});

/// Flat `key = value` text: numbers, "strings", true/false and [arrays];
/// `#` starts a comment.
std::string to_toml(const ExperimentConfig& cfg);
ExperimentConfig parse_toml(std::string_view text, ExperimentConfig base = {});

/// Every configuration key, in serialization order.
std::vector<std::string> config_keys();

/// Parses one `key=value` override in the same value syntax as the file.
void apply_override(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// .json files parse as JSON, anything else as the key/value format.
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace fedstyle::fl
