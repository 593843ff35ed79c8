#pragma once

#include "fedstyle/fl/engine.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fedstyle::testing {

// A configuration small enough for unit tests: 2 styles, 4 clients, tiny nets.
inline fl::ExperimentConfig tiny_config(fl::Method method = fl::Method::fedavg) {
    fl::ExperimentConfig c;
    c.method = method;
    c.num_classes = 3;
    c.num_styles = 2;
    c.per_class_count = 20;
    c.clients_per_style = 2;
    c.samples_per_client = 30;
    c.rounds = 2;
    c.local_epochs = 1;
    c.style_epochs = 1;
    c.encoder_hidden = {16};
    c.feature_dim = 8;
    c.projector_hidden = 8;
    c.projection_dim = 4;
    c.generator_hidden = 8;
    c.predictor_hidden = 4;
    c.batch_size = 8;
    c.tau = 0.5;
    c.probe_epochs = 20;
    c.threads = 1;
    return c;
}

inline std::vector<data::DatasetShard> tiny_shards(const fl::ExperimentConfig& c, std::uint64_t seed) {
    const auto ds = fl::build_datasets(c, seed);
    return fl::build_shards(c, ds, seed);
}

inline fl::Simulation tiny_sim(const fl::ExperimentConfig& c, std::uint64_t seed = 7) {
    return fl::Simulation(c, tiny_shards(c, seed), seed);
}

inline std::filesystem::path fresh_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("fedstyle_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace fedstyle::testing
