#pragma once

#include "fedstyle/eval/probe.hpp"
#include "fedstyle/fl/engine.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fedstyle::eval {

/// One line of results.csv.
struct ResultRow {
    std::string method;
    std::string variant;
    int style = 0;
    std::string client;   // client id, or "global" for generalization rows
    std::string setting;  // "Ho" or "He@<beta>"
    double accuracy = 0.0;
    std::uint64_t seed = 0;
};

std::string setting_label(const fl::ExperimentConfig& cfg);
std::string method_label(const fl::ExperimentConfig& cfg);

ProbeSettings probe_settings(const fl::ExperimentConfig& cfg, std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

/// Probe on frozen global-encoder features, one row per style dataset:
/// the probe trains on a per-style training split and is scored on the rest.
std::vector<ResultRow> eval_generalization(const fl::Simulation& sim, std::span<const data::StyleDataset> datasets);

/// Style inputs for a probe on h_c + G(concat[h_c, h_s]). The generator is
/// a working copy, updated with the probe when train_generator is set.
struct StylizedInputs {
    ad::Tensor style_train;
    ad::Tensor style_test;
    nn::ParamSet generator;
    bool train_generator = true;
};

/// Trains a probe on the training features (stylized when `stylized` is
/// given) and returns its accuracy on the test features.
double probe_accuracy(const ad::Tensor& train, std::span<const int> train_labels, const ad::Tensor& test,
                      std::span<const int> test_labels, int num_classes, const ProbeSettings& settings,
                      StylizedInputs* stylized = nullptr);

/// Probe with the client's frozen personal encoder on its own train/test split.
/// Under FedStyle with stylized features the probe trains jointly with a copy
/// of the client's generator on h_c + G(h_c, h_s).
double personalization_accuracy(const fl::Simulation& sim, const fl::ClientState& client);

std::vector<ResultRow> eval_personalization(const fl::Simulation& sim);

/// Writes the header plus rows; appends rows only when the file already exists and `append` is set.
void write_results_csv(const std::filesystem::path& path, std::span<const ResultRow> rows, bool append = false);

/// Mean and sample standard deviation over seeds of the per-seed mean
/// accuracy, for generalization ("global" rows) and personalization rows.
struct SummaryRow {
    std::string method;
    std::string variant;
    std::string setting;
    std::string metric;  // "generalization" or "personalization"
    double mean = 0.0;
    double stdev = 0.0;
    std::size_t seeds = 0;
};
std::vector<SummaryRow> summarize(std::span<const ResultRow> rows);
void write_summary_csv(const std::filesystem::path& path, std::span<const SummaryRow> rows);

enum class Embedding { content, style };

/// Features of every client sample (N x D_h, little-endian f64): h_c from
/// the client's personal encoder or h_s from its style encoder, plus a
/// manifest of client id, style id, label and split per row.
void export_embeddings(const std::filesystem::path& dir, const fl::Simulation& sim,
                       Embedding which = Embedding::content);

}  // namespace fedstyle::eval
