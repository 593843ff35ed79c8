#pragma once

#include "fedstyle/ad/param_set.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace fedstyle::nn {

/// Writes <stem>.json (tag, entry names, shapes, trainable flags, offsets)
/// and <stem>.bin (every entry as little-endian f64, in manifest order).
void save_checkpoint(const std::filesystem::path& stem, const ad::ParamSet& params);
ad::ParamSet load_checkpoint(const std::filesystem::path& stem);

/// Raw little-endian f64 blob helpers shared by checkpoints and exports.
void write_f64_le(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f64_le(const std::filesystem::path& path);

}  // namespace fedstyle::nn
