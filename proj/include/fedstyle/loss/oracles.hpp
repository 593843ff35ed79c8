#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fedstyle::loss {

using Rows = std::vector<std::vector<double>>;

/// Direct double-sum evaluation of NT-Xent with plain loops, no autodiff:
/// for each of the 2B anchors, -log(exp(s_pos) / sum_{n != i} exp(s_in)).
double brute_force_nt_xent(const Rows& z1, const Rows& z2, double tau);

/// Direct double-sum evaluation of the style InfoNCE sum over anchors.
double brute_force_style_infonce(const Rows& z, std::span<const int> labels, double tau);

struct OracleComparison {
    std::string name;
    double implementation = 0.0;
    double oracle = 0.0;
    double abs_error = 0.0;
};

/// Compares both losses against the brute-force versions on random
/// embeddings for batch sizes 1..max_batch.
std::vector<OracleComparison> run_loss_oracles(std::uint64_t seed, std::size_t max_batch = 4, double tau = 0.07);

}  // namespace fedstyle::loss
