#include "fedstyle/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedstyle::data {

std::vector<std::size_t> largest_remainder_counts(std::span<const double> proportions, std::size_t total) {
    if (proportions.empty()) throw std::invalid_argument("largest_remainder_counts: no proportions");
    double mass = 0.0;
    for (double p : proportions) {
        if (!(p >= 0.0)) throw std::invalid_argument("largest_remainder_counts: negative proportion");
        mass += p;
    }
    if (!(mass > 0.0)) throw std::invalid_argument("largest_remainder_counts: proportions sum to zero");
    const std::size_t k = proportions.size();
    std::vector<std::size_t> counts(k);
    std::vector<double> frac(k);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double quota = proportions[i] / mass * static_cast<double>(total);
        counts[i] = static_cast<std::size_t>(std::floor(quota));
        frac[i] = quota - std::floor(quota);
        assigned += counts[i];
    }
    while (assigned > total) {  // rounding overshoot: take from the largest count
        auto it = std::max_element(counts.begin(), counts.end());
        --*it;
        --assigned;
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t i = 0; assigned < total; i = (i + 1) % k, ++assigned) ++counts[order[i]];
    return counts;
}

std::vector<double> sample_dirichlet(std::size_t k, double beta, Rng& rng) {
    if (!(beta > 0.0)) throw std::invalid_argument("sample_dirichlet: concentration must be positive");
    std::gamma_distribution<double> gamma(beta, 1.0);
    std::vector<double> p(k);
    double total = 0.0;
    for (double& v : p) {
        v = gamma(rng);
        total += v;
    }
    if (total > 0.0) {
        for (double& v : p) v /= total;
        return p;
    }
    // Every draw underflowed (tiny beta): the limit distribution is one-hot.
    std::fill(p.begin(), p.end(), 0.0);
    p[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)] = 1.0;
    return p;
}

Split split_indices(std::size_t n, double test_fraction, Rng& rng) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("split_indices: test_fraction must lie in [0, 1)");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    Split s;
    s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

std::vector<DatasetShard> dirichlet_partition(const StyleDataset& dataset, const PartitionSpec& spec,
                                              int first_client_id) {
    if (spec.clients_per_style == 0) throw std::invalid_argument("partition: clients_per_style must be positive");
    if (spec.samples_per_client == 0) throw std::invalid_argument("partition: samples_per_client must be positive");
    if (spec.beta && !(*spec.beta > 0.0)) throw std::invalid_argument("partition: beta must be positive");

    const int k = num_classes(dataset);
    if (k == 0) throw std::invalid_argument("partition: empty dataset");
    std::vector<std::vector<std::size_t>> pools(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < dataset.samples.size(); ++i)
        pools[static_cast<std::size_t>(dataset.samples[i].content_label)].push_back(i);

    Rng rng = make_rng(spec.seed, {stream_tag("partition"), static_cast<std::uint64_t>(dataset.style_id)});
    for (auto& pool : pools) std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<std::size_t> cursor(pools.size(), 0);

    std::vector<DatasetShard> shards;
    for (std::size_t j = 0; j < spec.clients_per_style; ++j) {
        const std::vector<double> proportions = spec.beta ? sample_dirichlet(pools.size(), *spec.beta, rng)
                                                          : std::vector<double>(pools.size(), 1.0);
        const std::vector<std::size_t> counts = largest_remainder_counts(proportions, spec.samples_per_client);
        DatasetShard shard;
        shard.client_id = first_client_id + static_cast<int>(j);
        shard.style_id = dataset.style_id;
        for (std::size_t c = 0; c < pools.size(); ++c) {
            if (counts[c] > 0 && pools[c].empty())
                throw std::invalid_argument("partition: class " + std::to_string(c) + " of style " +
                                            std::to_string(dataset.style_id) + " has no samples");
            for (std::size_t n = 0; n < counts[c]; ++n) {
                if (cursor[c] == pools[c].size()) {  // pool exhausted: duplicate sampling
                    std::shuffle(pools[c].begin(), pools[c].end(), rng);
                    cursor[c] = 0;
                }
                shard.samples.push_back(dataset.samples[pools[c][cursor[c]++]]);
            }
        }
        Split split = split_indices(shard.samples.size(), spec.test_fraction, rng);
        shard.train = std::move(split.train);
        shard.test = std::move(split.test);
        shards.push_back(std::move(shard));
    }
    return shards;
}

std::vector<DatasetShard> partition_all(std::span<const StyleDataset> datasets, const PartitionSpec& spec) {
    std::vector<DatasetShard> all;
    int next_id = 0;
    for (const auto& ds : datasets) {
        auto shards = dirichlet_partition(ds, spec, next_id);
        next_id += static_cast<int>(shards.size());
        for (auto& s : shards) all.push_back(std::move(s));
    }
    return all;
}

}  // namespace fedstyle::data
