#include "doctest.h"

#include "fedstyle/style/fedstyle.hpp"
#include "test_support.hpp"

using namespace fedstyle;
using testing::tiny_config;

namespace {

void zero_trainable(nn::ParamSet& p) {
    for (auto& e : p.entries())
        if (e.trainable)
            for (double& v : e.tensor.values()) v = 0.0;
}

}  // namespace

TEST_CASE("sobel pair batch stacks originals then their Sobel copies") {
    const auto shards = testing::tiny_shards(tiny_config(), 1);
    const auto& shard = shards[0];
    const std::vector<std::size_t> idx{shard.train[0], shard.train[1], shard.train[2]};
    const auto b = style::sobel_pair_batch(shard, idx);
    const std::size_t d = shard.samples[0].image.pixels.size();
    CHECK(b.x.shape() == std::vector<std::size_t>{6, d});
    CHECK(b.labels == std::vector<int>{0, 0, 0, 1, 1, 1});
    const auto sob = data::sobel_filter(shard.samples[idx[1]].image);
    for (std::size_t j = 0; j < d; ++j) {
        CHECK(b.x.values()[1 * d + j] == shard.samples[idx[1]].image.pixels[j]);
        CHECK(b.x.values()[4 * d + j] == sob.pixels[j]);
    }
}

TEST_CASE("style extraction lowers its loss, separates styles and leaves the generator alone") {
    auto cfg = tiny_config(fl::Method::fedstyle);
    cfg.style_epochs = 0;
    cfg.per_class_count = 40;
    cfg.samples_per_client = 60;
    cfg.batch_size = 16;
    auto sim = testing::tiny_sim(cfg);
    auto& c = sim.clients()[0];
    const auto g0 = c.style->generator;
    const double before = style::style_separation(*c.style, c.shard);
    Rng rng = make_rng(2, {});
    const auto losses = style::extract_style(*c.style, c.shard, 20, fl::train_settings(cfg), rng);
    REQUIRE(losses.size() == 20);
    CHECK(losses[17] + losses[18] + losses[19] < losses[0] + losses[1] + losses[2]);
    CHECK(c.style->pretrain_epochs == 20);
    CHECK(c.style->generator == g0);
    const double after = style::style_separation(*c.style, c.shard);
    CHECK(after > 0.5);
    CHECK(after > before);
}

TEST_CASE("style-infused training: the generator moves unless frozen; the style encoder never does") {
    auto cfg = tiny_config(fl::Method::fedstyle);
    auto sim = testing::tiny_sim(cfg);
    const fl::ClientState start = sim.clients()[0];
    auto s = fl::train_settings(cfg);

    auto c = start;
    Rng r1 = make_rng(5, {});
    style::style_infused_training(c, 1, s, r1);
    CHECK(c.style->generator != start.style->generator);
    CHECK(c.style->encoder == start.style->encoder);
    CHECK(c.style->projector == start.style->projector);
    CHECK(c.model != start.model);

    s.freeze_generator = true;
    auto f = start;
    Rng r2 = make_rng(5, {});
    style::style_infused_training(f, 1, s, r2);
    CHECK(f.style->generator == start.style->generator);
    CHECK(f.model != start.model);
}

TEST_CASE("a zero generator leaves the content feature unchanged") {
    auto sim = testing::tiny_sim(tiny_config(fl::Method::fedstyle));
    auto& c = sim.clients()[0];
    zero_trainable(c.style->generator);
    const auto x = fl::raw_batch(c.shard, c.shard.train);
    const auto hc = fl::encode(c.model, x);
    const auto hs = style::style_features(*c.style, x);
    ad::Tape tape;
    const auto p = style::personalized_feature(tape, tape.constant(hc), tape.constant(hs), c.style->generator, false);
    CHECK(p.value() == hc);
    CHECK(style::generator_output_variance(c) == 0.0);
}

TEST_CASE("generator output variance is finite and positive for a random generator") {
    auto sim = testing::tiny_sim(tiny_config(fl::Method::fedstyle));
    const double v = style::generator_output_variance(sim.clients()[0]);
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
}
