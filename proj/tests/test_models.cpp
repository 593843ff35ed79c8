#include "doctest.h"

#include "fedstyle/nn/checkpoint.hpp"
#include "fedstyle/nn/models.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace fedstyle;
using nn::Tensor;

namespace {

nn::ModelDims small_dims() {
    nn::ModelDims d;
    d.input = 12;
    d.encoder_hidden = {8, 6};
    d.feature = 5;
    d.projector_hidden = 4;
    d.projection = 3;
    d.generator_hidden = 4;
    d.predictor_hidden = 2;
    return d;
}

Tensor random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng = make_rng(seed, {});
    Tensor t({rows, cols});
    for (auto& v : t.values()) v = uniform(rng, 0.0, 1.0);
    return t;
}

}  // namespace

TEST_CASE("mlp layout: names, shapes, init range") {
    Rng rng = make_rng(1, {});
    const auto enc = nn::make_mlp(nn::encoder_spec(small_dims()), rng, "enc");
    CHECK(enc.get("fc0.weight").shape() == std::vector<std::size_t>{12, 8});
    CHECK(enc.get("fc1.weight").shape() == std::vector<std::size_t>{8, 6});
    CHECK(enc.get("fc2.weight").shape() == std::vector<std::size_t>{6, 5});
    CHECK(enc.contains("bn0.running_mean"));
    CHECK_FALSE(enc.contains("bn2.gamma"));
    for (const auto& e : enc.entries()) {
        if (e.name == "fc0.weight")
            for (double v : e.tensor.values()) CHECK(std::abs(v) <= 1.0 / std::sqrt(12.0));
        if (e.name.find("running") != std::string::npos) CHECK_FALSE(e.trainable);
    }
    const auto gen = nn::make_mlp(nn::generator_spec(small_dims()), rng, "gen");
    CHECK(gen.get("fc0.weight").shape() == std::vector<std::size_t>{10, 4});
    CHECK(nn::mlp_infer(enc, random_batch(7, 12, 2)).shape() == std::vector<std::size_t>{7, 5});
}

TEST_CASE("eval mode leaves batch-norm buffers alone; train mode moves them") {
    Rng rng = make_rng(2, {});
    auto enc = nn::make_mlp(nn::encoder_spec(small_dims()), rng, "enc");
    const auto before = enc;
    const Tensor x = random_batch(6, 12, 3);
    {
        nn::Tape tape;
        nn::mlp_forward(tape, enc, tape.constant(x), nn::Mode::eval);
    }
    CHECK(enc == before);
    {
        nn::Tape tape;
        nn::mlp_forward(tape, enc, tape.constant(x), nn::Mode::train);
    }
    CHECK(enc.get("bn0.running_mean") != before.get("bn0.running_mean"));
    CHECK(enc.get("fc0.weight") == before.get("fc0.weight"));
}

TEST_CASE("flatten and unflatten round-trip") {
    Rng rng = make_rng(3, {});
    const auto m = nn::make_content_model(small_dims(), true, rng);
    const auto flat = nn::flatten(m);
    CHECK(nn::unflatten(flat, m) == m);
    std::vector<double> shifted = flat;
    for (auto& v : shifted) v += 1.0;
    CHECK(nn::flatten(nn::unflatten(shifted, m)) == shifted);
    shifted.pop_back();
    CHECK_THROWS_AS(nn::unflatten(shifted, m), std::invalid_argument);
    CHECK(nn::flatten_trainable(m.encoder).size() < nn::flatten(m.encoder).size());
}

TEST_CASE("checkpoints round-trip bitwise and store little-endian f64") {
    Rng rng = make_rng(4, {});
    auto p = nn::make_mlp(nn::projector_spec(small_dims()), rng, "proj");
    p.get("fc0.bias").values()[0] = 1.0 / 3.0;
    const auto dir = std::filesystem::temp_directory_path() / "fedstyle_test_ckpt";
    std::filesystem::create_directories(dir);
    nn::save_checkpoint(dir / "proj", p);
    CHECK(nn::load_checkpoint(dir / "proj") == p);

    const std::vector<double> one{1.0};
    nn::write_f64_le(dir / "one.bin", one);
    std::ifstream in(dir / "one.bin", std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(bytes == std::vector<unsigned char>{0, 0, 0, 0, 0, 0, 0xf0, 0x3f});
    CHECK(nn::read_f64_le(dir / "one.bin") == one);
    CHECK_THROWS(nn::load_checkpoint(dir / "missing"));
}

TEST_CASE("squared_distance value and gradient") {
    nn::ParamSet a("a"), b("b");
    a.add("w", Tensor({2}, {1.0, 2.0}));
    a.add("buf", Tensor({1}, {10.0}), false);
    b.add("w", Tensor({2}, {0.0, 4.0}));
    b.add("buf", Tensor({1}, {0.0}), false);
    nn::Tape tape;
    nn::Var d = nn::squared_distance(tape, a, b);
    CHECK(d.value().item() == doctest::Approx(5.0));
    tape.backward(d);
    const auto& g = a.get("w").grad();
    CHECK(g[0] == doctest::Approx(2.0));
    CHECK(g[1] == doctest::Approx(-4.0));
    CHECK_FALSE(b.get("w").has_grad());
}

TEST_CASE("frozen parameters enter the tape as constants") {
    Rng rng = make_rng(5, {});
    auto enc = nn::make_mlp(nn::encoder_spec(small_dims()), rng, "enc");
    const Tensor x = random_batch(4, 12, 6);
    nn::Tape tape;
    nn::Var out = nn::mlp_forward(tape, enc, tape.constant(x), nn::Mode::eval, false);
    CHECK(out.value() == nn::mlp_infer(enc, x));
    for (const auto& e : enc.entries()) CHECK_FALSE(e.tensor.has_grad());
}
