#include "doctest.h"

#include "fedstyle/eval/evaluation.hpp"
#include "fedstyle/fl/config.hpp"
#include "test_support.hpp"

#include <fstream>

using namespace fedstyle;
using fl::ConfigError;
using fl::ExperimentConfig;

namespace {

ExperimentConfig unusual() {
    ExperimentConfig c;
    c.method = fl::Method::ditto;
    c.variant = loss::Variant::simsiam;
    c.iid = false;
    c.beta = 0.25;
    c.mu = 1.5;
    c.encoder_hidden = {32, 16, 8};
    c.seeds = {1, 2, 3};
    c.output_dir = "some dir/with # hash";
    c.tau = 0.1 + 0.2;  // not exactly representable in short decimal form
    return c;
}

}  // namespace

TEST_CASE("config round-trips through both formats") {
    for (const auto& c : {ExperimentConfig{}, unusual()}) {
        CHECK(fl::parse_toml(fl::to_toml(c)) == c);
        CHECK(fl::from_json(fl::to_json(c)) == c);
    }
    const auto dir = testing::fresh_dir("config");
    std::ofstream(dir / "a.toml") << fl::to_toml(unusual());
    std::ofstream(dir / "a.json") << fl::to_json(unusual()).dump();
    CHECK(fl::load_config(dir / "a.toml") == unusual());
    CHECK(fl::load_config(dir / "a.json") == unusual());
    CHECK_THROWS(fl::load_config(dir / "missing.toml"));
}

TEST_CASE("key/value parser: comments, sections and errors") {
    const auto c = fl::parse_toml("# header\n[protocol]\nrounds = 7  # trailing\nmethod = \"fedprox\"\n\n");
    CHECK(c.rounds == 7);
    CHECK(c.method == fl::Method::fedprox);
    CHECK(fl::effective_mu(c) == 0.2);
    try {
        fl::parse_toml("rounds = 3\nno_such_key = 1\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("no_such_key") != std::string::npos);
    }
    try {
        fl::parse_toml("lambda = \"lots\"\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("lambda") != std::string::npos);
    }
    CHECK_THROWS_AS(fl::parse_toml("rounds 3\n"), ConfigError);
}

TEST_CASE("validation reports every bad field at once") {
    ExperimentConfig c;
    c.lr = -1.0;
    c.tau = 0.0;
    c.sample_ratio = 1.5;
    c.lambda = -0.5;
    try {
        fl::validate(c);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        for (const char* key : {"lr", "tau", "sample_ratio", "lambda"}) {
            INFO(key);
            CHECK(msg.find(key) != std::string::npos);
        }
    }
    CHECK_NOTHROW(fl::validate(ExperimentConfig{}));
}

TEST_CASE("overrides accept JSON values and bare strings") {
    ExperimentConfig c;
    fl::apply_override(c, "method", "fedrep");
    fl::apply_override(c, "encoder_hidden", "[10, 5]");
    fl::apply_override(c, "iid", "false");
    fl::apply_override(c, "output_dir", "123");
    CHECK(c.method == fl::Method::fedrep);
    CHECK(c.encoder_hidden == std::vector<std::size_t>{10, 5});
    CHECK_FALSE(c.iid);
    CHECK(c.output_dir == "123");
    CHECK_THROWS_AS(fl::apply_override(c, "rounds", "many"), ConfigError);
    CHECK_THROWS_AS(fl::apply_override(c, "method", "fedsgd"), ConfigError);
    CHECK_THROWS_AS(fl::apply_override(c, "colour", "1"), ConfigError);
    const auto keys = fl::config_keys();
    CHECK(std::find(keys.begin(), keys.end(), "style_epochs") != keys.end());
}

TEST_CASE("seed summary: mean and sample standard deviation of per-seed means") {
    std::vector<eval::ResultRow> rows{
        {"fedavg", "simclr", 0, "0", "Ho", 0.5, 1},   {"fedavg", "simclr", 1, "1", "Ho", 0.7, 1},
        {"fedavg", "simclr", 0, "0", "Ho", 0.8, 2},   {"fedavg", "simclr", 1, "1", "Ho", 1.0, 2},
        {"fedavg", "simclr", 0, "global", "Ho", 0.4, 1}, {"fedavg", "simclr", 0, "global", "Ho", 0.4, 2}};
    const auto s = eval::summarize(rows);
    REQUIRE(s.size() == 2);
    CHECK(s[0].metric == "generalization");
    CHECK(s[0].mean == doctest::Approx(0.4));
    CHECK(s[0].stdev == doctest::Approx(0.0));
    CHECK(s[1].metric == "personalization");
    CHECK(s[1].mean == doctest::Approx(0.75));
    CHECK(s[1].stdev == doctest::Approx(0.3 / std::sqrt(2.0)));
    CHECK(s[1].seeds == 2);
}
