#include "fedstyle/fl/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace fedstyle::fl {

using json = nlohmann::json;

namespace {

constexpr std::pair<Method, std::string_view> kMethods[] = {
    {Method::fedavg, "fedavg"}, {Method::fedper, "fedper"}, {Method::fedrep, "fedrep"},
    {Method::fedprox, "fedprox"}, {Method::apfl, "apfl"}, {Method::ditto, "ditto"},
    {Method::fedstyle, "fedstyle"},
};

}  // namespace

Method parse_method(std::string_view name) {
    for (const auto& [m, s] : kMethods)
        if (s == name) return m;
    throw ConfigError("method: unknown method '" + std::string(name) +
                      "' (expected fedavg, fedper, fedrep, fedprox, apfl, ditto or fedstyle)");
}

std::string_view to_string(Method m) {
    for (const auto& [mm, s] : kMethods)
        if (mm == m) return s;
    return "?";
}

double effective_mu(const ExperimentConfig& cfg) {
    if (cfg.mu) return *cfg.mu;
    return cfg.method == Method::ditto ? 2.0 : 0.2;
}

nn::ModelDims model_dims(const ExperimentConfig& cfg, std::size_t input) {
    nn::ModelDims d;
    d.input = input;
    d.encoder_hidden = cfg.encoder_hidden;
    d.feature = cfg.feature_dim;
    d.projector_hidden = cfg.projector_hidden;
    d.projection = cfg.projection_dim;
    d.generator_hidden = cfg.generator_hidden;
    d.predictor_hidden = cfg.predictor_hidden;
    return d;
}

void validate(const ExperimentConfig& c) {
    std::vector<std::string> errs;
    auto need = [&](bool ok, const std::string& msg) {
        if (!ok) errs.push_back(msg);
    };

    need(c.dataset == "synthetic" || c.dataset == "idx" || c.dataset == "directory",
         "dataset: must be synthetic, idx or directory, got '" + c.dataset + "'");
    if (c.dataset == "synthetic") {
        need(c.num_classes >= 2, "num_classes: need at least 2");
        need(c.num_styles >= 2, "num_styles: need at least 2");
        need(c.per_class_count >= 1, "per_class_count: must be positive");
        need(c.image_size >= 8, "image_size: must be at least 8");
    }
    if (c.dataset == "idx") {
        need(!c.idx_images.empty(), "idx_images: list one image file per style");
        need(c.idx_images.size() == c.idx_labels.size(), "idx_labels: need one label file per image file");
    }
    if (c.dataset == "directory") need(!c.dataset_dir.empty(), "dataset_dir: required for dataset = directory");
    need(c.channels >= 1 && c.channels <= 3, "channels: must be 1, 2 or 3");

    need(c.clients_per_style >= 1, "clients_per_style: must be positive");
    need(c.iid || c.beta > 0.0, "beta: Dirichlet concentration must be positive");
    need(c.test_fraction > 0.0 && c.test_fraction < 1.0, "test_fraction: must lie in (0, 1)");
    need(std::floor(static_cast<double>(c.samples_per_client) * (1.0 - c.test_fraction)) >= 2.0,
         "samples_per_client: need at least 2 training samples per client");

    need(c.rounds >= 1, "rounds: must be positive");
    need(c.local_epochs >= 1, "local_epochs: must be positive");
    need(c.sample_ratio > 0.0 && c.sample_ratio <= 1.0, "sample_ratio: must lie in (0, 1]");
    if (c.dataset == "synthetic")
        need(std::floor(c.sample_ratio * static_cast<double>(c.clients_per_style) * c.num_styles + 1e-9) >= 1.0,
             "sample_ratio: selects no client per round");
    need(c.lambda >= 0.0 && std::isfinite(c.lambda), "lambda: must be a finite non-negative number");
    need(c.tau > 0.0 && std::isfinite(c.tau), "tau: must be positive");
    need(!c.mu || (*c.mu >= 0.0 && std::isfinite(*c.mu)), "mu: must be non-negative");
    need(c.apfl_alpha >= 0.0 && c.apfl_alpha <= 1.0, "apfl_alpha: must lie in [0, 1]");

    need(!c.encoder_hidden.empty(), "encoder_hidden: need at least one hidden layer");
    for (std::size_t w : c.encoder_hidden) need(w >= 1, "encoder_hidden: widths must be positive");
    need(c.feature_dim >= 1, "feature_dim: must be positive");
    need(c.projector_hidden >= 1, "projector_hidden: must be positive");
    need(c.projection_dim >= 1, "projection_dim: must be positive");
    need(c.generator_hidden >= 1, "generator_hidden: must be positive");
    need(c.predictor_hidden >= 1, "predictor_hidden: must be positive");

    need(c.lr > 0.0 && std::isfinite(c.lr), "lr: must be positive");
    need(c.batch_size >= 2, "batch_size: must be at least 2");
    need(c.probe_epochs >= 1, "probe_epochs: must be positive");
    need(c.probe_lr > 0.0 && std::isfinite(c.probe_lr), "probe_lr: must be positive");
    need(!c.seeds.empty(), "seeds: list at least one seed");
    need(!c.output_dir.empty(), "output_dir: must not be empty");

    if (errs.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
}

// --- field table ---------------------------------------------------------------

namespace {

struct Field {
    std::string key;
    std::function<json(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const json&)> set;
};

[[noreturn]] void type_error(const std::string& key, const char* expected, const json& v) {
    throw ConfigError(key + ": expected " + expected + ", got " + v.dump());
}

template <typename T>
T convert(const std::string& key, const json& v) {
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) type_error(key, "true or false", v);
        return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) type_error(key, "a string", v);
        return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) type_error(key, "a number", v);
        return v.get<double>();
    } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) type_error(key, "a non-negative integer", v);
        return v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) type_error(key, "an integer", v);
        return v.get<T>();
    } else {
        if (!v.is_array()) type_error(key, "an array", v);
        T out;
        for (const auto& e : v) out.push_back(convert<typename T::value_type>(key, e));
        return out;
    }
}

template <typename T>
Field field(std::string key, T ExperimentConfig::*member) {
    return Field{key, [member](const ExperimentConfig& c) { return json(c.*member); },
                 [key, member](ExperimentConfig& c, const json& v) { c.*member = convert<T>(key, v); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        using C = ExperimentConfig;
        std::vector<Field> f;
        f.push_back({"method", [](const C& c) { return json(std::string(to_string(c.method))); },
                     [](C& c, const json& v) { c.method = parse_method(convert<std::string>("method", v)); }});
        f.push_back({"variant", [](const C& c) { return json(std::string(loss::to_string(c.variant))); },
                     [](C& c, const json& v) {
                         const std::string name = convert<std::string>("variant", v);
                         try {
                             c.variant = loss::parse_variant(name);
                         } catch (const std::invalid_argument& e) {
                             throw ConfigError(std::string("variant: ") + e.what());
                         }
                     }});
        f.push_back(field("dataset", &C::dataset));
        f.push_back(field("num_classes", &C::num_classes));
        f.push_back(field("num_styles", &C::num_styles));
        f.push_back(field("per_class_count", &C::per_class_count));
        f.push_back(field("image_size", &C::image_size));
        f.push_back(field("channels", &C::channels));
        f.push_back(field("idx_images", &C::idx_images));
        f.push_back(field("idx_labels", &C::idx_labels));
        f.push_back(field("dataset_dir", &C::dataset_dir));
        f.push_back(field("clients_per_style", &C::clients_per_style));
        f.push_back(field("iid", &C::iid));
        f.push_back(field("beta", &C::beta));
        f.push_back(field("samples_per_client", &C::samples_per_client));
        f.push_back(field("test_fraction", &C::test_fraction));
        f.push_back(field("rounds", &C::rounds));
        f.push_back(field("local_epochs", &C::local_epochs));
        f.push_back(field("style_epochs", &C::style_epochs));
        f.push_back(field("sample_ratio", &C::sample_ratio));
        f.push_back(field("lambda", &C::lambda));
        f.push_back(field("tau", &C::tau));
        f.push_back({"mu", [](const C& c) { return c.mu ? json(*c.mu) : json(nullptr); },
                     [](C& c, const json& v) {
                         if (v.is_null()) c.mu.reset();
                         else c.mu = convert<double>("mu", v);
                     }});
        f.push_back(field("apfl_alpha", &C::apfl_alpha));
        f.push_back(field("apfl_literal_views", &C::apfl_literal_views));
        f.push_back(field("freeze_generator_pretrain", &C::freeze_generator_pretrain));
        f.push_back(field("encoder_hidden", &C::encoder_hidden));
        f.push_back(field("feature_dim", &C::feature_dim));
        f.push_back(field("projector_hidden", &C::projector_hidden));
        f.push_back(field("projection_dim", &C::projection_dim));
        f.push_back(field("generator_hidden", &C::generator_hidden));
        f.push_back(field("predictor_hidden", &C::predictor_hidden));
        f.push_back(field("lr", &C::lr));
        f.push_back(field("batch_size", &C::batch_size));
        f.push_back(field("probe_epochs", &C::probe_epochs));
        f.push_back(field("probe_lr", &C::probe_lr));
        f.push_back(field("stylized_feature", &C::stylized_feature));
        f.push_back(field("seeds", &C::seeds));
        f.push_back(field("output_dir", &C::output_dir));
        f.push_back(field("checkpoint_every", &C::checkpoint_every));
        f.push_back(field("threads", &C::threads));
        return f;
    }();
    return table;
}

const Field& find_field(std::string_view key) {
    for (const auto& f : fields())
        if (f.key == key) return f;
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// A value in JSON scalar/array syntax; anything unparsable is taken as a bare string.
json parse_value(std::string_view text) {
    const std::string s(trim(text));
    json v = json::parse(s, nullptr, false);
    if (v.is_discarded()) return json(s);
    return v;
}

std::string strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
        if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
    }
    return std::string(line);
}

}  // namespace

json to_json(const ExperimentConfig& cfg) {
    json j = json::object();
    for (const auto& f : fields()) {
        json v = f.get(cfg);
        if (!v.is_null()) j[f.key] = std::move(v);
    }
    return j;
}

ExperimentConfig from_json(const json& j, ExperimentConfig base) {
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    for (const auto& [key, value] : j.items()) find_field(key).set(base, value);
    return base;
}

std::string to_toml(const ExperimentConfig& cfg) {
    std::ostringstream out;
    for (const auto& f : fields()) {
        const json v = f.get(cfg);
        if (!v.is_null()) out << f.key << " = " << v.dump() << '\n';
    }
    return out.str();
}

ExperimentConfig parse_toml(std::string_view text, ExperimentConfig base) {
    std::istringstream in{std::string(text)};
    std::string raw;
    for (std::size_t lineno = 1; std::getline(in, raw); ++lineno) {
        const std::string line = strip_comment(raw);
        const std::string_view body = trim(line);
        if (body.empty() || body.front() == '[') continue;  // blank lines and [section] headers
        const auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string_view key = trim(body.substr(0, eq));
        try {
            find_field(key).set(base, parse_value(body.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return base;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.key);
    return keys;
}

void apply_override(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    const Field& f = find_field(key);
    const json parsed = parse_value(value);
    try {
        f.set(cfg, parsed);
    } catch (const ConfigError&) {
        // Shell arguments need no quotes: retry a non-string value as a string.
        if (parsed.is_string()) throw;
        f.set(cfg, json(std::string(trim(value))));
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    if (path.extension() == ".json") {
        json j = json::parse(buf.str(), nullptr, false);
        if (j.is_discarded()) throw ConfigError(path.string() + ": malformed JSON");
        return from_json(j);
    }
    return parse_toml(buf.str());
}

}  // namespace fedstyle::fl
