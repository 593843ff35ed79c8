#include "fedstyle/nn/models.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedstyle::nn {

namespace {

std::string fc(std::size_t i, const char* what) { return "fc" + std::to_string(i) + "." + what; }
std::string bn(std::size_t i, const char* what) { return "bn" + std::to_string(i) + "." + what; }

std::size_t layer_count(const ParamSet& p) {
    std::size_t n = 0;
    while (p.contains(fc(n, "weight"))) ++n;
    if (n == 0) throw std::invalid_argument("ParamSet '" + p.tag() + "' holds no perceptron layers");
    return n;
}

Var bind(Tape& tape, Tensor& t, bool trainable) {
    return trainable ? tape.leaf(t) : tape.constant(Tensor(t.shape(), t.values()));
}

}  // namespace

MlpSpec encoder_spec(const ModelDims& d) { return {d.input, d.encoder_hidden, d.feature, true}; }
MlpSpec projector_spec(const ModelDims& d) { return {d.feature, {d.projector_hidden}, d.projection, false}; }
MlpSpec generator_spec(const ModelDims& d) { return {2 * d.feature, {d.generator_hidden}, d.feature, false}; }
MlpSpec predictor_spec(const ModelDims& d) { return {d.projection, {d.predictor_hidden}, d.projection, false}; }

ParamSet make_mlp(const MlpSpec& spec, Rng& rng, std::string tag) {
    if (spec.input == 0 || spec.output == 0) throw std::invalid_argument("make_mlp: zero-width layer");
    ParamSet p(std::move(tag));
    std::vector<std::size_t> widths{spec.input};
    widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
    widths.push_back(spec.output);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l], out = widths[l + 1];
        if (out == 0) throw std::invalid_argument("make_mlp: zero-width layer");
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Tensor w({in, out});
        for (double& v : w.values()) v = uniform(rng, -bound, bound);
        Tensor b({out});
        for (double& v : b.values()) v = uniform(rng, -bound, bound);
        p.add(fc(l, "weight"), std::move(w));
        p.add(fc(l, "bias"), std::move(b));
        const bool hidden = l + 2 < widths.size();
        if (hidden && spec.batchnorm) {
            p.add(bn(l, "gamma"), Tensor({out}, 1.0));
            p.add(bn(l, "beta"), Tensor({out}, 0.0));
            p.add(bn(l, "running_mean"), Tensor({out}, 0.0), false);
            p.add(bn(l, "running_var"), Tensor({out}, 1.0), false);
        }
    }
    return p;
}

Var mlp_forward(Tape& tape, ParamSet& params, Var x, Mode mode, bool trainable) {
    const std::size_t layers = layer_count(params);
    Var h = x;
    for (std::size_t l = 0; l < layers; ++l) {
        Var w = bind(tape, params.get(fc(l, "weight")), trainable);
        Var b = bind(tape, params.get(fc(l, "bias")), trainable);
        h = ad::add(ad::matmul(h, w), b);
        if (l + 1 == layers) break;
        if (params.contains(bn(l, "gamma"))) {
            Var gamma = bind(tape, params.get(bn(l, "gamma")), trainable);
            Var beta = bind(tape, params.get(bn(l, "beta")), trainable);
            ad::BatchNormOptions opts;
            opts.training = mode == Mode::train;
            h = ad::batchnorm1d(h, gamma, beta, opts, &params.get(bn(l, "running_mean")),
                                &params.get(bn(l, "running_var")));
        }
        h = ad::relu(h);
    }
    return h;
}

Tensor mlp_infer(const ParamSet& params, const Tensor& x) {
    Tape tape;
    ParamSet copy = params;
    Var out = mlp_forward(tape, copy, tape.constant(x), Mode::eval, false);
    return Tensor(out.shape(), out.value().values());
}

Var generator_forward(Tape& tape, ParamSet& generator, Var h_content, Var h_style, bool trainable) {
    if (h_content.shape() != h_style.shape())
        throw ad::ShapeError("generator_forward: content " + ad::shape_str(h_content.shape()) +
                             " and style " + ad::shape_str(h_style.shape()) + " features differ");
    return mlp_forward(tape, generator, ad::concat(h_content, h_style, 1), Mode::train, trainable);
}

ContentModel make_content_model(const ModelDims& dims, bool with_predictor, Rng& rng) {
    ContentModel m;
    m.encoder = make_mlp(encoder_spec(dims), rng, "encoder");
    m.projector = make_mlp(projector_spec(dims), rng, "projector");
    if (with_predictor) m.predictor = make_mlp(predictor_spec(dims), rng, "predictor");
    return m;
}

std::vector<ParamSet*> parts(ContentModel& m) {
    std::vector<ParamSet*> out{&m.encoder, &m.projector};
    if (m.predictor) out.push_back(&*m.predictor);
    return out;
}

std::vector<const ParamSet*> parts(const ContentModel& m) {
    std::vector<const ParamSet*> out{&m.encoder, &m.projector};
    if (m.predictor) out.push_back(&*m.predictor);
    return out;
}

std::vector<double> flatten(const ParamSet& p) {
    std::vector<double> v;
    v.reserve(p.numel());
    for (const auto& e : p.entries()) v.insert(v.end(), e.tensor.values().begin(), e.tensor.values().end());
    return v;
}

ParamSet unflatten(std::span<const double> v, const ParamSet& templ) {
    if (v.size() != templ.numel())
        throw std::invalid_argument("unflatten: vector of length " + std::to_string(v.size()) +
                                    " does not fit '" + templ.tag() + "' (" + std::to_string(templ.numel()) + ")");
    ParamSet out(templ.tag());
    std::size_t off = 0;
    for (const auto& e : templ.entries()) {
        const std::size_t n = e.tensor.numel();
        out.add(e.name, Tensor(e.tensor.shape(), std::vector<double>(v.begin() + off, v.begin() + off + n)),
                e.trainable);
        off += n;
    }
    return out;
}

std::vector<double> flatten(const ContentModel& m) {
    std::vector<double> v;
    for (const ParamSet* p : parts(m)) {
        auto part = flatten(*p);
        v.insert(v.end(), part.begin(), part.end());
    }
    return v;
}

ContentModel unflatten(std::span<const double> v, const ContentModel& templ) {
    std::size_t total = 0;
    for (const ParamSet* p : parts(templ)) total += p->numel();
    if (v.size() != total)
        throw std::invalid_argument("unflatten: vector of length " + std::to_string(v.size()) +
                                    " does not fit content model (" + std::to_string(total) + ")");
    ContentModel out;
    std::size_t off = 0;
    auto take = [&](const ParamSet& t) {
        ParamSet p = unflatten(v.subspan(off, t.numel()), t);
        off += t.numel();
        return p;
    };
    out.encoder = take(templ.encoder);
    out.projector = take(templ.projector);
    if (templ.predictor) out.predictor = take(*templ.predictor);
    return out;
}

std::vector<double> flatten_trainable(const ParamSet& p) {
    std::vector<double> v;
    for (const auto& e : p.entries())
        if (e.trainable) v.insert(v.end(), e.tensor.values().begin(), e.tensor.values().end());
    return v;
}

Var squared_distance(Tape& tape, ParamSet& a, const ParamSet& b) {
    if (a.size() != b.size()) throw std::invalid_argument("squared_distance: layouts differ");
    std::optional<Var> total;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto& ea = a.entries()[i];
        const auto& eb = b.entries()[i];
        if (ea.name != eb.name || ea.tensor.shape() != eb.tensor.shape())
            throw std::invalid_argument("squared_distance: layouts differ at '" + ea.name + "'");
        if (!ea.trainable) continue;
        Var d = ad::sub(tape.leaf(ea.tensor), tape.constant(eb.tensor));
        Var s = ad::sum(ad::mul(d, d));
        total = total ? ad::add(*total, s) : s;
    }
    if (!total) return tape.constant(Tensor::scalar(0.0));
    return *total;
}

}  // namespace fedstyle::nn
