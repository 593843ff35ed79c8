#include "fedstyle/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fedstyle::ad {

namespace {

void require(bool ok, const char* op, const std::string& what) {
    if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

void require_rank2(Var a, const char* op) {
    require(a.value().rank() == 2, op, "expected rank-2 input, got " + shape_str(a.shape()));
}

bool is_row_broadcast(const Shape& a, const Shape& b) {
    return a.size() == 2 && b.size() == 1 && a[1] == b[0];
}

}  // namespace

Var matmul(Var a, Var b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    require(b.shape()[0] == k, "matmul",
            "inner dimensions differ: " + shape_str(a.shape()) + " . " + shape_str(b.shape()));
    Tensor out({m, n});
    const auto& av = a.value().values();
    const auto& bv = b.value().values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = &bv[p * n];
            double* orow = &ov[i * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape().record(std::move(out), {a, b}, [ia, ib, m, k, n](Tape& t, std::size_t self) {
        const auto g = t.grad(self);
        const auto& av = t.value(ia).values();
        const auto& bv = t.value(ib).values();
        if (t.requires_grad(ia)) {
            auto ga = t.grad_buffer(ia);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    const double* brow = &bv[p * n];
                    const double* grow = &g[i * n];
                    for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                    ga[i * k + p] += s;
                }
        }
        if (t.requires_grad(ib)) {
            auto gb = t.grad_buffer(ib);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = av[i * k + p];
                    if (aip == 0.0) continue;
                    double* gbrow = &gb[p * n];
                    const double* grow = &g[i * n];
                    for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                }
        }
    }, "matmul");
}

Var transpose(Var a) {
    require_rank2(a, "transpose");
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    Tensor out({c, r});
    const auto& av = a.value().values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(j, i) = av[i * c + j];
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {a}, [ia, r, c](Tape& t, std::size_t self) {
        const auto g = t.grad(self);
        auto ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
    }, "transpose");
}

namespace {

Var add_impl(Var a, Var b, double sign, const char* op) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    const bool same = sa == sb;
    require(same || is_row_broadcast(sa, sb), op,
            "incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
    Tensor out = a.value();
    out.clear_grad();
    out.set_requires_grad(false);
    const auto& bv = b.value().values();
    auto& ov = out.values();
    const std::size_t nb = bv.size();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += sign * bv[same ? i : i % nb];
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape().record(std::move(out), {a, b}, [ia, ib, sign, same, nb](Tape& t, std::size_t self) {
        const auto g = t.grad(self);
        if (t.requires_grad(ia)) {
            auto ga = t.grad_buffer(ia);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (t.requires_grad(ib)) {
            auto gb = t.grad_buffer(ib);
            for (std::size_t i = 0; i < g.size(); ++i) gb[same ? i : i % nb] += sign * g[i];
        }
    }, op);
}

template <class Fwd, class Deriv>
Var unary(Var a, const char* op, Fwd fwd, Deriv deriv) {
    Tensor out(a.shape());
    const auto& av = a.value().values();
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {a}, [ia, deriv](Tape& t, std::size_t self) {
        const auto g = t.grad(self);
        const auto& x = t.value(ia).values();
        const auto& y = t.value(self).values();
        auto ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
    }, op);
}

}  // namespace

Var add(Var a, Var b) { return add_impl(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_impl(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
    require(a.shape() == b.shape(), "mul",
            "shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out(a.shape());
    const auto& av = a.value().values();
    const auto& bv = b.value().values();
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
        const auto g = t.grad(self);
        const auto& av = t.value(ia).values();
        const auto& bv = t.value(ib).values();
        if (t.requires_grad(ia)) {
            auto ga = t.grad_buffer(ia);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (t.requires_grad(ib)) {
            auto gb = t.grad_buffer(ib);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
    }, "mul");
}

Var mul_scalar(Var a, double c) {
    return unary(a, "mul_scalar", [c](double x) { return c * x; },
                 [c](double, double) { return c; });
}

Var add_scalar(Var a, double c) {
    return unary(a, "add_scalar", [c](double x) { return x + c; },
                 [](double, double) { return 1.0; });
}

Var relu(Var a) {
    return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
    return unary(a, "exp", [](double x) { return std::exp(x); },
                 [](double, double y) { return y; });
}

Var log(Var a) {
    for (double v : a.value().values())
        if (!(v > 0.0)) throw NumericError("log: non-positive input " + std::to_string(v));
    return unary(a, "log", [](double x) { return std::log(x); },
                 [](double x, double) { return 1.0 / x; });
}

Var concat(Var a, Var b, std::size_t axis) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    require(sa.size() == sb.size() && sa.size() <= 2, "concat", "rank mismatch");
    require(axis < sa.size(), "concat", "axis out of range");
    if (sa.size() == 1 || axis == 0) {
        if (sa.size() == 2) require(sa[1] == sb[1], "concat", "column counts differ");
        Shape os = sa;
        os[0] += sb[0];
        std::vector<double> v = a.value().values();
        v.insert(v.end(), b.value().values().begin(), b.value().values().end());
        const std::size_t ia = a.id(), ib = b.id(), na = a.numel();
        return a.tape().record(Tensor(os, std::move(v)), {a, b}, [ia, ib, na](Tape& t, std::size_t self) {
            const auto g = t.grad(self);
            if (t.requires_grad(ia)) {
                auto ga = t.grad_buffer(ia);
                for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
            }
            if (t.requires_grad(ib)) {
                auto gb = t.grad_buffer(ib);
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
            }
        }, "concat");
    }
    require(sa[0] == sb[0], "concat", "row counts differ");
    const std::size_t rows = sa[0], ca = sa[1], cb = sb[1], cw = ca + cb;
    Tensor out({rows, cw});
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < ca; ++j) out.at(r, j) = a.value().at(r, j);
        for (std::size_t j = 0; j < cb; ++j) out.at(r, ca + j) = b.value().at(r, j);
    }
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape().record(std::move(out), {a, b}, [ia, ib, rows, ca, cb, cw](Tape& t, std::size_t self) {
        const auto g = t.grad(self);
        if (t.requires_grad(ia)) {
            auto ga = t.grad_buffer(ia);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < ca; ++j) ga[r * ca + j] += g[r * cw + j];
        }
        if (t.requires_grad(ib)) {
            auto gb = t.grad_buffer(ib);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < cb; ++j) gb[r * cb + j] += g[r * cw + ca + j];
        }
    }, "concat");
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    const std::size_t ia = a.id();
    return a.tape().record(Tensor::scalar(s), {a}, [ia](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        auto ga = t.grad_buffer(ia);
        for (double& x : ga) x += g;
    }, "sum");
}

Var sum(Var a, std::size_t axis) {
    if (a.value().rank() == 1) {
        require(axis == 0, "sum", "axis out of range for rank-1 input");
        return sum(a);
    }
    require_rank2(a, "sum");
    require(axis <= 1, "sum", "axis out of range");
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    Tensor out({axis == 0 ? c : r});
    const auto& av = a.value().values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[axis == 0 ? j : i] += av[i * c + j];
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {a}, [ia, r, c, axis](Tape& t, std::size_t self) {
        const auto g = t.grad(self);
        auto ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[axis == 0 ? j : i];
    }, "sum");
}

Var mean(Var a) { return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel())); }

Var mean(Var a, std::size_t axis) {
    const std::size_t n = a.value().rank() == 1 ? a.numel() : a.shape().at(axis);
    return mul_scalar(sum(a, axis), 1.0 / static_cast<double>(n));
}

Var detach(Var a) { return a.tape().constant(Tensor(a.shape(), a.value().values())); }

Var l2_normalize(Var a, std::size_t axis, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("l2_normalize: eps must be positive");
    const std::size_t rank = a.value().rank();
    require(rank <= 2, "l2_normalize", "rank must be 1 or 2");
    require((rank == 1 && axis == 0) || (rank == 2 && axis == 1), "l2_normalize",
            "only the last axis is supported");
    const std::size_t d = a.shape().back();
    const std::size_t rows = a.numel() / d;
    Tensor out(a.shape());
    std::vector<double> norms(rows);
    const auto& av = a.value().values();
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += av[r * d + j] * av[r * d + j];
        norms[r] = std::sqrt(s);
        if (norms[r] < eps) continue;
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] = av[r * d + j] / norms[r];
    }
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {a},
                           [ia, rows, d, eps, norms = std::move(norms)](Tape& t, std::size_t self) {
        const auto g = t.grad(self);
        const auto& y = t.value(self).values();
        auto ga = t.grad_buffer(ia);
        for (std::size_t r = 0; r < rows; ++r) {
            if (norms[r] < eps) continue;
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += y[r * d + j] * g[r * d + j];
            for (std::size_t j = 0; j < d; ++j)
                ga[r * d + j] += (g[r * d + j] - y[r * d + j] * dot) / norms[r];
        }
    }, "l2_normalize");
}

Var cosine_sim(Var a, Var b) {
    require_rank2(a, "cosine_sim");
    require(a.shape() == b.shape(), "cosine_sim",
            "shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    return sum(mul(l2_normalize(a), l2_normalize(b)), 1);
}

Var masked_logsumexp(Var a, const Tensor& keep) {
    require_rank2(a, "masked_logsumexp");
    require(keep.shape() == a.shape(), "masked_logsumexp", "mask shape differs from input");
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    const auto& av = a.value().values();
    Tensor out({r});
    for (std::size_t i = 0; i < r; ++i) {
        double m = -INFINITY;
        for (std::size_t j = 0; j < c; ++j)
            if (keep[i * c + j] != 0.0) m = std::max(m, av[i * c + j]);
        if (m == -INFINITY)
            throw std::invalid_argument("masked_logsumexp: row " + std::to_string(i) + " keeps no entries");
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j)
            if (keep[i * c + j] != 0.0) s += std::exp(av[i * c + j] - m);
        out[i] = m + std::log(s);
    }
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {a}, [ia, r, c, keep](Tape& t, std::size_t self) {
        const auto g = t.grad(self);
        const auto& av = t.value(ia).values();
        const auto& y = t.value(self).values();
        auto ga = t.grad_buffer(ia);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
                if (keep[i * c + j] != 0.0) ga[i * c + j] += g[i] * std::exp(av[i * c + j] - y[i]);
    }, "masked_logsumexp");
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
    require_rank2(logits, "softmax_cross_entropy");
    const std::size_t n = logits.shape()[0], k = logits.shape()[1];
    require(labels.size() == n, "softmax_cross_entropy", "label count differs from rows");
    const auto& lv = logits.value().values();
    std::vector<double> probs(n * k);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
        double m = -INFINITY;
        for (std::size_t j = 0; j < k; ++j) m = std::max(m, lv[i * k + j]);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += std::exp(lv[i * k + j] - m);
        for (std::size_t j = 0; j < k; ++j) probs[i * k + j] = std::exp(lv[i * k + j] - m) / s;
        loss += m + std::log(s) - lv[i * k + static_cast<std::size_t>(y)];
    }
    loss /= static_cast<double>(n);
    const std::size_t il = logits.id();
    std::vector<int> ys(labels.begin(), labels.end());
    return logits.tape().record(Tensor::scalar(loss), {logits},
                                [il, n, k, probs = std::move(probs), ys = std::move(ys)](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0] / static_cast<double>(n);
        auto gl = t.grad_buffer(il);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j)
                gl[i * k + j] += g * (probs[i * k + j] - (static_cast<std::size_t>(ys[i]) == j ? 1.0 : 0.0));
    }, "softmax_cross_entropy");
}

Var batchnorm1d(Var x, Var gamma, Var beta, const BatchNormOptions& opts,
                Tensor* running_mean, Tensor* running_var) {
    require_rank2(x, "batchnorm1d");
    const std::size_t b = x.shape()[0], d = x.shape()[1];
    require(gamma.shape() == Shape{d} && beta.shape() == Shape{d}, "batchnorm1d",
            "affine parameters must have shape [" + std::to_string(d) + "]");
    if (!(opts.eps > 0.0)) throw std::invalid_argument("batchnorm1d: eps must be positive");
    const auto& xv = x.value().values();
    const auto& gv = gamma.value().values();
    const auto& bv = beta.value().values();

    std::vector<double> mu(d, 0.0), inv_std(d, 0.0);
    if (opts.training) {
        std::vector<double> var(d, 0.0);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < d; ++j) mu[j] += xv[i * d + j];
        for (double& m : mu) m /= static_cast<double>(b);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                const double c = xv[i * d + j] - mu[j];
                var[j] += c * c;
            }
        for (std::size_t j = 0; j < d; ++j) {
            const double biased = var[j] / static_cast<double>(b);
            inv_std[j] = 1.0 / std::sqrt(biased + opts.eps);
            if (running_mean && running_var) {
                const double unbiased = b > 1 ? var[j] / static_cast<double>(b - 1) : biased;
                (*running_mean)[j] = opts.momentum * (*running_mean)[j] + (1.0 - opts.momentum) * mu[j];
                (*running_var)[j] = opts.momentum * (*running_var)[j] + (1.0 - opts.momentum) * unbiased;
            }
        }
    } else {
        if (!running_mean || !running_var)
            throw std::invalid_argument("batchnorm1d: eval mode needs running statistics");
        for (std::size_t j = 0; j < d; ++j) {
            mu[j] = (*running_mean)[j];
            inv_std[j] = 1.0 / std::sqrt((*running_var)[j] + opts.eps);
        }
    }

    Tensor xhat({b, d});
    Tensor out({b, d});
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double h = (xv[i * d + j] - mu[j]) * inv_std[j];
            xhat[i * d + j] = h;
            out[i * d + j] = gv[j] * h + bv[j];
        }

    const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
    const bool training = opts.training;
    return x.tape().record(std::move(out), {x, gamma, beta},
                           [ix, ig, ib, b, d, training, xhat = std::move(xhat),
                            inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
        const auto g = t.grad(self);
        const auto& gv = t.value(ig).values();
        if (t.requires_grad(ig)) {
            auto gg = t.grad_buffer(ig);
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < d; ++j) gg[j] += g[i * d + j] * xhat[i * d + j];
        }
        if (t.requires_grad(ib)) {
            auto gb = t.grad_buffer(ib);
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
        }
        if (!t.requires_grad(ix)) return;
        auto gx = t.grad_buffer(ix);
        if (!training) {
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[i * d + j] * gv[j] * inv_std[j];
            return;
        }
        const double nb = static_cast<double>(b);
        for (std::size_t j = 0; j < d; ++j) {
            double sum_dh = 0.0, sum_dh_h = 0.0;
            for (std::size_t i = 0; i < b; ++i) {
                const double dh = g[i * d + j] * gv[j];
                sum_dh += dh;
                sum_dh_h += dh * xhat[i * d + j];
            }
            for (std::size_t i = 0; i < b; ++i) {
                const double dh = g[i * d + j] * gv[j];
                gx[i * d + j] += inv_std[j] / nb * (nb * dh - sum_dh - xhat[i * d + j] * sum_dh_h);
            }
        }
    }, "batchnorm1d");
}

}  // namespace fedstyle::ad
