#include "doctest.h"

#include "fedstyle/ad/gradcheck.hpp"
#include "fedstyle/ad/ops.hpp"
#include "fedstyle/ad/param_set.hpp"
#include "fedstyle/loss/gradcheck_suite.hpp"

#include <cmath>
#include <limits>

using namespace fedstyle;
using ad::Tape;
using ad::Tensor;
using ad::Var;

TEST_CASE("matmul forward and backward against hand values") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 1}, {5, 6});
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    Tape tape;
    Var y = ad::matmul(tape.leaf(a), tape.leaf(b));
    CHECK(y.value() == Tensor({2, 1}, {17, 39}));
    tape.backward(ad::sum(y));
    // d sum(AB)/dA = 1 * B^T, d/dB = A^T * 1
    CHECK(std::vector<double>(a.grad().begin(), a.grad().end()) == std::vector<double>{5, 6, 5, 6});
    CHECK(std::vector<double>(b.grad().begin(), b.grad().end()) == std::vector<double>{4, 6});
}

TEST_CASE("gradient of sum(a*b) with respect to a is b") {
    Tensor a({3}, {1, -2, 3}), b({3}, {4, 5, -6});
    a.set_requires_grad(true);
    Tape tape;
    tape.backward(ad::sum(ad::mul(tape.leaf(a), tape.constant(b))));
    CHECK(std::vector<double>(a.grad().begin(), a.grad().end()) == b.values());
}

TEST_CASE("a leaf used twice accumulates both contributions") {
    Tensor a({1}, {3.0});
    a.set_requires_grad(true);
    Tape tape;
    Var x = tape.leaf(a);
    tape.backward(ad::sum(ad::mul(x, x)));
    CHECK(a.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("shape mismatches raise ShapeError") {
    Tape tape;
    Var a = tape.constant(Tensor({2, 3}));
    Var b = tape.constant(Tensor({2, 2}));
    CHECK_THROWS_AS(ad::matmul(a, b), ad::ShapeError);
    CHECK_THROWS_AS(ad::add(a, b), ad::ShapeError);
    CHECK_THROWS_AS(ad::mul(a, b), ad::ShapeError);
}

TEST_CASE("non-finite values raise NumericError") {
    Tape tape;
    CHECK_THROWS_AS(ad::log(tape.constant(Tensor({2}, {1.0, 0.0}))), ad::NumericError);
    CHECK_THROWS_AS(ad::exp(tape.constant(Tensor({1}, {1000.0}))), ad::NumericError);
    CHECK_THROWS_AS(tape.constant(Tensor({1}, {std::numeric_limits<double>::quiet_NaN()})), ad::NumericError);
}

TEST_CASE("backward runs once and needs a scalar") {
    Tensor a({2}, {1, 2});
    a.set_requires_grad(true);
    Tape tape;
    Var x = tape.leaf(a);
    CHECK_THROWS(tape.backward(x));
    Var s = ad::sum(x);
    tape.backward(s);
    CHECK_THROWS(tape.backward(s));
}

TEST_CASE("masked logsumexp and cross-entropy hand values") {
    Tape tape;
    Var l = ad::masked_logsumexp(tape.constant(Tensor({1, 3}, {0.0, std::log(3.0), 100.0})),
                                 Tensor({1, 3}, {1.0, 1.0, 0.0}));
    CHECK(l.value()[0] == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    const std::vector<int> y{2, 0};
    Var ce = ad::softmax_cross_entropy(tape.constant(Tensor({2, 4}, 0.0)), y);
    CHECK(ce.value().item() == doctest::Approx(std::log(4.0)).epsilon(1e-14));
}

TEST_CASE("l2_normalize maps a zero row to zero with zero gradient") {
    Tensor a({2, 2}, {0.0, 0.0, 3.0, 4.0});
    a.set_requires_grad(true);
    Tape tape;
    Var n = ad::l2_normalize(tape.leaf(a));
    CHECK(n.value() == Tensor({2, 2}, {0.0, 0.0, 0.6, 0.8}));
    tape.backward(ad::sum(ad::mul(n, tape.constant(Tensor({2, 2}, {1, 2, 3, 4})))));
    CHECK(a.grad()[0] == 0.0);
    CHECK(a.grad()[1] == 0.0);
}

TEST_CASE("batch norm running statistics use momentum 0.9 and unbiased variance") {
    Tensor x({2, 1}, {1.0, 3.0});
    Tensor rm({1}, 0.0), rv({1}, 1.0);
    Tape tape;
    ad::BatchNormOptions o;
    Var y = ad::batchnorm1d(tape.constant(x), tape.constant(Tensor({1}, 1.0)), tape.constant(Tensor({1}, 0.0)), o,
                            &rm, &rv);
    // batch mean 2, biased var 1, unbiased var 2
    CHECK(rm[0] == doctest::Approx(0.2));
    CHECK(rv[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 2.0));
    CHECK(y.value()[0] == doctest::Approx(-1.0 / std::sqrt(1.0 + 1e-5)));

    o.training = false;
    Tensor before_m = rm, before_v = rv;
    Var z = ad::batchnorm1d(tape.constant(x), tape.constant(Tensor({1}, 1.0)), tape.constant(Tensor({1}, 0.0)), o,
                            &rm, &rv);
    CHECK(rm == before_m);
    CHECK(rv == before_v);
    CHECK(z.value()[0] == doctest::Approx((1.0 - 0.2) / std::sqrt(1.1 + 1e-5)));
}

TEST_CASE("sgd_step updates trainable tensors and skips buffers") {
    ad::ParamSet p("p");
    p.add("w", Tensor({1}, 1.0));
    p.add("buf", Tensor({1}, 5.0), false);
    Tensor& w = p.get("w");
    const Tensor& buf = p.get("buf");
    w.accumulate_grad(std::vector<double>{2.0});
    ad::sgd_step(p, 0.1);
    CHECK(w[0] == doctest::Approx(0.8));
    CHECK(buf[0] == 5.0);
    CHECK_FALSE(w.has_grad());
    CHECK_THROWS_AS(ad::sgd_step(p, 0.1), std::logic_error);
    CHECK_THROWS_AS(p.add("w", Tensor({1})), std::invalid_argument);
}

TEST_CASE("finite-difference suite over ten random instances") {
    for (std::uint64_t seed = 100; seed < 110; ++seed)
        for (const auto& c : loss::run_gradcheck_suite(seed)) {
            INFO(c.name << " seed " << seed);
            CHECK(c.result.relative_error < 1e-5);
            CHECK(c.result.analytic_norm > 0.0);
        }
}

TEST_CASE("check_gradients detects a wrong gradient") {
    // An op whose backward drops the incoming gradient.
    auto graph = [](Tape& t, std::span<const Var> v) {
        Var y = t.record(
            v[0].value(), {v[0]},
            [](Tape& tp, std::size_t self) {
                (void)tp;
                (void)self;
            },
            "broken");
        return ad::sum(ad::mul(y, y));
    };
    auto r = ad::check_gradients(graph, {Tensor({2}, {1.0, -1.0})});
    CHECK(r.relative_error > 0.5);
}
