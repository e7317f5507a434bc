#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fd_oracle.hpp"
#include "tgan/tensor.hpp"

using namespace tgan;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = scale * (2.0 * rng.uniform01() - 1.0);
    return Tensor::from_data(std::move(shape), std::move(v), true);
}

}  // namespace

TEST_CASE("matmul identity and small products") {
    Graph g;
    auto eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    auto a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    auto out = g.matmul(eye, a);
    CHECK(out.values()[0] == doctest::Approx(1));
    CHECK(out.values()[1] == doctest::Approx(2));
    CHECK(out.values()[2] == doctest::Approx(3));
    CHECK(out.values()[3] == doctest::Approx(4));

    auto row = Tensor::from_data({1, 2}, {1, 2});
    auto col = Tensor::from_data({2, 1}, {3, 4});
    CHECK(g.matmul(row, col).item() == doctest::Approx(11));

    auto bad = Tensor::from_data({3, 1}, {1, 2, 3});
    CHECK_THROWS_AS(g.matmul(row, bad), ShapeError);
}

TEST_CASE("matmul gradient of sum(a*b) with ones column") {
    Graph g;
    auto a = Tensor::from_data({1, 2}, {5.0, -2.0}, true);
    auto b = Tensor::from_data({2, 1}, {1.0, 1.0});
    auto loss = g.sum(g.matmul(a, b));
    g.backward(loss);
    CHECK(a.grad()[0] == doctest::Approx(1.0));
    CHECK(a.grad()[1] == doctest::Approx(1.0));

    auto forward = [&]() {
        Graph h;
        return h.sum(h.matmul(a, b)).item();
    };
    auto res = fd::compare(forward, {{"a", a}});
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("elementwise examples") {
    Graph g;
    auto x = Tensor::from_data({1}, {0.0});
    CHECK(g.sigmoid(x).item() == doctest::Approx(0.5));

    auto y = Tensor::from_data({1}, {1.25});
    CHECK(g.log(g.exp(y)).item() == doctest::Approx(1.25));

    auto z = Tensor::from_data({1}, {-2.0});
    CHECK(g.leaky_relu(z, 0.2).item() == doctest::Approx(-0.4));

    auto bad = Tensor::from_data({2}, {1.0, -1.0});
    CHECK_THROWS_WITH_AS(g.log(bad), doctest::Contains("index 1"), DomainError);
}

TEST_CASE("softmax examples and stability") {
    Graph g;
    auto flat = g.softmax(Tensor::from_data({4}, {0, 0, 0, 0}));
    for (double v : flat.values()) CHECK(v == doctest::Approx(0.25));

    auto two = g.softmax(Tensor::from_data({2}, {std::log(2.0), 0.0}));
    CHECK(two.values()[0] == doctest::Approx(2.0 / 3.0));
    CHECK(two.values()[1] == doctest::Approx(1.0 / 3.0));

    auto big = g.softmax(Tensor::from_data({2}, {1000.0, 0.0}));
    CHECK(big.values()[0] == doctest::Approx(1.0));
    CHECK(big.values()[1] == doctest::Approx(0.0));
}

TEST_CASE("softmax is a shift-invariant probability vector") {
    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        Graph g;
        std::vector<double> raw(6);
        for (auto& v : raw) v = 6.0 * (2.0 * rng.uniform01() - 1.0);
        auto base = g.softmax(Tensor::from_data({6}, raw));
        double sum = 0.0;
        for (double v : base.values()) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);

        std::vector<double> shifted = raw;
        for (auto& v : shifted) v += 3.75;
        auto moved = g.softmax(Tensor::from_data({6}, shifted));
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(std::abs(base.values()[i] - moved.values()[i]) < 1e-12);
        }
    }
}

TEST_CASE("reduce examples") {
    Graph g;
    CHECK(g.mean(Tensor::from_data({3}, {1, 2, 3})).item() == doctest::Approx(2.0));
    auto empty = Tensor::from_data({0}, {});
    CHECK_THROWS_AS(g.sum(empty), DomainError);

    auto x = Tensor::from_data({4}, {1, 2, 3, 4}, true);
    g.backward(g.mean(x));
    for (double gr : x.grad()) CHECK(gr == doctest::Approx(0.25));
}

TEST_CASE("backward basics") {
    {
        Graph g;
        auto x = Tensor::from_data({1}, {3.0}, true);
        g.backward(g.mul(x, x));
        CHECK(x.grad()[0] == doctest::Approx(6.0));
    }
    {
        Graph g;
        auto x = Tensor::from_data({1}, {0.0}, true);
        g.backward(g.sigmoid(x));
        CHECK(x.grad()[0] == doctest::Approx(0.25));
    }
    {
        Graph g;
        auto x = Tensor::from_data({2}, {1.0, 2.0}, true);
        auto y = g.sum(x);
        CHECK_THROWS_AS(g.backward(x), ContractError);  // leaf, not produced by ops
        auto not_scalar = g.add(x, x);
        CHECK_THROWS_AS(g.backward(not_scalar), ContractError);
        g.backward(y);
    }
}

TEST_CASE("repeated backward accumulates leaf gradients") {
    Graph g;
    auto x = Tensor::from_data({1}, {3.0}, true);
    auto loss = g.mul(x, x);
    g.backward(loss);
    g.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(12.0));
    x.zero_grad();
    g.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("dense layer examples") {
    Graph g;
    auto x = Tensor::from_data({1, 1}, {3.0});
    auto W = Tensor::from_data({1, 1}, {2.0});
    auto b = Tensor::from_data({1}, {1.0});
    CHECK(g.dense(x, W, b, Activation::identity()).item() == doctest::Approx(7.0));

    auto zeroW = Tensor::zeros({3, 2});
    auto zerob = Tensor::zeros({2});
    auto batch = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    auto out = g.dense(batch, zeroW, zerob, Activation::identity());
    for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("dense layer gradient vs finite differences") {
    Rng rng(11);
    auto x = random_tensor({2, 3}, rng);
    auto W = random_tensor({3, 4}, rng);
    auto b = random_tensor({4}, rng);
    Graph g;
    auto loss = g.mean(g.dense(x, W, b, Activation::leaky_relu(0.2)));
    g.backward(loss);
    auto forward = [&]() {
        Graph h;
        return h.mean(h.dense(x, W, b, Activation::leaky_relu(0.2))).item();
    };
    auto res = fd::compare(forward, {{"x", x}, {"W", W}, {"b", b}});
    CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("every differentiable op matches finite differences on random inputs") {
    Rng rng(2024);
    for (int rep = 0; rep < 20; ++rep) {
        auto case_rng = rng.split(rep);

        // binary elementwise + reductions + broadcasts in one composite
        {
            auto a = random_tensor({2, 3}, case_rng);
            auto b = random_tensor({2, 3}, case_rng);
            auto v = random_tensor({3}, case_rng);
            auto build = [&](Graph& g) {
                auto s = g.add(g.mul(a, b), g.sub(a, g.neg(b)));
                s = g.add_rowwise(g.mul_rowwise(s, v), v);
                return g.mean(s);
            };
            Graph g;
            auto loss = build(g);
            g.backward(loss);
            auto res = fd::compare(
                [&]() {
                    Graph h;
                    return build(h).item();
                },
                {{"a", a}, {"b", b}, {"v", v}});
            CHECK_MESSAGE(res.max_rel_err < 1e-4, "composite " << res.worst);
        }

        // unary chain: exp, log, sigmoid, tanh, softplus, leaky_relu, scale
        {
            auto a = random_tensor({5}, case_rng, 0.8);
            auto build = [&](Graph& g) {
                auto t = g.exp(a);
                t = g.log(g.add_const(t, 0.5));
                t = g.add(g.sigmoid(t), g.tanh(t));
                t = g.add(g.softplus(t), g.leaky_relu(t, 0.2));
                return g.sum(g.scale(t, 0.7));
            };
            Graph g;
            g.backward(build(g));
            auto res = fd::compare(
                [&]() {
                    Graph h;
                    return build(h).item();
                },
                {{"a", a}});
            CHECK_MESSAGE(res.max_rel_err < 1e-4, "unary " << res.worst);
        }

        // matmul + softmax + concat + reshape + component_mix + pick_log
        {
            auto a = random_tensor({2, 3}, case_rng);
            auto w = random_tensor({3, 4}, case_rng);
            auto comp = random_tensor({2, 3, 2}, case_rng);
            auto logits = random_tensor({2, 3}, case_rng);
            std::vector<std::size_t> labels = {1, 3};
            auto build = [&](Graph& g) {
                auto probs = g.softmax(g.matmul(a, w));
                auto picked = g.pick_log(probs, labels);
                auto pi = g.softmax(logits);
                auto mixed = g.component_mix(comp, pi);
                auto joined = g.concat_cols(mixed, g.reshape(picked, {2, 1}));
                return g.mean(joined);
            };
            Graph g;
            g.backward(build(g));
            auto res = fd::compare(
                [&]() {
                    Graph h;
                    return build(h).item();
                },
                {{"a", a}, {"w", w}, {"comp", comp}, {"logits", logits}});
            CHECK_MESSAGE(res.max_rel_err < 1e-4, "structured " << res.worst);
        }
    }
}

TEST_CASE("mean over independent rows scales per-row gradients by 1/b") {
    auto build_grad = [](std::size_t b) {
        std::vector<double> vals(b * 3);
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.1 * (i % 3) + 0.3;
        auto x = Tensor::from_data({b, 3}, vals, true);
        Graph g;
        g.backward(g.mean(g.sigmoid(x)));
        return std::vector<double>(x.grad().begin(), x.grad().end());
    };
    auto single = build_grad(1);
    auto batched = build_grad(4);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(batched[j] == doctest::Approx(single[j] / 4.0));
        // every row of the batched input is identical, so gradients repeat
        CHECK(batched[9 + j] == doctest::Approx(batched[j]));
    }
}

TEST_CASE("non-finite values rejected at op boundaries") {
    Graph g;
    auto big = Tensor::from_data({1}, {1e308});
    CHECK_THROWS_AS(g.mul(g.exp(big), g.exp(big)), NumericError);
    std::vector<double> nan_data = {std::nan("")};
    CHECK_THROWS_AS(Tensor::from_data({1}, nan_data), NumericError);
}

TEST_CASE("no-grad graphs do not record") {
    Graph g(/*record=*/false);
    auto x = Tensor::from_data({1}, {2.0}, true);
    auto y = g.mul(x, x);
    CHECK(y.item() == doctest::Approx(4.0));
    CHECK(g.num_ops() == 0);
    CHECK_THROWS_AS(g.backward(y), ContractError);
}
