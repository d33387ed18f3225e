#include <cmath>
#include <vector>

#include "doctest.h"
#include "musgen/errors.hpp"
#include "musgen/nn.hpp"
#include "musgen/tensor.hpp"
#include "support.hpp"

using namespace musgen;
using testsupport::max_gradcheck_err;
using testsupport::random_tensor;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("matmul identity and hand arithmetic") {
    const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    const Tensor prod = matmul(eye, a);
    for (int i = 0; i < 4; ++i) CHECK(prod.at(i) == a.at(i));

    const Tensor row = Tensor::from({1, 2}, {1, 2});
    const Tensor col = Tensor::from({2, 1}, {3, 4});
    CHECK(matmul(row, col).value() == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    const Tensor a = Tensor::from({2, 3}, std::vector<double>(6, 0.0));
    const Tensor b = Tensor::from({4, 2}, std::vector<double>(8, 0.0));
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2,3]"), DimensionError);
    try {
        matmul(a, b);
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("[4,2]") != std::string::npos);
    }
}

TEST_CASE("gradient of sum(a*b) w.r.t. a equals row sums of b") {
    Rng rng(3);
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng, false);
    const Tensor loss = sum(matmul(a, b));
    backward(loss);
    // dL/da[i][k] = sum_j b[k][j]
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 4; ++k) {
            double expect = 0.0;
            for (int j = 0; j < 2; ++j) expect += b.at(k * 2 + j);
            CHECK(a.grad()[static_cast<size_t>(i * 4 + k)] == doctest::Approx(expect).epsilon(1e-12));
        }

    std::vector<Tensor> leaves{a};
    CHECK(max_gradcheck_err(leaves, [&] { return sum(matmul(a, b)); }) < 1e-4);
}

TEST_CASE("elementwise forward values and derivatives") {
    const Tensor zero = Tensor::scalar(0.0);
    CHECK(silu(zero).value() == 0.0);
    CHECK(tanh_op(zero).value() == 0.0);

    Tensor x = Tensor::scalar(0.0, true);
    backward(tanh_op(x));
    CHECK(x.grad()[0] == doctest::Approx(1.0));

    Tensor three = Tensor::scalar(3.0, true);
    const Tensor sq = square(three);
    CHECK(sq.value() == 9.0);
    backward(sq);
    CHECK(three.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("elementwise broadcasting rules") {
    const Tensor v = Tensor::from({3}, {1, 2, 3});
    const Tensor s = Tensor::scalar(10.0);
    const Tensor sum_vs = add(v, s);
    CHECK(sum_vs.at(2) == 13.0);
    const Tensor prod = mul(s, v);
    CHECK(prod.at(1) == 20.0);

    const Tensor w = Tensor::from({4}, {1, 2, 3, 4});
    CHECK_THROWS_AS(add(v, w), DimensionError);
}

TEST_CASE("mse examples") {
    const Tensor x = Tensor::from({2}, {1.5, -2.0});
    CHECK(mse(x, x).value() == 0.0);
    CHECK(mse(Tensor::from({2}, {0, 0}), Tensor::from({2}, {2, 0})).value() == 2.0);

    Tensor pred = Tensor::from({1}, {1.0}, true);
    backward(mse(pred, Tensor::from({1}, {0.0})));
    CHECK(pred.grad()[0] == doctest::Approx(2.0));

    CHECK_THROWS_AS(mse(x, Tensor::from({3}, {0, 0, 0})), DimensionError);
}

TEST_CASE("backward on square and repeated accumulation") {
    Tensor x = Tensor::scalar(3.0, true);
    const Tensor loss = square(x);
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0));
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(12.0));  // accumulates without zero_grad
}

TEST_CASE("backward rejects non-scalar losses") {
    Rng rng(1);
    Tensor x = random_tensor({2, 2}, rng);
    CHECK_THROWS_AS(backward(square(x)), ContractError);
}

TEST_CASE("mse(Wx, y) gradient matches finite differences") {
    Rng rng(17);
    Tensor w = random_tensor({3, 2}, rng);
    Tensor x = random_tensor({4, 3}, rng, false);
    Tensor y = random_tensor({4, 2}, rng, false);
    std::vector<Tensor> leaves{w};
    CHECK(max_gradcheck_err(leaves, [&] { return mse(matmul(x, w), y); }) < 1e-4);
}

TEST_CASE("affine, layer_norm, concat, silu, sum pass finite-difference checks") {
    Rng rng(29);
    Tensor x = random_tensor({3, 4}, rng);
    Tensor w = random_tensor({4, 5}, rng);
    Tensor b = random_tensor({5}, rng);
    Tensor g = random_tensor({5}, rng, true, 0.5);
    Tensor beta = random_tensor({5}, rng);
    Tensor other = random_tensor({3, 2}, rng);

    std::vector<Tensor> leaves{x, w, b, g, beta, other};
    auto loss = [&] {
        const Tensor h = layer_norm(affine(x, w, b), g, beta);
        const Tensor cat = concat_cols({silu(h), other});
        return mean_all(square(cat));
    };
    CHECK(max_gradcheck_err(leaves, loss) < 1e-4);
}

TEST_CASE("scalar-broadcast backward accumulates the full sum") {
    Rng rng(31);
    Tensor s = Tensor::scalar(0.7, true);
    Tensor v = random_tensor({5}, rng, false);
    std::vector<Tensor> leaves{s};
    CHECK(max_gradcheck_err(leaves, [&] { return sum(mul(v, s)); }) < 1e-4);
    CHECK(max_gradcheck_err(leaves, [&] { return sum(sub(s, v)); }) < 1e-4);
}

TEST_CASE("tanh and mixed graphs pass finite differences") {
    Rng rng(37);
    Tensor a = random_tensor({2, 3}, rng);
    Tensor b = random_tensor({2, 3}, rng);
    std::vector<Tensor> leaves{a, b};
    auto loss = [&] { return sum(mul(tanh_op(a), add(square(b), scale(a, 0.5)))); };
    CHECK(max_gradcheck_err(leaves, loss) < 1e-4);
}

TEST_CASE("finite outputs on finite inputs") {
    Rng rng(41);
    const Tensor a = random_tensor({8, 8}, rng, false, 3.0);
    const Tensor b = random_tensor({8, 8}, rng, false, 3.0);
    CHECK(all_finite(matmul(a, b)));
    CHECK(all_finite(silu(a)));
    CHECK(all_finite(tanh_op(a)));
    CHECK(all_finite(mse(a, b)));
}

TEST_CASE("adamw: zero gradient and zero decay leave parameters unchanged") {
    std::vector<Parameter> params{{"p", Tensor::from({2}, {1.0, -2.0}, true)}};
    params[0].tensor.zero_grad();
    AdamW opt(AdamWConfig{.lr = 0.01, .weight_decay = 0.0});
    opt.step(params);
    CHECK(params[0].tensor.at(0) == 1.0);
    CHECK(params[0].tensor.at(1) == -2.0);
    CHECK(opt.steps() == 1);
}

TEST_CASE("adamw: first step moves by -lr * g / (|g| + eps)") {
    const double g = 0.37, lr = 0.01, eps = 1e-8;
    Tensor p = Tensor::scalar(1.0, true);
    std::vector<Parameter> params{{"p", p}};
    backward(scale(p, g));  // grad = g
    AdamW opt(AdamWConfig{.lr = lr, .eps = eps, .weight_decay = 0.0});
    opt.step(params);
    const double expect = 1.0 - lr * g / (std::abs(g) + eps);
    CHECK(p.value() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("adamw: decoupled decay applied before the adaptive step") {
    Tensor p = Tensor::scalar(1.0, true);
    std::vector<Parameter> params{{"p", p}};
    p.zero_grad();  // g = 0
    AdamW opt(AdamWConfig{.lr = 0.01, .weight_decay = 0.1});
    opt.step(params);
    CHECK(p.value() == doctest::Approx(0.999).epsilon(1e-12));
}

TEST_CASE("duplicate parameter names are rejected") {
    std::vector<Parameter> params{{"w", Tensor::scalar(0, true)}, {"w", Tensor::scalar(1, true)}};
    CHECK_THROWS_AS(check_unique_names(params), ContractError);
}

TEST_CASE("seeded training trajectories are bit-identical") {
    auto run = [] {
        Rng rng(99);
        Mlp mlp("m", {3, 8, 2}, false, rng);
        AdamW opt(AdamWConfig{.lr = 1e-3});
        Rng data_rng(5);
        for (int step = 0; step < 20; ++step) {
            Tensor x = random_tensor({4, 3}, data_rng, false);
            Tensor y = random_tensor({4, 2}, data_rng, false);
            const Tensor loss = mse(mlp.forward(x), y);
            AdamW::zero_grad(mlp.params());
            backward(loss);
            opt.step(mlp.params());
        }
        std::vector<double> out;
        for (const auto& p : mlp.params())
            out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
        return out;
    };
    const auto a = run();
    const auto b = run();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("mlp forward validates input width") {
    Rng rng(1);
    Mlp mlp("m", {3, 4, 2}, true, rng);
    CHECK_THROWS_AS(mlp.forward(Tensor::from({2, 5}, std::vector<double>(10, 0.0))), DimensionError);
    const Tensor out = mlp.forward(Tensor::from({2, 3}, std::vector<double>(6, 0.1)));
    CHECK(out.shape() == std::vector<int>{2, 2});
}

TEST_SUITE_END();
