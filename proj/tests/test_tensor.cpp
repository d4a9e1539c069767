#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stst/tensor.hpp"
#include "testutil.hpp"

using namespace stst;
using testutil::make_rng;
using testutil::random_tensor;

TEST_CASE("matmul identity and hand cases") {
    const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    const Tensor r = matmul(eye, a);
    CHECK(r.values() == a.values());

    const Tensor b = Tensor::from({2, 1}, {5, 6});
    const Tensor c = matmul(a, b);
    CHECK(c.at(0, 0) == 17.0);
    CHECK(c.at(1, 0) == 39.0);

    const Tensor zero = Tensor::zeros({2, 2});
    const Tensor z = matmul(zero, a);
    for (double v : z.values()) CHECK(v == 0.0);
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    const Tensor a = Tensor::zeros({2, 3});
    const Tensor b = Tensor::zeros({2, 3});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), ShapeError);
}

TEST_CASE("matmul agrees with a naive triple-loop oracle") {
    auto rng = make_rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor a = random_tensor({5, 5}, rng);
        const Tensor b = random_tensor({5, 5}, rng);
        const Tensor c = matmul(a, b);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 5; ++j) {
                double expect = 0.0;
                for (std::size_t k = 0; k < 5; ++k) expect += a.at(i, k) * b.at(k, j);
                CHECK(std::abs(c.at(i, j) - expect) < 1e-10);
            }
    }
}

TEST_CASE("dense broadcasts bias over rows") {
    const Tensor x1 = Tensor::from({1, 2}, {1, 1});
    const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    const Tensor zero_b = Tensor::zeros({2});
    CHECK(dense(x1, eye, zero_b).values() == std::vector<double>{1, 1});

    const Tensor x2 = Tensor::from({1, 1}, {2});
    const Tensor w = Tensor::from({1, 1}, {3});
    const Tensor b = Tensor::from({1}, {1});
    CHECK(dense(x2, w, b).value() == 7.0);

    auto rng = make_rng(1);
    const Tensor x0 = Tensor::zeros({1, 3});
    const Tensor w3 = random_tensor({3, 2}, rng);
    const Tensor b3 = Tensor::from({2}, {0.5, -0.25});
    const Tensor y = dense(x0, w3, b3);
    CHECK(y.values() == b3.values());
}

TEST_CASE("activations hit their defining points") {
    CHECK(sigmoid(Tensor::scalar(0.0)).value() == 0.5);
    CHECK(relu(Tensor::scalar(-1.5)).value() == 0.0);
    CHECK(relu(Tensor::scalar(2.0)).value() == 2.0);

    const Tensor c = Tensor::full({1, 4}, 3.7);
    const Tensor uniform = softmax_lastdim(c);
    for (double v : uniform.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("softmax rows are probability distributions") {
    auto rng = make_rng(11);
    const Tensor x = random_tensor({6, 9}, rng, -5, 5);
    const Tensor y = softmax_lastdim(x);
    for (std::size_t i = 0; i < 6; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < 9; ++j) {
            CHECK(y.at(i, j) >= 0.0);
            total += y.at(i, j);
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("layer norm maps constant rows to zero") {
    const Tensor x = Tensor::full({2, 5}, 42.0);
    const Tensor gamma = Tensor::full({5}, 1.0);
    const Tensor beta = Tensor::zeros({5});
    const Tensor y = layer_norm(x, gamma, beta);
    for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("layer and batch norm standardize the normalized axis") {
    auto rng = make_rng(13);
    const Tensor gamma = Tensor::full({8}, 1.0);
    const Tensor beta = Tensor::zeros({8});

    const Tensor x = random_tensor({16, 8}, rng);
    const Tensor ln = layer_norm(x, gamma, beta);
    for (std::size_t i = 0; i < 16; ++i) {
        double mu = 0.0, var = 0.0;
        for (std::size_t j = 0; j < 8; ++j) mu += ln.at(i, j);
        mu /= 8.0;
        for (std::size_t j = 0; j < 8; ++j) var += (ln.at(i, j) - mu) * (ln.at(i, j) - mu);
        var /= 8.0;
        CHECK(std::abs(mu) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-4);
    }

    Tensor rm = Tensor::zeros({8});
    Tensor rv = Tensor::full({8}, 1.0);
    const Tensor gamma2 = Tensor::full({8}, 1.0);
    const Tensor beta2 = Tensor::zeros({8});
    const Tensor x2 = random_tensor({64, 8}, rng);
    const Tensor bn = batch_norm(x2, gamma2, beta2, rm, rv, true);
    for (std::size_t j = 0; j < 8; ++j) {
        double mu = 0.0, var = 0.0;
        for (std::size_t i = 0; i < 64; ++i) mu += bn.at(i, j);
        mu /= 64.0;
        for (std::size_t i = 0; i < 64; ++i) var += (bn.at(i, j) - mu) * (bn.at(i, j) - mu);
        var /= 64.0;
        CHECK(std::abs(mu) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-4);
    }
}

TEST_CASE("batch norm is a near fixed point on a standardized column") {
    // Alternating +-1 has exactly zero mean and unit (biased) variance; the
    // epsilon guard shifts the output by ~5e-6 relative.
    std::vector<double> col(32);
    for (std::size_t i = 0; i < col.size(); ++i) col[i] = i % 2 == 0 ? 1.0 : -1.0;
    const Tensor x = Tensor::from({32, 1}, col);
    const Tensor gamma = Tensor::full({1}, 1.0);
    const Tensor beta = Tensor::zeros({1});
    Tensor rm = Tensor::zeros({1});
    Tensor rv = Tensor::full({1}, 1.0);
    const Tensor y = batch_norm(x, gamma, beta, rm, rv, true);
    for (std::size_t i = 0; i < col.size(); ++i)
        CHECK(std::abs(y.values()[i] - col[i]) < 1e-5);
}

TEST_CASE("batch norm eval mode uses running statistics") {
    Tensor rm = Tensor::from({1}, {2.0});
    Tensor rv = Tensor::from({1}, {4.0});
    const Tensor gamma = Tensor::full({1}, 1.0);
    const Tensor beta = Tensor::zeros({1});
    const Tensor x = Tensor::from({2, 1}, {4.0, 0.0});
    const Tensor y = batch_norm(x, gamma, beta, rm, rv, false);
    CHECK(y.values()[0] == doctest::Approx((4.0 - 2.0) / std::sqrt(4.0 + 1e-5)));
    CHECK(y.values()[1] == doctest::Approx((0.0 - 2.0) / std::sqrt(4.0 + 1e-5)));
    // stats untouched in eval mode
    CHECK(rm.values()[0] == 2.0);
    CHECK(rv.values()[0] == 4.0);
}

TEST_CASE("power norm rescales by the frozen quadratic mean") {
    Tensor psi = Tensor::from({1}, {4.0});
    const Tensor gamma = Tensor::full({1}, 1.0);
    const Tensor beta = Tensor::zeros({1});
    const Tensor x = Tensor::from({4, 1}, {2.0, -2.0, 2.0, -2.0});
    const Tensor y = power_norm(x, gamma, beta, psi, false);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(y.values()[i] == doctest::Approx(x.values()[i] / 2.0).epsilon(1e-5));
}

TEST_CASE("power norm preserves sign patterns and scales per feature") {
    auto rng = make_rng(17);
    const Tensor x = random_tensor({12, 5}, rng, -3, 3, 0.05);
    const Tensor gamma = Tensor::full({5}, 1.0);
    const Tensor beta = Tensor::zeros({5});
    Tensor psi = Tensor::uniform({5}, 0.5, 4.0, rng);
    const std::vector<double> psi_before = psi.values();
    const Tensor y = power_norm(x, gamma, beta, psi, false);
    for (std::size_t j = 0; j < 5; ++j) {
        const double expected_scale = 1.0 / std::sqrt(psi_before[j] + 1e-5);
        for (std::size_t i = 0; i < 12; ++i) {
            CHECK(std::signbit(y.at(i, j)) == std::signbit(x.at(i, j)));
            CHECK(y.at(i, j) == doctest::Approx(x.at(i, j) * expected_scale));
        }
    }
}

TEST_CASE("power norm training updates the running statistic with momentum") {
    Tensor psi = Tensor::from({1}, {1.0});
    const Tensor gamma = Tensor::full({1}, 1.0);
    const Tensor beta = Tensor::zeros({1});
    const Tensor x = Tensor::from({2, 1}, {3.0, 1.0});  // quadratic mean 5
    const Tensor y = power_norm(x, gamma, beta, psi, true);
    // forward used the pre-update statistic
    CHECK(y.values()[0] == doctest::Approx(3.0 / std::sqrt(1.0 + 1e-5)));
    CHECK(psi.values()[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 5.0));
}

TEST_CASE("dropout") {
    auto rng = make_rng(23);
    const Tensor x = Tensor::full({100, 1}, 1.0);
    const Tensor eval_out = dropout(x, 0.5, false, rng);
    CHECK(eval_out.node() == x.node());  // untouched in eval mode

    const Tensor train_out = dropout(x, 0.5, true, rng);
    std::size_t kept = 0;
    for (double v : train_out.values()) {
        CHECK((v == 0.0 || v == 2.0));
        kept += v != 0.0;
    }
    CHECK(kept > 20);
    CHECK(kept < 80);
}

TEST_CASE("backward computes analytic derivatives") {
    Tensor x = Tensor::from({1}, {3.0}, true);
    Tensor loss = sum(hadamard(x, x));
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0));

    Tensor z = Tensor::from({1}, {0.0}, true);
    Tensor s = sum(sigmoid(z));
    backward(s);
    CHECK(z.grad()[0] == doctest::Approx(0.25));
}

TEST_CASE("backward rejects non-scalar losses") {
    Tensor x = Tensor::zeros({3}, true);
    CHECK_THROWS_AS(backward(relu(x)), ValueError);
}

TEST_CASE("backward accumulates across reuse of the same tensor") {
    Tensor x = Tensor::from({1}, {2.0}, true);
    // x*x + x -> d/dx = 2x + 1 = 5
    Tensor loss = sum(add(hadamard(x, x), x));
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(5.0));
}

TEST_CASE("matmul gradient matches central differences") {
    auto rng = make_rng(29);
    Tensor a = random_tensor({3, 3}, rng);
    Tensor b = random_tensor({3, 3}, rng);
    b.set_requires_grad(true);
    const auto report = grad_check([&](const Tensor& t) { return sum(matmul(t, b)); }, a, 1e-5, 1e-6);
    CHECK(report.pass);

    a.set_requires_grad(false);
    const auto report_b = grad_check([&](const Tensor& t) { return sum(matmul(a, t)); }, b, 1e-5, 1e-6);
    CHECK(report_b.pass);
}

TEST_CASE("grad_check passes on sum of squares and constants") {
    auto rng = make_rng(31);
    Tensor x = random_tensor({10}, rng);
    const auto squares = grad_check([](const Tensor& t) { return sum(hadamard(t, t)); }, x, 1e-5, 1e-6);
    CHECK(squares.pass);

    Tensor y = random_tensor({4}, rng);
    const auto constant = grad_check([](const Tensor&) { return Tensor::scalar(5.0); }, y, 1e-5, 1e-6);
    CHECK(constant.pass);
    CHECK(constant.max_rel_err == 0.0);
}

namespace {

// Finite-difference sweep for one op under a scalarizing reduction.
void check_op(const char* name, const std::function<Tensor(const Tensor&)>& f, Tensor x,
              double tol = 1e-4) {
    INFO(name);
    const auto report = grad_check(f, x, 1e-5, tol);
    INFO(report.worst);
    CHECK(report.pass);
}

}  // namespace

TEST_CASE("every differentiable op matches finite differences") {
    auto rng = make_rng(37);
    const Tensor other = random_tensor({4, 5}, rng);
    const Tensor bias = random_tensor({5}, rng);

    check_op("add", [&](const Tensor& t) { return sum(add(t, other)); }, random_tensor({4, 5}, rng));
    check_op("sub", [&](const Tensor& t) { return sum(sub(other, t)); }, random_tensor({4, 5}, rng));
    check_op("hadamard", [&](const Tensor& t) { return sum(hadamard(t, other)); },
             random_tensor({4, 5}, rng));
    check_op("scale", [&](const Tensor& t) { return sum(scale(t, -1.7)); }, random_tensor({4, 5}, rng));
    check_op("add_row(x)", [&](const Tensor& t) { return sum(add_row(t, bias)); },
             random_tensor({4, 5}, rng));
    check_op("add_row(bias)", [&](const Tensor& t) { return sum(add_row(other, t)); },
             random_tensor({5}, rng));
    check_op("transpose", [&](const Tensor& t) { return sum(hadamard(transpose(t), transpose(t))); },
             random_tensor({3, 4}, rng));
    check_op("relu", [&](const Tensor& t) { return sum(relu(t)); },
             random_tensor({4, 5}, rng, -2, 2, 0.05));
    check_op("sigmoid", [&](const Tensor& t) { return sum(sigmoid(t)); }, random_tensor({4, 5}, rng));
    check_op("tanh", [&](const Tensor& t) { return sum(tanh(t)); }, random_tensor({4, 5}, rng));
    check_op("log", [&](const Tensor& t) { return sum(log(t)); }, random_tensor({4, 5}, rng, 0.2, 3.0));
    check_op("clamp", [&](const Tensor& t) { return sum(clamp(t, -1.0, 1.0)); },
             random_tensor({4, 5}, rng, -2, 2, 0.05));
    check_op("periodic_activation", [&](const Tensor& t) { return sum(periodic_activation(t)); },
             random_tensor({4, 5}, rng));
    check_op("softmax",
             [&](const Tensor& t) { return sum(hadamard(softmax_lastdim(t), other)); },
             random_tensor({4, 5}, rng));
    check_op("mean", [&](const Tensor& t) { return mean(hadamard(t, t)); }, random_tensor({4, 5}, rng));
    check_op("reshape+slice+select",
             [&](const Tensor& t) {
                 const Tensor r = reshape(t, {5, 4});
                 return sum(hadamard(select_row(r, 2), select_row(r, 2)));
             },
             random_tensor({4, 5}, rng));
    check_op("concat+repeat",
             [&](const Tensor& t) {
                 const Tensor rep = repeat_rows(t, 3);
                 return sum(hadamard(concat_cols({rep, rep}), concat_cols({rep, rep})));
             },
             random_tensor({2, 3}, rng));
    check_op("stack_scalars",
             [&](const Tensor& t) {
                 std::vector<Tensor> parts;
                 for (std::size_t i = 0; i < t.rows(); ++i)
                     parts.push_back(mean(hadamard(select_row(t, i), select_row(t, i))));
                 return sum(stack_scalars(parts));
             },
             random_tensor({3, 2}, rng));
}

TEST_CASE("normalization gradients match finite differences") {
    auto rng = make_rng(41);

    SUBCASE("layer norm") {
        Tensor gamma = random_tensor({6}, rng, 0.5, 1.5);
        Tensor beta = random_tensor({6}, rng, -0.5, 0.5);
        gamma.set_requires_grad(true);
        beta.set_requires_grad(true);
        check_op("ln x", [&](const Tensor& t) { return sum(layer_norm(t, gamma, beta)); },
                 random_tensor({5, 6}, rng));
        Tensor x = random_tensor({5, 6}, rng);
        const auto gn = grad_check(
            [&](const Tensor& g) { return sum(hadamard(layer_norm(x, g, beta), x)); }, gamma, 1e-5, 1e-4);
        CHECK(gn.pass);
    }

    SUBCASE("batch norm training mode differentiates through batch stats") {
        Tensor gamma = random_tensor({6}, rng, 0.5, 1.5);
        Tensor beta = random_tensor({6}, rng, -0.5, 0.5);
        check_op("bn x",
                 [&](const Tensor& t) {
                     Tensor rm = Tensor::zeros({6});
                     Tensor rv = Tensor::full({6}, 1.0);
                     Tensor y = batch_norm(t, gamma, beta, rm, rv, true);
                     // weighting breaks the shift invariance that would zero
                     // out uniform-direction errors
                     return mean(hadamard(y, y));
                 },
                 random_tensor({7, 6}, rng));
    }

    SUBCASE("power norm treats running statistics as constants") {
        Tensor gamma = random_tensor({6}, rng, 0.5, 1.5);
        Tensor beta = random_tensor({6}, rng, -0.5, 0.5);
        const std::vector<double> frozen = Tensor::uniform({6}, 0.5, 3.0, rng).values();
        check_op("pn x",
                 [&](const Tensor& t) {
                     Tensor psi = Tensor::from({6}, frozen);
                     Tensor y = power_norm(t, gamma, beta, psi, true);
                     return mean(hadamard(y, y));
                 },
                 random_tensor({7, 6}, rng));
    }
}

TEST_CASE("uniform initialization is deterministic in the seed") {
    auto rng1 = make_rng(99);
    auto rng2 = make_rng(99);
    const Tensor a = Tensor::uniform({4, 4}, -1, 1, rng1);
    const Tensor b = Tensor::uniform({4, 4}, -1, 1, rng2);
    CHECK(a.values() == b.values());
}
