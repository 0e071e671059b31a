#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "guji/optimizer.hpp"
#include "guji/tensor.hpp"

using namespace guji;
using nn::Tensor;

namespace {

std::vector<float> random_values(size_t n, Rng& rng, float scale = 1.0f) {
    std::vector<float> v(n);
    for (float& x : v) x = static_cast<float>(rng.normal()) * scale;
    return v;
}

} // namespace

TEST_CASE("softmax closed forms") {
    Tensor t = Tensor::from_values({2}, {0.0f, 0.0f});
    Tensor ty = nn::softmax(t);
    auto y = ty.values();
    CHECK(y[0] == doctest::Approx(0.5));
    CHECK(y[1] == doctest::Approx(0.5));

    Tensor u = Tensor::from_values({2}, {0.0f, std::log(3.0f)});
    Tensor tz = nn::softmax(u);
    auto z = tz.values();
    CHECK(z[0] == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(z[1] == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("softmax properties: shift invariance, normalization, finiteness") {
    Rng rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        size_t n = 1 + rng.below(20);
        auto vals = random_values(n, rng, 5.0f);
        Tensor a = Tensor::from_values({static_cast<int64_t>(n)}, vals);
        Tensor sa = nn::softmax(a);
        auto ya = sa.values();
        double sum = 0.0;
        for (float p : ya) {
            CHECK(p >= 0.0f);
            CHECK(p <= 1.0f);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

        float c = static_cast<float>(rng.normal()) * 10.0f;
        auto shifted = vals;
        for (float& x : shifted) x += c;
        Tensor sb = nn::softmax(Tensor::from_values({static_cast<int64_t>(n)}, shifted));
        auto yb = sb.values();
        for (size_t i = 0; i < n; ++i)
            CHECK(ya[i] == doctest::Approx(yb[i]).epsilon(1e-5));
    }
}

TEST_CASE("softmax rejects non-finite input") {
    Tensor bad = Tensor::from_values({2}, {1.0f, std::numeric_limits<float>::infinity()});
    CHECK_THROWS_AS(nn::softmax(bad), NumericError);
}

TEST_CASE("log_softmax is consistent with softmax") {
    Rng rng(43);
    auto vals = random_values(24, rng, 3.0f);
    Tensor a = Tensor::from_values({4, 6}, vals);
    Tensor ts = nn::softmax(a);
    Tensor tl = nn::log_softmax(a);
    auto soft = ts.values();
    auto logs = tl.values();
    for (size_t i = 0; i < soft.size(); ++i)
        CHECK(std::exp(logs[i]) == doctest::Approx(soft[i]).epsilon(1e-6));
}

TEST_CASE("layer_norm pre-affine moments") {
    Rng rng(47);
    const int64_t rows = 8, cols = 32;
    Tensor x = Tensor::from_values({rows, cols},
                                   random_values(static_cast<size_t>(rows * cols), rng, 2.0f));
    Tensor gain = Tensor::from_values({cols}, std::vector<float>(static_cast<size_t>(cols), 1.0f));
    Tensor bias = Tensor::from_values({cols}, std::vector<float>(static_cast<size_t>(cols), 0.0f));
    Tensor ln = nn::layer_norm(x, gain, bias);
    auto y = ln.values();
    for (int64_t r = 0; r < rows; ++r) {
        double mean = 0.0, var = 0.0;
        for (int64_t c = 0; c < cols; ++c) mean += y[static_cast<size_t>(r * cols + c)];
        mean /= static_cast<double>(cols);
        for (int64_t c = 0; c < cols; ++c) {
            double d = y[static_cast<size_t>(r * cols + c)] - mean;
            var += d * d;
        }
        var /= static_cast<double>(cols);
        CHECK(std::abs(mean) <= 1e-5);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("cross entropy closed forms") {
    SUBCASE("uniform logits cost ln V") {
        const int64_t V = 11;
        Tensor logits = Tensor::zeros({3, V});
        Tensor loss = nn::cross_entropy(logits, {0, 5, 10}, {1, 1, 1});
        CHECK(loss.item() == doctest::Approx(std::log(static_cast<double>(V))).epsilon(1e-6));
    }
    SUBCASE("confident logits cost ~0") {
        const int64_t V = 7;
        std::vector<float> vals(static_cast<size_t>(2 * V), 0.0f);
        vals[3] = 20.0f;            // row 0 target 3
        vals[static_cast<size_t>(V + 6)] = 20.0f; // row 1 target 6
        Tensor logits = Tensor::from_values({2, V}, vals);
        Tensor loss = nn::cross_entropy(logits, {3, 6}, {1, 1});
        CHECK(loss.item() <= 1e-4);
    }
    SUBCASE("hand case: T=2, V=2") {
        Tensor logits = Tensor::from_values({2, 2}, {0.0f, std::log(3.0f), 0.0f, 0.0f});
        Tensor loss = nn::cross_entropy(logits, {1, 0}, {1, 1});
        double expected = (-std::log(0.75) - std::log(0.5)) / 2.0; // ~0.4904
        CHECK(loss.item() == doctest::Approx(expected).epsilon(1e-6));
    }
    SUBCASE("mask restricts the mean") {
        Tensor logits = Tensor::from_values({2, 2}, {0.0f, std::log(3.0f), 0.0f, 0.0f});
        Tensor loss = nn::cross_entropy(logits, {1, 0}, {1, 0});
        CHECK(loss.item() == doctest::Approx(-std::log(0.75)).epsilon(1e-6));
    }
    SUBCASE("all-false mask is an error") {
        Tensor logits = Tensor::zeros({2, 3});
        CHECK_THROWS_AS(nn::cross_entropy(logits, {0, 1}, {0, 0}), DataError);
    }
    SUBCASE("out-of-range target is an error") {
        Tensor logits = Tensor::zeros({1, 3});
        CHECK_THROWS_AS(nn::cross_entropy(logits, {3}, {1}), DataError);
    }
}

TEST_CASE("backward: untouched parameters get exactly zero gradient") {
    Tensor used = Tensor::from_values({2, 2}, {1, 2, 3, 4}, true);
    Tensor unused = Tensor::from_values({2, 2}, {5, 6, 7, 8}, true);
    Tensor loss = nn::sum(used);
    nn::backward(loss);
    for (float g : unused.grad()) CHECK(g == 0.0f);
    for (float g : used.grad()) CHECK(g == 1.0f);
}

TEST_CASE("backward: loss = sum(W x) gives the outer-structure gradient exactly") {
    // W [2,3], x [3,1]; d sum(Wx) / dW[i][j] = x[j]
    Tensor w = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    Tensor x = Tensor::from_values({3, 1}, {0.5f, -2.0f, 4.0f});
    nn::backward(nn::sum(nn::matmul(w, x)));
    auto g = w.grad();
    for (int row = 0; row < 2; ++row) {
        CHECK(g[static_cast<size_t>(row * 3 + 0)] == 0.5f);
        CHECK(g[static_cast<size_t>(row * 3 + 1)] == -2.0f);
        CHECK(g[static_cast<size_t>(row * 3 + 2)] == 4.0f);
    }
}

TEST_CASE("backward accumulates across calls until zero_grad") {
    Tensor w = Tensor::from_values({2}, {1.0f, 2.0f}, true);
    nn::backward(nn::sum(w));
    nn::backward(nn::sum(w));
    for (float g : w.grad()) CHECK(g == 2.0f);
    w.zero_grad();
    nn::backward(nn::sum(w));
    for (float g : w.grad()) CHECK(g == 1.0f);
}

TEST_CASE("backward requires a scalar") {
    Tensor w = Tensor::from_values({2}, {1.0f, 2.0f}, true);
    CHECK_THROWS_AS(nn::backward(w), ConfigError);
}

// Finite differences over a small two-layer graph built from the primitive
// set, re-evaluated through the same float32 forward. h is large relative to
// float32 noise, so tolerances stay loose; the full 64-bit oracle runs in the
// acceptance suite.
TEST_CASE("finite differences on a toy two-layer graph") {
    Rng rng(53);
    const int64_t in = 5, hidden = 4, out = 3;
    auto w1v = random_values(static_cast<size_t>(in * hidden), rng, 0.5f);
    auto w2v = random_values(static_cast<size_t>(hidden * out), rng, 0.5f);
    auto g1v = random_values(static_cast<size_t>(hidden), rng, 0.2f);
    for (float& v : g1v) v += 1.0f;
    auto b1v = random_values(static_cast<size_t>(hidden), rng, 0.2f);
    auto xv = random_values(static_cast<size_t>(2 * in), rng);

    auto loss_value = [&](const std::vector<float>& w1x, const std::vector<float>& w2x) {
        nn::NoGradGuard no_grad;
        Tensor w1 = Tensor::from_values({in, hidden}, w1x);
        Tensor w2 = Tensor::from_values({hidden, out}, w2x);
        Tensor g1 = Tensor::from_values({hidden}, g1v);
        Tensor b1 = Tensor::from_values({hidden}, b1v);
        Tensor x = Tensor::from_values({2, in}, xv);
        Tensor h = nn::gelu(nn::layer_norm(nn::matmul(x, w1), g1, b1));
        Tensor logits = nn::matmul(h, w2);
        return nn::cross_entropy(logits, {1, 2}, {1, 1}).item();
    };

    Tensor w1 = Tensor::from_values({in, hidden}, w1v, true);
    Tensor w2 = Tensor::from_values({hidden, out}, w2v, true);
    {
        Tensor g1 = Tensor::from_values({hidden}, g1v);
        Tensor b1 = Tensor::from_values({hidden}, b1v);
        Tensor x = Tensor::from_values({2, in}, xv);
        Tensor h = nn::gelu(nn::layer_norm(nn::matmul(x, w1), g1, b1));
        nn::backward(nn::cross_entropy(nn::matmul(h, w2), {1, 2}, {1, 1}));
    }

    const float h_step = 1e-2f;
    auto check_param = [&](Tensor& t, std::vector<float> base, bool first) {
        auto grads = t.grad();
        for (size_t i = 0; i < base.size(); ++i) {
            auto hi = base, lo = base;
            hi[i] += h_step;
            lo[i] -= h_step;
            double numeric = (first ? loss_value(hi, w2v) - loss_value(lo, w2v)
                                    : loss_value(w1v, hi) - loss_value(w1v, lo)) /
                             (2.0 * h_step);
            double analytic = grads[i];
            CHECK(std::abs(analytic - numeric) <=
                  1e-2 * std::max({std::abs(analytic), std::abs(numeric), 0.1}));
        }
    };
    check_param(w1, w1v, true);
    check_param(w2, w2v, false);
}

TEST_CASE("adam closed forms and contracts") {
    SUBCASE("zero gradient at t=1 leaves the parameter unchanged") {
        Tensor p = Tensor::from_values({3}, {1.0f, -2.0f, 0.5f}, true);
        AdamOptimizer opt({{"p", p}});
        p.grad(); // allocate zeros
        opt.step(0.1);
        CHECK(p.values()[0] == 1.0f);
        CHECK(p.values()[1] == -2.0f);
        CHECK(p.values()[2] == 0.5f);
    }
    SUBCASE("first-step closed form") {
        Tensor p = Tensor::from_values({1}, {1.0f}, true);
        AdamOptimizer opt({{"p", p}});
        p.grad()[0] = 1.0f;
        opt.step(0.1);
        // m_hat = v_hat = 1 => step = lr / (1 + eps); float32 storage
        CHECK(p.values()[0] == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-6));
    }
    SUBCASE("lr = 0 is the identity") {
        Rng rng(59);
        Tensor p = Tensor::from_values({64}, random_values(64, rng), true);
        std::vector<float> before(p.values().begin(), p.values().end());
        AdamOptimizer opt({{"p", p}});
        for (int i = 0; i < 5; ++i) {
            for (size_t j = 0; j < 64; ++j)
                p.grad()[j] = static_cast<float>(rng.normal());
            opt.step(0.0);
        }
        CHECK(std::memcmp(before.data(), p.values().data(), 64 * sizeof(float)) == 0);
    }
    SUBCASE("two identical runs are bitwise identical") {
        auto run = [] {
            Rng rng(61);
            Tensor p = Tensor::from_values({32}, std::vector<float>(32, 1.0f), true);
            AdamOptimizer opt({{"p", p}});
            for (int step = 0; step < 10; ++step) {
                for (size_t j = 0; j < 32; ++j)
                    p.grad()[j] = static_cast<float>(rng.normal());
                opt.step(1e-3);
                opt.zero_grad();
            }
            return std::vector<float>(p.values().begin(), p.values().end());
        };
        auto a = run();
        auto b = run();
        CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
    }
    SUBCASE("non-finite gradient names the parameter") {
        Tensor p = Tensor::from_values({2}, {1.0f, 2.0f}, true);
        AdamOptimizer opt({{"wte", p}});
        p.grad()[1] = std::numeric_limits<float>::quiet_NaN();
        CHECK_THROWS_WITH_AS(opt.step(0.1), "non-finite gradient in parameter wte",
                             NumericError);
    }
    SUBCASE("global norm clip") {
        Tensor p = Tensor::from_values({2}, {0.0f, 0.0f}, true);
        AdamOptimizer opt({{"p", p}});
        p.grad()[0] = 3.0f;
        p.grad()[1] = 4.0f;
        double norm = opt.clip_global_norm(1.0);
        CHECK(norm == doctest::Approx(5.0));
        CHECK(p.grad()[0] == doctest::Approx(0.6f));
        CHECK(p.grad()[1] == doctest::Approx(0.8f));
    }
}

TEST_CASE("elementwise ops backward sanity") {
    Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4}, true);
    Tensor b = Tensor::from_values({2, 2}, {5, 6, 7, 8}, true);
    nn::backward(nn::sum(nn::mul(a, b)));
    CHECK(a.grad()[0] == 5.0f);
    CHECK(a.grad()[3] == 8.0f);
    CHECK(b.grad()[0] == 1.0f);

    Tensor row = Tensor::from_values({2}, {1.0f, -1.0f}, true);
    Tensor m = Tensor::from_values({3, 2}, {1, 2, 3, 4, 5, 6}, true);
    nn::backward(nn::sum(nn::add(m, row)));
    for (float g : row.grad()) CHECK(g == 3.0f); // broadcast sums over rows
    for (float g : m.grad()) CHECK(g == 1.0f);

    Tensor t = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    Tensor tt = nn::transpose(t);
    CHECK(tt.shape() == nn::Shape{3, 2});
    CHECK(tt.values()[0] == 1.0f);
    CHECK(tt.values()[1] == 4.0f);
    nn::backward(nn::sum(nn::mul(tt, tt)));
    CHECK(t.grad()[5] == 12.0f); // d(x^2)/dx = 2x at x=6
}

TEST_CASE("gather_rows forward and scatter backward") {
    Tensor table = Tensor::from_values({3, 2}, {0, 1, 10, 11, 20, 21}, true);
    Tensor picked = nn::gather_rows(table, {2, 0, 2});
    CHECK(picked.values()[0] == 20.0f);
    CHECK(picked.values()[2] == 0.0f);
    nn::backward(nn::sum(picked));
    CHECK(table.grad()[0] == 1.0f); // row 0 used once
    CHECK(table.grad()[4] == 2.0f); // row 2 used twice
    CHECK(table.grad()[2] == 0.0f); // row 1 unused
    CHECK_THROWS_AS(nn::gather_rows(table, {3}), DataError);
}
