#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "obda/grad_check.hpp"
#include "obda/layers.hpp"
#include "obda/ops.hpp"

using namespace obda;

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) {
        x = dist(rng);
    }
    return Tensor<double>(std::move(shape), std::move(v));
}

// Random linear functional <w, y>: makes every output coordinate matter.
Tensor<double> project(const Tensor<double>& y, const Tensor<double>& w) { return sum(mul(y, w)); }

}  // namespace

TEST_CASE("conv2d output shape follows stride arithmetic")
{
    Rng rng(1);
    Tensor<double> x = random_tensor({8, 4, 4}, rng);
    Tensor<double> w = random_tensor({2, 8, 1, 1}, rng);
    Tensor<double> b = random_tensor({2}, rng);
    CHECK(conv2d(x, w, b, 1, 0).shape() == Shape{2, 4, 4});

    Tensor<double> w3 = random_tensor({5, 8, 3, 3}, rng);
    CHECK(conv2d(x, w3, Tensor<double>(), 2, 1).shape() == Shape{5, 2, 2});
    CHECK(conv_output_extent(1024, 3, 2, 1) == 512);
}

TEST_CASE("identity 1x1 conv is bit-exact identity")
{
    Rng rng(2);
    ParamStore<double> store;
    auto conv = Conv<double>::create(store, "id", 6, 6, 1, 1, rng, Init::identity);
    Tensor<double> x = random_tensor({6, 5, 7}, rng, -100, 100);
    Tensor<double> y = conv(x);
    REQUIRE(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        CHECK(y[i] == x[i]);
    }
}

TEST_CASE("conv2d shape errors are configuration errors")
{
    Tensor<double> x({3, 4, 4});
    Tensor<double> w({2, 4, 1, 1});
    try {
        conv2d(x, w, Tensor<double>(), 1, 0);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
    }
}

TEST_CASE("conv2d gradients match finite differences on ten seeds")
{
    for (int seed = 0; seed < 10; ++seed) {
        Rng rng(100 + seed);
        const int stride = 1 + seed % 2;
        const int k = (seed % 3 == 0) ? 1 : 3;
        Tensor<double> x = random_tensor({3, 6, 5}, rng);
        Tensor<double> w = random_tensor({4, 3, k, k}, rng);
        Tensor<double> b = random_tensor({4}, rng);
        const int pad = k / 2;
        Tensor<double> probe = random_tensor(conv2d(x, w, b, stride, pad).shape(), rng);
        auto loss = [&](const Tensor<double>&) { return project(conv2d(x, w, b, stride, pad), probe); };
        CHECK(grad_check(loss, x, 1e-5) < 1e-4);
        CHECK(grad_check(loss, w, 1e-5) < 1e-4);
        CHECK(grad_check(loss, b, 1e-5) < 1e-4);
    }
}

TEST_CASE("elementwise identities")
{
    Rng rng(3);
    Tensor<double> x = random_tensor({2, 3, 3}, rng);
    Tensor<double> d = sub(x, x);
    for (double v : d.values()) {
        CHECK(v == 0.0);
    }
    Tensor<double> s = add(x, Tensor<double>(x.shape(), 0.0));
    for (std::size_t i = 0; i < x.numel(); ++i) {
        CHECK(s[i] == x[i]);
    }
    CHECK_THROWS_AS(add(x, Tensor<double>({2, 3, 4})), Error);
}

TEST_CASE("silu, add, sub, upsample, concat and transpose gradients")
{
    for (int seed = 0; seed < 10; ++seed) {
        Rng rng(200 + seed);
        Tensor<double> a = random_tensor({2, 3, 4}, rng, -4, 4);
        Tensor<double> b = random_tensor({2, 3, 4}, rng, -4, 4);
        Tensor<double> w6 = random_tensor({4, 6, 8}, rng);
        Tensor<double> w2 = random_tensor({2, 3, 4}, rng);
        auto act = [&](const Tensor<double>&) { return project(silu(a), w2); };
        CHECK(grad_check(act, a, 1e-5) < 1e-4);
        auto arith = [&](const Tensor<double>&) { return project(sub(add(a, b), mul(a, b)), w2); };
        CHECK(grad_check(arith, a, 1e-5) < 1e-4);
        CHECK(grad_check(arith, b, 1e-5) < 1e-4);
        auto up = [&](const Tensor<double>&) {
            return project(upsample_nearest2x(concat_channels<double>({a, b})), w6);
        };
        CHECK(grad_check(up, a, 1e-5) < 1e-4);
        CHECK(grad_check(up, b, 1e-5) < 1e-4);
        Tensor<double> wt = random_tensor({4, 6}, rng);
        auto tr = [&](const Tensor<double>&) { return project(transpose(reshape(a, {6, 4})), wt); };
        CHECK(grad_check(tr, a, 1e-5) < 1e-4);
    }
}

TEST_CASE("softmax_rows hand-evaluated rows")
{
    Tensor<double> equal({1, 4}, std::vector<double>{2, 2, 2, 2});
    auto s = softmax_rows(equal);
    for (double v : s.values()) {
        CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
    }
    Tensor<double> two({1, 2}, std::vector<double>{0.0, std::log(3.0)});
    auto t = softmax_rows(two);
    CHECK(t[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(t[1] == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("softmax_rows rows sum to one for inputs up to magnitude 1e3")
{
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor<double> m = random_tensor({7, 13}, rng, -1e3, 1e3);
        auto s = softmax_rows(m);
        for (int r = 0; r < 7; ++r) {
            double total = 0;
            for (int c = 0; c < 13; ++c) {
                const double v = s[r * 13 + c];
                CHECK(v >= 0.0);
                total += v;
            }
            CHECK(std::abs(total - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("softmax_rows gradient")
{
    for (int seed = 0; seed < 10; ++seed) {
        Rng rng(300 + seed);
        Tensor<double> m = random_tensor({3, 5}, rng, -3, 3);
        Tensor<double> w = random_tensor({3, 5}, rng);
        auto f = [&](const Tensor<double>&) { return project(softmax_rows(m), w); };
        CHECK(grad_check(f, m, 1e-5) < 1e-4);
    }
}

TEST_CASE("matmul identity, arithmetic and gradient")
{
    Rng rng(5);
    Tensor<double> a = random_tensor({3, 4}, rng);
    Tensor<double> eye({4, 4}, 0.0);
    for (int i = 0; i < 4; ++i) {
        eye.values_mut()[i * 4 + i] = 1.0;
    }
    auto p = matmul(a, eye);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        CHECK(p[i] == a[i]);
    }
    Tensor<double> row({1, 2}, std::vector<double>{3, 4});
    Tensor<double> ones({2, 1}, std::vector<double>{1, 1});
    CHECK(matmul(row, ones).item() == 7.0);
    CHECK_THROWS_AS(matmul(a, a), Error);

    for (int seed = 0; seed < 10; ++seed) {
        Rng r(400 + seed);
        Tensor<double> x = random_tensor({3, 4}, r);
        Tensor<double> y = random_tensor({4, 2}, r);
        Tensor<double> w = random_tensor({3, 2}, r);
        auto f = [&](const Tensor<double>&) { return project(matmul(x, y), w); };
        CHECK(grad_check(f, x, 1e-5) < 1e-4);
        CHECK(grad_check(f, y, 1e-5) < 1e-4);
    }
}

TEST_CASE("grad_check on closed-form functions")
{
    Rng rng(6);
    Tensor<double> x = random_tensor({4, 5}, rng);
    CHECK(grad_check([](const Tensor<double>& v) { return sum(v); }, x, 1e-5) < 1e-8);
    CHECK(grad_check([](const Tensor<double>& v) { return sum(mul(v, v)); }, x, 1e-5) < 1e-6);

    // The analytic gradient of sum(x*x) is 2x.
    Tensor<double> y = random_tensor({6}, rng);
    y.set_requires_grad(true);
    sum(mul(y, y)).backward();
    for (std::size_t i = 0; i < y.numel(); ++i) {
        CHECK(y.grad()[i] == doctest::Approx(2.0 * y[i]).epsilon(1e-14));
    }
}

TEST_CASE("non-finite results raise numeric errors")
{
    Tensor<double> x({1, 2}, std::vector<double>{1e308, 1e308});
    try {
        scale(x, 10.0);
        FAIL("expected numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numeric);
    }
}

TEST_CASE("no-grad mode records no graph")
{
    Tensor<double> x({3}, 1.0, true);
    NoGradGuard guard;
    auto y = scale(x, 2.0);
    CHECK_FALSE(y.requires_grad());
}
