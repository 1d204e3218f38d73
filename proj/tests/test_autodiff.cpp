#include "doctest.h"

#include "seq4/autodiff.hpp"
#include "seq4/gradcheck.hpp"
#include "seq4/rng.hpp"

using namespace seq4;
using namespace seq4::ad;

namespace {

Param random_param(const std::string& name, Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t = Tensor::zeros(shape);
    for (double& x : t.v) x = rng.uniform(-scale, scale);
    return Param(name, std::move(t));
}

}  // namespace

TEST_CASE("matmul identity") {
    Graph g;
    auto i2 = g.constant(Tensor{{2, 2}, {1, 0, 0, 1}});
    auto a = g.constant(Tensor{{2, 2}, {1, 2, 3, 4}});
    auto out = g.matmul(i2, a);
    CHECK(out->val.v == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("matmul hand arithmetic") {
    Graph g;
    auto a = g.constant(Tensor{{1, 2}, {1, 2}});
    auto b = g.constant(Tensor{{2, 1}, {3, 4}});
    auto out = g.matmul(a, b);
    CHECK(out->val.v[0] == doctest::Approx(11.0));
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Graph g;
    auto a = g.constant(Tensor::zeros({2, 3}));
    auto b = g.constant(Tensor::zeros({2, 2}));
    CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("[2x3]"), DimError);
}

TEST_CASE("matmul gradient vs finite differences") {
    Rng rng(11);
    Param a = random_param("a", {3, 4}, rng);
    Param b = random_param("b", {4, 2}, rng);
    std::vector<Param*> ps{&a, &b};
    auto rep = finite_difference_check(
        [&](Graph& g) { return g.sum(g.matmul(g.leaf(a), g.leaf(b))); }, ps);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("softmax trivial values") {
    Graph g;
    auto a = g.softmax(g.constant(Tensor::vec({0, 0})));
    CHECK(a->val.v[0] == doctest::Approx(0.5));
    auto b = g.softmax(g.constant(Tensor::vec({std::log(2.0), 0})));
    CHECK(b->val.v[0] == doctest::Approx(2.0 / 3));
    CHECK(b->val.v[1] == doctest::Approx(1.0 / 3));
}

TEST_CASE("softmax rejects empty input") {
    Graph g;
    CHECK_THROWS_AS(g.softmax(g.constant(Tensor::zeros({0}))), DimError);
}

TEST_CASE("softmax stability and simplex up to 1e4 magnitude") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Graph g;
        Tensor t = Tensor::zeros({7});
        for (double& x : t.v) x = rng.uniform(-1e4, 1e4);
        auto out = g.softmax(g.constant(t));
        double s = 0;
        for (double x : out->val.v) {
            CHECK(x >= 0.0);
            s += x;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("softmax jacobian vs finite differences") {
    Rng rng(7);
    Param x = random_param("x", {7}, rng, 2.0);
    std::vector<Param*> ps{&x};
    // probe each output component through a random linear functional
    Tensor probe = Tensor::zeros({7});
    for (double& p : probe.v) p = rng.uniform(-1, 1);
    auto rep = finite_difference_check(
        [&](Graph& g) {
            return g.sum(g.mul(g.softmax(g.leaf(x)), g.constant(probe)));
        },
        ps);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("elementwise closed forms") {
    Graph g;
    CHECK(g.sigmoid(g.constant(Tensor::vec({0})))->val.v[0] == doctest::Approx(0.5));
    CHECK(g.tanh(g.constant(Tensor::vec({0})))->val.v[0] == doctest::Approx(0.0));
}

TEST_CASE("elementwise shape mismatch and log domain errors") {
    Graph g;
    auto a = g.constant(Tensor::zeros({2}));
    auto b = g.constant(Tensor::zeros({3}));
    CHECK_THROWS_AS(g.add(a, b), DimError);
    CHECK_THROWS_AS(g.log(g.constant(Tensor::vec({-1.0}))), DomainError);
    CHECK_THROWS_AS(g.log(g.constant(Tensor::vec({0.0}))), DomainError);
}

TEST_CASE("elementwise chains gradient vs finite differences") {
    Rng rng(5);
    Param a = random_param("a", {6}, rng);
    Param b = random_param("b", {6}, rng);
    std::vector<Param*> ps{&a, &b};
    auto rep = finite_difference_check(
        [&](Graph& g) {
            auto x = g.leaf(a);
            auto y = g.leaf(b);
            auto z = g.mul(g.sigmoid(x), g.tanh(g.add(x, y)));
            z = g.add(z, g.exp(g.scale(y, 0.3)));
            return g.sum(z);
        },
        ps);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("concat basics and gradient routing") {
    Graph g;
    auto a = g.concat(g.constant(Tensor::vec({1})), g.constant(Tensor::vec({2, 3})));
    CHECK(a->val.v == std::vector<double>{1, 2, 3});
    auto b = g.concat(g.constant(Tensor::zeros({0})), g.constant(Tensor::vec({5})));
    CHECK(b->val.v == std::vector<double>{5});
    CHECK_THROWS_AS(g.concat(g.constant(Tensor::zeros({2, 2})), g.constant(Tensor::zeros({2}))),
                    DimError);

    // upstream gradient splits back by position
    Param p = Param("p", Tensor::vec({1, 2, 3}));
    Graph g2;
    auto leaf = g2.leaf(p);
    auto left = g2.slice(leaf, 0, 1);
    auto right = g2.slice(leaf, 1, 2);
    auto cat = g2.concat(left, right);
    auto weighted = g2.mul(cat, g2.constant(Tensor::vec({10, 20, 30})));
    g2.backward(g2.sum(weighted));
    CHECK(p.grad.v == std::vector<double>{10, 20, 30});
}

TEST_CASE("backward of sum gives ones") {
    Param w("w", Tensor::vec({1, 2, 3, 4}));
    Graph g;
    g.backward(g.sum(g.leaf(w)));
    CHECK(w.grad.v == std::vector<double>{1, 1, 1, 1});
}

TEST_CASE("backward requires scalar root") {
    Graph g;
    auto v = g.constant(Tensor::vec({1, 2}));
    CHECK_THROWS_AS(g.backward(v), ContractError);
}

TEST_CASE("backward on constant graph leaves no gradients") {
    Param w("w", Tensor::vec({1.0}));
    Graph g;
    auto c = g.sum(g.constant(Tensor::vec({2, 3})));
    g.backward(c);
    CHECK(w.grad.v[0] == 0.0);
}

TEST_CASE("shared subexpressions accumulate") {
    Param x("x", Tensor::vec({3.0}));
    Graph g;
    auto leaf = g.leaf(x);
    g.backward(g.sum(g.mul(leaf, leaf)));
    CHECK(x.grad.v[0] == doctest::Approx(6.0));
}

TEST_CASE("repeated backward without reset accumulates") {
    Param x("x", Tensor::vec({2.0}));
    for (int i = 0; i < 2; ++i) {
        Graph g;
        g.backward(g.sum(g.scale(g.leaf(x), 3.0)));
    }
    CHECK(x.grad.v[0] == doctest::Approx(6.0));
}

TEST_CASE("finite difference check on w squared") {
    Param w("w", Tensor::vec({3.0}));
    std::vector<Param*> ps{&w};
    auto rep = finite_difference_check(
        [&](Graph& g) {
            auto leaf = g.leaf(w);
            return g.sum(g.mul(leaf, leaf));
        },
        ps);
    CHECK(rep.max_rel_err < 1e-9);
    CHECK(w.grad.v[0] == doctest::Approx(6.0));
}

TEST_CASE("finite difference check flags non-deterministic loss") {
    Param w("w", Tensor::vec({1.0}));
    std::vector<Param*> ps{&w};
    int calls = 0;
    CHECK_THROWS_AS(finite_difference_check(
                        [&](Graph& g) {
                            ++calls;
                            return g.sum(g.scale(g.leaf(w), static_cast<double>(calls)));
                        },
                        ps),
                    OracleInvalid);
}

TEST_CASE("softmax-matmul composite gradient") {
    Rng rng(13);
    Param w = random_param("w", {4, 4}, rng);
    Param x = random_param("x", {4}, rng);
    std::vector<Param*> ps{&w, &x};
    Tensor probe = Tensor::zeros({4});
    for (double& p : probe.v) p = rng.uniform(-1, 1);
    auto rep = finite_difference_check(
        [&](Graph& g) {
            auto out = g.softmax(g.matvec(g.leaf(w), g.leaf(x)));
            return g.sum(g.mul(out, g.constant(probe)));
        },
        ps);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("random composites up to depth 6 pass gradient checks") {
    Rng rng(23);
    for (int trial = 0; trial < 12; ++trial) {
        Param a = random_param("a", {5}, rng);
        Param b = random_param("b", {5}, rng);
        std::vector<Param*> ps{&a, &b};
        std::uint64_t ops = rng.next_u64();
        Tensor probe = Tensor::zeros({5});
        for (double& p : probe.v) p = rng.uniform(-1, 1);
        auto rep = finite_difference_check(
            [&](Graph& g) {
                auto x = g.leaf(a);
                auto y = g.leaf(b);
                std::uint64_t bits = ops;
                for (int d = 0; d < 6; ++d, bits >>= 2) {
                    switch (bits & 3) {
                        case 0: x = g.add(x, y); break;
                        case 1: x = g.mul(g.sigmoid(x), y); break;
                        case 2: x = g.tanh(g.add(x, g.scale(y, 0.5))); break;
                        case 3: x = g.softmax(x); break;
                    }
                }
                return g.sum(g.mul(x, g.constant(probe)));
            },
            ps);
        CHECK(rep.max_rel_err < 1e-4);
    }
}

TEST_CASE("slice pick row log_softmax gradients") {
    Rng rng(31);
    Param m = random_param("m", {3, 4}, rng);
    Param v = random_param("v", {6}, rng);
    std::vector<Param*> ps{&m, &v};
    auto rep = finite_difference_check(
        [&](Graph& g) {
            auto r = g.row(g.leaf(m), 1);
            auto s = g.slice(g.leaf(v), 1, 4);
            auto ls = g.log_softmax(g.add(r, s));
            return g.pick(ls, 2);
        },
        ps);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("clamp passes gradient inside range only") {
    Param x("x", Tensor::vec({0.5, 40.0}));
    Graph g;
    g.backward(g.sum(g.clamp(g.leaf(x), -30.0, 30.0)));
    CHECK(x.grad.v[0] == 1.0);
    CHECK(x.grad.v[1] == 0.0);
}
