#include "test_util.hpp"

#include "mhnet/nn.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace mhnet;
using namespace mhnet::testing;

TEST(Tensor, ShapeAndData) {
    Tensor t({2, 3}, 1.5);
    EXPECT_EQ(t.size(), 6u);
    EXPECT_EQ(t.rank(), 2u);
    EXPECT_DOUBLE_EQ(t(1, 2), 1.5);
    EXPECT_THROW(Tensor({2, 0}), std::invalid_argument);
    EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST(Tensor, InputRejectsNonFinite) {
    EXPECT_THROW(Tensor::input({2}, {1.0, std::numeric_limits<double>::quiet_NaN()}), std::invalid_argument);
    EXPECT_THROW(Tensor::input({1}, {std::numeric_limits<double>::infinity()}), std::invalid_argument);
    EXPECT_NO_THROW(Tensor::input({2}, {1.0, 2.0}));
}

TEST(Tape, SumGradientIsOnes) {
    ad::ParamStore ps;
    auto& p = ps.add("p", Tensor::vector({0.3, -2.0, 5.0}));
    ad::Tape tape;
    tape.backward(ad::sum(tape.param(p)));
    EXPECT_EQ(p.grad.storage(), (std::vector<double>{1, 1, 1}));
}

TEST(Tape, QuadraticGradient) {
    ad::ParamStore ps;
    auto& p = ps.add("p", Tensor::vector({1.0, 2.0}));
    ad::Tape tape;
    ad::Var v = tape.param(p);
    tape.backward(ad::sum(ad::hadamard(v, v)));
    EXPECT_EQ(p.grad.storage(), (std::vector<double>{2, 4}));
}

TEST(Tape, UnreachableParameterHasZeroGrad) {
    ad::ParamStore ps;
    auto& a = ps.add("a", Tensor::vector({1.0}));
    auto& b = ps.add("b", Tensor::vector({7.0}));
    b.grad.fill(3.0);
    ps.zero_grad();
    ad::Tape tape;
    tape.param(b);
    tape.backward(ad::sum(ad::scale(tape.param(a), 2.0)));
    EXPECT_EQ(a.grad[0], 2.0);
    EXPECT_EQ(b.grad[0], 0.0);
}

TEST(Tape, NonScalarLossAndDoubleBackwardThrow) {
    ad::ParamStore ps;
    auto& p = ps.add("p", Tensor::vector({1.0, 2.0}));
    ad::Tape t1;
    EXPECT_THROW(t1.backward(t1.param(p)), std::invalid_argument);
    ad::Tape t2;
    ad::Var loss = ad::sum(t2.param(p));
    t2.backward(loss);
    EXPECT_THROW(t2.backward(loss), std::logic_error);
    EXPECT_THROW(t2.constant(Tensor::scalar(1.0)), std::logic_error);
}

TEST(Tape, RecordsInTopologicalOrder) {
    ad::Tape tape;
    ad::Var a = tape.constant(Tensor::vector({1, 2}));
    ad::Var b = ad::scale(a, 2.0);
    ad::Var c = ad::add(a, b);
    EXPECT_LT(a.id, b.id);
    EXPECT_LT(b.id, c.id);
}

TEST(Ops, Conv1dExamples) {
    ad::Tape tape(false);
    auto x = tape.constant(Tensor::vector({1, 2, 3}));
    auto zero = tape.constant(Tensor::scalar(0.0));
    EXPECT_EQ(ad::conv1d(x, tape.constant(Tensor::vector({1, 0})), zero).value().storage(), (std::vector<double>{1, 2}));
    EXPECT_EQ(ad::conv1d(x, tape.constant(Tensor::vector({1, 1})), zero).value().storage(), (std::vector<double>{3, 5}));
    EXPECT_THROW(ad::conv1d(x, tape.constant(Tensor::vector({1, 1, 1, 1})), zero), std::invalid_argument);
}

TEST(Ops, Conv1dStrideAndChannels) {
    ad::Tape tape(false);
    // Two input channels, one output channel, kernel 2, stride 2.
    auto x = tape.constant(Tensor::matrix(2, 5, {1, 2, 3, 4, 5, 10, 20, 30, 40, 50}));
    auto k = tape.constant(Tensor({1, 2, 2}, {1, 0, 0, 1}));
    auto b = tape.constant(Tensor::vector({0.5}));
    const Tensor y = ad::conv1d(x, k, b, {2}).value();
    ASSERT_EQ(y.shape(), (Shape{1, 2}));
    EXPECT_DOUBLE_EQ(y(0, 0), 1 + 20 + 0.5);
    EXPECT_DOUBLE_EQ(y(0, 1), 3 + 40 + 0.5);
}

TEST(Ops, SoftmaxProperties) {
    ad::Tape tape(false);
    const Tensor half = ad::softmax(tape.constant(Tensor::vector({0, 0}))).value();
    EXPECT_EQ(half.storage(), (std::vector<double>{0.5, 0.5}));
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        Tensor logits = random_tensor({6}, rng, -20, 20);
        Tensor shifted = logits;
        for (auto& v : shifted.values()) v += 7.25;
        const Tensor s1 = ad::softmax(tape.constant(logits)).value();
        const Tensor s2 = ad::softmax(tape.constant(shifted)).value();
        double total = 0.0;
        for (double v : s1.values()) total += v;
        EXPECT_NEAR(total, 1.0, 1e-12);
        EXPECT_LE(max_abs_diff(s1, s2), 1e-12);
    }
}

TEST(Ops, ConcatSliceRoundTrip) {
    ad::Tape tape(false);
    const Tensor a = Tensor::vector({1.25, -3.5});
    const Tensor b = Tensor::vector({9.0, 0.1, 2.0});
    ad::Var c = ad::concat({tape.constant(a), tape.constant(b)});
    EXPECT_EQ(ad::slice(c, 0, 2).value(), a);
    EXPECT_EQ(ad::slice(c, 2, 3).value(), b);
    EXPECT_THROW(ad::slice(c, 4, 2), std::invalid_argument);
}

TEST(Ops, DropoutEvalIsIdentityAndRateChecked) {
    Rng rng(1);
    ad::Tape tape;
    const Tensor x = random_tensor({4, 3}, rng);
    ad::Var v = tape.constant(x);
    EXPECT_EQ(ad::dropout(v, 0.5, false, rng).value(), x);
    EXPECT_EQ(ad::dropout(v, 0.0, true, rng).value(), x);
    EXPECT_THROW(ad::dropout(v, 1.0, true, rng), std::invalid_argument);
    EXPECT_THROW(ad::dropout(v, -0.1, false, rng), std::invalid_argument);
    const Tensor y = ad::dropout(v, 0.5, true, rng).value();
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_TRUE(y[i] == 0.0 || y[i] == 2.0 * x[i]);
}

TEST(Ops, ShapeErrorNamesOpAndShapes) {
    ad::Tape tape(false);
    try {
        ad::matmul(tape.constant(Tensor({2, 3})), tape.constant(Tensor({2, 3})));
        FAIL() << "expected a shape error";
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("matmul"), std::string::npos);
        EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    }
    EXPECT_THROW(ad::add(tape.constant(Tensor({2, 3})), tape.constant(Tensor({3, 2}))), std::invalid_argument);
}

TEST(Ops, MatmulGradShapeDuality) {
    Rng rng(5);
    ad::ParamStore ps;
    auto& a = ps.add("a", random_tensor({3, 4}, rng));
    auto& b = ps.add("b", random_tensor({4, 2}, rng));
    ad::Tape tape;
    tape.backward(probe_sum(ad::matmul(tape.param(a), tape.param(b))));
    EXPECT_EQ(a.grad.shape(), a.value.shape());
    EXPECT_EQ(b.grad.shape(), b.value.shape());
}

TEST(Ops, CrossEntropyValues) {
    ad::Tape tape(false);
    EXPECT_EQ(ad::cross_entropy(tape.constant(Tensor::vector({0.0, 1.0})), {1}).value().item(), 0.0);
    EXPECT_NEAR(ad::cross_entropy(tape.constant(Tensor::vector({0.5, 0.5})), {1}).value().item(), std::log(2.0), 1e-15);
    const double l1 = ad::cross_entropy(tape.constant(Tensor::vector({0.2, 0.8})), {1}).value().item();
    const double l0 = ad::cross_entropy(tape.constant(Tensor::vector({0.8, 0.2})), {0}).value().item();
    const double both = ad::cross_entropy(tape.constant(Tensor::matrix(2, 2, {0.2, 0.8, 0.8, 0.2})), {1, 0}).value().item();
    EXPECT_NEAR(both, 0.5 * (l1 + l0), 1e-15);
    EXPECT_THROW(ad::cross_entropy(tape.constant(Tensor::vector({0.5, 0.5})), {2}), std::invalid_argument);
    // Clamped at 1e-12: a confident wrong answer is finite.
    EXPECT_NEAR(ad::cross_entropy(tape.constant(Tensor::vector({1.0, 0.0})), {1}).value().item(), -std::log(1e-12), 1e-9);
}

// Gradient checks for every primitive, away from kinks.
class PrimitiveGrad : public ::testing::Test {
protected:
    Rng rng{2024};
    ad::ParamStore ps;
    void expect_ok(const ad::Objective& f) {
        const auto report = check_all(ps, f);
        EXPECT_TRUE(report.passed) << "max rel error " << report.max_rel_error;
        EXPECT_GT(report.checked, 0u);
    }
};

TEST_F(PrimitiveGrad, MatmulTransposeAddSub) {
    auto& a = ps.add("a", random_tensor({3, 4}, rng));
    auto& b = ps.add("b", random_tensor({4, 2}, rng));
    auto& c = ps.add("c", random_tensor({2, 3}, rng));
    auto& bias = ps.add("bias", random_tensor({3}, rng));
    expect_ok([&](ad::Tape& t) {
        ad::Var ab = ad::matmul(t.param(a), t.param(b));
        ad::Var x = ad::sub(ab, ad::transpose(t.param(c)));
        return probe_sum(ad::add(ad::transpose(x), t.param(bias)));
    });
}

TEST_F(PrimitiveGrad, ScaleHadamardReluSoftmax) {
    auto& a = ps.add("a", random_tensor({3, 4}, rng));
    auto& b = ps.add("b", random_tensor({3, 4}, rng));
    auto& v = ps.add("v", random_tensor({5}, rng));
    expect_ok([&](ad::Tape& t) {
        ad::Var h = ad::relu(ad::hadamard(ad::scale(t.param(a), 1.7), t.param(b)));
        return ad::add(probe_sum(ad::softmax(h)), probe_sum(ad::softmax(t.param(v)), 7));
    });
}

TEST_F(PrimitiveGrad, ConcatSliceReshapeSumMean) {
    auto& a = ps.add("a", random_tensor({4}, rng));
    auto& b = ps.add("b", random_tensor({2}, rng));
    auto& m = ps.add("m", random_tensor({3, 5}, rng));
    expect_ok([&](ad::Tape& t) {
        ad::Var c = ad::concat({t.param(a), t.param(b)});
        ad::Var r = ad::reshape(c, {2, 3});
        ad::Var s = ad::slice(c, 1, 3);
        ad::Var means = ad::concat({ad::mean(t.param(m), 0), ad::mean(t.param(m), 1)});
        return ad::add(ad::add(probe_sum(r), probe_sum(s, 3)), ad::add(probe_sum(means, 4), ad::sum(c)));
    });
}

TEST_F(PrimitiveGrad, Conv1d) {
    auto& x = ps.add("x", random_tensor({2, 11}, rng));
    auto& k = ps.add("k", random_tensor({3, 2, 4}, rng));
    auto& b = ps.add("b", random_tensor({3}, rng));
    auto& x1 = ps.add("x1", random_tensor({7}, rng));
    auto& k1 = ps.add("k1", random_tensor({3}, rng));
    auto& b1 = ps.add("b1", random_tensor({1}, rng));
    expect_ok([&](ad::Tape& t) {
        ad::Var y = ad::conv1d(t.param(x), t.param(k), t.param(b), {2});
        ad::Var y1 = ad::conv1d(t.param(x1), t.param(k1), t.param(b1));
        return ad::add(probe_sum(y), probe_sum(y1, 5));
    });
}

TEST_F(PrimitiveGrad, TriuOuterWeightedSum) {
    auto& a = ps.add("a", random_tensor({4, 4}, rng));
    auto& u = ps.add("u", random_tensor({3}, rng));
    auto& w = ps.add("w", random_tensor({3}, rng));
    auto& h0 = ps.add("h0", random_tensor({2, 2}, rng));
    auto& h1 = ps.add("h1", random_tensor({2, 2}, rng));
    auto& h2 = ps.add("h2", random_tensor({2, 2}, rng));
    expect_ok([&](ad::Tape& t) {
        ad::Var strict = ad::triu_flatten(t.param(a), false);
        ad::Var full = ad::triu_flatten(t.param(a), true);
        ad::Var o = ad::outer(t.param(u), t.param(w));
        ad::Var ws = ad::weighted_sum({t.param(h0), t.param(h1), t.param(h2)}, ad::softmax(t.param(w)));
        return ad::add(ad::add(probe_sum(strict), probe_sum(full, 2)), ad::add(probe_sum(o, 3), probe_sum(ws, 4)));
    });
}

TEST_F(PrimitiveGrad, BlockNorm) {
    auto& h = ps.add("h", random_tensor({7, 3}, rng));
    auto& gamma = ps.add("gamma", random_tensor({3}, rng, 0.5, 1.5));
    auto& beta = ps.add("beta", random_tensor({3}, rng));
    const std::vector<std::size_t> offsets{0, 3, 7};
    expect_ok([&](ad::Tape& t) {
        return probe_sum(ad::block_norm(t.param(h), offsets, t.param(gamma), t.param(beta)));
    });
}

TEST_F(PrimitiveGrad, DropoutWithFixedMask) {
    auto& h = ps.add("h", random_tensor({4, 3}, rng));
    expect_ok([&](ad::Tape& t) {
        Rng mask_rng(17);
        return probe_sum(ad::dropout(t.param(h), 0.4, true, mask_rng));
    });
}

TEST_F(PrimitiveGrad, CrossEntropyWeighted) {
    auto& logits = ps.add("logits", random_tensor({4, 2}, rng));
    expect_ok([&](ad::Tape& t) {
        return ad::cross_entropy(ad::softmax(t.param(logits)), {1, 0, 0, 1}, {1.0, 0.0, 1.0, 1.0});
    });
}

TEST_F(PrimitiveGrad, CosineAffinityAndGcnNormalize) {
    auto& u = ps.add("u", random_tensor({4, 3}, rng));
    auto& a = ps.add("a", random_tensor({4, 4}, rng, 0.1, 1.0));
    expect_ok([&](ad::Tape& t) {
        return ad::add(probe_sum(ad::cosine_affinity(t.param(u))), probe_sum(ad::gcn_normalize(t.param(a)), 8));
    });
}

TEST(GradCheck, Square) {
    ad::ParamStore ps;
    ps.add("theta", Tensor::vector({3.0}));
    const auto r = ad::finite_difference_check(ps, [&](ad::Tape& t) {
        ad::Var v = t.param(ps.get("theta"));
        return ad::sum(ad::hadamard(v, v));
    }, {});
    ASSERT_EQ(r.entries.size(), 1u);
    EXPECT_DOUBLE_EQ(r.entries[0].analytic, 6.0);
    EXPECT_NEAR(r.entries[0].numeric, 6.0, 1e-9);
    EXPECT_TRUE(r.passed);
}

TEST(GradCheck, ReluKinkIsSkipped) {
    ad::ParamStore ps;
    ps.add("x", Tensor::vector({0.0, 0.5}));
    const auto r = ad::finite_difference_check(ps, [&](ad::Tape& t) { return ad::sum(ad::relu(t.param(ps.get("x")))); }, {});
    ASSERT_EQ(r.entries.size(), 2u);
    EXPECT_TRUE(r.entries[0].skipped);
    EXPECT_FALSE(r.entries[1].skipped);
    EXPECT_EQ(r.skipped, 1u);
    EXPECT_TRUE(r.passed);
}

TEST(GradCheck, NonDeterministicObjectiveThrows) {
    ad::ParamStore ps;
    // Powers of two: distinct masks give distinct sums.
    Tensor x({16});
    for (std::size_t i = 0; i < 16; ++i) x[i] = std::ldexp(1.0, static_cast<int>(i));
    ps.add("x", x);
    Rng rng(1);
    EXPECT_THROW(ad::finite_difference_check(ps, [&](ad::Tape& t) {
        return ad::sum(ad::dropout(t.param(ps.get("x")), 0.5, true, rng));
    }, {}), std::runtime_error);
}

TEST(GradCheck, TwoLayerMlpSampled) {
    Rng rng(11);
    ad::ParamStore ps;
    nn::add_mlp(ps, "mlp", {6, 8, 3}, rng);
    const Tensor x = random_tensor({5, 6}, rng);
    ad::GradCheckOptions o;
    o.samples = 50;
    o.tolerance = 1e-6;
    o.kink_threshold = 2e-6;
    const auto r = ad::finite_difference_check(ps, [&](ad::Tape& t) {
        Rng unused(0);
        return probe_sum(nn::mlp(t, ps, "mlp", 2, t.constant(x), 0.0, false, unused));
    }, o);
    EXPECT_EQ(r.checked, 50u);
    EXPECT_LE(r.max_rel_error, 1e-6);
    EXPECT_TRUE(r.passed);
}

TEST(ParamStore, NamesUniqueAndCopyIsDeep) {
    ad::ParamStore ps;
    ps.add("a", Tensor::vector({1.0}));
    EXPECT_THROW(ps.add("a", Tensor::vector({2.0})), std::invalid_argument);
    ad::ParamStore copy = ps;
    copy.get("a").value[0] = 5.0;
    EXPECT_EQ(ps.get("a").value[0], 1.0);
    EXPECT_EQ(ps.get("a").grad.shape(), ps.get("a").value.shape());
}

TEST(Rng, NamedStreamsAreStableAndDistinct) {
    EXPECT_EQ(stream_seed(7, "init"), stream_seed(7, "init"));
    EXPECT_NE(stream_seed(7, "init"), stream_seed(7, "dropout"));
    EXPECT_NE(stream_seed(7, "init"), stream_seed(8, "init"));
    Rng a = make_stream(3, "fold1"), b = make_stream(3, "fold1");
    EXPECT_EQ(a(), b());
}
