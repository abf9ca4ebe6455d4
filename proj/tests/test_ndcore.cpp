#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ovmae/rng.hpp"
#include "ovmae/tape.hpp"
#include "ovmae/tensor.hpp"
#include "testutil.hpp"

using namespace ovmae;
using test::gradcheck_max_rel_err;
using test::random_tensor;

TEST(Tensor, ShapeChecks) {
    EXPECT_THROW(Tensor({2, 3}, {1.0, 2.0}), ShapeError);
    Tensor t({2, 3});
    EXPECT_EQ(t.size(), 6u);
    EXPECT_EQ(t.shape_str(), "[2x3]");
}

TEST(Matmul, Identity) {
    Tensor i2({2, 2}, {1, 0, 0, 1});
    Tensor c = matmul(i2, i2);
    EXPECT_TRUE(bitwise_equal(c, i2));
}

TEST(Matmul, HandArithmetic) {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 1}, {5, 6});
    Tensor c = matmul(a, b);
    EXPECT_DOUBLE_EQ(c[0], 17.0);
    EXPECT_DOUBLE_EQ(c[1], 39.0);
}

TEST(Matmul, TripleLoopOracle) {
    Rng rng(7, "matmul-oracle");
    Tensor a = random_tensor({7, 5}, rng);
    Tensor b = random_tensor({5, 3}, rng);
    Tensor c = matmul(a, b);
    // Brute-force triple loop, accumulation order independent of the
    // implementation's (j-innermost there, k-innermost here).
    double worst = 0;
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < 5; ++k) s += a[i * 5 + k] * b[k * 3 + j];
            worst = std::max(worst, std::abs(s - c[i * 3 + j]));
        }
    EXPECT_LT(worst, 1e-12);
}

TEST(Matmul, DimensionMismatch) {
    Tensor a({2, 3});
    Tensor b({2, 3});
    EXPECT_THROW(matmul(a, b), ShapeError);
}

TEST(Softmax, UniformRow) {
    Tensor x({3}, {0, 0, 0});
    Tensor y = softmax_lastdim(x);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(y[i], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, StableUnderShift) {
    Tensor x({2}, {1000, 1000});
    Tensor y = softmax_lastdim(x);
    EXPECT_DOUBLE_EQ(y[0], 0.5);
    EXPECT_DOUBLE_EQ(y[1], 0.5);
}

TEST(Softmax, DirectFormulaOracle) {
    Tensor x({3}, {1, 2, 3});
    Tensor y = softmax_lastdim(x);
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(y[i], std::exp(1.0 + i) / z, 1e-12);
}

TEST(Softmax, RowsSumToOne) {
    Rng rng(11, "softmax-sum");
    Tensor x = random_tensor({40, 9}, rng, -1e3, 1e3);
    Tensor y = softmax_lastdim(x);
    for (std::size_t r = 0; r < 40; ++r) {
        double s = 0;
        for (std::size_t j = 0; j < 9; ++j) s += y[r * 9 + j];
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Softmax, NonFiniteRejected) {
    Tensor x({2}, {1.0, std::numeric_limits<double>::infinity()});
    EXPECT_THROW(softmax_lastdim(x), NumericError);
}

TEST(Layernorm, ConstantRowZero) {
    Tensor x({1, 4}, {5, 5, 5, 5});
    Tensor g({4});
    g.fill(1.0);
    Tensor b({4});
    Tensor y = layernorm(x, g, b, 1e-6);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(y[i], 0.0, 1e-12);
}

TEST(Layernorm, ClosedFormTwoValues) {
    const double eps = 1e-6;
    Tensor x({1, 2}, {1, 3});
    Tensor g({2});
    g.fill(1.0);
    Tensor b({2});
    Tensor y = layernorm(x, g, b, eps);
    const double expect = 1.0 / std::sqrt(1.0 + eps); // (3-2)/sqrt(var=1 + eps)
    EXPECT_NEAR(y[0], -expect, 1e-12);
    EXPECT_NEAR(y[1], expect, 1e-12);
}

TEST(Layernorm, MeanZeroVarOne) {
    Rng rng(3, "ln");
    Tensor x = random_tensor({6, 16}, rng, -10, 10);
    Tensor g({16});
    g.fill(1.0);
    Tensor b({16});
    Tensor y = layernorm(x, g, b, 1e-10);
    for (std::size_t r = 0; r < 6; ++r) {
        double mean = 0, var = 0;
        for (std::size_t j = 0; j < 16; ++j) mean += y[r * 16 + j];
        mean /= 16;
        for (std::size_t j = 0; j < 16; ++j) {
            const double d = y[r * 16 + j] - mean;
            var += d * d;
        }
        var /= 16;
        EXPECT_NEAR(mean, 0.0, 1e-9);
        EXPECT_NEAR(var, 1.0, 1e-6);
    }
}

// -- Per-op gradient checks vs central differences ---------------------------

TEST(Gradients, Matmul) {
    Rng rng(21, "g-matmul");
    std::vector<Tensor> in = {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)};
    const double err = gradcheck_max_rel_err(in, [](Tape& t, const std::vector<Value>& v) {
        return t.sum(t.matmul(v[0], v[1]));
    });
    EXPECT_LT(err, 1e-6);
}

TEST(Gradients, AddAndScale) {
    Rng rng(22, "g-add");
    std::vector<Tensor> in = {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)};
    const double err = gradcheck_max_rel_err(in, [](Tape& t, const std::vector<Value>& v) {
        return t.sum(t.scale(t.add(v[0], v[1]), 0.37));
    });
    EXPECT_LT(err, 1e-6);
}

TEST(Gradients, AddRowvec) {
    Rng rng(23, "g-rowvec");
    std::vector<Tensor> in = {random_tensor({3, 5}, rng), random_tensor({5}, rng)};
    const double err = gradcheck_max_rel_err(in, [](Tape& t, const std::vector<Value>& v) {
        return t.sum(t.add_rowvec(v[0], v[1]));
    });
    EXPECT_LT(err, 1e-6);
}

TEST(Gradients, Gelu) {
    Rng rng(24, "g-gelu");
    std::vector<Tensor> in = {random_tensor({2, 4}, rng, -3, 3)};
    const double err = gradcheck_max_rel_err(in, [](Tape& t, const std::vector<Value>& v) {
        return t.sum(t.gelu(v[0]));
    });
    EXPECT_LT(err, 1e-6);
}

TEST(Gradients, Softmax) {
    Rng rng(25, "g-softmax");
    std::vector<Tensor> in = {random_tensor({3, 4}, rng)};
    // Weight the outputs so the check is not fooled by the sum-to-one constraint.
    Tensor w = random_tensor({4, 1}, rng);
    const double err = gradcheck_max_rel_err(in, [&w](Tape& t, const std::vector<Value>& v) {
        return t.sum(t.matmul(t.softmax_lastdim(v[0]), t.constant(w)));
    });
    EXPECT_LT(err, 1e-6);
}

TEST(Gradients, Layernorm) {
    Rng rng(26, "g-ln");
    std::vector<Tensor> in = {random_tensor({3, 6}, rng), random_tensor({6}, rng, 0.5, 1.5),
                              random_tensor({6}, rng)};
    Tensor w = random_tensor({6, 1}, rng);
    const double err = gradcheck_max_rel_err(in, [&w](Tape& t, const std::vector<Value>& v) {
        return t.sum(t.matmul(t.layernorm(v[0], v[1], v[2], 1e-6), t.constant(w)));
    });
    EXPECT_LT(err, 1e-6);
}

TEST(Gradients, TransposeSliceConcat) {
    Rng rng(27, "g-tsc");
    std::vector<Tensor> in = {random_tensor({3, 6}, rng)};
    const double err = gradcheck_max_rel_err(in, [](Tape& t, const std::vector<Value>& v) {
        Value a = t.slice_cols(v[0], 0, 3);
        Value b = t.slice_cols(v[0], 3, 6);
        Value c = t.concat_cols({b, a});
        return t.sum(t.matmul(t.transpose(c), c));
    });
    EXPECT_LT(err, 1e-6);
}

TEST(Gradients, ScatterRowsFill) {
    Rng rng(28, "g-scatter");
    std::vector<Tensor> in = {random_tensor({2, 4}, rng), random_tensor({4}, rng)};
    const std::vector<std::size_t> rows = {1, 3};
    const double err =
        gradcheck_max_rel_err(in, [&rows](Tape& t, const std::vector<Value>& v) {
            Value s = t.scatter_rows_fill(v[0], v[1], rows, 5);
            return t.sum(t.matmul(t.transpose(s), s));
        });
    EXPECT_LT(err, 1e-6);
}

TEST(Gradients, MaskedMse) {
    Rng rng(29, "g-mse");
    Tensor target = random_tensor({4, 6}, rng);
    std::vector<Tensor> in = {random_tensor({4, 6}, rng)};
    const std::vector<std::size_t> masked = {0, 2};
    const double err =
        gradcheck_max_rel_err(in, [&](Tape& t, const std::vector<Value>& v) {
            return t.masked_mse(v[0], target, masked);
        });
    EXPECT_LT(err, 1e-6);
}

// -- Tape behaviour -----------------------------------------------------------

TEST(Tape, SumGradientIsOnes) {
    Tape t;
    Value x = t.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), true);
    t.backward(t.sum(x));
    for (std::size_t i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(t.grad(x)[i], 1.0);
}

TEST(Tape, DotGradientIsTwoX) {
    Tape t;
    Tensor xv({1, 3}, {1.5, -2.0, 0.25});
    Value x = t.leaf(xv, true);
    Value loss = t.matmul(x, t.transpose(x)); // scalar 1x1
    t.backward(loss);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(t.grad(x)[i], 2.0 * xv[i]);
}

TEST(Tape, BackwardRequiresScalar) {
    Tape t;
    Value x = t.leaf(Tensor({2, 2}), true);
    EXPECT_THROW(t.backward(x), ShapeError);
}

TEST(Tape, BackwardTwiceRejected) {
    Tape t;
    Value x = t.leaf(Tensor({1}, {2.0}), true);
    Value s = t.sum(x);
    t.backward(s);
    EXPECT_THROW(t.backward(s), UsageError);
}

TEST(Tape, MatmulFaultHookSkewsGradient) {
    Tape t;
    t.set_matmul_backward_fault(1.05);
    Tensor a({1, 2}, {1.0, 2.0});
    Tensor b({2, 1}, {3.0, 4.0});
    Value av = t.leaf(a, true);
    Value loss = t.matmul(av, t.constant(b));
    t.backward(loss);
    EXPECT_NEAR(t.grad(av)[0], 3.0 * 1.05, 1e-12);
}

TEST(Tape, MacMeterCountsMatmuls) {
    Tape t;
    Value a = t.constant(Tensor({3, 4}));
    Value b = t.constant(Tensor({4, 5}));
    t.matmul(a, b);
    EXPECT_EQ(t.mac_count(), 60u);
    t.reset_mac_count();
    EXPECT_EQ(t.mac_count(), 0u);
}

// -- RNG ----------------------------------------------------------------------

TEST(Rng, DeterministicStream) {
    Rng a(42, "x");
    Rng b(42, "x");
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, LabelsSeparateStreams) {
    Rng a(42, "mask");
    Rng b(42, "init");
    int same = 0;
    for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
    EXPECT_EQ(same, 0);
}

TEST(Rng, ChildIndependentOfDrawOrder) {
    Rng a(7, "root");
    Rng b(7, "root");
    (void)b.next_u64(); // advance one stream before derivation
    (void)b.next_u64();
    Rng ca = a.child("sub");
    Rng cb = b.child("sub");
    for (int i = 0; i < 16; ++i) EXPECT_EQ(ca.next_u64(), cb.next_u64());
}

TEST(Rng, CounterAddressable) {
    Rng a(13, "ctr");
    const std::uint64_t v5 = a.at(5);
    for (int i = 0; i < 5; ++i) (void)a.next_u64();
    EXPECT_EQ(a.next_u64(), v5);
}

TEST(Rng, UniformInRange) {
    Rng a(1, "u");
    for (int i = 0; i < 1000; ++i) {
        const double u = a.next_uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}

TEST(Rng, TruncNormalBounded) {
    Rng a(2, "tn");
    for (int i = 0; i < 1000; ++i) {
        const double z = a.next_trunc_normal(0.02);
        EXPECT_LE(std::abs(z), 0.04 + 1e-12);
    }
}

// -- single-precision instantiation --------------------------------------------

TEST(TensorF, FloatOpsWork) {
    TensorF a({2, 2}, {1.f, 2.f, 3.f, 4.f});
    TensorF b({2, 1}, {5.f, 6.f});
    TensorF c = matmul(a, b);
    EXPECT_FLOAT_EQ(c[0], 17.f);
    EXPECT_FLOAT_EQ(c[1], 39.f);
    TensorF s = softmax_lastdim(TensorF({2}, {1000.f, 1000.f}));
    EXPECT_FLOAT_EQ(s[0], 0.5f);
    TensorF g({2}), z({2});
    g.fill(1.f);
    TensorF ln = layernorm(TensorF({1, 2}, {1.f, 3.f}), g, z, 1e-6f);
    EXPECT_NEAR(ln[1], 1.f, 1e-5f);
}
