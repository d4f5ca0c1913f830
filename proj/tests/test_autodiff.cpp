#include <gtest/gtest.h>

#include <array>
#include <functional>

#include "ctdgan/autodiff.hpp"
#include "ctdgan/optim.hpp"
#include "test_support.hpp"

namespace ctdgan {
namespace {

using testing::code_of;
using testing::numeric_gradient;
using testing::random_matrix;
using testing::relative_error;
using testing::values_of;

/// Scalar readout sum(out .* weights); weights are drawn once per shape so
/// that every entry of `out` contributes a distinct coefficient.
ad::Var readout(const ad::Var& out, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return ad::sum_all(ad::mul(out, ad::constant(random_matrix(rng, out.rows(), out.cols()))));
}

/// Strictly positive input built from a leaf, for log / sqrt / reciprocal.
ad::Var positive(const ad::Var& a) { return ad::add_scalar(ad::square(a), 0.5); }

using GraphBuilder = std::function<ad::Var(const ad::Var& a, const ad::Var& b)>;

struct NamedGraph {
    const char* name;
    GraphBuilder build;
};

/// One builder per op kind; each a small graph over two 3 x 4 leaves.
std::vector<NamedGraph> op_graphs() {
    using namespace ad;
    return {
        {"matmul", [](const Var& a, const Var& b) { return matmul(a, transpose(b)); }},
        {"add", [](const Var& a, const Var& b) { return add(a, b); }},
        {"sub", [](const Var& a, const Var& b) { return sub(a, b); }},
        {"mul", [](const Var& a, const Var& b) { return mul(a, b); }},
        {"scale", [](const Var& a, const Var&) { return scale(a, -2.5); }},
        {"add_scalar", [](const Var& a, const Var& b) { return mul(add_scalar(a, 3.0), b); }},
        {"broadcast_rows", [](const Var& a, const Var& b) { return mul(broadcast_rows(sum_rows(a), 3), b); }},
        {"broadcast_cols", [](const Var& a, const Var& b) { return mul(broadcast_cols(sum_cols(a), 4), b); }},
        {"exp", [](const Var& a, const Var&) { return exp(a); }},
        {"log", [](const Var& a, const Var&) { return log(positive(a)); }},
        {"tanh", [](const Var& a, const Var& b) { return tanh(mul(a, b)); }},
        {"relu", [](const Var& a, const Var& b) { return mul(relu(a), b); }},
        {"leaky_relu", [](const Var& a, const Var& b) { return mul(leaky_relu(a, 0.2), b); }},
        {"reciprocal", [](const Var& a, const Var&) { return reciprocal(positive(a)); }},
        {"sqrt", [](const Var& a, const Var&) { return sqrt(positive(a)); }},
        {"reshape", [](const Var& a, const Var& b) { return matmul(reshape(a, 4, 3), b); }},
        {"slice_cols", [](const Var& a, const Var& b) { return mul(slice_cols(a, 1, 2), slice_cols(b, 0, 2)); }},
        {"pad_cols", [](const Var& a, const Var&) { return pad_cols(a, 2, 7); }},
        {"concat_cols",
         [](const Var& a, const Var& b) {
             const std::array<Var, 2> parts{tanh(a), b};
             return concat_cols(parts);
         }},
        {"batch_norm_train",
         [](const Var& a, const Var& b) { return batch_norm_train(a, sum_rows(b), sum_rows(a), 1e-5); }},
        {"batch_norm_eval",
         [](const Var& a, const Var& b) {
             RowVector mean(4), var(4);
             mean << 0.1, -0.2, 0.3, 0.0;
             var << 1.0, 2.0, 0.5, 1.5;
             return batch_norm_eval(a, sum_rows(b), sum_rows(a), mean, var, 1e-5);
         }},
        {"affine", [](const Var& a, const Var& b) { return affine(a, b, slice_cols(sum_rows(b), 0, 3)); }},
        {"softmax_rows", [](const Var& a, const Var&) { return softmax_rows(a); }},
        {"log_softmax_rows", [](const Var& a, const Var&) { return log_softmax_rows(a); }},
        {"row_norm", [](const Var& a, const Var&) { return row_norm(a); }},
        {"mean_all", [](const Var& a, const Var& b) { return mean_all(mul(a, b)); }},
        {"dropout",
         [](const Var& a, const Var&) {
             Rng rng(99);
             return dropout(a, 0.5, true, rng);
         }},
        {"gumbel_softmax",
         [](const Var& a, const Var&) {
             Rng rng(5);
             return gumbel_softmax(a, 0.7, rng).probs;
         }},
        {"gumbel_log_probs",
         [](const Var& a, const Var&) {
             Rng rng(6);
             return gumbel_softmax(a, 0.7, rng).log_probs;
         }},
        {"cross_entropy",
         [](const Var& a, const Var&) {
             Matrix t = Matrix::Zero(3, 4);
             t(0, 1) = t(1, 3) = t(2, 0) = 1;
             return cross_entropy(constant(t), log_softmax_rows(a));
         }},
        {"binary_cross_entropy",
         [](const Var& a, const Var&) {
             Matrix t = Matrix::Zero(3, 2);
             t(0, 1) = t(1, 0) = t(2, 1) = 1;
             return binary_cross_entropy(constant(t), log_softmax_rows(slice_cols(a, 1, 2)));
         }},
    };
}

TEST(AutodiffForward, Examples) {
    const ad::Var x = ad::constant((Matrix(2, 2) << 1, -2, 3, 4).finished());
    const ad::Var out = ad::affine(x, ad::constant(Matrix::Identity(2, 2)), ad::constant(Matrix::Zero(1, 2)));
    EXPECT_EQ(out.value(), x.value());
    EXPECT_DOUBLE_EQ(ad::leaky_relu(ad::scalar_constant(-1.0), 0.2).item(), -0.2);
    EXPECT_EQ(ad::tanh(ad::scalar_constant(0.0)).item(), 0.0);
}

TEST(AutodiffGrad, SquareAndMean) {
    const ad::Var x = ad::parameter((Matrix(1, 1) << 3.0).finished());
    const auto g = ad::grad(ad::square(x), std::array{x});
    EXPECT_DOUBLE_EQ(g[0].item(), 6.0);

    const ad::Var batch = ad::parameter(Matrix::Ones(8, 1));
    const auto gm = ad::grad(ad::mean_all(batch), std::array{batch});
    EXPECT_TRUE(gm[0].value().isApprox(Matrix::Constant(8, 1, 1.0 / 8.0)));
}

TEST(AutodiffGrad, ErrorsAndUnreachable) {
    const ad::Var x = ad::parameter(Matrix::Ones(2, 2));
    const ad::Var y = ad::parameter(Matrix::Ones(2, 2));
    EXPECT_EQ(code_of([&] { ad::grad(x, std::array{x}); }), ErrorCode::NotScalarRoot);
    const auto g = ad::grad(ad::sum_all(x), std::array{x, y});
    EXPECT_TRUE(g[1].value().isZero());
    EXPECT_EQ(code_of([&] { ad::add(x, ad::parameter(Matrix::Ones(3, 2))); }), ErrorCode::ShapeMismatch);
    EXPECT_EQ(code_of([&] { ad::log(ad::constant(Matrix::Zero(1, 1))); }), ErrorCode::NonFiniteIntermediate);
}

TEST(AutodiffGrad, EveryOpKindMatchesFiniteDifferences) {
    const auto graphs = op_graphs();
    std::mt19937_64 rng(2024);
    // 100 random graphs: each op once in the first pass, then random
    // two-op compositions cycling through the list.
    for (std::size_t trial = 0; trial < 100; ++trial) {
        const auto& first = graphs[trial % graphs.size()];
        const bool compose = trial >= graphs.size();
        const auto& second = graphs[rng() % graphs.size()];
        const ad::Var a = ad::parameter(random_matrix(rng, 3, 4));
        const ad::Var b = ad::parameter(random_matrix(rng, 3, 4));
        const std::uint64_t readout_seed = rng();
        const auto build = [&] {
            ad::Var out = first.build(a, b);
            if (compose && out.rows() == 3 && out.cols() == 4) out = second.build(ad::tanh(out), b);
            return readout(out, readout_seed);
        };
        const std::array leaves{a, b};
        const auto analytic = values_of(ad::grad(build(), leaves));
        const auto numeric = numeric_gradient([&] { return build().item(); }, {a, b});
        EXPECT_LT(relative_error(analytic, numeric), 1e-4)
            << first.name << (compose ? std::string(" then ") + second.name : "");
    }
}

TEST(AutodiffGrad, RandomTwoLayerNet) {
    std::mt19937_64 rng(31);
    const ad::Var x = ad::constant(random_matrix(rng, 6, 5));
    const ad::Var w1 = ad::parameter(random_matrix(rng, 7, 5));
    const ad::Var b1 = ad::parameter(random_matrix(rng, 1, 7));
    const ad::Var w2 = ad::parameter(random_matrix(rng, 3, 7));
    const ad::Var b2 = ad::parameter(random_matrix(rng, 1, 3));
    const auto loss = [&] { return ad::mean_all(ad::square(ad::affine(ad::relu(ad::affine(x, w1, b1)), w2, b2))); };
    const std::array leaves{w1, b1, w2, b2};
    const auto analytic = values_of(ad::grad(loss(), leaves));
    const auto numeric = numeric_gradient([&] { return loss().item(); }, {w1, b1, w2, b2});
    EXPECT_LT(relative_error(analytic, numeric), 1e-4);
}

/// lambda * mean((||d C / d x|| - 1)^2) for a one-hidden-layer critic.
double penalty_value(const ad::Var& x, const std::vector<ad::Var>& p, bool smooth, bool create_graph,
                     std::vector<Matrix>* param_grads) {
    const ad::Var input = ad::parameter(x.value());
    ad::Var hidden = ad::affine(input, p[0], p[1]);
    hidden = smooth ? ad::tanh(hidden) : ad::leaky_relu(hidden, 0.2);
    const ad::Var critic = ad::sum_all(ad::affine(hidden, p[2], p[3]));
    const ad::Var gx = ad::input_gradient(critic, input);
    const ad::Var gp = ad::scale(ad::mean_all(ad::square(ad::add_scalar(ad::row_norm(gx), -1.0))), 10.0);
    if (param_grads) *param_grads = values_of(ad::grad(gp, p, create_graph));
    return gp.item();
}

TEST(AutodiffSecondOrder, LinearCriticGradientIsWeight) {
    std::mt19937_64 rng(3);
    const ad::Var w = ad::parameter(random_matrix(rng, 1, 4));
    const ad::Var x = ad::parameter(random_matrix(rng, 5, 4));
    const ad::Var critic = ad::sum_all(ad::matmul(x, ad::transpose(w)));
    const ad::Var gx = ad::input_gradient(critic, x);
    for (Eigen::Index i = 0; i < 5; ++i) EXPECT_TRUE(gx.value().row(i).isApprox(w.value()));

    const auto term = [&] {
        const ad::Var xi = ad::parameter(x.value());
        const ad::Var g = ad::input_gradient(ad::sum_all(ad::matmul(xi, ad::transpose(w))), xi);
        return ad::square(ad::add_scalar(ad::row_norm(ad::slice_cols(ad::transpose(g), 0, 1)), -1.0));
    };
    const auto analytic = values_of(ad::grad(ad::sum_all(term()), std::array{w}));
    const auto numeric = numeric_gradient([&] { return ad::sum_all(term()).item(); }, {w});
    EXPECT_LT(relative_error(analytic, numeric), 1e-6);
}

TEST(AutodiffSecondOrder, OrthonormalCriticHasZeroPenalty) {
    std::mt19937_64 rng(4);
    const ad::Var x = ad::constant(random_matrix(rng, 6, 3));
    // Unit row vector: every input gradient has norm 1.
    Matrix w(1, 3);
    w << 0.6, 0.0, 0.8;
    std::vector<ad::Var> p{ad::parameter(Matrix::Identity(3, 3)), ad::parameter(Matrix::Zero(1, 3)),
                           ad::parameter(w), ad::parameter(Matrix::Zero(1, 1))};
    // leaky_relu with all-positive pre-activations is the identity.
    const ad::Var shifted = ad::constant((x.value().array() + 10.0).matrix());
    std::vector<Matrix> grads;
    EXPECT_NEAR(penalty_value(shifted, p, false, true, &grads), 0.0, 1e-20);
    for (const auto& g : grads) EXPECT_LT(g.norm(), 1e-12);
}

TEST(AutodiffSecondOrder, PenaltyParameterGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const bool smooth = trial % 2 == 0;
        const Eigen::Index width = 2 + trial % 4, hidden = 3 + trial % 6;
        const ad::Var x = ad::constant(random_matrix(rng, 5, width, -2, 2));
        std::vector<ad::Var> p{ad::parameter(random_matrix(rng, hidden, width)),
                               ad::parameter(random_matrix(rng, 1, hidden)),
                               ad::parameter(random_matrix(rng, 1, hidden)),
                               ad::parameter(random_matrix(rng, 1, 1))};
        std::vector<Matrix> analytic;
        penalty_value(x, p, smooth, true, &analytic);
        const auto numeric = numeric_gradient([&] { return penalty_value(x, p, smooth, false, nullptr); }, p);
        EXPECT_LT(relative_error(analytic, numeric), 1e-3) << "trial " << trial;
    }
}

TEST(AutodiffSecondOrder, BatchNormRejectsCreateGraph) {
    const ad::Var x = ad::parameter((Matrix(3, 2) << 1, 2, 3, 5, 4, 0).finished());
    const ad::Var out = ad::sum_all(ad::square(
        ad::batch_norm_train(x, ad::parameter(Matrix::Ones(1, 2)), ad::parameter(Matrix::Zero(1, 2)), 1e-5)));
    EXPECT_EQ(code_of([&] { ad::grad(out, std::array{x}, true); }), ErrorCode::UnsupportedOpForSecondOrder);
    EXPECT_NO_THROW(ad::grad(out, std::array{x}, false));
}

TEST(NoGrad, GuardStopsRecording) {
    const ad::Var x = ad::parameter(Matrix::Ones(2, 2));
    {
        ad::NoGradGuard guard;
        EXPECT_FALSE(ad::grad_enabled());
        EXPECT_FALSE(ad::tanh(x).requires_grad());
    }
    EXPECT_TRUE(ad::grad_enabled());
    EXPECT_TRUE(ad::tanh(x).requires_grad());
}

TEST(Gumbel, OutputsLieOnSimplex) {
    ad::Rng rng(8);
    std::mt19937_64 data(9);
    for (int trial = 0; trial < 200; ++trial) {
        const auto out = ad::gumbel_softmax(ad::constant(random_matrix(data, 4, 1 + trial % 6, -20, 20)),
                                            0.05 + 0.01 * trial, rng);
        EXPECT_GE(out.probs.value().minCoeff(), 0.0);
        for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(out.probs.value().row(i).sum(), 1.0, 1e-9);
        EXPECT_TRUE(out.log_probs.value().array().exp().matrix().isApprox(out.probs.value(), 1e-9));
    }
    EXPECT_EQ(code_of([&] { ad::gumbel_softmax(ad::constant(Matrix::Zero(1, 2)), 0.0, rng); }),
              ErrorCode::InvalidConfig);
}

TEST(Gumbel, MonteCarloArgmaxFollowsDominantLogit) {
    ad::Rng rng(10);
    Matrix logits(1000, 3);
    logits.col(0).setConstant(10.0);
    logits.rightCols(2).setZero();
    const Matrix probs = ad::gumbel_softmax(ad::constant(logits), 0.2, rng).probs.value();
    int hits = 0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        Eigen::Index best;
        probs.row(i).maxCoeff(&best);
        hits += best == 0;
    }
    EXPECT_GE(hits, 990);
}

TEST(Gumbel, LowTemperatureIsNearlyOneHot) {
    ad::Rng rng(12);
    const Matrix probs = ad::gumbel_softmax(ad::constant(Matrix::Zero(200, 4)), 1e-3, rng).probs.value();
    for (Eigen::Index i = 0; i < probs.rows(); ++i) EXPECT_GE(probs.row(i).maxCoeff(), 0.99);
}

TEST(Gumbel, SameRngStateIsBitIdentical) {
    std::mt19937_64 data(1);
    const ad::Var logits = ad::constant(random_matrix(data, 5, 3));
    ad::Rng r1(4), r2(4);
    EXPECT_EQ(ad::gumbel_softmax(logits, 0.2, r1).probs.value(), ad::gumbel_softmax(logits, 0.2, r2).probs.value());
}

TEST(Dropout, EvalIsIdentityTrainIsInverted) {
    ad::Rng rng(2);
    const ad::Var x = ad::constant(Matrix::Ones(400, 50));
    EXPECT_EQ(ad::dropout(x, 0.5, false, rng).value(), x.value());
    const Matrix kept = ad::dropout(x, 0.5, true, rng).value();
    for (Eigen::Index i = 0; i < kept.size(); ++i) EXPECT_TRUE(kept.data()[i] == 0.0 || kept.data()[i] == 2.0);
    EXPECT_NEAR(kept.mean(), 1.0, 0.02);
}

TEST(Adam, ZeroGradientNoDecayLeavesParameters) {
    ParamStore store;
    std::mt19937_64 rng(1);
    store.add("w", random_matrix(rng, 2, 3));
    const Matrix before = store.get("w").value();
    adam_step(store, {Matrix::Zero(2, 3)}, {.learning_rate = 0.1, .weight_decay = 0.0});
    EXPECT_EQ(store.get("w").value(), before);
    EXPECT_EQ(store.step_count(), 1u);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstSign) {
    ParamStore store;
    store.add("w", Matrix::Zero(1, 3));
    adam_step(store, {(Matrix(1, 3) << 3.0, -0.5, 1e-2).finished()}, {.learning_rate = 0.01, .weight_decay = 0.0});
    const Matrix& w = store.get("w").value();
    EXPECT_NEAR(w(0, 0), -0.01, 1e-8);
    EXPECT_NEAR(w(0, 1), 0.01, 1e-8);
    EXPECT_NEAR(w(0, 2), -0.01, 1e-7);
}

TEST(Adam, MatchesScalarReferenceWithDecay) {
    const AdamOptions opt{.learning_rate = 0.05, .weight_decay = 0.1};
    ParamStore store;
    store.add("a", (Matrix(1, 1) << 1.5).finished());
    store.add("b", Matrix::Zero(1, 1), false);
    double theta = 1.5, m = 0.0, v = 0.0;
    const std::array<double, 5> grads{0.3, -1.0, 2.0, 0.0, 0.7};
    for (std::size_t t = 1; t <= grads.size(); ++t) {
        const double g = grads[t - 1];
        theta *= 1.0 - opt.learning_rate * opt.weight_decay;
        m = opt.beta1 * m + (1 - opt.beta1) * g;
        v = opt.beta2 * v + (1 - opt.beta2) * g * g;
        const double m_hat = m / (1 - std::pow(opt.beta1, static_cast<double>(t)));
        const double v_hat = v / (1 - std::pow(opt.beta2, static_cast<double>(t)));
        theta -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
        adam_step(store, {Matrix::Constant(1, 1, g)}, opt);
        EXPECT_NEAR(store.get("a").item(), theta, 1e-14);
    }
    EXPECT_EQ(store.get("b").item(), 0.0);
}

TEST(Adam, ShapeMismatchAndDeterminism) {
    ParamStore a;
    std::mt19937_64 rng(5);
    a.add("w", random_matrix(rng, 2, 2));
    a.add("z", random_matrix(rng, 1, 2));
    ParamStore b = a;
    EXPECT_EQ(code_of([&] { adam_step(a, {Matrix::Zero(2, 2)}, {}); }), ErrorCode::ShapeMismatch);
    EXPECT_EQ(code_of([&] { adam_step(a, {Matrix::Zero(2, 2), Matrix::Zero(2, 1)}, {}); }), ErrorCode::ShapeMismatch);
    for (int i = 0; i < 10; ++i) {
        const std::vector<Matrix> g{random_matrix(rng, 2, 2), random_matrix(rng, 1, 2)};
        adam_step(a, g, {});
        adam_step(b, g, {});
    }
    EXPECT_TRUE(a.values_equal(b));
}

TEST(ParamStore, CopyDoesNotAlias) {
    ParamStore a;
    a.add("w", Matrix::Ones(2, 2));
    ParamStore b = a;
    b.set_value("w", Matrix::Zero(2, 2));
    EXPECT_EQ(a.get("w").value(), Matrix::Ones(2, 2));
    EXPECT_EQ(code_of([&] { b.set_value("w", Matrix::Zero(3, 2)); }), ErrorCode::ShapeMismatch);
    ParamStore c;
    c.add("w", Matrix::Zero(2, 2));
    c.load_json(a.to_json());
    EXPECT_TRUE(c.values_equal(a));
}

}  // namespace
}  // namespace ctdgan
