#include <gtest/gtest.h>

#include <cmath>

#include "ctdgan/model.hpp"
#include "test_support.hpp"

namespace ctdgan {
namespace {

using testing::code_of;
using testing::random_matrix;

struct Setup {
    DatasetSchema schema;
    std::size_t k;
    Layout layout;
};

Setup random_setup(std::mt19937_64& rng, int trial) {
    Setup s;
    s.schema = testing::random_schema(rng, 1 + trial % 3, trial % 3, 2 + trial % 2);
    s.k = 1 + trial % 4;
    s.layout = make_layout(s.schema, s.k);
    return s;
}

TEST(LatentWidth, Formula) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const auto s = random_setup(rng, trial);
        std::size_t expected = 128 + s.k + s.schema.num_classes();
        for (const auto& c : s.schema.columns)
            if (c.kind == ColumnKind::Discrete) expected += c.categories.size();
        EXPECT_EQ(latent_width(s.layout, 128), expected);
    }
}

TEST(Generator, OutputWidthRangeAndSimplex) {
    std::mt19937_64 rng(2);
    ad::Rng net_rng(3);
    for (int trial = 0; trial < 12; ++trial) {
        const auto s = random_setup(rng, trial);
        GeneratorNet g(s.layout, 16, 32, static_cast<std::uint64_t>(trial));
        const Matrix z = random_matrix(rng, 20, static_cast<Eigen::Index>(g.latent_width()), -3, 3);
        const auto out = g.forward(z, 0.2, trial % 2 ? Mode::Train : Mode::Eval, net_rng);
        ASSERT_EQ(static_cast<std::size_t>(out.rows.cols()), s.layout.width);
        ASSERT_EQ(out.rows.rows(), 20);
        for (std::size_t si = 0; si < s.layout.segments.size(); ++si) {
            const auto& seg = s.layout.segments[si];
            const Matrix& p = out.probs[si].value();
            EXPECT_EQ(p, out.rows.value().middleCols(static_cast<Eigen::Index>(seg.offset), static_cast<Eigen::Index>(seg.width)));
            if (seg.kind == Segment::Kind::Continuous) {
                EXPECT_LT(p.cwiseAbs().maxCoeff(), 1.0);
                EXPECT_FALSE(out.log_probs[si].defined());
                continue;
            }
            EXPECT_GE(p.minCoeff(), 0.0);
            for (Eigen::Index i = 0; i < p.rows(); ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-9);
        }
        // Every generated row decodes to a schema-valid raw row.
        const TransformPipeline pipe = [&] {
            auto ds = testing::random_dataset(rng, s.schema, 10 * s.k);
            std::vector<std::size_t> a(ds.num_rows());
            for (std::size_t i = 0; i < a.size(); ++i) a[i] = i % s.k;
            return fit_transform_pipeline(ds, a, s.k);
        }();
        for (Eigen::Index i = 0; i < out.rows.rows(); ++i) {
            const RowVector r = out.rows.value().row(i);
            const auto inv = inverse_transform_row(std::span<const double>(r.data(), static_cast<std::size_t>(r.size())), pipe);
            EXPECT_LT(inv.cluster, s.k);
            EXPECT_LT(inv.label, s.schema.num_classes());
            for (std::size_t j = 0; j < s.schema.columns.size(); ++j) {
                EXPECT_TRUE(std::isfinite(inv.values[j]));
                if (s.schema.columns[j].kind == ColumnKind::Discrete)
                    EXPECT_LT(inv.values[j], static_cast<double>(s.schema.columns[j].categories.size()));
            }
        }
    }
}

TEST(Generator, ResidualParameterShapes) {
    DatasetSchema schema;
    schema.columns = {{"a", ColumnKind::Continuous, {}}, {"d", ColumnKind::Discrete, {"x", "y", "z"}}};
    schema.target_name = "t";
    schema.class_labels = {"n", "p"};
    const Layout layout = make_layout(schema, 2);
    GeneratorNet g(layout, 10, 256, 0);
    const Eigen::Index z = static_cast<Eigen::Index>(g.latent_width());
    EXPECT_EQ(z, 10 + 3 + 2 + 2);
    const auto& p = g.params();
    EXPECT_EQ(p.get("block1.weight").rows(), 256);
    EXPECT_EQ(p.get("block1.weight").cols(), z);
    EXPECT_EQ(p.get("block2.weight").cols(), z + 256);
    for (std::size_t si = 0; si < layout.segments.size(); ++si) {
        char name[32];
        std::snprintf(name, sizeof name, "head%03zu.weight", si);
        EXPECT_EQ(p.get(name).rows(), static_cast<Eigen::Index>(layout.segments[si].width));
        EXPECT_EQ(p.get(name).cols(), z + 512);
    }
}

TEST(Generator, WidthMismatch) {
    std::mt19937_64 rng(4);
    const auto s = random_setup(rng, 1);
    GeneratorNet g(s.layout, 8, 16, 0);
    ad::Rng r(0);
    EXPECT_EQ(code_of([&] { g.forward(Matrix::Zero(4, static_cast<Eigen::Index>(g.latent_width() + 1)), 0.2, Mode::Eval, r); }),
              ErrorCode::WidthMismatch);
}

TEST(Generator, EvalForwardIsDeterministicAndTrainUpdatesRunningStats) {
    std::mt19937_64 rng(5);
    const auto s = random_setup(rng, 2);
    GeneratorNet g(s.layout, 8, 16, 7);
    const Matrix z = random_matrix(rng, 12, static_cast<Eigen::Index>(g.latent_width()));
    ad::Rng r1(9), r2(9);
    EXPECT_EQ(g.forward(z, 0.2, Mode::Eval, r1).rows.value(), g.forward(z, 0.2, Mode::Eval, r2).rows.value());

    // Oracle: block-1 pre-activation batch moments computed directly.
    const Matrix& w = g.params().get("block1.weight").value();
    const Matrix pre = z * w.transpose();
    const RowVector mean = pre.colwise().mean();
    const RowVector unbiased_var =
        (pre.rowwise() - mean).colwise().squaredNorm() / static_cast<double>(pre.rows() - 1);
    g.forward(z, 0.2, Mode::Train, r1);
    EXPECT_TRUE(g.params().get("block1.bn.running_mean").value().isApprox(0.1 * mean, 1e-12));
    const RowVector expected_var = (0.9 * RowVector::Ones(mean.size()) + 0.1 * unbiased_var);
    EXPECT_TRUE(g.params().get("block1.bn.running_var").value().isApprox(expected_var, 1e-12));
}

TEST(Generator, EvalGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(6);
    const auto s = random_setup(rng, 5);
    GeneratorNet g(s.layout, 4, 8, 3);
    // Move batch-norm statistics off their initial values first.
    ad::Rng warm(1);
    g.forward(random_matrix(rng, 16, static_cast<Eigen::Index>(g.latent_width())), 0.5, Mode::Train, warm);
    const Matrix z = random_matrix(rng, 6, static_cast<Eigen::Index>(g.latent_width()));
    const std::uint64_t readout_seed = rng();
    const auto loss = [&] {
        ad::Rng r(11);
        const ad::Var rows = g.forward(z, 0.5, Mode::Eval, r).rows;
        std::mt19937_64 wr(readout_seed);
        return ad::sum_all(ad::mul(rows, ad::constant(random_matrix(wr, rows.rows(), rows.cols()))));
    };
    const auto vars = g.params().trainable_vars();
    const auto analytic = testing::values_of(ad::grad(loss(), vars));
    const auto numeric = testing::numeric_gradient([&] { return loss().item(); }, vars);
    EXPECT_LT(testing::relative_error(analytic, numeric), 1e-4);
}

TEST(Critic, PackingCounts) {
    ad::Rng r(0);
    CriticNet c(7, 10, 32, 1);
    EXPECT_EQ(c.forward(ad::constant(Matrix::Zero(100, 7)), Mode::Eval, r).rows(), 10);
    EXPECT_EQ(code_of([&] { c.forward(ad::constant(Matrix::Zero(15, 7)), Mode::Eval, r); }), ErrorCode::BatchNotPackable);
    EXPECT_EQ(code_of([&] { c.forward(ad::constant(Matrix::Zero(10, 6)), Mode::Eval, r); }), ErrorCode::WidthMismatch);
    CriticNet single(7, 1, 32, 1);
    EXPECT_EQ(single.forward(ad::constant(Matrix::Zero(15, 7)), Mode::Eval, r).rows(), 15);
    EXPECT_EQ(single.params().get("layer1.weight").cols(), 7);
    EXPECT_EQ(c.params().get("layer1.weight").cols(), 70);
}

TEST(Critic, PackPlacesConsecutiveRowsSideBySide) {
    std::mt19937_64 rng(7);
    CriticNet c(3, 4, 8, 0);
    const Matrix x = random_matrix(rng, 8, 3);
    const Matrix packed = c.pack(ad::constant(x)).value();
    ASSERT_EQ(packed.rows(), 2);
    ASSERT_EQ(packed.cols(), 12);
    for (Eigen::Index p = 0; p < 2; ++p)
        for (Eigen::Index j = 0; j < 4; ++j)
            EXPECT_EQ(RowVector(packed.row(p).segment(3 * j, 3)), RowVector(x.row(4 * p + j)));
}

TEST(Critic, NoBatchNormAndDropoutOnlyInTraining) {
    std::mt19937_64 rng(8);
    CriticNet c(5, 2, 16, 4);
    for (const auto& name : c.params().names()) EXPECT_EQ(name.find("bn"), std::string::npos) << name;
    const ad::Var x = ad::constant(random_matrix(rng, 20, 5));
    ad::Rng r1(1), r2(2);
    EXPECT_EQ(c.forward(x, Mode::Eval, r1).value(), c.forward(x, Mode::Eval, r2).value());
    EXPECT_NE(c.forward(x, Mode::Train, r1).value(), c.forward(x, Mode::Train, r2).value());
}

TEST(Init, DeterministicBoundedZeroBias) {
    std::mt19937_64 rng(9);
    const auto s = random_setup(rng, 3);
    GeneratorNet a(s.layout, 8, 32, 5), b(s.layout, 8, 32, 5), other(s.layout, 8, 32, 6);
    EXPECT_TRUE(a.params().values_equal(b.params()));
    EXPECT_FALSE(a.params().values_equal(other.params()));
    CriticNet ca(s.layout.width, 2, 32, 5), cb(s.layout.width, 2, 32, 5);
    EXPECT_TRUE(ca.params().values_equal(cb.params()));

    for (const ParamStore* store : {&a.params(), &ca.params()}) {
        for (const auto& name : store->names()) {
            const Matrix& v = store->get(name).value();
            if (name.ends_with(".weight")) {
                EXPECT_LE(v.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(static_cast<double>(v.cols()))) << name;
                EXPECT_GT(v.cwiseAbs().maxCoeff(), 0.0) << name;
            } else if (name.ends_with(".bias") || name.ends_with(".bn.shift") || name.ends_with("running_mean")) {
                EXPECT_TRUE(v.isZero()) << name;
            } else if (name.ends_with(".bn.scale") || name.ends_with("running_var")) {
                EXPECT_TRUE(v.isOnes()) << name;
            }
        }
    }
}

}  // namespace
}  // namespace ctdgan
