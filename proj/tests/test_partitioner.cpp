#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ctdgan/partitioner.hpp"
#include "test_support.hpp"

namespace ctdgan {
namespace {

using testing::code_of;

/// Minimum inertia over every assignment of the rows to k non-empty
/// clusters, each centroid being its members' mean.
double brute_force_inertia(const Matrix& x, std::size_t k) {
    const std::size_t m = static_cast<std::size_t>(x.rows());
    std::vector<std::size_t> label(m, 0);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        std::vector<std::size_t> size(k, 0);
        for (auto l : label) ++size[l];
        if (std::all_of(size.begin(), size.end(), [](std::size_t s) { return s > 0; })) {
            Matrix c = Matrix::Zero(static_cast<Eigen::Index>(k), x.cols());
            for (std::size_t i = 0; i < m; ++i) c.row(static_cast<Eigen::Index>(label[i])) += x.row(static_cast<Eigen::Index>(i));
            for (std::size_t u = 0; u < k; ++u) c.row(static_cast<Eigen::Index>(u)) /= static_cast<double>(size[u]);
            best = std::min(best, inertia_of(x, c, label));
        }
        std::size_t pos = 0;
        while (pos < m && ++label[pos] == k) label[pos++] = 0;
        if (pos == m) break;
    }
    return best;
}

Dataset continuous_dataset(const std::vector<double>& col) {
    DatasetSchema s;
    s.columns = {{"v", ColumnKind::Continuous, {}}};
    s.target_name = "t";
    s.class_labels = {"a", "b"};
    std::vector<std::size_t> labels(col.size(), 0);
    labels.back() = 1;
    return Dataset(s, col, labels);
}

Matrix two_blobs(std::mt19937_64& rng, std::size_t per_blob, double separation) {
    std::normal_distribution<double> noise(0.0, 0.1);
    Matrix x(static_cast<Eigen::Index>(2 * per_blob), 2);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double shift = i < static_cast<Eigen::Index>(per_blob) ? 0.0 : separation;
        x(i, 0) = shift + noise(rng);
        x(i, 1) = shift + noise(rng);
    }
    return x;
}

TEST(ClusterFeatures, StandardizesContinuous) {
    const Matrix f = build_cluster_features(continuous_dataset({2, 4, 6}));
    ASSERT_EQ(f.cols(), 1);
    // Population stddev of {2,4,6} is sqrt(8/3).
    EXPECT_NEAR(f(0, 0), -1.2247, 1e-4);
    EXPECT_NEAR(f(1, 0), 0.0, 1e-12);
    EXPECT_NEAR(f(2, 0), 1.2247, 1e-4);
}

TEST(ClusterFeatures, ConstantColumnIsZero) {
    const Matrix f = build_cluster_features(continuous_dataset({5, 5, 5}));
    EXPECT_TRUE(f.isZero());
}

TEST(ClusterFeatures, OneHotDiscreteAndNoLabel) {
    DatasetSchema s;
    s.columns = {{"v", ColumnKind::Continuous, {}}, {"d", ColumnKind::Discrete, {"p", "q", "r"}}};
    s.target_name = "t";
    s.class_labels = {"a", "b"};
    const Dataset ds(s, {1, 2, 3, 0}, {0, 1});
    const Matrix f = build_cluster_features(ds);
    ASSERT_EQ(f.cols(), 4);
    EXPECT_EQ(f.row(0).tail(3), (RowVector(3) << 0, 0, 1).finished());
    EXPECT_EQ(f.row(1).tail(3), (RowVector(3) << 1, 0, 0).finished());
}

TEST(KMeans, FourPointsMatchExhaustiveOptimum) {
    Matrix x(4, 2);
    x << 0, 0, 0, 1, 10, 10, 10, 11;
    const double oracle = brute_force_inertia(x, 2);
    const KMeansResult r = kmeans_pp_fit(x, 2, 0);
    EXPECT_NEAR(r.inertia, oracle, 1e-12);
    EXPECT_NEAR(r.inertia, 1.0, 1e-12);
    EXPECT_EQ(r.assignments[0], r.assignments[1]);
    EXPECT_EQ(r.assignments[2], r.assignments[3]);
    EXPECT_NE(r.assignments[0], r.assignments[2]);
}

TEST(KMeans, RandomSmallSetsReachExhaustiveOptimumForSomeSeed) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix x = testing::random_matrix(rng, 7, 2, -5, 5);
        for (std::size_t k = 1; k <= 3; ++k) {
            const double oracle = brute_force_inertia(x, k);
            double best = std::numeric_limits<double>::infinity();
            for (std::uint64_t seed = 0; seed < 20; ++seed) {
                const double inertia = kmeans_pp_fit(x, k, seed).inertia;
                EXPECT_GE(inertia, oracle - 1e-9);
                best = std::min(best, inertia);
            }
            EXPECT_NEAR(best, oracle, 1e-9);
        }
    }
}

TEST(KMeans, DegenerateK) {
    std::mt19937_64 rng(2);
    const Matrix x = testing::random_matrix(rng, 6, 3);
    const KMeansResult all = kmeans_pp_fit(x, 6, 1);
    EXPECT_NEAR(all.inertia, 0.0, 1e-20);
    const KMeansResult one = kmeans_pp_fit(x, 1, 1);
    EXPECT_TRUE(one.centroids.row(0).isApprox(x.colwise().mean(), 1e-12));
    EXPECT_EQ(code_of([&] { kmeans_pp_fit(x, 7, 0); }), ErrorCode::KExceedsSamples);
}

TEST(KMeans, LloydTraceNeverIncreases) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix x = testing::random_matrix(rng, 60, 3);
        const KMeansResult r = kmeans_pp_fit(x, 2 + trial % 5, static_cast<std::uint64_t>(trial));
        for (std::size_t i = 1; i < r.inertia_trace.size(); ++i)
            EXPECT_LE(r.inertia_trace[i], r.inertia_trace[i - 1] + 1e-12);
        EXPECT_NEAR(r.inertia, inertia_of(x, r.centroids, r.assignments), 1e-9);
        EXPECT_TRUE(r.centroids.allFinite());
    }
}

TEST(KMeans, DeterministicPerSeed) {
    std::mt19937_64 rng(4);
    const Matrix x = testing::random_matrix(rng, 50, 2);
    const auto a = kmeans_pp_fit(x, 4, 3);
    const auto b = kmeans_pp_fit(x, 4, 3);
    EXPECT_EQ(a.assignments, b.assignments);
    EXPECT_EQ(a.centroids, b.centroids);
}

TEST(KMeans, DuplicatedRowsShareAssignments) {
    std::mt19937_64 rng(6);
    const Matrix base = testing::random_matrix(rng, 30, 2);
    Matrix x(60, 2);
    x << base, base;
    const auto r = kmeans_pp_fit(x, 3, 0);
    for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(r.assignments[i], r.assignments[i + 30]);
}

TEST(SelectK, ScaledInertiaAtOneIsOnePlusPenalty) {
    std::mt19937_64 rng(1);
    const Matrix x = testing::random_matrix(rng, 20, 2);
    const ClusterModel m = select_k(x, 5, 0.03, 0);
    EXPECT_NEAR(m.scaled_inertia(1), 1.03, 1e-12);
}

TEST(SelectK, TwoBlobsChooseTwo) {
    std::mt19937_64 rng(3);
    const Matrix x = two_blobs(rng, 25, 10.0);
    const ClusterModel m = select_k(x, 4, 0.01, 0);
    // The planted two-blob split is the k = 2 optimum here, so its inertia
    // is the oracle for I(2), and SI(2) beats SI(1).
    Matrix c(2, 2);
    c << x.topRows(25).colwise().mean(), x.bottomRows(25).colwise().mean();
    std::vector<std::size_t> split(50, 0);
    std::fill(split.begin() + 25, split.end(), 1);
    const double planted = inertia_of(x, c, split);
    const double i1 = m.inertia_by_k.at(1);
    EXPECT_LT(planted / i1 + 0.02, 1.01);
    EXPECT_EQ(m.k, 2u);
    EXPECT_NEAR(m.inertia_by_k.at(2), planted, 1e-9);
    for (const auto& [k, inertia] : m.inertia_by_k) EXPECT_LE(m.scaled_inertia(m.k), m.scaled_inertia(k));
}

TEST(SelectK, LargePenaltyChoosesOne) {
    std::mt19937_64 rng(3);
    const ClusterModel m = select_k(two_blobs(rng, 10, 10.0), 6, 10.0, 0);
    EXPECT_EQ(m.k, 1u);
}

TEST(SelectK, InertiaByKIsNonIncreasingAndFirstIsTotalSumOfSquares) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix x = testing::random_matrix(rng, 40, 3);
        const ClusterModel m = select_k(x, 10, 0.01, static_cast<std::uint64_t>(trial));
        const double tss = (x.rowwise() - x.colwise().mean()).squaredNorm();
        EXPECT_NEAR(m.inertia_by_k.at(1), tss, 1e-9);
        double prev = std::numeric_limits<double>::infinity();
        for (const auto& [k, inertia] : m.inertia_by_k) {
            EXPECT_LE(inertia, prev + 1e-12) << "k = " << k;
            prev = inertia;
        }
        EXPECT_EQ(m.inertia_by_k.size(), 10u);
        for (auto u : m.assignments) EXPECT_LT(u, m.k);
    }
}

TEST(SelectK, RangeCappedByRowCount) {
    Matrix x(3, 1);
    x << 0, 1, 5;
    const ClusterModel m = select_k(x, 10, 0.01, 0);
    EXPECT_EQ(m.inertia_by_k.size(), 3u);
}

TEST(Assign, NearestWithLowIndexTies) {
    Matrix c(2, 2);
    c << 0, 0, 2, 0;
    Matrix q(3, 2);
    q << 0, 0, 2, 0, 1, 0;
    EXPECT_EQ(assign(c, q), (std::vector<std::size_t>{0, 1, 0}));
    EXPECT_EQ(code_of([&] { assign(c, Matrix::Zero(1, 3)); }), ErrorCode::DimensionMismatch);
}

TEST(ClusterModelJson, RoundTrip) {
    std::mt19937_64 rng(5);
    const Matrix x = testing::random_matrix(rng, 30, 2);
    ClusterModel m = select_k(x, 4, 0.01, 0);
    m.feature_prep = {{1.5}, {0.5}};
    const ClusterModel back = cluster_model_from_json(cluster_model_to_json(m));
    EXPECT_EQ(back.k, m.k);
    EXPECT_EQ(back.centroids, m.centroids);
    EXPECT_EQ(back.assignments, m.assignments);
    EXPECT_EQ(back.inertia_by_k, m.inertia_by_k);
    EXPECT_EQ(back.feature_prep, m.feature_prep);
}

}  // namespace
}  // namespace ctdgan
