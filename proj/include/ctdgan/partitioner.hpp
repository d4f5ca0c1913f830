#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "ctdgan/dataset.hpp"
#include "ctdgan/matrix.hpp"

namespace ctdgan {

/// Standardization stats for the continuous columns used in the clustering
/// feature space. Discrete columns are one-hot encoded after them.
struct FeaturePrep {
    std::vector<double> mean;
    std::vector<double> stddev;  // population; 0 for constant columns

    bool operator==(const FeaturePrep&) const = default;
};

FeaturePrep fit_feature_prep(const Dataset& ds);

/// m x d matrix, d = n_c + sum of category counts. Continuous columns come
/// first (standardized), then the one-hot blocks. The class label is not
/// part of the feature space.
Matrix build_cluster_features(const Dataset& ds, const FeaturePrep& prep);
Matrix build_cluster_features(const Dataset& ds);

struct KMeansResult {
    Matrix centroids;
    std::vector<std::size_t> assignments;
    double inertia = 0.0;
    // Inertia after every Lloyd iteration, for monotonicity checks.
    std::vector<double> inertia_trace;
};

/// k-means++ seeding followed by Lloyd iterations to an assignment fixpoint
/// (or `max_iter`). Empty clusters are re-seeded at the point farthest from
/// its own centroid.
KMeansResult kmeans_pp_fit(const Matrix& features, std::size_t k, std::uint64_t seed, std::size_t max_iter = 300);

/// Lloyd iterations from the given starting centroids.
KMeansResult lloyd(const Matrix& features, Matrix centroids, std::size_t max_iter = 300);

struct ClusterModel {
    std::size_t k = 1;
    Matrix centroids;
    std::vector<std::size_t> assignments;
    std::map<std::size_t, double> inertia_by_k;
    double chosen_scaled_inertia = 0.0;
    double inertia_penalty = 0.0;
    FeaturePrep feature_prep;

    /// SI(k) = I(k)/I(1) + a*k for a recorded k.
    double scaled_inertia(std::size_t k) const;
};

/// Fits k in [1, min(k_max, m)] and keeps the arg-min of scaled inertia
/// (ties go to the smaller k).
ClusterModel select_k(const Matrix& features, std::size_t k_max, double inertia_penalty, std::uint64_t seed,
                      std::size_t max_iter = 300);

/// Nearest centroid per row, ties to the lowest index.
std::vector<std::size_t> assign(const Matrix& centroids, const Matrix& features);
std::vector<std::size_t> assign(const ClusterModel& model, const Matrix& features);

/// Total squared distance of each row to its assigned centroid.
double inertia_of(const Matrix& features, const Matrix& centroids, const std::vector<std::size_t>& assignments);

nlohmann::json cluster_model_to_json(const ClusterModel& model);
ClusterModel cluster_model_from_json(const nlohmann::json& j);

}  // namespace ctdgan
