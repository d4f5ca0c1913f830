#include "ctdgan/partitioner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "ctdgan/error.hpp"

namespace ctdgan {

namespace {

double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
    return (a.row(i) - b.row(j)).squaredNorm();
}

// Index of the first entry >= target in the running sum of `weights`.
std::size_t sample_weighted(const std::vector<double>& weights, double total, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, total);
    const double target = unif(rng);
    double running = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0) continue;
        running += weights[i];
        last_positive = i;
        if (running > target) return i;
    }
    return last_positive;
}

Matrix seed_plus_plus(const Matrix& x, std::size_t k, std::mt19937_64& rng) {
    const auto m = static_cast<std::size_t>(x.rows());
    Matrix centroids(static_cast<Eigen::Index>(k), x.cols());
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    centroids.row(0) = x.row(static_cast<Eigen::Index>(pick(rng)));

    std::vector<double> d2(m);
    for (std::size_t i = 0; i < m; ++i) d2[i] = squared_distance(x, static_cast<Eigen::Index>(i), centroids, 0);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : d2) total += v;
        const std::size_t chosen = total > 0 ? sample_weighted(d2, total, rng) : pick(rng);
        centroids.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(chosen));
        for (std::size_t i = 0; i < m; ++i)
            d2[i] = std::min(d2[i], squared_distance(x, static_cast<Eigen::Index>(i), centroids,
                                                     static_cast<Eigen::Index>(c)));
    }
    return centroids;
}

void update_centroids(const Matrix& x, Matrix& centroids, std::vector<std::size_t>& assignments) {
    const auto k = static_cast<std::size_t>(centroids.rows());
    std::vector<std::size_t> counts(k, 0);
    Matrix sums = Matrix::Zero(centroids.rows(), centroids.cols());
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        sums.row(static_cast<Eigen::Index>(assignments[i])) += x.row(static_cast<Eigen::Index>(i));
        ++counts[assignments[i]];
    }
    for (std::size_t c = 0; c < k; ++c)
        if (counts[c] > 0) centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);

    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] > 0) continue;
        // Re-seed at the point farthest from its own centroid, taken from a
        // cluster that can spare it.
        std::size_t best = assignments.size();
        double best_d = -1.0;
        for (std::size_t i = 0; i < assignments.size(); ++i) {
            if (counts[assignments[i]] < 2) continue;
            const double d = squared_distance(x, static_cast<Eigen::Index>(i), centroids,
                                              static_cast<Eigen::Index>(assignments[i]));
            if (d > best_d) {
                best_d = d;
                best = i;
            }
        }
        if (best == assignments.size()) continue;  // fewer distinct rows than k
        const std::size_t donor = assignments[best];
        const auto bi = static_cast<Eigen::Index>(best);
        sums.row(static_cast<Eigen::Index>(donor)) -= x.row(bi);
        --counts[donor];
        centroids.row(static_cast<Eigen::Index>(donor)) = sums.row(static_cast<Eigen::Index>(donor)) / static_cast<double>(counts[donor]);
        centroids.row(static_cast<Eigen::Index>(c)) = x.row(bi);
        sums.row(static_cast<Eigen::Index>(c)) = x.row(bi);
        counts[c] = 1;
        assignments[best] = c;
    }
}

double total_sum_of_squares(const Matrix& x) {
    if (x.rows() == 0) return 0.0;
    const RowVector mean = x.colwise().mean();
    return (x.rowwise() - mean).squaredNorm();
}

}  // namespace

FeaturePrep fit_feature_prep(const Dataset& ds) {
    FeaturePrep prep;
    const double m = static_cast<double>(ds.num_rows());
    for (auto j : ds.schema().continuous_indices()) {
        double mean = 0.0;
        for (std::size_t i = 0; i < ds.num_rows(); ++i) mean += ds.at(i, j);
        mean /= m;
        double var = 0.0;
        for (std::size_t i = 0; i < ds.num_rows(); ++i) {
            const double d = ds.at(i, j) - mean;
            var += d * d;
        }
        prep.mean.push_back(mean);
        prep.stddev.push_back(std::sqrt(var / m));
    }
    return prep;
}

Matrix build_cluster_features(const Dataset& ds, const FeaturePrep& prep) {
    const auto& schema = ds.schema();
    const auto cont = schema.continuous_indices();
    const auto disc = schema.discrete_indices();
    if (prep.mean.size() != cont.size())
        throw Error(ErrorCode::DimensionMismatch, "feature prep does not match continuous column count");
    std::size_t width = cont.size();
    for (auto j : disc) width += schema.columns[j].categories.size();

    Matrix features = Matrix::Zero(static_cast<Eigen::Index>(ds.num_rows()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < ds.num_rows(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        Eigen::Index col = 0;
        for (std::size_t c = 0; c < cont.size(); ++c, ++col) {
            const double sd = prep.stddev[c];
            features(r, col) = sd > 0 ? (ds.at(i, cont[c]) - prep.mean[c]) / sd : 0.0;
        }
        for (auto j : disc) {
            features(r, col + static_cast<Eigen::Index>(ds.at(i, j))) = 1.0;
            col += static_cast<Eigen::Index>(schema.columns[j].categories.size());
        }
    }
    return features;
}

Matrix build_cluster_features(const Dataset& ds) { return build_cluster_features(ds, fit_feature_prep(ds)); }

std::vector<std::size_t> assign(const Matrix& centroids, const Matrix& features) {
    if (features.cols() != centroids.cols())
        throw Error(ErrorCode::DimensionMismatch, "features have " + std::to_string(features.cols()) +
                                                      " columns, centroids " + std::to_string(centroids.cols()));
    std::vector<std::size_t> out(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_c = 0;
        for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
            const double d = squared_distance(features, i, centroids, c);
            if (d < best) {
                best = d;
                best_c = static_cast<std::size_t>(c);
            }
        }
        out[static_cast<std::size_t>(i)] = best_c;
    }
    return out;
}

std::vector<std::size_t> assign(const ClusterModel& model, const Matrix& features) {
    return assign(model.centroids, features);
}

double inertia_of(const Matrix& features, const Matrix& centroids, const std::vector<std::size_t>& assignments) {
    double total = 0.0;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        total += squared_distance(features, static_cast<Eigen::Index>(i), centroids,
                                  static_cast<Eigen::Index>(assignments[i]));
    return total;
}

KMeansResult lloyd(const Matrix& features, Matrix centroids, std::size_t max_iter) {
    if (max_iter < 1) throw Error(ErrorCode::InvalidConfig, "max_iter must be >= 1");
    KMeansResult result;
    auto current = assign(centroids, features);
    for (std::size_t it = 0; it < max_iter; ++it) {
        update_centroids(features, centroids, current);
        auto next = assign(centroids, features);
        result.inertia_trace.push_back(inertia_of(features, centroids, next));
        const bool fixpoint = next == current;
        current = std::move(next);
        if (fixpoint) break;
    }
    result.inertia = inertia_of(features, centroids, current);
    result.centroids = std::move(centroids);
    result.assignments = std::move(current);
    return result;
}

KMeansResult kmeans_pp_fit(const Matrix& features, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
    const auto m = static_cast<std::size_t>(features.rows());
    if (k < 1 || k > m)
        throw Error(ErrorCode::KExceedsSamples, "k=" + std::to_string(k) + " with " + std::to_string(m) + " samples");
    std::mt19937_64 rng(seed);
    return lloyd(features, seed_plus_plus(features, k, rng), max_iter);
}

double ClusterModel::scaled_inertia(std::size_t kk) const {
    const double base = inertia_by_k.at(1);
    const double ratio = base > 0 ? inertia_by_k.at(kk) / base : 0.0;
    return ratio + inertia_penalty * static_cast<double>(kk);
}

ClusterModel select_k(const Matrix& features, std::size_t k_max, double inertia_penalty, std::uint64_t seed,
                      std::size_t max_iter) {
    const auto m = static_cast<std::size_t>(features.rows());
    if (m == 0) throw Error(ErrorCode::KExceedsSamples, "no samples to cluster");
    if (k_max < 1) throw Error(ErrorCode::InvalidConfig, "k_max must be >= 1");
    if (!(inertia_penalty >= 0)) throw Error(ErrorCode::InvalidConfig, "inertia penalty must be >= 0");

    ClusterModel model;
    model.inertia_penalty = inertia_penalty;
    std::vector<KMeansResult> fits;
    const std::size_t upper = std::min(k_max, m);
    for (std::size_t k = 1; k <= upper; ++k) {
        KMeansResult fit = kmeans_pp_fit(features, k, seed + k, max_iter);
        if (k == 1) {
            fit.inertia = total_sum_of_squares(features);
        } else {
            // Warm start from the previous k plus one D^2-seeded centroid; it
            // cannot end above I(k-1), which keeps I(k) non-increasing.
            const auto& prev = fits.back();
            std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ull * k));
            std::vector<double> d2(m);
            double total = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                d2[i] = squared_distance(features, static_cast<Eigen::Index>(i), prev.centroids,
                                         static_cast<Eigen::Index>(prev.assignments[i]));
                total += d2[i];
            }
            std::size_t chosen = 0;
            if (total > 0) {
                chosen = sample_weighted(d2, total, rng);
            } else {
                std::uniform_int_distribution<std::size_t> pick(0, m - 1);
                chosen = pick(rng);
            }
            Matrix start(static_cast<Eigen::Index>(k), features.cols());
            start.topRows(static_cast<Eigen::Index>(k - 1)) = prev.centroids;
            start.row(static_cast<Eigen::Index>(k - 1)) = features.row(static_cast<Eigen::Index>(chosen));
            KMeansResult warm = lloyd(features, std::move(start), max_iter);
            if (warm.inertia < fit.inertia) fit = std::move(warm);
        }
        model.inertia_by_k[k] = fit.inertia;
        fits.push_back(std::move(fit));
    }

    std::size_t best_k = 1;
    double best_si = model.scaled_inertia(1);
    for (std::size_t k = 2; k <= upper; ++k) {
        const double si = model.scaled_inertia(k);
        if (si < best_si) {
            best_si = si;
            best_k = k;
        }
    }
    auto& chosen = fits[best_k - 1];
    model.k = best_k;
    model.centroids = std::move(chosen.centroids);
    model.assignments = std::move(chosen.assignments);
    model.chosen_scaled_inertia = best_si;
    return model;
}

nlohmann::json cluster_model_to_json(const ClusterModel& model) {
    nlohmann::json inertia = nlohmann::json::object();
    for (const auto& [k, v] : model.inertia_by_k) inertia[std::to_string(k)] = v;
    return nlohmann::json{
        {"k", model.k},
        {"centroids", matrix_to_json(model.centroids)},
        {"assignments", model.assignments},
        {"inertia_by_k", std::move(inertia)},
        {"chosen_scaled_inertia", model.chosen_scaled_inertia},
        {"inertia_penalty", model.inertia_penalty},
        {"feature_prep", {{"mean", model.feature_prep.mean}, {"stddev", model.feature_prep.stddev}}},
    };
}

ClusterModel cluster_model_from_json(const nlohmann::json& j) {
    ClusterModel model;
    model.k = j.at("k").get<std::size_t>();
    model.centroids = matrix_from_json(j.at("centroids"));
    model.assignments = j.at("assignments").get<std::vector<std::size_t>>();
    for (const auto& [key, v] : j.at("inertia_by_k").items())
        model.inertia_by_k[static_cast<std::size_t>(std::stoul(key))] = v.get<double>();
    model.chosen_scaled_inertia = j.at("chosen_scaled_inertia").get<double>();
    model.inertia_penalty = j.at("inertia_penalty").get<double>();
    model.feature_prep.mean = j.at("feature_prep").at("mean").get<std::vector<double>>();
    model.feature_prep.stddev = j.at("feature_prep").at("stddev").get<std::vector<double>>();
    return model;
}

}  // namespace ctdgan
