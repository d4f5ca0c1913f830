#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ctdgan/config.hpp"
#include "ctdgan/dataset.hpp"
#include "ctdgan/model.hpp"
#include "ctdgan/partitioner.hpp"
#include "ctdgan/transformer.hpp"

namespace ctdgan {

/// Cluster-given-class probabilities, |Y| x k. Row y is the empirical
/// distribution of cluster labels among rows of class y.
struct ProbabilityMatrix {
    Matrix probs;
    std::vector<std::vector<std::size_t>> counts;  // [class][cluster]

    std::span<const double> row(std::size_t y) const {
        return {probs.row(static_cast<Eigen::Index>(y)).data(), static_cast<std::size_t>(probs.cols())};
    }
};

/// Throws LengthMismatch, IndexOutOfRange, or EmptyClass when some class
/// has no rows.
ProbabilityMatrix compute_probability_matrix(std::span<const std::size_t> labels,
                                             std::span<const std::size_t> assignments, std::size_t n_classes,
                                             std::size_t k);

nlohmann::json probability_matrix_to_json(const ProbabilityMatrix& p);
ProbabilityMatrix probability_matrix_from_json(const nlohmann::json& j);

struct LatentBatch {
    Matrix noise;                                // B x noise_dim, standard normal
    std::vector<std::vector<std::size_t>> discrete;  // [discrete column][row]
    std::vector<std::size_t> cluster;
    std::vector<std::size_t> label;
    Matrix z;                                    // noise, discrete one-hots, cluster, class
};

/// Builds z from its parts in the generator's input order.
Matrix assemble_latent(const Matrix& noise, const std::vector<std::vector<std::size_t>>& discrete,
                       std::span<const std::size_t> cluster, std::span<const std::size_t> label,
                       const Layout& layout);

/// Noise ~ N(0, 1); every conditional index uniform over its range.
LatentBatch sample_latent_batch(std::size_t batch, const Layout& layout, std::size_t noise_dim, ad::Rng& rng);
LatentBatch sample_latent_batch(std::size_t batch, const DatasetSchema& schema, std::size_t k, std::size_t noise_dim,
                                ad::Rng& rng);

/// B x width matrix with a single 1 per row at `indices[i]`.
Matrix one_hot(std::span<const std::size_t> indices, std::size_t width);

struct CriticLossTerms {
    ad::Var fake_score;        // mean C(fake)
    ad::Var real_score;        // mean C(real)
    ad::Var gradient_penalty;  // lambda * mean over packs of (|grad| - 1)^2
    ad::Var total;
};

/// mean C(fake) - mean C(real) + gradient penalty. The penalty is evaluated on
/// packed interpolates eps * real + (1 - eps) * fake with one eps per pack and
/// is kept differentiable with respect to the critic parameters.
CriticLossTerms critic_loss(const ad::Var& real, const ad::Var& fake, const CriticNet& critic, double gp_lambda,
                            ad::Rng& rng, Mode mode = Mode::Train);

/// Penalty alone on given packed interpolates.
ad::Var gradient_penalty(const Matrix& packed_interpolates, const CriticNet& critic, double gp_lambda, ad::Rng& rng,
                         Mode mode = Mode::Train);

/// (1 + beta) times binary cross-entropy for k = 2, categorical cross-entropy
/// for k > 2, zero for k = 1.
ad::Var cluster_loss(std::span<const std::size_t> latent_clusters, const ad::Var& log_probs, std::size_t k,
                     double beta);

/// Fraction of rows whose cluster head arg-max differs from the latent label.
double update_beta(std::span<const std::size_t> latent_clusters, const Matrix& cluster_probs);

/// Twice the binary cross-entropy for two classes, twice the categorical one
/// otherwise.
ad::Var class_loss(std::span<const std::size_t> latent_labels, const ad::Var& log_probs, std::size_t n_classes);

struct GeneratorLossTerms {
    ad::Var adversarial;            // -mean C(fake)
    std::vector<ad::Var> discrete;  // per discrete column
    ad::Var cluster;
    ad::Var label;
    ad::Var total;
};

GeneratorLossTerms generator_loss(const LatentBatch& latent, const GeneratorOutput& fake, const CriticNet& critic,
                                  double beta, ad::Rng& rng, Mode critic_mode = Mode::Train);

struct LossHistory {
    std::vector<double> critic_per_batch;
    std::vector<double> generator_per_batch;
    std::vector<double> beta_per_batch;
    std::vector<double> critic_per_epoch;     // mean over the epoch's batches
    std::vector<double> generator_per_epoch;
};

struct FittedModel {
    DatasetSchema schema;
    ClusterModel clusters;
    TransformPipeline pipeline;
    GeneratorNet generator;
    CriticNet critic;
    ProbabilityMatrix probability;
    TrainConfig config;
    LossHistory history;
    std::size_t batch_size = 0;  // effective batch after clamping to m
    double beta = 0.0;
};

struct EpochReport {
    std::size_t epoch;
    double critic_loss;
    double generator_loss;
    double beta;
};

using EpochCallback = std::function<void(const EpochReport&)>;

/// Largest multiple of pac not above min(batch_size, m); throws InvalidConfig
/// when m < pac.
std::size_t effective_batch_size(const TrainConfig& cfg, std::size_t m);

/// Cluster, transform, and run the adversarial loop. Throws NonFiniteLoss
/// when a loss or intermediate value stops being finite.
FittedModel train(const Dataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace ctdgan
