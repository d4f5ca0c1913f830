#pragma once

#include <cstddef>
#include <cstdint>

#include <json.hpp>

namespace ctdgan {

/// Hyperparameters of a training run. Defaults follow the published setup
/// where one exists (epochs, batch, pac, latent width, Adam rate and decay).
struct TrainConfig {
    std::size_t epochs = 300;
    std::size_t batch_size = 100;
    std::size_t pac = 10;
    std::size_t latent_dim = 128;
    double learning_rate = 2e-4;
    double weight_decay = 1e-6;
    double gp_lambda = 10.0;
    double gumbel_temperature = 0.2;
    std::size_t critic_steps_per_generator_step = 1;
    std::size_t k_max = 10;
    double inertia_penalty = 0.01;
    std::uint64_t seed = 0;
    std::size_t max_sample_attempts_factor = 100;
    // Width of the hidden layers in both networks. Tests shrink it.
    std::size_t hidden_width = 256;
    std::size_t kmeans_max_iter = 300;

    bool operator==(const TrainConfig&) const = default;

    /// Throws InvalidConfig.
    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

}  // namespace ctdgan
