#include "ctdgan/config.hpp"

#include <cmath>

#include "ctdgan/error.hpp"

namespace ctdgan {

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (epochs < 1) fail("epochs must be >= 1");
    if (pac < 1) fail("pac must be >= 1");
    if (batch_size < 1 || batch_size % pac != 0) fail("batch_size must be a positive multiple of pac");
    if (latent_dim < 1) fail("latent_dim must be >= 1");
    if (!(learning_rate > 0)) fail("learning_rate must be > 0");
    if (!(weight_decay >= 0)) fail("weight_decay must be >= 0");
    if (!(gp_lambda >= 0)) fail("gp_lambda must be >= 0");
    if (!(gumbel_temperature > 0)) fail("gumbel_temperature must be > 0");
    if (critic_steps_per_generator_step < 1) fail("critic_steps_per_generator_step must be >= 1");
    if (k_max < 1) fail("k_max must be >= 1");
    if (!(inertia_penalty >= 0)) fail("inertia_penalty must be >= 0");
    if (max_sample_attempts_factor < 1) fail("max_sample_attempts_factor must be >= 1");
    if (hidden_width < 1) fail("hidden_width must be >= 1");
    if (kmeans_max_iter < 1) fail("kmeans_max_iter must be >= 1");
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
    j = nlohmann::json{
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"pac", cfg.pac},
        {"latent_dim", cfg.latent_dim},
        {"learning_rate", cfg.learning_rate},
        {"weight_decay", cfg.weight_decay},
        {"gp_lambda", cfg.gp_lambda},
        {"gumbel_temperature", cfg.gumbel_temperature},
        {"critic_steps_per_generator_step", cfg.critic_steps_per_generator_step},
        {"k_max", cfg.k_max},
        {"inertia_penalty", cfg.inertia_penalty},
        {"seed", cfg.seed},
        {"max_sample_attempts_factor", cfg.max_sample_attempts_factor},
        {"hidden_width", cfg.hidden_width},
        {"kmeans_max_iter", cfg.kmeans_max_iter},
    };
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
    cfg = TrainConfig{};
    auto opt = [&j](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    opt("epochs", cfg.epochs);
    opt("batch_size", cfg.batch_size);
    opt("pac", cfg.pac);
    opt("latent_dim", cfg.latent_dim);
    opt("learning_rate", cfg.learning_rate);
    opt("weight_decay", cfg.weight_decay);
    opt("gp_lambda", cfg.gp_lambda);
    opt("gumbel_temperature", cfg.gumbel_temperature);
    opt("critic_steps_per_generator_step", cfg.critic_steps_per_generator_step);
    opt("k_max", cfg.k_max);
    opt("inertia_penalty", cfg.inertia_penalty);
    opt("seed", cfg.seed);
    opt("max_sample_attempts_factor", cfg.max_sample_attempts_factor);
    opt("hidden_width", cfg.hidden_width);
    opt("kmeans_max_iter", cfg.kmeans_max_iter);
}

}  // namespace ctdgan
