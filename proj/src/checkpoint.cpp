#include "ctdgan/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "ctdgan/error.hpp"

namespace ctdgan {

namespace {

constexpr const char* kFormat = "ctdgan-checkpoint";
constexpr int kVersion = 1;

nlohmann::json history_to_json(const LossHistory& h) {
    return {{"critic_per_batch", h.critic_per_batch},
            {"generator_per_batch", h.generator_per_batch},
            {"beta_per_batch", h.beta_per_batch},
            {"critic_per_epoch", h.critic_per_epoch},
            {"generator_per_epoch", h.generator_per_epoch}};
}

LossHistory history_from_json(const nlohmann::json& j) {
    LossHistory h;
    h.critic_per_batch = j.at("critic_per_batch").get<std::vector<double>>();
    h.generator_per_batch = j.at("generator_per_batch").get<std::vector<double>>();
    h.beta_per_batch = j.at("beta_per_batch").get<std::vector<double>>();
    h.critic_per_epoch = j.at("critic_per_epoch").get<std::vector<double>>();
    h.generator_per_epoch = j.at("generator_per_epoch").get<std::vector<double>>();
    return h;
}

}  // namespace

nlohmann::json checkpoint_to_json(const FittedModel& model) {
    nlohmann::json header{{"format", kFormat},
                          {"version", kVersion},
                          {"schema_hash", model.schema.fingerprint()},
                          {"k", model.clusters.k},
                          {"classes", model.schema.num_classes()},
                          {"layout_width", model.pipeline.layout.width},
                          {"latent_width", model.generator.latent_width()}};
    return {{"header", std::move(header)},
            {"schema", model.schema},
            {"cluster_model", cluster_model_to_json(model.clusters)},
            {"pipeline", pipeline_to_json(model.pipeline)},
            {"generator_params", model.generator.params().to_json()},
            {"critic_params", model.critic.params().to_json()},
            {"P_s", probability_matrix_to_json(model.probability)},
            {"config", model.config},
            {"batch_size", model.batch_size},
            {"beta", model.beta},
            {"loss_history", history_to_json(model.history)}};
}

FittedModel checkpoint_from_json(const nlohmann::json& j) {
    try {
        const auto& header = j.at("header");
        if (header.at("format").get<std::string>() != kFormat || header.at("version").get<int>() != kVersion)
            throw Error(ErrorCode::ParseError, "not a version 1 checkpoint");
        FittedModel fm;
        fm.schema = j.at("schema").get<DatasetSchema>();
        fm.schema.validate();
        fm.clusters = cluster_model_from_json(j.at("cluster_model"));
        fm.pipeline = pipeline_from_json(j.at("pipeline"));
        fm.probability = probability_matrix_from_json(j.at("P_s"));
        fm.config = j.at("config").get<TrainConfig>();
        fm.batch_size = j.at("batch_size").get<std::size_t>();
        fm.beta = j.at("beta").get<double>();
        fm.history = history_from_json(j.at("loss_history"));

        if (header.at("schema_hash").get<std::uint64_t>() != fm.schema.fingerprint())
            throw Error(ErrorCode::ParseError, "schema hash mismatch");
        if (header.at("k").get<std::size_t>() != fm.clusters.k || fm.pipeline.k != fm.clusters.k)
            throw Error(ErrorCode::ParseError, "cluster count mismatch");
        if (header.at("classes").get<std::size_t>() != fm.schema.num_classes())
            throw Error(ErrorCode::ParseError, "class count mismatch");
        if (header.at("layout_width").get<std::size_t>() != fm.pipeline.layout.width)
            throw Error(ErrorCode::ParseError, "layout width mismatch");
        if (fm.probability.probs.rows() != static_cast<Eigen::Index>(fm.schema.num_classes()) ||
            fm.probability.probs.cols() != static_cast<Eigen::Index>(fm.clusters.k))
            throw Error(ErrorCode::ParseError, "P_s shape mismatch");

        fm.generator = GeneratorNet(fm.pipeline.layout, fm.config.latent_dim, fm.config.hidden_width, 0);
        fm.generator.params().load_json(j.at("generator_params"));
        fm.critic = CriticNet(fm.pipeline.layout.width, fm.config.pac, fm.config.hidden_width, 0);
        fm.critic.params().load_json(j.at("critic_params"));
        return fm;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed checkpoint: ") + e.what());
    }
}

std::string checkpoint_dump(const FittedModel& model) { return checkpoint_to_json(model).dump(1) + "\n"; }

void save_checkpoint(const std::filesystem::path& path, const FittedModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << checkpoint_dump(model);
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

FittedModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace ctdgan
