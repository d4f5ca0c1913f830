#pragma once

#include <filesystem>
#include <string>

#include "ctdgan/trainer.hpp"

namespace ctdgan {

/// One JSON document holding everything needed to sample again: schema,
/// cluster model, pipeline, both networks, P_s, config and loss history,
/// behind a header with the schema hash, k, |Y| and the layout width.
nlohmann::json checkpoint_to_json(const FittedModel& model);
/// Throws ParseError when the header disagrees with the body.
FittedModel checkpoint_from_json(const nlohmann::json& j);

/// Serialized text; identical models give identical bytes.
std::string checkpoint_dump(const FittedModel& model);
void save_checkpoint(const std::filesystem::path& path, const FittedModel& model);
FittedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace ctdgan
