#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "mfg/model.hpp"

namespace mfg {

nlohmann::json model_to_json(const ModelParams& params);
ModelParams model_from_json(const nlohmann::json& j);

// Parses a model file (JSON, schema in docs/model.schema.md). Throws
// ConfigError on parse/shape problems.
ModelParams load_model_file(const std::string& path);

// Built-in presets, addressable by name wherever a model file is expected.
ModelParams make_paper_sec4();
ModelParams make_sticky_price();

// Resolves a --model argument: a preset name or a path to a model file.
ModelParams resolve_model(const std::string& name_or_path);

} // namespace mfg
