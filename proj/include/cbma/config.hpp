#pragma once

#include "cbma/sampler.hpp"

#include <json.hpp>

namespace cbma {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

// JSON mirrors of the configuration structs. Missing keys keep their
// defaults, unknown keys are rejected so typos surface as errors.

Json to_json(const SamplerConfig& c);
SamplerConfig sampler_config_from_json(const Json& j);

Json to_json(const MgpsHyper& h);
MgpsHyper mgps_hyper_from_json(const Json& j);

}  // namespace cbma
