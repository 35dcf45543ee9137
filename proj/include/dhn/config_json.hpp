#ifndef DHN_CONFIG_JSON_HPP
#define DHN_CONFIG_JSON_HPP

#include <json.hpp>

#include "dhn/model.hpp"

namespace dhn {

nlohmann::json config_to_json(const DhnConfig& cfg);
DhnConfig config_from_json(const nlohmann::json& j);

}  // namespace dhn

#endif
