#pragma once

#include <json.hpp>

#include "cofacil/backend.hpp"

namespace cofacil {

// Built from data/mock/*.json at configure time, so the binaries run in mock
// mode without any files on disk.
const nlohmann::json& default_extraction_rules();
const nlohmann::json& default_advisor_script();
const nlohmann::json& default_summary_script();

}  // namespace cofacil
