// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include <json.hpp>

#include "disagg/geo_hierarchy.hpp"
#include "disagg/models.hpp"

namespace disagg {

/// JSON manifest: architecture descriptor, seed, hierarchy hash and every
/// parameter as {name, shape: [rows, cols], values: row-major}.
nlohmann::json checkpoint_to_json(const Model& model, const GeoHierarchy& h);
Model checkpoint_from_json(const nlohmann::json& j, const GeoHierarchy& h);

void save_checkpoint(const std::filesystem::path& path, const Model& model, const GeoHierarchy& h);
/// Rejects a different hierarchy hash, missing parameters and shape mismatches.
Model load_checkpoint(const std::filesystem::path& path, const GeoHierarchy& h);

}  // namespace disagg
