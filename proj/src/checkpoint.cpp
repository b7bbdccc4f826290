// SPDX-License-Identifier: Apache-2.0
#include "disagg/checkpoint.hpp"

#include "disagg/error.hpp"
#include "disagg/util.hpp"

namespace disagg {

namespace {
constexpr const char* kFormat = "disagg-checkpoint-v1";
}

nlohmann::json checkpoint_to_json(const Model& model, const GeoHierarchy& h) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto* p : model.parameters()) {
    const auto& v = p->value();
    std::vector<double> values(v.data(), v.data() + v.size());
    params.push_back({{"name", p->name()}, {"shape", {v.rows(), v.cols()}}, {"values", values}});
  }
  return {{"format", kFormat},
          {"architecture", model.spec().to_json()},
          {"seed", model.seed()},
          {"hierarchy_hash", h.hash()},
          {"parameters", std::move(params)}};
}

Model checkpoint_from_json(const nlohmann::json& j, const GeoHierarchy& h) {
  try {
    if (j.at("format").get<std::string>() != kFormat) throw DataError("unknown checkpoint format");
    if (j.at("hierarchy_hash").get<std::string>() != h.hash()) {
      throw DataError("checkpoint was trained on a different hierarchy");
    }
    Model model(ModelSpec::from_json(j.at("architecture")), h, j.at("seed").get<std::uint64_t>());
    const auto& stored = j.at("parameters");
    auto params = model.parameters();
    if (stored.size() != params.size()) {
      throw DataError("checkpoint has " + std::to_string(stored.size()) + " parameters, model has " +
                      std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& sj = stored.at(i);
      const auto name = sj.at("name").get<std::string>();
      const auto shape = sj.at("shape").get<std::vector<Eigen::Index>>();
      auto& v = params[i]->mutable_value();
      if (name != params[i]->name() || shape.size() != 2 || shape[0] != v.rows() ||
          shape[1] != v.cols()) {
        throw DataError("checkpoint parameter '" + name + "' does not match model parameter '" +
                        params[i]->name() + "' of shape (" + std::to_string(v.rows()) + "x" +
                        std::to_string(v.cols()) + ")");
      }
      const auto values = sj.at("values").get<std::vector<double>>();
      if (values.size() != static_cast<std::size_t>(v.size())) {
        throw DataError("checkpoint parameter '" + name + "' has the wrong number of values");
      }
      std::copy(values.begin(), values.end(), v.data());
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const GeoHierarchy& h) {
  util::write_file_atomic(path, checkpoint_to_json(model, h).dump() + "\n");
}

Model load_checkpoint(const std::filesystem::path& path, const GeoHierarchy& h) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(util::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j, h);
}

}  // namespace disagg
