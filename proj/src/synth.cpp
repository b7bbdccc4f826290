// SPDX-License-Identifier: Apache-2.0
#include "disagg/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "disagg/error.hpp"

namespace disagg {

HourRange SynthConfig::window() const {
  const auto first = hour_of(start_time);
  return {first, first + static_cast<std::int64_t>(hours)};
}

void SynthConfig::validate() const {
  if (hours < 24) throw ConfigError("synth: hours must be >= 24");
  if (rows == 0 || cols == 0) throw ConfigError("synth: grid must be nonempty");
  if (!(cell_size_m >= 0.001) || !std::isfinite(cell_size_m)) {
    throw ConfigError("synth: cell_size_m must be >= 0.001");
  }
  if (start_time % 3600 != 0) throw ConfigError("synth: start_time must be hour aligned");
  if (!(daily_amplitude >= 0.0)) throw ConfigError("synth: daily_amplitude must be >= 0");
  if (!std::isfinite(daily_phase)) throw ConfigError("synth: daily_phase must be finite");
  for (std::size_t k = 0; k < hotspots.size(); ++k) {
    const auto& hs = hotspots[k];
    const auto field = "synth: hotspots[" + std::to_string(k) + "].";
    if (!(hs.amplitude >= 0.0) || !std::isfinite(hs.amplitude)) {
      throw ConfigError(field + "amplitude must be finite and >= 0");
    }
    if (!(hs.scale > 0.0) || !std::isfinite(hs.scale)) {
      throw ConfigError(field + "scale must be finite and > 0");
    }
    if (!std::isfinite(hs.center_x) || !std::isfinite(hs.center_y)) {
      throw ConfigError(field + "center must be finite");
    }
  }
  if (!level_names.empty() && level_names.size() != block_edges.size()) {
    throw ConfigError("synth: level_names and block_edges differ in length");
  }
}

SynthConfig parse_synth_config(const nlohmann::json& j) {
  SynthConfig c;
  try {
    const auto& g = j.at("grid");
    c.rows = g.at("rows").get<std::size_t>();
    c.cols = g.at("cols").get<std::size_t>();
    c.cell_size_m = g.at("cell_size_m").get<double>();
    if (j.contains("block_edges")) c.block_edges = j.at("block_edges").get<std::vector<std::size_t>>();
    if (j.contains("level_names")) c.level_names = j.at("level_names").get<std::vector<std::string>>();
    c.hotspots.clear();
    for (const auto& hj : j.value("hotspots", nlohmann::json::array())) {
      c.hotspots.push_back({hj.at("center_x").get<double>(), hj.at("center_y").get<double>(),
                            hj.at("scale").get<double>(), hj.at("amplitude").get<double>()});
    }
    c.daily_amplitude = j.value("daily_amplitude", 0.0);
    c.daily_phase = j.value("daily_phase", 0.0);
    c.hours = j.at("hours").get<std::size_t>();
    c.start_time = j.value("start_time", c.start_time);
    c.seed = j.value("seed", c.seed);
    if (j.contains("splits")) c.splits = j.at("splits");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

double synth_intensity(const SynthConfig& cfg, std::size_t cell, std::int64_t hour) {
  const double cx = (static_cast<double>(cell % cfg.cols) + 0.5) * cfg.cell_size_m;
  const double cy = (static_cast<double>(cell / cfg.cols) + 0.5) * cfg.cell_size_m;
  double spatial = 0.0;
  for (const auto& hs : cfg.hotspots) {
    const double dx = cx - hs.center_x;
    const double dy = cy - hs.center_y;
    spatial += hs.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * hs.scale * hs.scale));
  }
  const auto hod = static_cast<double>(((hour % 24) + 24) % 24);
  const double cycle =
      1.0 + cfg.daily_amplitude * std::sin(2.0 * std::numbers::pi * hod / 24.0 + cfg.daily_phase);
  return std::max(0.0, spatial * cycle);
}

SynthResult synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthResult res{regular_hierarchy(cfg.rows, cfg.cols, cfg.cell_size_m, cfg.block_edges,
                                    cfg.level_names),
                  {},
                  {}};
  const auto& h = res.hierarchy;
  const auto window = cfg.window();
  const std::size_t ncells = cfg.rows * cfg.cols;
  const auto edge_mm = static_cast<long long>(std::floor(cfg.cell_size_m * 1000.0));

  for (std::size_t l = 0; l < h.level_count(); ++l) {
    res.truth.push_back({h.level(l).name, window.begin,
                         Matrix::Zero(static_cast<Eigen::Index>(cfg.hours),
                                      static_cast<Eigen::Index>(h.level(l).size()))});
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<long long> second_dist(0, 3599);
  std::uniform_int_distribution<long long> offset_dist(0, edge_mm - 1);

  for (std::size_t t = 0; t < cfg.hours; ++t) {
    const std::int64_t hour = window.begin + static_cast<std::int64_t>(t);
    for (std::size_t cell = 0; cell < ncells; ++cell) {
      const double lambda = synth_intensity(cfg, cell, hour);
      if (lambda <= 0.0) continue;
      std::poisson_distribution<long long> pois(lambda);
      const long long n = pois(rng);
      if (n == 0) continue;
      const long long col_mm = static_cast<long long>(cell % cfg.cols) * edge_mm;
      const long long row_mm = static_cast<long long>(cell / cfg.cols) * edge_mm;
      for (long long i = 0; i < n; ++i) {
        PointRecord r;
        r.timestamp = hour * 3600 + second_dist(rng);
        r.x = static_cast<double>(col_mm + offset_dist(rng)) / 1000.0;
        r.y = static_cast<double>(row_mm + offset_dist(rng)) / 1000.0;
        res.records.push_back(r);
      }
      for (std::size_t l = 0; l < h.level_count(); ++l) {
        res.truth[l].counts(static_cast<Eigen::Index>(t),
                            static_cast<Eigen::Index>(h.unit_of_cell(l, cell))) +=
            static_cast<double>(n);
      }
    }
  }
  return res;
}

}  // namespace disagg
