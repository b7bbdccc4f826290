// SPDX-License-Identifier: Apache-2.0
#include "disagg/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "disagg/error.hpp"
#include "disagg/util.hpp"

namespace disagg {

IngestResult ingest_points(std::span<const PointRecord> records, const GeoHierarchy& h,
                           HourRange window) {
  if (window.length() <= 0) throw ConfigError("ingest window is empty");
  IngestResult res;
  const auto n = static_cast<Eigen::Index>(window.length());
  for (std::size_t l = 0; l < h.level_count(); ++l) {
    CountFrame f;
    f.level = h.level(l).name;
    f.first_hour = window.begin;
    f.counts = Matrix::Zero(n, static_cast<Eigen::Index>(h.level(l).size()));
    res.frames.push_back(std::move(f));
  }
  for (const auto& r : records) {
    const auto hour = hour_of(r.timestamp);
    if (hour < window.begin || hour >= window.end) {
      ++res.outside_window;
      continue;
    }
    auto cell = h.cell_at(r.x, r.y);
    if (!cell) {
      ++res.out_of_bounds;
      continue;
    }
    const auto t = static_cast<Eigen::Index>(hour - window.begin);
    for (std::size_t l = 0; l < h.level_count(); ++l) {
      res.frames[l].counts(t, static_cast<Eigen::Index>(h.unit_of_cell(l, *cell))) += 1.0;
    }
    ++res.accepted;
  }
  if (records.empty()) res.warnings.push_back("no records: all frames are zero");
  if (res.out_of_bounds > 0) {
    res.warnings.push_back(std::to_string(res.out_of_bounds) + " records outside the grid dropped");
  }
  if (res.outside_window > 0) {
    res.warnings.push_back(std::to_string(res.outside_window) +
                           " records outside the hour window dropped");
  }
  return res;
}

std::vector<PointRecord> read_points_csv(const std::filesystem::path& path) {
  std::istringstream in(util::read_file(path));
  std::string line;
  if (!std::getline(in, line)) return {};
  auto header = util::split(line, ',');
  if (header != std::vector<std::string>{"timestamp", "x", "y"}) {
    throw DataError(path.string() + ":1: header must be 'timestamp,x,y'");
  }
  std::vector<PointRecord> out;
  std::vector<std::size_t> bad;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    auto f = util::split(line, ',');
    try {
      if (f.size() != 3) throw DataError("field count");
      PointRecord r{util::parse_int(f[0]), util::parse_double(f[1]), util::parse_double(f[2])};
      if (!std::isfinite(r.x) || !std::isfinite(r.y)) throw DataError("non-finite");
      out.push_back(r);
    } catch (const DataError&) {
      bad.push_back(lineno);
    }
  }
  if (!bad.empty()) {
    std::string msg = path.string() + ": " + std::to_string(bad.size()) + " malformed line(s):";
    for (std::size_t i = 0; i < bad.size() && i < 20; ++i) msg += " " + std::to_string(bad[i]);
    if (bad.size() > 20) msg += " ...";
    throw DataError(msg);
  }
  return out;
}

std::string points_to_csv(std::span<const PointRecord> records) {
  std::string out = "timestamp,x,y\n";
  out.reserve(out.size() + records.size() * 32);
  char buf[96];
  for (const auto& r : records) {
    const int n = std::snprintf(buf, sizeof(buf), "%lld,%.3f,%.3f\n",
                                static_cast<long long>(r.timestamp), r.x, r.y);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

HourRange covering_window(std::span<const PointRecord> records) {
  if (records.empty()) return {};
  auto [lo, hi] = std::minmax_element(records.begin(), records.end(),
                                      [](const auto& a, const auto& b) {
                                        return a.timestamp < b.timestamp;
                                      });
  return {hour_of(lo->timestamp), hour_of(hi->timestamp) + 1};
}

}  // namespace disagg
