// SPDX-License-Identifier: Apache-2.0
#include "disagg/count_frame.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "disagg/error.hpp"
#include "disagg/util.hpp"

namespace disagg {

CountFrame CountFrame::slice_hours(std::int64_t begin, std::int64_t end) const {
  if (begin < first_hour || end > end_hour() || begin > end) {
    throw ConfigError("hour range [" + std::to_string(begin) + ", " + std::to_string(end) +
                      ") outside frame [" + std::to_string(first_hour) + ", " +
                      std::to_string(end_hour()) + ")");
  }
  CountFrame out;
  out.level = level;
  out.first_hour = begin;
  out.counts = counts.middleRows(begin - first_hour, end - begin);
  return out;
}

void validate_level_frames(const LevelFrames& frames, const GeoHierarchy& h) {
  if (frames.size() != h.level_count()) {
    throw DataError("expected " + std::to_string(h.level_count()) + " level frames, got " +
                    std::to_string(frames.size()));
  }
  for (std::size_t l = 0; l < frames.size(); ++l) {
    const auto& f = frames[l];
    if (f.level != h.level(l).name) {
      throw DataError("frame " + std::to_string(l) + " is for level '" + f.level +
                      "', expected '" + h.level(l).name + "'");
    }
    if (f.units() != h.level(l).size()) {
      throw DataError("frame for level '" + f.level + "' has " + std::to_string(f.units()) +
                      " units, hierarchy has " + std::to_string(h.level(l).size()));
    }
    if (f.first_hour != frames[0].first_hour || f.hours() != frames[0].hours()) {
      throw DataError("frames for '" + f.level + "' and '" + frames[0].level +
                      "' cover different hours");
    }
  }
  for (std::size_t l = 1; l < frames.size(); ++l) {
    const Vector a = frames[l].counts.rowwise().sum();
    const Vector b = frames[0].counts.rowwise().sum();
    for (Eigen::Index t = 0; t < a.size(); ++t) {
      if (std::abs(a(t) - b(t)) > 1e-9 * std::max(1.0, std::abs(b(t)))) {
        throw DataError("mass mismatch between levels '" + frames[0].level + "' and '" +
                        frames[l].level + "' at hour " +
                        std::to_string(frames[0].first_hour + t));
      }
    }
  }
}

SplitSet make_splits(const LevelFrames& frames, const SplitRule& rule) {
  if (frames.empty()) throw DataError("make_splits: no frames");
  const auto& ref = frames.front();
  const auto check = [&](const HourRange& r, const char* name) {
    if (r.length() <= 0) throw ConfigError(std::string("split '") + name + "' is empty");
    if (r.begin < ref.first_hour || r.end > ref.end_hour()) {
      throw ConfigError(std::string("split '") + name + "' [" + std::to_string(r.begin) + ", " +
                        std::to_string(r.end) + ") outside data hours [" +
                        std::to_string(ref.first_hour) + ", " + std::to_string(ref.end_hour()) +
                        ")");
    }
  };
  check(rule.train, "train");
  check(rule.val, "val");
  check(rule.test, "test");
  if (rule.train.end > rule.val.begin || rule.val.end > rule.test.begin) {
    throw ConfigError("splits overlap or are not ordered train < val < test");
  }
  SplitSet s;
  s.rule = rule;
  for (const auto& f : frames) {
    s.train.push_back(f.slice_hours(rule.train.begin, rule.train.end));
    s.val.push_back(f.slice_hours(rule.val.begin, rule.val.end));
    s.test.push_back(f.slice_hours(rule.test.begin, rule.test.end));
  }
  return s;
}

SplitRule tail_split_rule(HourRange window, std::int64_t val_hours, std::int64_t test_hours) {
  if (val_hours <= 0 || test_hours <= 0 || val_hours + test_hours >= window.length()) {
    throw ConfigError("tail split needs positive val/test hours leaving a nonempty train split");
  }
  SplitRule r;
  r.test = {window.end - test_hours, window.end};
  r.val = {r.test.begin - val_hours, r.test.begin};
  r.train = {window.begin, r.val.begin};
  return r;
}

std::int64_t day_start_hour(int year, unsigned month, unsigned day) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                           std::chrono::day{day}};
  if (!ymd.ok()) throw ConfigError("invalid calendar date");
  return sys_days{ymd}.time_since_epoch().count() * 24;
}

std::int64_t parse_date_hour(const std::string& s) {
  auto parts = util::split(s, '-');
  if (parts.size() != 3) throw ConfigError("date '" + s + "' is not YYYY-MM-DD");
  try {
    return day_start_hour(static_cast<int>(util::parse_int(parts[0])),
                          static_cast<unsigned>(util::parse_int(parts[1])),
                          static_cast<unsigned>(util::parse_int(parts[2])));
  } catch (const DataError&) {
    throw ConfigError("date '" + s + "' is not YYYY-MM-DD");
  } catch (const ConfigError&) {
    throw ConfigError("date '" + s + "' is not a valid calendar date");
  }
}

SplitRule parse_split_rule(const nlohmann::json& j, HourRange window) {
  try {
    if (j.contains("tail")) {
      const auto& t = j.at("tail");
      return tail_split_rule(window, t.at("val_hours").get<std::int64_t>(),
                             t.at("test_hours").get<std::int64_t>());
    }
    const auto range = [&](const char* name) {
      const auto& r = j.at(name);
      if (r.contains("start")) {
        const auto begin = parse_date_hour(r.at("start").get<std::string>());
        const auto end = parse_date_hour(r.at("end").get<std::string>()) + 24;
        return HourRange{begin, end};
      }
      return HourRange{r.at("begin_hour").get<std::int64_t>(), r.at("end_hour").get<std::int64_t>()};
    };
    return SplitRule{range("train"), range("val"), range("test")};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("splits config: ") + e.what());
  }
}

FrameStats descriptive_stats(const CountFrame& frame) {
  if (frame.counts.size() == 0) throw DataError("descriptive_stats: empty frame");
  const double n = static_cast<double>(frame.counts.size());
  const double mean = frame.counts.sum() / n;
  const double var = (frame.counts.array() - mean).square().sum() / n;
  return {mean, std::sqrt(var)};
}

std::string frame_to_csv(const CountFrame& frame, const GeoHierarchy& h) {
  const auto& lvl = h.level(h.level_index(frame.level));
  std::string out = "hour";
  for (const auto& id : lvl.unit_ids) {
    out += ',';
    out += id;
  }
  out += '\n';
  for (std::size_t t = 0; t < frame.hours(); ++t) {
    out += std::to_string(frame.first_hour + static_cast<std::int64_t>(t));
    for (std::size_t u = 0; u < frame.units(); ++u) {
      out += ',';
      out += util::format_double(frame.counts(static_cast<Eigen::Index>(t),
                                              static_cast<Eigen::Index>(u)));
    }
    out += '\n';
  }
  return out;
}

void write_frame(const std::filesystem::path& csv_path, const CountFrame& frame,
                 const GeoHierarchy& h) {
  util::write_file_atomic(csv_path, frame_to_csv(frame, h));
  nlohmann::json side = {{"level", frame.level},
                         {"hierarchy_hash", h.hash()},
                         {"first_hour", frame.first_hour},
                         {"hours", frame.hours()},
                         {"units", frame.units()}};
  auto side_path = csv_path;
  side_path += ".json";
  util::write_file_atomic(side_path, side.dump(2) + "\n");
}

CountFrame read_frame(const std::filesystem::path& csv_path, const GeoHierarchy& h,
                      const std::string& level) {
  const auto& lvl = h.level(h.level_index(level));
  std::istringstream in(util::read_file(csv_path));
  std::string line;
  const auto where = [&](std::size_t n) { return csv_path.string() + ":" + std::to_string(n); };
  if (!std::getline(in, line)) throw DataError(where(1) + ": missing header");
  auto header = util::split(line, ',');
  if (header.size() != lvl.size() + 1 || header[0] != "hour") {
    throw DataError(where(1) + ": header must be hour + " + std::to_string(lvl.size()) +
                    " unit ids of level '" + level + "'");
  }
  for (std::size_t u = 0; u < lvl.size(); ++u) {
    if (header[u + 1] != lvl.unit_ids[u]) {
      throw DataError(where(1) + ": column " + std::to_string(u + 1) + " is '" + header[u + 1] +
                      "', expected '" + lvl.unit_ids[u] + "'");
    }
  }
  std::vector<std::vector<double>> rows;
  CountFrame f;
  f.level = level;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    auto fields = util::split(line, ',');
    if (fields.size() != header.size()) {
      throw DataError(where(lineno) + ": expected " + std::to_string(header.size()) + " fields");
    }
    try {
      const auto hour = util::parse_int(fields[0]);
      if (rows.empty()) {
        f.first_hour = hour;
      } else if (hour != f.first_hour + static_cast<std::int64_t>(rows.size())) {
        throw DataError("hours must be contiguous and ascending");
      }
      std::vector<double> row(lvl.size());
      for (std::size_t u = 0; u < lvl.size(); ++u) row[u] = util::parse_double(fields[u + 1]);
      rows.push_back(std::move(row));
    } catch (const DataError& e) {
      throw DataError(where(lineno) + ": " + e.what());
    }
  }
  f.counts.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(lvl.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t u = 0; u < lvl.size(); ++u) {
      f.counts(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(u)) = rows[t][u];
    }
  }
  return f;
}

void write_level_frames(const std::filesystem::path& dir, const LevelFrames& frames,
                        const GeoHierarchy& h) {
  for (const auto& f : frames) write_frame(dir / (f.level + ".csv"), f, h);
}

LevelFrames read_level_frames(const std::filesystem::path& dir, const GeoHierarchy& h) {
  LevelFrames out;
  for (std::size_t l = 0; l < h.level_count(); ++l) {
    const auto& name = h.level(l).name;
    out.push_back(read_frame(dir / (name + ".csv"), h, name));
  }
  validate_level_frames(out, h);
  return out;
}

}  // namespace disagg
