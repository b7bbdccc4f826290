// SPDX-License-Identifier: Apache-2.0
#include "disagg/baselines.hpp"

#include <algorithm>
#include <sstream>

#include "disagg/error.hpp"
#include "disagg/util.hpp"

namespace disagg {

namespace {

RatioTable table_from_weights(const GeoHierarchy& h, std::size_t coarse, std::size_t fine,
                              const std::vector<double>& weight) {
  RatioTable t;
  t.coarse_level = coarse;
  t.fine_level = fine;
  t.parent_of = h.ancestors(fine, coarse);
  std::vector<double> total(h.level(coarse).size(), 0.0);
  for (std::size_t u = 0; u < weight.size(); ++u) total[t.parent_of[u]] += weight[u];
  t.ratio.resize(weight.size());
  for (std::size_t u = 0; u < weight.size(); ++u) t.ratio[u] = weight[u] / total[t.parent_of[u]];
  return t;
}

void check_length(std::span<const double> x, std::size_t expected) {
  if (x.size() != expected) {
    throw DataError("disaggregate: input length " + std::to_string(x.size()) +
                    " does not match coarse dimension " + std::to_string(expected));
  }
}

}  // namespace

RatioTable cw_table(const GeoHierarchy& h, std::size_t coarse, std::size_t fine) {
  return table_from_weights(h, coarse, fine, std::vector<double>(h.level(fine).size(), 1.0));
}

RatioTable aw_table(const GeoHierarchy& h, std::size_t coarse, std::size_t fine) {
  return table_from_weights(h, coarse, fine, h.level(fine).unit_area);
}

Vector cw_disaggregate(std::span<const double> x_coarse, const GeoHierarchy& h,
                       std::size_t coarse, std::size_t fine) {
  check_length(x_coarse, h.level(coarse).size());
  return hr_disaggregate(x_coarse, cw_table(h, coarse, fine));
}

Vector aw_disaggregate(std::span<const double> x_coarse, const GeoHierarchy& h,
                       std::size_t coarse, std::size_t fine) {
  check_length(x_coarse, h.level(coarse).size());
  return hr_disaggregate(x_coarse, aw_table(h, coarse, fine));
}

RatioTable hr_fit(const CountFrame& train_coarse, const CountFrame& train_fine,
                  const GeoHierarchy& h) {
  const std::size_t coarse = h.level_index(train_coarse.level);
  const std::size_t fine = h.level_index(train_fine.level);
  if (fine <= coarse) {
    throw ConfigError("hr_fit: level '" + train_fine.level + "' is not below '" +
                      train_coarse.level + "'");
  }
  if (train_coarse.first_hour != train_fine.first_hour ||
      train_coarse.hours() != train_fine.hours()) {
    throw DataError("hr_fit: coarse and fine frames cover different hours");
  }
  if (train_coarse.units() != h.level(coarse).size() || train_fine.units() != h.level(fine).size()) {
    throw DataError("hr_fit: frame widths do not match the hierarchy");
  }
  RatioTable t;
  t.coarse_level = coarse;
  t.fine_level = fine;
  t.parent_of = h.ancestors(fine, coarse);
  const Vector parent_total = train_coarse.counts.colwise().sum().transpose();
  const Vector child_total = train_fine.counts.colwise().sum().transpose();
  const auto children = h.descendants(coarse, fine);
  t.ratio.assign(t.parent_of.size(), 0.0);
  for (std::size_t p = 0; p < children.size(); ++p) {
    const double total = parent_total(static_cast<Eigen::Index>(p));
    for (std::size_t c : children[p]) {
      t.ratio[c] = total > 0.0 ? child_total(static_cast<Eigen::Index>(c)) / total
                               : 1.0 / static_cast<double>(children[p].size());
    }
  }
  return t;
}

Vector hr_disaggregate(std::span<const double> x_coarse, const RatioTable& table) {
  std::size_t d_coarse = 0;
  for (std::size_t p : table.parent_of) d_coarse = std::max(d_coarse, p + 1);
  check_length(x_coarse, d_coarse);
  Vector out(static_cast<Eigen::Index>(table.ratio.size()));
  for (std::size_t c = 0; c < table.ratio.size(); ++c) {
    out(static_cast<Eigen::Index>(c)) = table.ratio[c] * x_coarse[table.parent_of[c]];
  }
  return out;
}

Matrix disaggregate_rows(const Matrix& x_coarse, const RatioTable& table) {
  Matrix out(x_coarse.rows(), static_cast<Eigen::Index>(table.ratio.size()));
  for (Eigen::Index r = 0; r < x_coarse.rows(); ++r) {
    const auto row = x_coarse.row(r);
    out.row(r) = hr_disaggregate(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), table)
                     .transpose();
  }
  return out;
}

std::string ratio_table_to_csv(const RatioTable& table, const GeoHierarchy& h) {
  const auto& fine = h.level(table.fine_level);
  const auto& coarse = h.level(table.coarse_level);
  std::string out = "fine_unit,parent_unit,ratio\n";
  for (std::size_t c = 0; c < table.ratio.size(); ++c) {
    out += fine.unit_ids[c] + "," + coarse.unit_ids[table.parent_of[c]] + "," +
           util::format_double(table.ratio[c]) + "\n";
  }
  return out;
}

RatioTable read_ratio_table(const std::filesystem::path& path, const GeoHierarchy& h,
                            std::size_t coarse, std::size_t fine) {
  RatioTable t;
  t.coarse_level = coarse;
  t.fine_level = fine;
  t.parent_of = h.ancestors(fine, coarse);
  t.ratio.assign(t.parent_of.size(), -1.0);
  const auto& fl = h.level(fine);
  const auto& cl = h.level(coarse);
  std::istringstream in(util::read_file(path));
  std::string line;
  std::getline(in, line);
  if (util::trim(line) != "fine_unit,parent_unit,ratio") {
    throw DataError(path.string() + ":1: header must be 'fine_unit,parent_unit,ratio'");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    auto f = util::split(line, ',');
    const auto where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (f.size() != 3) throw DataError(where + "expected 3 fields");
    auto it = std::find(fl.unit_ids.begin(), fl.unit_ids.end(), f[0]);
    if (it == fl.unit_ids.end()) throw DataError(where + "unknown fine unit '" + f[0] + "'");
    const auto c = static_cast<std::size_t>(it - fl.unit_ids.begin());
    if (cl.unit_ids[t.parent_of[c]] != f[1]) throw DataError(where + "wrong parent for '" + f[0] + "'");
    t.ratio[c] = util::parse_double(f[2]);
  }
  for (std::size_t c = 0; c < t.ratio.size(); ++c) {
    if (t.ratio[c] < 0.0) throw DataError(path.string() + ": missing ratio for '" + fl.unit_ids[c] + "'");
  }
  return t;
}

}  // namespace disagg
