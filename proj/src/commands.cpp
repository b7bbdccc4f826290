// SPDX-License-Identifier: Apache-2.0
#include "disagg/commands.hpp"

#include <cstdio>

#include "disagg/error.hpp"
#include "disagg/ingest.hpp"
#include "disagg/synth.hpp"
#include "disagg/util.hpp"

namespace disagg {

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(util::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void ensure_writable(const std::filesystem::path& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec || !std::filesystem::is_directory(out)) {
    throw ConfigError("cannot create output directory " + out.string());
  }
}

std::string csv_stats(const std::vector<std::string>& levels, const std::vector<FrameStats>& stats) {
  std::string out = "level,mean,std\n";
  for (std::size_t l = 0; l < levels.size(); ++l) {
    out += levels[l] + "," + util::format_double(stats[l].mean) + "," +
           util::format_double(stats[l].stddev) + "\n";
  }
  return out;
}

}  // namespace

std::string stats_table(const std::vector<std::string>& levels, const std::vector<FrameStats>& stats) {
  const auto pad = [](const std::string& v, std::size_t w) { return v + std::string(w - v.size(), ' '); };
  std::string head = pad("Data", 9);
  std::string row = pad("synthetic", 9);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const std::string cell = fixed(stats[l].mean) + " (" + fixed(stats[l].stddev) + ")";
    const std::size_t width = std::max(cell.size(), levels[l].size());
    head += " | " + pad(levels[l], width);
    row += " | " + pad(cell, width);
  }
  return head + "\n" + row + "\n";
}

SynthOutputs cmd_synth(const std::filesystem::path& config, const std::filesystem::path& out,
                       std::optional<std::uint64_t> seed, std::ostream& log) {
  auto cfg = parse_synth_config(read_json(config));
  if (seed) cfg.seed = *seed;
  ensure_writable(out);
  const auto res = synth_generate(cfg);
  const auto& h = res.hierarchy;

  util::write_file_atomic(out / "records.csv", points_to_csv(res.records));
  util::write_file_atomic(out / "hierarchy.json", h.to_json().dump(1) + "\n");
  write_level_frames(out / "frames", res.truth, h);

  SynthOutputs outputs;
  outputs.records = res.records.size();
  std::vector<std::string> names;
  for (std::size_t l = 0; l < h.level_count(); ++l) {
    names.push_back(h.level(l).name);
    outputs.stats.push_back(descriptive_stats(res.truth[l]));
  }
  util::write_file_atomic(out / "stats.csv", csv_stats(names, outputs.stats));
  if (cfg.splits) {
    const auto splits = make_splits(res.truth, parse_split_rule(*cfg.splits, cfg.window()));
    write_splits(out / "splits", splits, h);
  }
  log << "generated " << outputs.records << " records over " << cfg.hours << " hours\n"
      << stats_table(names, outputs.stats);
  return outputs;
}

IngestOutputs cmd_ingest(const std::filesystem::path& points, const std::filesystem::path& hierarchy,
                         const std::filesystem::path& splits_path, const std::filesystem::path& out,
                         std::ostream& log) {
  const auto h = load_hierarchy(hierarchy.string());
  const auto splits_json = read_json(splits_path);
  const auto records = read_points_csv(points);

  HourRange window = covering_window(records);
  if (splits_json.contains("window")) {
    window = parse_split_rule({{"train", splits_json.at("window")},
                               {"val", splits_json.at("window")},
                               {"test", splits_json.at("window")}},
                              {})
                 .train;
  } else if (!splits_json.contains("tail")) {
    const auto rule = parse_split_rule(splits_json, {});
    window = {rule.train.begin, rule.test.end};
  }
  if (window.length() <= 0) {
    throw DataError("cannot infer an hour window: no records and no explicit 'window' in " +
                    splits_path.string());
  }
  const auto rule = parse_split_rule(splits_json, window);
  ensure_writable(out);

  auto res = ingest_points(records, h, window);
  for (const auto& w : res.warnings) log << "warning: " << w << "\n";
  validate_level_frames(res.frames, h);
  const auto splits = make_splits(res.frames, rule);

  util::write_file_atomic(out / "hierarchy.json", h.to_json().dump(1) + "\n");
  write_level_frames(out / "frames", res.frames, h);
  write_splits(out / "splits", splits, h);

  IngestOutputs o;
  o.accepted = res.accepted;
  o.dropped = res.out_of_bounds + res.outside_window;
  o.train_rows = splits.train[0].hours();
  o.val_rows = splits.val[0].hours();
  o.test_rows = splits.test[0].hours();
  std::string summary = "split,rows,begin_hour,end_hour\n";
  const auto line = [&](const char* name, const HourRange& r) {
    summary += std::string(name) + "," + std::to_string(r.length()) + "," + std::to_string(r.begin) +
               "," + std::to_string(r.end) + "\n";
  };
  line("train", rule.train);
  line("val", rule.val);
  line("test", rule.test);
  util::write_file_atomic(out / "split_summary.csv", summary);
  nlohmann::json report = {{"records", records.size()},
                           {"accepted", res.accepted},
                           {"out_of_bounds", res.out_of_bounds},
                           {"outside_window", res.outside_window},
                           {"warnings", res.warnings}};
  util::write_file_atomic(out / "ingest_report.json", report.dump(2) + "\n");
  log << "Train " << o.train_rows << " | Val " << o.val_rows << " | Test " << o.test_rows << "\n"
      << "accepted " << o.accepted << " records, dropped " << o.dropped << " (" << res.out_of_bounds
      << " out of bounds, " << res.outside_window << " outside window)\n";
  return o;
}

RunSummary cmd_run(const std::filesystem::path& config, const std::filesystem::path& data,
                   const std::filesystem::path& out, std::size_t jobs,
                   std::optional<std::uint64_t> seed, std::ostream& log) {
  std::string text;
  nlohmann::json j;
  try {
    text = util::read_file(config);
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(config.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  auto m = ExperimentMatrix::from_json(j);
  if (seed) m.seeds = {*seed};
  const auto dataset = load_dataset(data);
  const auto cells = m.expand(dataset.hierarchy);
  ensure_writable(out);
  log << "running " << cells.size() << " cells\n";
  auto summary = run_matrix(m, dataset, out, jobs, text);
  log << util::read_file(out / "summary.csv");
  return summary;
}

PivotTable cmd_report(const std::filesystem::path& metrics, const std::filesystem::path& out,
                      const std::string& metric, std::ostream& log) {
  const auto rows = parse_metrics_csv(util::read_file(metrics));
  auto p = pivot(rows, metric);
  ensure_writable(out);
  const auto table = pivot_to_csv(p);
  util::write_file_atomic(out / ("pivot_" + metric + ".csv"), table);
  util::write_file_atomic(out / "metrics_long.csv", long_format_csv(rows));
  log << table;
  return p;
}

}  // namespace disagg
