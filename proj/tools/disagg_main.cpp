// SPDX-License-Identifier: Apache-2.0
//
// disagg synth|ingest|run|report
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "disagg/commands.hpp"
#include "disagg/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical disaggregation of hourly urban count data"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::string data;
  std::string points;
  std::string hierarchy;
  std::string splits;
  std::string metrics;
  std::string metric = "mae_per_area";
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;

  auto* synth = app.add_subcommand("synth", "generate a synthetic city with ground truth");
  synth->add_option("--config", config, "synthetic city config (JSON)")->required();
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--seed", seed, "override the config seed");

  auto* ingest = app.add_subcommand("ingest", "count point records into per-level hourly splits");
  ingest->add_option("--points", points, "CSV with header timestamp,x,y")->required();
  ingest->add_option("--hierarchy", hierarchy, "hierarchy description (JSON)")->required();
  ingest->add_option("--splits,--config", splits, "split rule (JSON)")->required();
  ingest->add_option("--out", out, "output directory")->required();

  auto* run = app.add_subcommand("run", "run an experiment matrix");
  run->add_option("--config", config, "experiment matrix (JSON)")->required();
  run->add_option("--data", data, "dataset directory (hierarchy.json + splits/)")->required();
  run->add_option("--out", out, "output directory")->required();
  run->add_option("--jobs", jobs, "cells to run concurrently")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "replace the matrix seed list with one seed");

  auto* report = app.add_subcommand("report", "pivot a metrics CSV into comparison tables");
  report->add_option("--metrics,--config", metrics, "metrics.csv from `disagg run`")->required();
  report->add_option("--out", out, "output directory")->required();
  report->add_option("--metric", metric, "mae_raw or mae_per_area")
      ->check(CLI::IsMember({"mae_raw", "mae_per_area"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      disagg::cmd_synth(config, out, seed, std::cout);
    } else if (*ingest) {
      disagg::cmd_ingest(points, hierarchy, splits, out, std::cout);
    } else if (*run) {
      disagg::cmd_run(config, data, out, jobs, seed, std::cout);
    } else if (*report) {
      disagg::cmd_report(metrics, out, metric, std::cout);
    }
  } catch (const disagg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
