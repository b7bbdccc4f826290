// SPDX-License-Identifier: Apache-2.0
#include "disagg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "disagg/baselines.hpp"
#include "disagg/checkpoint.hpp"
#include "disagg/error.hpp"
#include "disagg/util.hpp"

namespace disagg {

namespace {

const std::set<std::string> kBaselines{"CW", "AW", "HR"};
const std::set<std::string> kNeural{"FNN", "LSTM"};

std::string weighting_label(bool weighted) { return weighted ? "weighted" : "unweighted"; }

}  // namespace

std::string Cell::id() const {
  std::string s = task.source + "-" + task.target + "_" + model;
  if (trained()) {
    s += "_" + scheme + "_" + weighting;
    if (seed) s += "_s" + std::to_string(*seed);
  }
  std::replace(s.begin(), s.end(), '+', '_');
  return s;
}

ExperimentMatrix ExperimentMatrix::from_json(const nlohmann::json& j) {
  ExperimentMatrix m;
  try {
    for (const auto& t : j.at("tasks")) {
      m.tasks.push_back({t.at("source").get<std::string>(), t.at("target").get<std::string>()});
    }
    m.models = j.at("models").get<std::vector<std::string>>();
    if (j.contains("schemes")) m.schemes = j.at("schemes").get<std::vector<std::string>>();
    if (j.contains("weighting")) {
      m.weightings.clear();
      for (const auto& w : j.at("weighting")) {
        const auto s = w.get<std::string>();
        if (s != "weighted" && s != "unweighted") {
          throw ConfigError("weighting must be 'weighted' or 'unweighted', got '" + s + "'");
        }
        m.weightings.push_back(s == "weighted");
      }
    }
    if (j.contains("seeds")) m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("train")) {
      const auto& t = j.at("train");
      m.train.batch_size = t.value("batch_size", m.train.batch_size);
      m.train.learning_rate = t.value("learning_rate", m.train.learning_rate);
      m.train.max_epochs = t.value("max_epochs", m.train.max_epochs);
      m.train.patience = t.value("patience", m.train.patience);
    }
    m.fnn_hidden = j.value("fnn_hidden", m.fnn_hidden);
    m.lstm_head_hidden = j.value("lstm_head_hidden", m.lstm_head_hidden);
    m.lstm_hidden = j.value("lstm_hidden", m.lstm_hidden);
    m.window = j.value("window", m.window);
    m.lstm_finest = j.value("lstm_finest", m.lstm_finest);
    m.clamp = j.value("clamp", m.clamp);
    m.save_checkpoints = j.value("save_checkpoints", m.save_checkpoints);
    for (const auto& c : j.value("cells", nlohmann::json::array())) {
      Cell cell;
      cell.task = {c.at("source").get<std::string>(), c.at("target").get<std::string>()};
      cell.model = c.at("model").get<std::string>();
      cell.scheme = c.value("scheme", std::string(kBaselines.count(cell.model) ? "-" : "plain"));
      cell.weighting = c.value("weighting", std::string(kBaselines.count(cell.model) ? "-" : "weighted"));
      if (c.contains("seed")) cell.seed = c.at("seed").get<std::uint64_t>();
      m.cells.push_back(std::move(cell));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("matrix config: ") + e.what());
  }
  return m;
}

nlohmann::json ExperimentMatrix::to_json() const {
  nlohmann::json tasks_j = nlohmann::json::array();
  for (const auto& t : tasks) tasks_j.push_back({{"source", t.source}, {"target", t.target}});
  std::vector<std::string> w;
  for (bool b : weightings) w.push_back(weighting_label(b));
  return {{"tasks", tasks_j},
          {"models", models},
          {"schemes", schemes},
          {"weighting", w},
          {"seeds", seeds},
          {"train",
           {{"batch_size", train.batch_size},
            {"learning_rate", train.learning_rate},
            {"max_epochs", train.max_epochs},
            {"patience", train.patience}}},
          {"fnn_hidden", fnn_hidden},
          {"lstm_head_hidden", lstm_head_hidden},
          {"lstm_hidden", lstm_hidden},
          {"window", window},
          {"lstm_finest", lstm_finest},
          {"clamp", clamp},
          {"save_checkpoints", save_checkpoints}};
}

void ExperimentMatrix::validate(const GeoHierarchy& h) const {
  train.validate();
  if (window < 1) throw ConfigError("window must be >= 1");
  const auto check_task = [&](const Task& t) {
    const auto s = h.find_level(t.source);
    const auto f = h.find_level(t.target);
    if (!s) throw ConfigError("task " + t.label() + ": unknown level '" + t.source + "'");
    if (!f) throw ConfigError("task " + t.label() + ": unknown level '" + t.target + "'");
    if (*f <= *s) throw ConfigError("task " + t.label() + ": target is not below source");
  };
  const auto check_pair = [&](const std::string& model, const std::string& scheme) {
    if (!kBaselines.count(model) && !kNeural.count(model)) {
      throw ConfigError("unknown model '" + model + "'");
    }
    if (kBaselines.count(model)) {
      if (scheme != "-" && scheme != "plain") {
        throw ConfigError("model " + model + " does not train; scheme '" + scheme +
                          "' is invalid for it");
      }
      return;
    }
    LossScheme::parse(scheme, true).validate();
  };
  if (cells.empty()) {
    if (tasks.empty()) throw ConfigError("matrix has no tasks");
    if (models.empty()) throw ConfigError("matrix has no models");
    for (const auto& t : tasks) check_task(t);
    bool any_neural = false;
    for (const auto& m : models) {
      if (!kBaselines.count(m) && !kNeural.count(m)) {
        throw ConfigError("unknown model '" + m + "'");
      }
      any_neural = any_neural || kNeural.count(m) > 0;
    }
    if (any_neural) {
      if (schemes.empty()) throw ConfigError("matrix has neural models but no schemes");
      if (weightings.empty()) throw ConfigError("matrix has no weighting modes");
      if (seeds.empty()) throw ConfigError("matrix has neural models but no seeds");
      for (const auto& s : schemes) check_pair("FNN", s);
    }
  } else {
    for (const auto& c : cells) {
      check_task(c.task);
      check_pair(c.model, c.scheme);
      if (kNeural.count(c.model) && c.weighting != "weighted" && c.weighting != "unweighted") {
        throw ConfigError("cell " + c.id() + ": weighting must be weighted or unweighted");
      }
    }
  }
}

std::vector<Cell> ExperimentMatrix::expand(const GeoHierarchy& h) const {
  validate(h);
  if (!cells.empty()) {
    std::vector<Cell> out;
    for (const auto& c : cells) {
      if (kNeural.count(c.model) && !c.seed) {
        for (auto s : seeds) {
          Cell x = c;
          x.seed = s;
          out.push_back(std::move(x));
        }
      } else {
        out.push_back(c);
      }
    }
    return out;
  }
  const std::size_t finest = h.level_count() - 1;
  std::vector<Cell> out;
  for (const auto& task : tasks) {
    for (const auto& model : models) {
      if (kBaselines.count(model)) {
        out.push_back({task, model, "-", "-", std::nullopt});
        continue;
      }
      if (model == "LSTM" && !lstm_finest && h.level_index(task.target) == finest) continue;
      for (const auto& scheme : schemes) {
        const auto ls = LossScheme::parse(scheme, true);
        // a single-term objective is identical under both weightings
        const bool single_term = !ls.cot;
        for (bool w : weightings) {
          for (auto seed : seeds) {
            out.push_back({task, model, scheme, single_term ? "-" : weighting_label(w), seed});
          }
          if (single_term) break;
        }
      }
    }
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d{load_hierarchy((dir / "hierarchy.json").string()), {}};
  d.splits.train = read_level_frames(dir / "splits" / "train", d.hierarchy);
  d.splits.val = read_level_frames(dir / "splits" / "val", d.hierarchy);
  d.splits.test = read_level_frames(dir / "splits" / "test", d.hierarchy);
  const auto range = [](const LevelFrames& f) { return HourRange{f[0].first_hour, f[0].end_hour()}; };
  d.splits.rule = {range(d.splits.train), range(d.splits.val), range(d.splits.test)};
  return d;
}

void write_splits(const std::filesystem::path& dir, const SplitSet& splits, const GeoHierarchy& h) {
  write_level_frames(dir / "train", splits.train, h);
  write_level_frames(dir / "val", splits.val, h);
  write_level_frames(dir / "test", splits.test, h);
}

CellOutcome run_cell(const Cell& cell, const ExperimentMatrix& m, const Dataset& data,
                     const std::filesystem::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  const auto& h = data.hierarchy;
  const auto src = h.level_index(cell.task.source);
  const auto tgt = h.level_index(cell.task.target);
  CellOutcome out;
  out.row.cell = cell;

  if (!cell.trained()) {
    RatioTable table = cell.model == "CW"   ? cw_table(h, src, tgt)
                       : cell.model == "AW" ? aw_table(h, src, tgt)
                                            : hr_fit(data.splits.train[src], data.splits.train[tgt], h);
    const Matrix pred = disaggregate_rows(data.splits.test[src].counts, table);
    out.report = evaluate(pred, data.splits.test[tgt].counts, h.level(tgt).unit_area, m.clamp);
    if (cell.model == "HR") {
      util::write_file_atomic(out_dir / "runs" / cell.id() / "ratios.csv", ratio_table_to_csv(table, h));
    }
  } else {
    const auto scheme = LossScheme::parse(cell.scheme, cell.weighting != "unweighted");
    ModelSpec spec;
    spec.family = parse_family(cell.model);
    spec.source = cell.task.source;
    spec.target = cell.task.target;
    spec.cot = scheme.cot;
    spec.hidden_widths = spec.family == Family::FNN ? m.fnn_hidden : m.lstm_head_hidden;
    spec.lstm_hidden = m.lstm_hidden;
    spec.window = spec.family == Family::LSTM ? m.window : 1;
    TrainConfig cfg = m.train;
    cfg.seed = cell.seed.value_or(0);
    auto result = train(build_model(spec, h, cfg.seed), data.splits, h, scheme, cfg);
    out.report = evaluate_model(result.model, data.splits.test, h, scheme, m.clamp);
    out.report.best_epoch = result.best_epoch;
    out.report.epochs_run = result.epochs_run;
    out.history = std::move(result.history);
    out.row.best_epoch = result.best_epoch;
    out.row.epochs_run = result.epochs_run;
    const auto dir = out_dir / "runs" / cell.id();
    util::write_file_atomic(dir / "history.csv", history_to_csv(out.history));
    if (m.save_checkpoints) save_checkpoint(dir / "checkpoint.json", result.model, h);
  }
  out.row.mae_raw = out.report.mae_raw;
  out.row.mae_per_area = out.report.mae_per_area;

  nlohmann::json eval = {{"task", cell.task.label()},
                         {"model", cell.model},
                         {"scheme", cell.scheme},
                         {"weighting", cell.weighting},
                         {"mae_raw", out.report.mae_raw},
                         {"mae_per_area", out.report.mae_per_area},
                         {"level_terms", out.report.level_terms},
                         {"epochs_run", out.report.epochs_run},
                         {"best_epoch", out.report.best_epoch}};
  if (cell.seed) eval["seed"] = *cell.seed;
  util::write_file_atomic(out_dir / "runs" / cell.id() / "eval.json", eval.dump(2) + "\n");
  out.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

RunSummary run_matrix(const ExperimentMatrix& m, const Dataset& data,
                      const std::filesystem::path& out_dir, std::size_t jobs,
                      const std::string& config_text) {
  const auto cells = m.expand(data.hierarchy);
  RunSummary summary;
  summary.outcomes.resize(cells.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  const auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      {
        std::lock_guard lock(failure_mu);
        if (failure) return;
      }
      try {
        summary.outcomes[i] = run_cell(cells[i], m, data, out_dir);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<MetricsRow> rows;
  for (const auto& o : summary.outcomes) rows.push_back(o.row);
  util::write_file_atomic(out_dir / "metrics.csv", metrics_to_csv(rows));
  util::write_file_atomic(out_dir / "summary.csv", summary_to_csv(rows));

  nlohmann::json timings = nlohmann::json::object();
  for (const auto& o : summary.outcomes) timings[o.row.cell.id()] = o.runtime_s;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  nlohmann::json manifest = {{"config_hash", util::sha256_hex(config_text.empty() ? m.to_json().dump() : config_text)},
                             {"hierarchy_hash", data.hierarchy.hash()},
                             {"version", "disagg 1.0.0"},
                             {"seeds", m.seeds},
                             {"jobs", n},
                             {"cells", cells.size()},
                             {"runtime_s", timings},
                             {"finished_at", stamp}};
  util::write_file_atomic(out_dir / "run_manifest.json", manifest.dump(2) + "\n");
  return summary;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "task,model,scheme,weighting,seed,mae_raw,mae_per_area,best_epoch,epochs_run\n";
  for (const auto& r : rows) {
    out += r.cell.task.label() + "," + r.cell.model + "," + r.cell.scheme + "," + r.cell.weighting +
           "," + (r.cell.seed ? std::to_string(*r.cell.seed) : "-") + "," +
           util::format_double(r.mae_raw) + "," + util::format_double(r.mae_per_area) + "," +
           std::to_string(r.best_epoch) + "," + std::to_string(r.epochs_run) + "\n";
  }
  return out;
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::vector<MetricsRow> rows;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line(util::trim(std::string_view(text).substr(pos, end - pos)));
    pos = end + 1;
    ++lineno;
    if (line.empty()) continue;
    const auto f = util::split(line, ',');
    if (!header_seen) {
      if (f.size() < 7 || f[0] != "task" || f[1] != "model" || f[2] != "scheme" ||
          f[3] != "weighting" || f[4] != "seed" || f[5] != "mae_raw" || f[6] != "mae_per_area") {
        throw DataError("metrics CSV line 1: unexpected header");
      }
      header_seen = true;
      continue;
    }
    try {
      if (f.size() != 9) throw DataError("expected 9 fields");
      MetricsRow r;
      const auto arrow = f[0].find("->");
      if (arrow == std::string::npos) throw DataError("task must be 'source->target'");
      r.cell.task = {f[0].substr(0, arrow), f[0].substr(arrow + 2)};
      r.cell.model = f[1];
      r.cell.scheme = f[2];
      r.cell.weighting = f[3];
      if (f[4] != "-") r.cell.seed = static_cast<std::uint64_t>(util::parse_int(f[4]));
      r.mae_raw = util::parse_double(f[5]);
      r.mae_per_area = util::parse_double(f[6]);
      r.best_epoch = static_cast<std::size_t>(util::parse_int(f[7]));
      r.epochs_run = static_cast<std::size_t>(util::parse_int(f[8]));
      rows.push_back(std::move(r));
    } catch (const DataError& e) {
      throw DataError("metrics CSV line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!header_seen) throw DataError("metrics CSV is empty");
  return rows;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

std::string group_key(const MetricsRow& r) {
  return r.cell.task.label() + "," + r.cell.model + "," + r.cell.scheme + "," + r.cell.weighting;
}

std::string column_key(const MetricsRow& r) {
  std::string k = r.cell.model;
  if (r.cell.scheme != "-") k += "/" + r.cell.scheme;
  if (r.cell.weighting != "-") k += "/" + r.cell.weighting;
  return k;
}

}  // namespace

std::string summary_to_csv(const std::vector<MetricsRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : rows) {
    const auto k = group_key(r);
    if (!groups.count(k)) order.push_back(k);
    groups[k].first.push_back(r.mae_raw);
    groups[k].second.push_back(r.mae_per_area);
  }
  std::string out = "task,model,scheme,weighting,n,median_mae_raw,median_mae_per_area\n";
  for (const auto& k : order) {
    const auto& [raw, area] = groups[k];
    out += k + "," + std::to_string(raw.size()) + "," + util::format_double(median(raw)) + "," +
           util::format_double(median(area)) + "\n";
  }
  return out;
}

PivotTable pivot(const std::vector<MetricsRow>& rows, const std::string& metric) {
  if (metric != "mae_raw" && metric != "mae_per_area") {
    throw ConfigError("metric must be mae_raw or mae_per_area");
  }
  PivotTable p;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> acc;
  for (const auto& r : rows) {
    const auto task = r.cell.task.label();
    const auto col = column_key(r);
    auto ti = std::find(p.tasks.begin(), p.tasks.end(), task);
    if (ti == p.tasks.end()) ti = p.tasks.insert(p.tasks.end(), task);
    auto ci = std::find(p.columns.begin(), p.columns.end(), col);
    if (ci == p.columns.end()) ci = p.columns.insert(p.columns.end(), col);
    acc[{static_cast<std::size_t>(ti - p.tasks.begin()), static_cast<std::size_t>(ci - p.columns.begin())}]
        .push_back(metric == "mae_raw" ? r.mae_raw : r.mae_per_area);
  }
  p.values.assign(p.tasks.size(), std::vector<std::optional<double>>(p.columns.size()));
  p.counts.assign(p.tasks.size(), std::vector<std::size_t>(p.columns.size(), 0));
  for (const auto& [key, vals] : acc) {
    p.values[key.first][key.second] = median(vals);
    p.counts[key.first][key.second] = vals.size();
  }
  for (std::size_t t = 0; t < p.tasks.size(); ++t) {
    std::optional<std::size_t> arg;
    for (std::size_t c = 0; c < p.columns.size(); ++c) {
      if (p.values[t][c] && (!arg || *p.values[t][c] < *p.values[t][*arg])) arg = c;
    }
    p.best.push_back(arg ? p.columns[*arg] : "");
  }
  return p;
}

std::string pivot_to_csv(const PivotTable& p) {
  std::string out = "task";
  for (const auto& c : p.columns) out += "," + c;
  out += ",best\n";
  for (std::size_t t = 0; t < p.tasks.size(); ++t) {
    out += p.tasks[t];
    for (std::size_t c = 0; c < p.columns.size(); ++c) {
      out += ",";
      if (p.values[t][c]) out += util::format_double(*p.values[t][c]);
    }
    out += "," + p.best[t] + "\n";
  }
  return out;
}

std::string long_format_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "task,model,scheme,weighting,seed,metric,value\n";
  for (const auto& r : rows) {
    const auto prefix = r.cell.task.label() + "," + r.cell.model + "," + r.cell.scheme + "," +
                        r.cell.weighting + "," + (r.cell.seed ? std::to_string(*r.cell.seed) : "-");
    out += prefix + ",mae_raw," + util::format_double(r.mae_raw) + "\n";
    out += prefix + ",mae_per_area," + util::format_double(r.mae_per_area) + "\n";
  }
  return out;
}

}  // namespace disagg
