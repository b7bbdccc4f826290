// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <array>
#include <cmath>
#include <fstream>
#include <random>

#include "disagg/count_frame.hpp"
#include "disagg/error.hpp"
#include "disagg/ingest.hpp"
#include "disagg/synth.hpp"
#include "disagg/util.hpp"
#include "test_support.hpp"

using namespace disagg;

namespace {

CountFrame frame_of(const std::string& level, std::int64_t first, Matrix m) {
  CountFrame f;
  f.level = level;
  f.first_hour = first;
  f.counts = std::move(m);
  return f;
}

SynthConfig small_city(std::uint64_t seed) {
  SynthConfig c;
  c.rows = 8;
  c.cols = 8;
  c.cell_size_m = 100.0;
  c.block_edges = {4, 2, 1};
  c.level_names = {"A", "B", "C"};
  c.hotspots = {{250.0, 300.0, 150.0, 3.0}, {650.0, 600.0, 250.0, 1.5}};
  c.daily_amplitude = 0.5;
  c.hours = 48;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("hour bucketing floors toward negative infinity") {
  CHECK(hour_of(0) == 0);
  CHECK(hour_of(3599) == 0);
  CHECK(hour_of(3600) == 1);
  CHECK(hour_of(-1) == -1);
  CHECK(hour_of(-3600) == -1);
  CHECK(hour_of(-3601) == -2);
}

TEST_CASE("calendar dates map to absolute hours") {
  CHECK(day_start_hour(1970, 1, 1) == 0);
  CHECK(day_start_hour(2016, 1, 1) == 1451606400 / 3600);
  CHECK(parse_date_hour("2016-03-01") - parse_date_hour("2016-02-01") == 29 * 24);
  CHECK_THROWS_AS(parse_date_hour("2016-02-30"), ConfigError);
  CHECK_THROWS_AS(parse_date_hour("20160101"), ConfigError);
}

TEST_CASE("tail split over 240 hours") {
  auto h = test::two_parent_hierarchy();
  LevelFrames frames{frame_of("coarse", 100, Matrix::Zero(240, 2)),
                     frame_of("fine", 100, Matrix::Zero(240, 4))};
  const auto rule = tail_split_rule({100, 340}, 48, 48);
  const auto s = make_splits(frames, rule);
  CHECK(s.train[0].hours() == 144);
  CHECK(s.val[0].hours() == 48);
  CHECK(s.test[1].hours() == 48);
  CHECK(s.train[1].first_hour == 100);
  CHECK(s.val[1].first_hour == 244);
  CHECK(s.test[0].first_hour == 292);
}

TEST_CASE("overlapping or out-of-range splits are rejected") {
  LevelFrames frames{frame_of("coarse", 0, Matrix::Zero(100, 2))};
  CHECK_THROWS_AS(make_splits(frames, {{0, 60}, {60, 80}, {70, 100}}), ConfigError);
  CHECK_THROWS_AS(make_splits(frames, {{0, 60}, {80, 100}, {60, 80}}), ConfigError);
  CHECK_THROWS_AS(make_splits(frames, {{0, 60}, {60, 80}, {80, 101}}), ConfigError);
  CHECK_THROWS_AS(make_splits(frames, {{0, 60}, {60, 60}, {80, 100}}), ConfigError);
  CHECK_NOTHROW(make_splits(frames, {{0, 50}, {60, 80}, {80, 100}}));
}

TEST_CASE("split rule from inclusive dates reproduces half-year split sizes") {
  const auto j = nlohmann::json::parse(
      util::read_file(std::string(DISAGG_SOURCE_DIR) + "/configs/splits_example.json"));
  const auto rule = parse_split_rule(j, {});
  CHECK(rule.train.length() == 2904);
  CHECK(rule.val.length() == 744);
  CHECK(rule.test.length() == 720);
  CHECK(rule.train.end == rule.val.begin);
  CHECK(rule.val.end == rule.test.begin);
}

TEST_CASE("split rule from hour ranges and tail form") {
  const auto r = parse_split_rule(nlohmann::json::parse(R"({
      "train": {"begin_hour": 0, "end_hour": 10},
      "val": {"begin_hour": 10, "end_hour": 12},
      "test": {"begin_hour": 12, "end_hour": 15}})"),
                                  {});
  CHECK(r.test == HourRange{12, 15});
  const auto t = parse_split_rule(nlohmann::json::parse(R"({"tail": {"val_hours": 5, "test_hours": 7}})"),
                                  {0, 30});
  CHECK(t.train == HourRange{0, 18});
  CHECK(t.val == HourRange{18, 23});
  CHECK(t.test == HourRange{23, 30});
  CHECK_THROWS_AS(parse_split_rule(nlohmann::json::parse(R"({"train": {}})"), {}), ConfigError);
}

TEST_CASE("descriptive stats") {
  Matrix m(2, 2);
  m << 1, 3, 3, 5;
  const auto s = descriptive_stats(frame_of("x", 0, m));
  // hand oracle: mean 12/4, squared deviations 4+0+0+4 over 4 entries
  CHECK(s.mean == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(s.stddev == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  const auto c = descriptive_stats(frame_of("x", 0, Matrix::Constant(5, 3, 7.5)));
  CHECK(c.mean == 7.5);
  CHECK(c.stddev == 0.0);
  CHECK_THROWS_AS(descriptive_stats(frame_of("x", 0, Matrix(0, 3))), DataError);
}

TEST_CASE("ingest counts per hour and unit and reports drops") {
  auto h = test::two_parent_hierarchy();  // 4 cells of 1 m along x
  const std::vector<PointRecord> recs{
      {0, 0.5, 0.5},      // hour 0, cell 0
      {10, 1.0, 0.2},     // hour 0, cell 1 (left edge belongs to cell 1)
      {3600, 3.9, 0.9},   // hour 1, cell 3
      {3700, 4.0, 0.5},   // out of bounds
      {7200, 0.5, 0.5},   // outside window
      {-1, 0.5, 0.5},     // hour -1, outside window
  };
  const auto res = ingest_points(recs, h, {0, 2});
  CHECK(res.accepted == 3);
  CHECK(res.out_of_bounds == 1);
  CHECK(res.outside_window == 2);
  Matrix fine(2, 4);
  fine << 1, 1, 0, 0, 0, 0, 0, 1;
  Matrix coarse(2, 2);
  coarse << 2, 0, 0, 1;
  CHECK(res.frames[1].counts == fine);
  CHECK(res.frames[0].counts == coarse);
  CHECK(res.frames[0].first_hour == 0);
  CHECK_NOTHROW(validate_level_frames(res.frames, h));
}

TEST_CASE("empty input yields zero frames and a warning") {
  auto h = test::two_parent_hierarchy();
  const auto res = ingest_points({}, h, {5, 9});
  CHECK(res.accepted == 0);
  CHECK(res.frames[1].counts == Matrix::Zero(4, 4));
  CHECK_FALSE(res.warnings.empty());
}

TEST_CASE("property: ingestion is independent of record order") {
  auto h = regular_hierarchy(6, 6, 10.0, {3, 1});
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-2.0, 62.0);
  std::uniform_int_distribution<std::int64_t> t(0, 10 * 3600 - 1);
  std::vector<PointRecord> recs(2000);
  for (auto& r : recs) r = {t(rng), u(rng), u(rng)};
  const auto a = ingest_points(recs, h, {0, 10});
  std::shuffle(recs.begin(), recs.end(), rng);
  const auto b = ingest_points(recs, h, {0, 10});
  for (std::size_t l = 0; l < 2; ++l) CHECK(a.frames[l].counts == b.frames[l].counts);
  CHECK(a.accepted + a.out_of_bounds == recs.size());
}

TEST_CASE("validate_level_frames detects mass mismatch") {
  auto h = test::two_parent_hierarchy();
  Matrix coarse(1, 2);
  coarse << 3, 4;
  Matrix fine(1, 4);
  fine << 1, 2, 3, 2;
  CHECK_THROWS_AS(validate_level_frames({frame_of("coarse", 0, coarse), frame_of("fine", 0, fine)}, h),
                  DataError);
  fine(0, 3) = 1;
  CHECK_NOTHROW(validate_level_frames({frame_of("coarse", 0, coarse), frame_of("fine", 0, fine)}, h));
}

TEST_CASE("frame CSV round trip") {
  auto h = test::two_parent_hierarchy();
  Matrix m(3, 4);
  m << 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11;
  const auto dir = test::scratch_dir("frame_rt");
  write_frame(dir / "fine.csv", frame_of("fine", 403224, m), h);
  const auto back = read_frame(dir / "fine.csv", h, "fine");
  CHECK(back.first_hour == 403224);
  CHECK(back.counts == m);
  CHECK(util::read_file(dir / "fine.csv").rfind("hour,fine_0,fine_1,fine_2,fine_3\n", 0) == 0);
  CHECK_THROWS_AS(read_frame(dir / "fine.csv", h, "coarse"), DataError);
}

TEST_CASE("points CSV reports every malformed line") {
  const auto dir = test::scratch_dir("points_bad");
  {
    std::ofstream f(dir / "p.csv");
    f << "timestamp,x,y\n1,2,3\nabc,1,1\n5,1\n6,1,1\n7,nan,1\n";
  }
  try {
    read_points_csv(dir / "p.csv");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("3 malformed") != std::string::npos);
    CHECK(msg.find(" 3 4 6") != std::string::npos);
  }
  {
    std::ofstream f(dir / "h.csv");
    f << "time,x,y\n";
  }
  CHECK_THROWS_AS(read_points_csv(dir / "h.csv"), DataError);
}

TEST_CASE("points CSV round trip") {
  const std::vector<PointRecord> recs{{1451606400, 12.345, 0.001}, {1451606401, 3199.999, 5.5}};
  const auto dir = test::scratch_dir("points_rt");
  util::write_file_atomic(dir / "p.csv", points_to_csv(recs));
  CHECK(read_points_csv(dir / "p.csv") == recs);
}

TEST_CASE("synthetic generation is deterministic per seed") {
  const auto a = synth_generate(small_city(42));
  const auto b = synth_generate(small_city(42));
  const auto c = synth_generate(small_city(43));
  CHECK(util::sha256_hex(points_to_csv(a.records)) == util::sha256_hex(points_to_csv(b.records)));
  CHECK(util::sha256_hex(points_to_csv(a.records)) != util::sha256_hex(points_to_csv(c.records)));
}

TEST_CASE("zero hotspot amplitude produces no records") {
  auto cfg = small_city(1);
  for (auto& hs : cfg.hotspots) hs.amplitude = 0.0;
  const auto res = synth_generate(cfg);
  CHECK(res.records.empty());
  for (const auto& f : res.truth) CHECK(f.counts.isZero());
}

TEST_CASE("re-ingesting synthetic records reproduces ground truth") {
  const auto cfg = small_city(7);
  const auto res = synth_generate(cfg);
  REQUIRE_FALSE(res.records.empty());
  const auto again = ingest_points(res.records, res.hierarchy, cfg.window());
  CHECK(again.accepted == res.records.size());
  for (std::size_t l = 0; l < res.truth.size(); ++l) {
    CHECK(again.frames[l].counts == res.truth[l].counts);
    CHECK(again.frames[l].first_hour == res.truth[l].first_hour);
  }
  CHECK_NOTHROW(validate_level_frames(res.truth, res.hierarchy));
}

TEST_CASE("property: cross-level mass holds in every split") {
  auto cfg = small_city(3);
  const auto res = synth_generate(cfg);
  const auto s = make_splits(res.truth, tail_split_rule(cfg.window(), 8, 8));
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    CHECK_NOTHROW(validate_level_frames(*part, res.hierarchy));
    for (std::size_t l = 1; l < part->size(); ++l) {
      CHECK(((*part)[l].counts.rowwise().sum() - (*part)[0].counts.rowwise().sum()).isZero());
    }
  }
  CHECK(s.train[0].hours() + s.val[0].hours() + s.test[0].hours() == cfg.hours);
}

TEST_CASE("centred hotspot is symmetric under quarter turns") {
  SynthConfig cfg;
  cfg.rows = 8;
  cfg.cols = 8;
  cfg.block_edges = {4, 1};
  cfg.level_names = {"Q", "CELL"};
  cfg.hotspots = {{400.0, 400.0, 180.0, 2.0}};
  cfg.hours = 24;

  // intensity is exactly symmetric
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t c = 0; c < 8; ++c) {
      const double v = synth_intensity(cfg, r * 8 + c, 0);
      CHECK(synth_intensity(cfg, c * 8 + (7 - r), 0) == doctest::Approx(v).epsilon(1e-12));
    }
  }

  // Monte Carlo: per-quadrant totals agree within 3 standard errors
  const int seeds = 120;
  std::vector<std::array<double, 4>> totals;
  for (int s = 0; s < seeds; ++s) {
    cfg.seed = static_cast<std::uint64_t>(1000 + s);
    const auto res = synth_generate(cfg);
    std::array<double, 4> q{};
    for (int u = 0; u < 4; ++u) q[u] = res.truth[0].counts.col(u).sum();
    totals.push_back(q);
  }
  for (int u = 1; u < 4; ++u) {
    double mean = 0.0;
    for (const auto& q : totals) mean += q[u] - q[0];
    mean /= seeds;
    double var = 0.0;
    for (const auto& q : totals) var += std::pow(q[u] - q[0] - mean, 2);
    var /= seeds - 1;
    const double se = std::sqrt(var / seeds);
    CHECK(std::abs(mean) <= 3.0 * se);
  }
}

TEST_CASE("synth config validation") {
  auto cfg = small_city(1);
  cfg.hours = 10;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_city(1);
  cfg.hotspots[0].amplitude = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_city(1);
  cfg.start_time += 5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(parse_synth_config(nlohmann::json::parse(R"({"hours": 24})")), ConfigError);
}
