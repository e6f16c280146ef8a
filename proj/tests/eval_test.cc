// Copyright 2026 The diffabm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "diffabm/eval.h"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "diffabm/synthetic.h"
#include "gtest/gtest.h"

namespace diffabm {
namespace {

namespace chr = std::chrono;
using ad::Tensor;

TEST(Metrics, HandWorkedCase) {
  const std::vector<double> pred = {2.0, 4.0}, truth = {1.0, 2.0};
  const MetricReport m = ComputeMetrics(pred, truth);
  EXPECT_EQ(m.mae, 1.5);
  EXPECT_EQ(m.nd, 1.0);
  EXPECT_EQ(m.rmse, std::sqrt(2.5));
  EXPECT_EQ(ComputeMetrics(pred, truth, true).rmse, 2.5);
}

TEST(Metrics, MaeNeverExceedsRmseAndNdIsScaleInvariant) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t len = 1 + trial % 12;
    std::vector<double> p(len), y(len), ps(len), ys(len);
    const double scale = 0.01 + u(gen);
    for (std::size_t i = 0; i < len; ++i) {
      p[i] = u(gen);
      y[i] = u(gen);
      ps[i] = scale * p[i];
      ys[i] = scale * y[i];
    }
    const MetricReport a = ComputeMetrics(p, y), b = ComputeMetrics(ps, ys);
    EXPECT_LE(a.mae, a.rmse * (1.0 + 1e-12));
    EXPECT_NEAR(a.nd, b.nd, 1e-12 * a.nd);
  }
}

TEST(Metrics, ZeroTruthGivesUndefinedNd) {
  const std::vector<double> p = {1.0, 0.0}, y = {0.0, 0.0};
  const MetricReport m = ComputeMetrics(p, y);
  EXPECT_TRUE(std::isnan(m.nd));
  EXPECT_EQ(m.mae, 0.5);
  EXPECT_THROW(ComputeMetrics(p, std::vector<double>{1.0}), std::invalid_argument);
  EXPECT_THROW(ComputeMetrics(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST(Weekly, SumsCovidAndAveragesFlu) {
  std::vector<double> daily(16);
  std::iota(daily.begin(), daily.end(), 1.0);
  std::vector<std::string> notes;
  const auto covid = WeeklyAggregate(daily, Disease::kCovid, &notes);
  ASSERT_EQ(covid.size(), 2u);
  EXPECT_EQ(covid[0], 28.0);
  EXPECT_EQ(covid[1], 77.0);
  ASSERT_EQ(notes.size(), 1u);  // two trailing days dropped
  const auto flu = WeeklyAggregate(daily, Disease::kFlu);
  EXPECT_EQ(flu[0], 4.0);
  EXPECT_EQ(flu[1], 11.0);
}

TEST(Noise, ScalesWithSeriesSpreadAndStaysNonNegative) {
  std::vector<double> y(20000);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1000.0 + 10.0 * std::sin(0.01 * i);
  double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size(), var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / y.size());
  const std::vector<double> z = AddObservationNoise(y, 2.0, 5);
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) ss += (z[i] - y[i]) * (z[i] - y[i]);
  EXPECT_NEAR(std::sqrt(ss / y.size()) / (2.0 * sd), 1.0, 0.03);
  EXPECT_EQ(z, AddObservationNoise(y, 2.0, 5));
  EXPECT_EQ(AddObservationNoise(y, 0.0, 5), y);

  const std::vector<double> small = {0.0, 1.0, 0.0, 2.0, 0.0};
  for (double v : AddObservationNoise(small, 4.0, 9)) EXPECT_GE(v, 0.0);
  EXPECT_THROW(AddObservationNoise(small, -1.0, 1), std::invalid_argument);
}

// Reference rule: the epiweek of a day is that of its Sunday-to-Saturday
// week, which belongs to the year holding its Wednesday; week 1 is the week
// holding January 4.
EpiWeek ReferenceEpiWeek(Date d) {
  const chr::weekday wd{d};
  const Date sunday = d - chr::days{wd.c_encoding()};
  const int year = static_cast<int>(chr::year_month_day{sunday + chr::days{3}}.year());
  const Date jan4 = chr::sys_days{chr::year{year} / 1 / 4};
  const Date first = jan4 - chr::days{chr::weekday{jan4}.c_encoding()};
  return {year, static_cast<int>((sunday - first).count() / 7 + 1)};
}

TEST(EpiWeeks, KnownDates) {
  EXPECT_EQ(FormatDate(EpiWeekStart(EpiWeek::FromCode(202014))), "2020-03-29");
  EXPECT_EQ(EpiWeekOf(ParseDate("2020-03-29")).code(), 202014);
  EXPECT_EQ(EpiWeekOf(ParseDate("2020-04-04")).code(), 202014);
  EXPECT_EQ(EpiWeekOf(ParseDate("2021-01-02")).code(), 202053);
  EXPECT_EQ(FormatDate(EpiWeekStart({2021, 1})), "2021-01-03");
  EXPECT_EQ(EpiWeekOf(ParseDate("2019-12-29")).code(), 202001);
  EXPECT_EQ(WeeksInYear(2020), 53);
  EXPECT_EQ(WeeksInYear(2021), 52);
}

TEST(EpiWeeks, AgreeWithReferenceRuleEveryDay) {
  for (Date d = ParseDate("2014-01-01"); d < ParseDate("2031-01-01"); d += chr::days{1}) {
    const EpiWeek want = ReferenceEpiWeek(d);
    ASSERT_EQ(EpiWeekOf(d), want) << FormatDate(d);
    ASSERT_LE(want.week, WeeksInYear(want.year));
  }
}

TEST(EpiWeeks, RejectBadInput) {
  EXPECT_THROW(ParseDate("2020-13-01"), std::invalid_argument);
  EXPECT_THROW(ParseDate("yesterday"), std::invalid_argument);
  EXPECT_THROW(EpiWeek::FromCode(202154), std::invalid_argument);
  EXPECT_THROW(EpiWeek::FromCode(202000), std::invalid_argument);
}

std::string TargetCsv() {
  std::ostringstream s;
  s << "date,region,value\n";
  for (int d = 0; d < 14; ++d) {
    const std::string day = FormatDate(ParseDate("2020-03-01") + chr::days{d});
    s << day << ",b," << 2 * d << '\n' << day << ",a," << d << '\n';
  }
  return s.str();
}

std::string FeatureCsv(bool drop_one) {
  std::ostringstream s;
  s << "date,region,feature_name,value\n";
  for (int d = 0; d < 14; ++d) {
    const std::string day = FormatDate(ParseDate("2020-03-01") + chr::days{d});
    for (const char* r : {"a", "b"}) {
      s << day << ',' << r << ",mobility," << d * 0.5 << '\n';
      if (!(drop_one && d == 5 && r[0] == 'b')) s << day << ',' << r << ",cli," << d << '\n';
    }
  }
  return s.str();
}

TEST(Episodes, LoadSortsRegionsAndFeatures) {
  std::istringstream t(TargetCsv()), f(FeatureCsv(false));
  const auto eps = LoadEpisodes(t, &f, Disease::kCovid);
  ASSERT_EQ(eps.size(), 2u);
  EXPECT_EQ(eps[0].region, "a");
  EXPECT_EQ(eps[1].target[3], 6.0);
  ASSERT_EQ(eps[0].feature_names, (std::vector<std::string>{"cli", "mobility"}));
  EXPECT_EQ(eps[0].features.at(4, 1), 2.0);
  EXPECT_EQ(FormatDate(eps[0].start), "2020-03-01");

  std::ostringstream t2, f2;
  WriteTargetCsv(t2, eps);
  WriteFeatureCsv(f2, eps);
  std::istringstream t3(t2.str()), f3(f2.str());
  const auto again = LoadEpisodes(t3, &f3, Disease::kCovid);
  EXPECT_EQ(again[1].target, eps[1].target);
  EXPECT_EQ(again[1].features.vec(), eps[1].features.vec());
}

TEST(Episodes, MissingFeatureNamesRegion) {
  std::istringstream t(TargetCsv()), f(FeatureCsv(true));
  try {
    LoadEpisodes(t, &f, Disease::kCovid);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("region b"), std::string::npos) << e.what();
  }
}

TEST(Episodes, RejectsGapsAndNonSundayStarts) {
  std::string csv = TargetCsv();
  const auto pos = csv.find("2020-03-05,b");
  csv.erase(pos, csv.find('\n', pos) - pos + 1);
  std::istringstream t(csv);
  EXPECT_THROW(LoadEpisodes(t, nullptr, Disease::kCovid), std::invalid_argument);

  EpisodeData e;
  e.region = "x";
  e.start = ParseDate("2020-03-02");
  e.target = std::vector<double>(7, 1.0);
  e.features = Tensor({7, 0});
  EXPECT_THROW(e.Validate(), std::invalid_argument);
}

TEST(Episodes, FeaturesAreWeeklyStandardizedWithRegionCode) {
  EpisodeData e;
  e.region = "x";
  e.start = ParseDate("2020-03-01");
  e.target = std::vector<double>(21, 0.0);
  e.features = Tensor({21, 2});
  e.feature_names = {"f", "flat"};
  for (int d = 0; d < 21; ++d) {
    e.features.at(d, 0) = d / 7;  // weekly means 0, 1, 2
    e.features.at(d, 1) = 5.0;
  }
  const Tensor x = PrepareFeatures(e, 1, 3);
  ASSERT_EQ(x.shape(), (ad::Shape{3, 5}));
  const double sd = std::sqrt(2.0 / 3.0);
  for (int w = 0; w < 3; ++w) {
    EXPECT_NEAR(x.at(w, 0), (w - 1.0) / sd, 1e-12);
    EXPECT_EQ(x.at(w, 1), 0.0);
    EXPECT_EQ(x.at(w, 2), 0.0);
    EXPECT_EQ(x.at(w, 3), 1.0);
    EXPECT_EQ(x.at(w, 4), 0.0);
  }
}

EpisodeData Ramp(const std::string& region, int weeks) {
  EpisodeData e;
  e.region = region;
  e.start = EpiWeekStart(EpiWeek::FromCode(202010));
  for (int d = 0; d < 7 * weeks; ++d) e.target.push_back(d);
  e.features = Tensor({e.target.size(), 1}, 1.0);
  e.feature_names = {"one"};
  return e;
}

TEST(RealTime, NineAnchorsFourHorizonsGiveThirtySixRows) {
  const std::vector<EpisodeData> regions = {Ramp("r", 20)};
  std::vector<int> anchors;
  for (int w = 14; w < 23; ++w) anchors.push_back(202000 + w);
  std::size_t calls = 0;
  const Calibrator calib = [&](std::span<const EpisodeData> windows, int horizon_days) {
    ++calls;
    // The calibrator only ever sees data up to the end of the anchor week.
    const std::size_t days = windows[0].days();
    EXPECT_EQ(days % 7, 0u);
    EXPECT_EQ(windows[0].target.back(), static_cast<double>(days - 1));
    std::vector<double> next(horizon_days);
    std::iota(next.begin(), next.end(), static_cast<double>(days));
    return std::vector<std::vector<double>>{next};
  };
  const auto fc = RealTimeForecast(regions, anchors, calib, {});
  EXPECT_EQ(calls, 9u);
  std::size_t rows = 0;
  for (const Forecast& f : fc) rows += f.values.size();
  EXPECT_EQ(rows, 36u);
  // A perfect continuation scores zero error.
  const auto metrics = EvaluateForecasts(regions, fc);
  ASSERT_EQ(metrics.size(), 1u);
  EXPECT_EQ(metrics[0].pairs, 36u);
  EXPECT_EQ(metrics[0].report.nd, 0.0);
}

TEST(RealTime, SkipsAnchorsOutsideDataOrTooEarly) {
  const std::vector<EpisodeData> regions = {Ramp("r", 6)};
  const std::vector<int> anchors = {202011, 202013, 202030};
  const Calibrator calib = [](std::span<const EpisodeData>, int h) {
    return std::vector<std::vector<double>>{std::vector<double>(h, 0.0)};
  };
  std::vector<std::string> notes;
  const auto fc = RealTimeForecast(regions, anchors, calib, {4, 3}, &notes);
  ASSERT_EQ(fc.size(), 1u);
  EXPECT_EQ(fc[0].anchor_week, 202013);
  EXPECT_EQ(notes.size(), 2u);
  // Horizons past the data have no truth and are left out of the metrics.
  EXPECT_TRUE(ForecastTruth(regions[0], fc[0]).empty());
  EXPECT_THROW(RealTimeForecast(regions, std::vector<int>{}, calib, {}), std::invalid_argument);
}

// Closed loop: forecasts from the generating parameters and noise reproduce
// the synthetic truth.
TEST(RealTime, GeneratingParametersForecastTheirOwnData) {
  SyntheticConfig sc;
  sc.regions = 2;
  sc.agents = 200;
  sc.weeks = 10;
  sc.seed = 3;
  const SyntheticBenchmark bench = GenerateSyntheticBenchmark(sc);
  const Calibrator calib = [&](std::span<const EpisodeData> windows, int horizon_days) {
    std::vector<std::vector<double>> out;
    for (std::size_t r = 0; r < windows.size(); ++r) {
      const int days = static_cast<int>(windows[r].days());
      const auto y = SimulateSeriesValues(*bench.models[r], bench.true_theta[r], days + horizon_days,
                                          ReportMode::kRelaxed,
                                          {sc.temperature, bench.truth_noise_seeds[r]});
      out.emplace_back(y.begin() + days, y.end());
    }
    return out;
  };
  const int first = EpiWeekOf(bench.episodes[0].start).code();
  const std::vector<int> anchors = {first + 4, first + 5};
  const auto fc = RealTimeForecast(bench.episodes, anchors, calib, {});
  for (const RegionMetrics& m : EvaluateForecasts(bench.episodes, fc)) {
    EXPECT_EQ(m.pairs, 8u);
    EXPECT_LT(m.report.nd, 0.05);
  }
}

TEST(Csv, ForecastsAndMetricsRoundTrip) {
  const std::vector<Forecast> fc = {{"a", 202014, {1.0 / 3.0, 2.0}}, {"b", 202015, {0.1}}};
  std::stringstream buf;
  WriteForecastCsv(buf, fc);
  EXPECT_EQ(buf.str().substr(0, 44), "region,anchor_week,horizon_weeks,prediction\n");
  const auto back = ReadForecastCsv(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].values, fc[0].values);
  EXPECT_EQ(back[1].anchor_week, 202015);

  const std::vector<RegionMetrics> m = {{"a", {0.5, std::sqrt(2.0), 0.25}, 4}};
  std::stringstream mb;
  WriteMetricsCsv(mb, m);
  const auto mback = ReadMetricsCsv(mb);
  ASSERT_EQ(mback.size(), 1u);
  EXPECT_EQ(mback[0].report.rmse, std::sqrt(2.0));
  EXPECT_EQ(mback[0].report.nd, 0.5);

  std::stringstream bad("region,metric,value\na,bogus,1\n");
  EXPECT_THROW(ReadMetricsCsv(bad), std::invalid_argument);
}

}  // namespace
}  // namespace diffabm
