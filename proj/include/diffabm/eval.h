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

// Forecast evaluation: weekly aggregation, error metrics, observation noise,
// MMWR epidemic weeks, CSV ingestion and the real-time forecasting harness.

#ifndef DIFFABM_EVAL_H_
#define DIFFABM_EVAL_H_

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "diffabm/autodiff.h"
#include "diffabm/train.h"

namespace diffabm {

// Sums (COVID) or means (flu) over consecutive 7-day blocks. A trailing
// partial week is dropped and reported through `diagnostics` when given.
std::vector<double> WeeklyAggregate(std::span<const double> daily, Disease disease,
                                    std::vector<std::string>* diagnostics = nullptr);

struct MetricReport {
  double nd = 0.0;  // NaN when the truth sums to zero
  double rmse = 0.0;
  double mae = 0.0;
};

// Over a complete grid of (anchor, horizon) pairs given as flat arrays.
// With `rmse_no_sqrt` the reported rmse is the mean squared error.
MetricReport ComputeMetrics(std::span<const double> predicted,
                            std::span<const double> truth, bool rmse_no_sqrt = false);

// y'_t = max(0, y_t + e_t), e_t ~ N(0, (lambda * std(y))^2), std over the
// series (population form).
std::vector<double> AddObservationNoise(std::span<const double> series, double lambda,
                                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Calendar.

using Date = std::chrono::sys_days;

Date ParseDate(const std::string& iso);  // YYYY-MM-DD
std::string FormatDate(Date d);

// MMWR week: Sunday-to-Saturday; week 1 is the first week with at least four
// days in the calendar year.
struct EpiWeek {
  int year = 0;
  int week = 0;
  int code() const { return year * 100 + week; }
  static EpiWeek FromCode(int code);
  bool operator==(const EpiWeek&) const = default;
};
EpiWeek EpiWeekOf(Date d);
Date EpiWeekStart(EpiWeek w);
int WeeksInYear(int year);

// ---------------------------------------------------------------------------
// Episode data.

struct EpisodeData {
  std::string region;
  Disease disease = Disease::kCovid;
  Date start{};                 // first day, a Sunday
  std::vector<double> target;   // daily
  ad::Tensor features;          // [days, F] raw daily values
  std::vector<std::string> feature_names;

  std::size_t days() const { return target.size(); }
  void Validate() const;
  // The first `days` days only.
  EpisodeData Truncate(std::size_t days) const;
};

// Weekly means of the window's features, standardized with statistics of
// this window only (zero-variance features are centred), followed by a
// one-hot region block of width `region_count`.
ad::Tensor PrepareFeatures(const EpisodeData& window, std::size_t region_index,
                           std::size_t region_count);

// Target CSV `date,region,value`, feature CSV `date,region,feature_name,value`.
// Regions come back sorted by name; feature columns sorted by name. Every
// region needs a contiguous daily target starting on a Sunday and a value for
// every feature on every target day.
std::vector<EpisodeData> LoadEpisodes(std::istream& targets, std::istream* features,
                                      Disease disease);
std::vector<EpisodeData> LoadEpisodes(const std::string& target_path,
                                      const std::string& feature_path, Disease disease);
void WriteTargetCsv(std::ostream& out, std::span<const EpisodeData> episodes);
void WriteFeatureCsv(std::ostream& out, std::span<const EpisodeData> episodes);

// ---------------------------------------------------------------------------
// Real-time forecasting.

struct Forecast {
  std::string region;
  int anchor_week = 0;          // epiweek code
  std::vector<double> values;   // weekly, horizons 1..H
};

struct ForecastOptions {
  int horizon_weeks = 4;
  int min_train_weeks = 3;
};

// Receives every region's window truncated at the anchor and returns, per
// region, the daily predictions for the `horizon_days` following the window.
using Calibrator = std::function<std::vector<std::vector<double>>(
    std::span<const EpisodeData> windows, int horizon_days)>;

// For each anchor, truncates all regions at the end of that epiweek,
// calibrates from scratch and aggregates the predicted days into weekly
// forecasts. Anchors outside the data or with too short a window are skipped
// with a diagnostic.
std::vector<Forecast> RealTimeForecast(std::span<const EpisodeData> regions,
                                       std::span<const int> anchor_weeks,
                                       const Calibrator& calibrator,
                                       const ForecastOptions& options,
                                       std::vector<std::string>* diagnostics = nullptr);

// Weekly truth for the forecast's horizons; empty if the data ends earlier.
std::vector<double> ForecastTruth(const EpisodeData& episode, const Forecast& forecast);

// Metrics per region over all forecasts with complete truth.
struct RegionMetrics {
  std::string region;
  MetricReport report;
  std::size_t pairs = 0;
};
std::vector<RegionMetrics> EvaluateForecasts(std::span<const EpisodeData> regions,
                                             std::span<const Forecast> forecasts,
                                             bool rmse_no_sqrt = false);

void WriteForecastCsv(std::ostream& out, std::span<const Forecast> forecasts);
std::vector<Forecast> ReadForecastCsv(std::istream& in);
void WriteMetricsCsv(std::ostream& out, std::span<const RegionMetrics> metrics);
std::vector<RegionMetrics> ReadMetricsCsv(std::istream& in);

// Formats with enough digits to round-trip.
std::string FormatDouble(double v);

}  // namespace diffabm

#endif  // DIFFABM_EVAL_H_
