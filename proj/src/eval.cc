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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

#include "diffabm/rng.h"

namespace diffabm {

using ad::Tensor;
namespace chr = std::chrono;

std::vector<double> WeeklyAggregate(std::span<const double> daily, Disease disease,
                                    std::vector<std::string>* diagnostics) {
  if (daily.empty()) throw std::invalid_argument("weekly aggregate: empty series");
  const std::size_t weeks = daily.size() / 7;
  if (daily.size() % 7 != 0 && diagnostics) {
    diagnostics->push_back("weekly aggregate: dropped " + std::to_string(daily.size() % 7) +
                           " trailing day(s) of a partial week");
  }
  std::vector<double> out(weeks, 0.0);
  for (std::size_t w = 0; w < weeks; ++w) {
    for (std::size_t d = 0; d < 7; ++d) out[w] += daily[7 * w + d];
    if (disease == Disease::kFlu) out[w] /= 7.0;
  }
  return out;
}

MetricReport ComputeMetrics(std::span<const double> predicted,
                            std::span<const double> truth, bool rmse_no_sqrt) {
  if (predicted.size() != truth.size() || predicted.empty()) {
    throw std::invalid_argument("metrics: need equal nonempty grids, got " +
                                std::to_string(predicted.size()) + " and " +
                                std::to_string(truth.size()));
  }
  double abs_err = 0.0, sq_err = 0.0, abs_truth = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = predicted[i] - truth[i];
    abs_err += std::abs(e);
    sq_err += e * e;
    abs_truth += std::abs(truth[i]);
  }
  const double count = static_cast<double>(truth.size());
  MetricReport r;
  r.mae = abs_err / count;
  r.rmse = rmse_no_sqrt ? sq_err / count : std::sqrt(sq_err / count);
  r.nd = abs_truth > 0.0 ? abs_err / abs_truth : std::numeric_limits<double>::quiet_NaN();
  return r;
}

std::vector<double> AddObservationNoise(std::span<const double> series, double lambda,
                                        std::uint64_t seed) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("noise factor must be >= 0");
  std::vector<double> out(series.begin(), series.end());
  if (series.empty() || lambda == 0.0) return out;
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(series.size());
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  const double sd = lambda * std::sqrt(var / static_cast<double>(series.size()));
  if (sd == 0.0) return out;
  std::mt19937_64 gen = CounterRng(seed).Engine(streams::kNoise);
  std::normal_distribution<double> noise(0.0, sd);
  for (double& v : out) v = std::max(0.0, v + noise(gen));
  return out;
}

// ---------------------------------------------------------------------------
// Calendar

Date ParseDate(const std::string& iso) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (iso.size() != 10 || std::sscanf(iso.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
    throw std::invalid_argument("bad date '" + iso + "' (expected YYYY-MM-DD)");
  }
  const chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!ymd.ok()) throw std::invalid_argument("invalid date '" + iso + "'");
  return Date{ymd};
}

std::string FormatDate(Date d) {
  const chr::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

namespace {

Date FirstEpiWeekStart(int year) {
  const Date jan4{chr::year{year} / chr::January / 4};
  return jan4 - chr::days{chr::weekday{jan4}.c_encoding()};
}

}  // namespace

EpiWeek EpiWeek::FromCode(int code) {
  EpiWeek w{code / 100, code % 100};
  if (w.week < 1 || w.week > WeeksInYear(w.year)) {
    throw std::invalid_argument("invalid epiweek " + std::to_string(code));
  }
  return w;
}

int WeeksInYear(int year) {
  return static_cast<int>((FirstEpiWeekStart(year + 1) - FirstEpiWeekStart(year)).count() / 7);
}

EpiWeek EpiWeekOf(Date d) {
  int y = static_cast<int>(chr::year_month_day{d}.year());
  if (d >= FirstEpiWeekStart(y + 1)) {
    ++y;
  } else if (d < FirstEpiWeekStart(y)) {
    --y;
  }
  return {y, static_cast<int>((d - FirstEpiWeekStart(y)).count() / 7) + 1};
}

Date EpiWeekStart(EpiWeek w) { return FirstEpiWeekStart(w.year) + chr::days{7 * (w.week - 1)}; }

// ---------------------------------------------------------------------------
// Episodes

void EpisodeData::Validate() const {
  if (target.empty()) throw std::invalid_argument("region " + region + ": empty target");
  if (chr::weekday{start}.c_encoding() != 0) {
    throw std::invalid_argument("region " + region + ": data must start on a Sunday, got " +
                                FormatDate(start));
  }
  if (features.rows() != target.size() || features.cols() != feature_names.size()) {
    throw std::invalid_argument("region " + region + ": features " +
                                features.shape().ToString() + " do not match " +
                                std::to_string(target.size()) + " days x " +
                                std::to_string(feature_names.size()) + " names");
  }
  for (double v : target) {
    if (!std::isfinite(v)) throw std::invalid_argument("region " + region + ": non-finite target");
  }
  for (double v : features.vec()) {
    if (!std::isfinite(v)) throw std::invalid_argument("region " + region + ": non-finite feature");
  }
}

EpisodeData EpisodeData::Truncate(std::size_t days) const {
  EpisodeData out;
  out.region = region;
  out.disease = disease;
  out.start = start;
  out.feature_names = feature_names;
  days = std::min(days, target.size());
  out.target.assign(target.begin(), target.begin() + static_cast<std::ptrdiff_t>(days));
  out.features = Tensor({days, features.cols()});
  std::copy(features.vec().begin(),
            features.vec().begin() + static_cast<std::ptrdiff_t>(days * features.cols()),
            out.features.vec().begin());
  return out;
}

Tensor PrepareFeatures(const EpisodeData& window, std::size_t region_index,
                       std::size_t region_count) {
  if (region_index >= std::max<std::size_t>(region_count, 1) && region_count > 0) {
    throw std::invalid_argument("region index out of range");
  }
  const std::size_t days = window.features.rows();
  const std::size_t f = window.features.cols();
  const std::size_t weeks = days / 7;
  if (weeks == 0) throw std::invalid_argument("region " + window.region + ": less than a week of data");
  std::vector<double> mean(f, 0.0), sd(f, 0.0);
  for (std::size_t c = 0; c < f; ++c) {
    for (std::size_t t = 0; t < weeks * 7; ++t) mean[c] += window.features.at(t, c);
    mean[c] /= static_cast<double>(weeks * 7);
    for (std::size_t t = 0; t < weeks * 7; ++t) {
      const double e = window.features.at(t, c) - mean[c];
      sd[c] += e * e;
    }
    sd[c] = std::sqrt(sd[c] / static_cast<double>(weeks * 7));
    if (sd[c] == 0.0) sd[c] = 1.0;
  }
  Tensor out({weeks, f + region_count});
  for (std::size_t w = 0; w < weeks; ++w) {
    for (std::size_t c = 0; c < f; ++c) {
      double s = 0.0;
      for (std::size_t d = 0; d < 7; ++d) s += window.features.at(7 * w + d, c);
      out.at(w, c) = (s / 7.0 - mean[c]) / sd[c];
    }
    if (region_count > 0) out.at(w, f + region_index) = 1.0;
  }
  return out;
}

namespace {

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  while (true) {
    const std::size_t comma = line.find(',', begin);
    out.push_back(line.substr(begin, comma - begin));
    if (comma == std::string::npos) break;
    begin = comma + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

double ParseNumber(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::invalid_argument(where + ": bad number '" + s + "'");
  return v;
}

void ExpectHeader(std::istream& in, const std::string& header, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(what + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) {
    throw std::invalid_argument(what + ": expected header '" + header + "', got '" + line + "'");
  }
}

}  // namespace

std::vector<EpisodeData> LoadEpisodes(std::istream& targets, std::istream* features,
                                      Disease disease) {
  ExpectHeader(targets, "date,region,value", "target csv");
  std::map<std::string, std::map<Date, double>> series;
  std::string line;
  int row = 1;
  while (std::getline(targets, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::string where = "target csv row " + std::to_string(row);
    const auto f = SplitCsv(line);
    if (f.size() != 3) throw std::invalid_argument(where + ": expected 3 fields");
    const Date d = ParseDate(f[0]);
    if (!series[f[1]].emplace(d, ParseNumber(f[2], where)).second) {
      throw std::invalid_argument(where + ": duplicate date for region " + f[1]);
    }
  }
  std::map<std::string, std::map<std::string, std::map<Date, double>>> feats;
  std::set<std::string> names;
  if (features) {
    ExpectHeader(*features, "date,region,feature_name,value", "feature csv");
    row = 1;
    while (std::getline(*features, line)) {
      ++row;
      if (line.empty() || line == "\r") continue;
      const std::string where = "feature csv row " + std::to_string(row);
      const auto f = SplitCsv(line);
      if (f.size() != 4) throw std::invalid_argument(where + ": expected 4 fields");
      names.insert(f[2]);
      if (!feats[f[1]][f[2]].emplace(ParseDate(f[0]), ParseNumber(f[3], where)).second) {
        throw std::invalid_argument(where + ": duplicate entry");
      }
    }
  }
  std::vector<EpisodeData> out;
  for (const auto& [region, days] : series) {
    EpisodeData e;
    e.region = region;
    e.disease = disease;
    e.start = days.begin()->first;
    Date expect = e.start;
    for (const auto& [d, v] : days) {
      if (d != expect) {
        throw std::invalid_argument("region " + region + ": missing target for " +
                                    FormatDate(expect));
      }
      e.target.push_back(v);
      expect += chr::days{1};
    }
    e.feature_names.assign(names.begin(), names.end());
    e.features = Tensor({e.target.size(), names.size()});
    std::size_t c = 0;
    for (const std::string& name : e.feature_names) {
      const auto& byday = feats[region][name];
      for (std::size_t t = 0; t < e.target.size(); ++t) {
        const Date d = e.start + chr::days{static_cast<int>(t)};
        auto it = byday.find(d);
        if (it == byday.end()) {
          throw std::invalid_argument("region " + region + ": feature " + name +
                                      " missing on " + FormatDate(d));
        }
        e.features.at(t, c) = it->second;
      }
      ++c;
    }
    e.Validate();
    out.push_back(std::move(e));
  }
  if (out.empty()) throw std::invalid_argument("target csv: no rows");
  return out;
}

std::vector<EpisodeData> LoadEpisodes(const std::string& target_path,
                                      const std::string& feature_path, Disease disease) {
  std::ifstream t(target_path);
  if (!t) throw std::runtime_error("cannot read target file " + target_path);
  if (feature_path.empty()) return LoadEpisodes(t, nullptr, disease);
  std::ifstream f(feature_path);
  if (!f) throw std::runtime_error("cannot read feature file " + feature_path);
  return LoadEpisodes(t, &f, disease);
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void WriteTargetCsv(std::ostream& out, std::span<const EpisodeData> episodes) {
  out << "date,region,value\n";
  for (const EpisodeData& e : episodes) {
    for (std::size_t t = 0; t < e.target.size(); ++t) {
      out << FormatDate(e.start + chr::days{static_cast<int>(t)}) << ',' << e.region << ','
          << FormatDouble(e.target[t]) << '\n';
    }
  }
}

void WriteFeatureCsv(std::ostream& out, std::span<const EpisodeData> episodes) {
  out << "date,region,feature_name,value\n";
  for (const EpisodeData& e : episodes) {
    for (std::size_t t = 0; t < e.features.rows(); ++t) {
      const std::string date = FormatDate(e.start + chr::days{static_cast<int>(t)});
      for (std::size_t c = 0; c < e.features.cols(); ++c) {
        out << date << ',' << e.region << ',' << e.feature_names[c] << ','
            << FormatDouble(e.features.at(t, c)) << '\n';
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Real-time harness

namespace {

// Days of data up to and including the anchor epiweek; 0 if outside.
std::size_t WindowDays(const EpisodeData& e, int anchor) {
  const EpiWeek w = EpiWeek::FromCode(anchor);
  const auto end = (EpiWeekStart(w) + chr::days{7} - e.start).count();
  if (end <= 0 || static_cast<std::size_t>(end) > e.days()) return 0;
  return static_cast<std::size_t>(end);
}

}  // namespace

std::vector<Forecast> RealTimeForecast(std::span<const EpisodeData> regions,
                                       std::span<const int> anchor_weeks,
                                       const Calibrator& calibrator,
                                       const ForecastOptions& options,
                                       std::vector<std::string>* diagnostics) {
  if (regions.empty()) throw std::invalid_argument("forecast: no regions");
  if (anchor_weeks.empty()) throw std::invalid_argument("forecast: no anchor weeks");
  if (options.horizon_weeks < 1) throw std::invalid_argument("forecast: horizon must be >= 1");
  auto note = [&](const std::string& m) {
    if (diagnostics) diagnostics->push_back(m);
  };
  std::vector<Forecast> out;
  for (int anchor : anchor_weeks) {
    std::vector<EpisodeData> windows;
    bool ok = true;
    for (const EpisodeData& e : regions) {
      const std::size_t days = WindowDays(e, anchor);
      if (days == 0) {
        note("anchor " + std::to_string(anchor) + " outside data of region " + e.region + ", skipped");
        ok = false;
        break;
      }
      if (days < static_cast<std::size_t>(7 * options.min_train_weeks)) {
        note("anchor " + std::to_string(anchor) + " leaves only " + std::to_string(days) +
             " training days in region " + e.region + ", skipped");
        ok = false;
        break;
      }
      // Everything the calibrator sees is this truncated copy.
      windows.push_back(e.Truncate(days));
    }
    if (!ok) continue;
    const int horizon_days = 7 * options.horizon_weeks;
    const std::vector<std::vector<double>> daily = calibrator(windows, horizon_days);
    if (daily.size() != regions.size()) {
      throw std::runtime_error("calibrator returned " + std::to_string(daily.size()) +
                               " series for " + std::to_string(regions.size()) + " regions");
    }
    for (std::size_t r = 0; r < regions.size(); ++r) {
      if (daily[r].size() != static_cast<std::size_t>(horizon_days)) {
        throw std::runtime_error("calibrator returned a series of the wrong length");
      }
      out.push_back({regions[r].region, anchor, WeeklyAggregate(daily[r], regions[r].disease)});
    }
  }
  return out;
}

std::vector<double> ForecastTruth(const EpisodeData& episode, const Forecast& forecast) {
  const EpiWeek w = EpiWeek::FromCode(forecast.anchor_week);
  const auto begin = (EpiWeekStart(w) + chr::days{7} - episode.start).count();
  const std::size_t days = 7 * forecast.values.size();
  if (begin < 0 || static_cast<std::size_t>(begin) + days > episode.days()) return {};
  return WeeklyAggregate(std::span<const double>(episode.target).subspan(begin, days),
                         episode.disease);
}

std::vector<RegionMetrics> EvaluateForecasts(std::span<const EpisodeData> regions,
                                             std::span<const Forecast> forecasts,
                                             bool rmse_no_sqrt) {
  std::vector<RegionMetrics> out;
  for (const EpisodeData& e : regions) {
    std::vector<double> pred, truth;
    for (const Forecast& f : forecasts) {
      if (f.region != e.region) continue;
      const std::vector<double> t = ForecastTruth(e, f);
      if (t.empty()) continue;
      pred.insert(pred.end(), f.values.begin(), f.values.end());
      truth.insert(truth.end(), t.begin(), t.end());
    }
    if (pred.empty()) continue;
    out.push_back({e.region, ComputeMetrics(pred, truth, rmse_no_sqrt), pred.size()});
  }
  return out;
}

void WriteForecastCsv(std::ostream& out, std::span<const Forecast> forecasts) {
  out << "region,anchor_week,horizon_weeks,prediction\n";
  for (const Forecast& f : forecasts) {
    for (std::size_t h = 0; h < f.values.size(); ++h) {
      out << f.region << ',' << f.anchor_week << ',' << h + 1 << ','
          << FormatDouble(f.values[h]) << '\n';
    }
  }
}

std::vector<Forecast> ReadForecastCsv(std::istream& in) {
  ExpectHeader(in, "region,anchor_week,horizon_weeks,prediction", "forecast csv");
  std::vector<Forecast> out;
  std::string line;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::string where = "forecast csv row " + std::to_string(row);
    const auto f = SplitCsv(line);
    if (f.size() != 4) throw std::invalid_argument(where + ": expected 4 fields");
    const int anchor = static_cast<int>(ParseNumber(f[1], where));
    const int h = static_cast<int>(ParseNumber(f[2], where));
    if (out.empty() || out.back().region != f[0] || out.back().anchor_week != anchor) {
      out.push_back({f[0], anchor, {}});
    }
    if (h != static_cast<int>(out.back().values.size()) + 1) {
      throw std::invalid_argument(where + ": horizons must be consecutive from 1");
    }
    out.back().values.push_back(ParseNumber(f[3], where));
  }
  return out;
}

void WriteMetricsCsv(std::ostream& out, std::span<const RegionMetrics> metrics) {
  out << "region,metric,value\n";
  for (const RegionMetrics& m : metrics) {
    out << m.region << ",nd," << FormatDouble(m.report.nd) << '\n';
    out << m.region << ",rmse," << FormatDouble(m.report.rmse) << '\n';
    out << m.region << ",mae," << FormatDouble(m.report.mae) << '\n';
  }
}

std::vector<RegionMetrics> ReadMetricsCsv(std::istream& in) {
  ExpectHeader(in, "region,metric,value", "metrics csv");
  std::vector<RegionMetrics> out;
  std::string line;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::string where = "metrics csv row " + std::to_string(row);
    const auto f = SplitCsv(line);
    if (f.size() != 3) throw std::invalid_argument(where + ": expected 3 fields");
    if (out.empty() || out.back().region != f[0]) out.push_back({f[0], {}, 0});
    const double v = ParseNumber(f[2], where);
    if (f[1] == "nd") {
      out.back().report.nd = v;
    } else if (f[1] == "rmse") {
      out.back().report.rmse = v;
    } else if (f[1] == "mae") {
      out.back().report.mae = v;
    } else {
      throw std::invalid_argument(where + ": unknown metric '" + f[1] + "'");
    }
  }
  return out;
}

}  // namespace diffabm
