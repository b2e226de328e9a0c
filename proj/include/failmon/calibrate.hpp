/*
 * Copyright 2026 The failmon Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Threshold calibration from windowed scores of successful ID rollouts.
//
// Three schemes:
//  * CP constant: gamma is the ceil((M+1)(1-delta))-th smallest per-rollout
//    maximum score. A fresh i.i.d. success exceeds it anywhere with
//    probability at most delta.
//  * CP band: split the set; the first half gives the functional mean mu(t),
//    the second half the sup-norm deviations R_i = max_t |eta_i(t)-mu(t)|/s(t).
//    gamma_t = mu(t) + k * s(t) with k the same conformal quantile of R.
//  * Time-varying: per-timestep Gaussian (mu + z_{1-delta} sigma) or
//    per-timestep empirical quantile. No finite-sample guarantee.
// Whenever the conformal rank exceeds the sample count the threshold is +inf.

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "failmon/aggregate.hpp"
#include "failmon/common.hpp"
#include "json.hpp"

namespace failmon::calibrate {

enum class Scheme { kCpConstant, kCpBand, kTimeVarying };
enum class TimeVaryingVariant { kGaussian, kEmpiricalQuantile };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::kCpConstant: return "constant";
    case Scheme::kCpBand: return "band";
    case Scheme::kTimeVarying: return "tvar";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "constant") return Scheme::kCpConstant;
  if (s == "band") return Scheme::kCpBand;
  if (s == "tvar") return Scheme::kTimeVarying;
  throw ParseError("unknown threshold scheme '" + std::string(s) + "'");
}

inline std::string_view to_string(TimeVaryingVariant v) {
  return v == TimeVaryingVariant::kGaussian ? "gaussian" : "quantile";
}

inline TimeVaryingVariant parse_variant(std::string_view s) {
  if (s == "gaussian") return TimeVaryingVariant::kGaussian;
  if (s == "quantile") return TimeVaryingVariant::kEmpiricalQuantile;
  throw ParseError("unknown time-varying variant '" + std::string(s) + "'");
}

struct ThresholdProfile {
  Scheme scheme = Scheme::kCpConstant;
  TimeVaryingVariant variant = TimeVaryingVariant::kGaussian;
  double delta = 0.1;
  long long horizon = 0;  // T
  long long stride = 1;   // h
  double constant = kInf;          // used when values is empty
  std::vector<double> values;      // gamma_t for t = 0, h, ..., T
  std::string provenance;

  bool per_step() const { return !values.empty(); }

  // Threshold at stride index n (t = n * h).
  double at(std::size_t n) const {
    if (!per_step()) return constant;
    if (n >= values.size())
      throw DimensionError("threshold profile covers " + std::to_string(values.size()) +
                           " steps, index " + std::to_string(n) + " requested");
    return values[n];
  }

  bool operator==(const ThresholdProfile&) const = default;
};

// Inverse standard-normal CDF (Acklam's rational approximation with one
// Halley refinement step).
inline double normal_quantile(double p) {
  if (!(p > 0 && p < 1)) {
    if (p == 0) return -kInf;
    if (p == 1) return kInf;
    throw ValueError("normal_quantile: p outside [0, 1]");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 1 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p == 0.5) return 0.0;
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2 * 3.14159265358979323846) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

// Conformal rank k = ceil((n + 1)(1 - delta)); returns the k-th smallest of
// `scores`, or +inf when k > n.
inline double conformal_quantile(std::vector<double> scores, double delta) {
  if (scores.empty()) throw ValueError("conformal_quantile: no scores");
  const auto n = static_cast<long long>(scores.size());
  const long long k = std::max(1LL, ceil_tolerant(static_cast<double>(n + 1) * (1.0 - delta)));
  if (k > n) return kInf;
  std::nth_element(scores.begin(), scores.begin() + (k - 1), scores.end());
  return scores[static_cast<std::size_t>(k - 1)];
}

inline void check_delta(double delta) {
  if (!(delta > 0 && delta < 1)) throw ValueError("delta must lie in (0, 1)");
}

inline std::size_t steps_for_horizon(long long horizon, long long stride) {
  return static_cast<std::size_t>(horizon / stride) + 1;
}

// Extends `series` to every stride index up to T by holding its last value.
inline ScoreSeries pad_series(const ScoreSeries& series, long long horizon) {
  if (series.values.empty()) throw ValueError("pad_series: empty series");
  ScoreSeries out = series;
  const std::size_t n = steps_for_horizon(horizon, series.stride);
  while (out.values.size() < n) {
    out.times.push_back(static_cast<long long>(out.values.size()) * series.stride);
    out.values.push_back(series.values.back());
  }
  return out;
}

namespace detail {

inline long long common_horizon(const std::vector<ScoreSeries>& set, std::optional<long long> horizon) {
  long long T = 0;
  for (const auto& s : set) {
    if (s.values.empty()) throw ValueError("calibration series is empty");
    if (s.stride != set.front().stride) throw DimensionError("calibration series differ in stride");
    T = std::max(T, static_cast<long long>(s.values.size() - 1) * s.stride);
  }
  if (horizon) {
    if (*horizon < T) throw DimensionError("horizon shorter than a calibration series");
    T = *horizon;
  }
  return T;
}

inline std::string provenance(const std::vector<ScoreSeries>& set, const std::string& extra) {
  std::string ids;
  for (const auto& s : set) {
    if (!ids.empty()) ids += ',';
    ids += s.rollout_id;
  }
  return "M=" + std::to_string(set.size()) + (extra.empty() ? "" : ";" + extra) + ";ids=" + ids;
}

inline double series_max(const ScoreSeries& s) {
  return *std::max_element(s.values.begin(), s.values.end());
}

}  // namespace detail

inline ThresholdProfile cp_constant(const std::vector<ScoreSeries>& series_set, double delta,
                                    std::optional<long long> horizon = std::nullopt) {
  check_delta(delta);
  if (series_set.empty()) throw ValueError("cp_constant: empty calibration set");
  ThresholdProfile p;
  p.scheme = Scheme::kCpConstant;
  p.delta = delta;
  p.stride = series_set.front().stride;
  p.horizon = detail::common_horizon(series_set, horizon);
  std::vector<double> conformity;
  for (const auto& s : series_set) conformity.push_back(detail::series_max(s));
  p.constant = conformal_quantile(std::move(conformity), delta);
  p.provenance = detail::provenance(series_set, "");
  return p;
}

struct Modulation {
  // Empty values means the constant modulation s(t) = 1/T.
  std::vector<double> values;

  static Modulation constant() { return {}; }
  static Modulation custom(std::vector<double> v) { return {std::move(v)}; }

  std::vector<double> resolve(std::size_t steps, long long horizon) const {
    if (values.empty()) return std::vector<double>(steps, horizon > 0 ? 1.0 / static_cast<double>(horizon) : 1.0);
    if (values.size() < steps) throw DimensionError("modulation shorter than the horizon");
    for (double v : values)
      if (!(v > 0)) throw ValueError("modulation s(t) must be positive");
    return {values.begin(), values.begin() + static_cast<std::ptrdiff_t>(steps)};
  }
};

// CP band from an explicit split: `mean_set` gives mu(t), `band_set` the
// deviation scores. Series are padded to the common horizon first.
inline ThresholdProfile cp_band_split(const std::vector<ScoreSeries>& mean_set,
                                      const std::vector<ScoreSeries>& band_set, double delta,
                                      const Modulation& modulation = Modulation::constant(),
                                      std::optional<long long> horizon = std::nullopt) {
  check_delta(delta);
  if (mean_set.empty() || band_set.empty())
    throw ValueError("cp_band: both calibration splits must be nonempty");
  std::vector<ScoreSeries> all = mean_set;
  all.insert(all.end(), band_set.begin(), band_set.end());
  const long long T = detail::common_horizon(all, horizon);
  const long long h = all.front().stride;
  const std::size_t steps = steps_for_horizon(T, h);
  const auto s = modulation.resolve(steps, T);

  std::vector<double> mu(steps, 0.0);
  for (const auto& series : mean_set) {
    const auto padded = pad_series(series, T);
    for (std::size_t n = 0; n < steps; ++n) mu[n] += padded.values[n];
  }
  for (auto& m : mu) m /= static_cast<double>(mean_set.size());

  std::vector<double> deviations;
  for (const auto& series : band_set) {
    const auto padded = pad_series(series, T);
    double r = 0.0;
    for (std::size_t n = 0; n < steps; ++n) r = std::max(r, std::abs(padded.values[n] - mu[n]) / s[n]);
    deviations.push_back(r);
  }
  const double k = conformal_quantile(std::move(deviations), delta);

  ThresholdProfile p;
  p.scheme = Scheme::kCpBand;
  p.delta = delta;
  p.horizon = T;
  p.stride = h;
  p.values.resize(steps);
  for (std::size_t n = 0; n < steps; ++n) p.values[n] = std::isinf(k) ? kInf : mu[n] + k * s[n];
  p.provenance = detail::provenance(mean_set, "mean_split") + "|" + detail::provenance(band_set, "band_split");
  return p;
}

// Seeded split: floor(M/2) series for the mean, the rest for the band.
inline ThresholdProfile cp_band(const std::vector<ScoreSeries>& series_set, double delta,
                                std::uint64_t split_seed,
                                const Modulation& modulation = Modulation::constant(),
                                std::optional<long long> horizon = std::nullopt) {
  if (series_set.size() < 2) throw ValueError("cp_band: need at least two calibration series");
  std::vector<std::size_t> idx(series_set.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(split_seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t m1 = series_set.size() / 2;
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m1));
  std::sort(idx.begin() + static_cast<std::ptrdiff_t>(m1), idx.end());
  std::vector<ScoreSeries> mean_set, band_set;
  for (std::size_t k = 0; k < idx.size(); ++k)
    (k < m1 ? mean_set : band_set).push_back(series_set[idx[k]]);
  auto p = cp_band_split(mean_set, band_set, delta, modulation, horizon);
  p.provenance += ";split_seed=" + std::to_string(split_seed);
  return p;
}

inline ThresholdProfile time_varying(const std::vector<ScoreSeries>& series_set, double delta,
                                     TimeVaryingVariant variant = TimeVaryingVariant::kGaussian,
                                     std::optional<long long> horizon = std::nullopt) {
  check_delta(delta);
  if (series_set.empty()) throw ValueError("time_varying: empty calibration set");
  if (variant == TimeVaryingVariant::kGaussian && series_set.size() < 2)
    throw ValueError("time_varying: the Gaussian variant needs at least two series");
  const long long T = detail::common_horizon(series_set, horizon);
  const long long h = series_set.front().stride;
  const std::size_t steps = steps_for_horizon(T, h);
  std::vector<ScoreSeries> padded;
  for (const auto& s : series_set) padded.push_back(pad_series(s, T));
  const auto M = static_cast<double>(series_set.size());

  ThresholdProfile p;
  p.scheme = Scheme::kTimeVarying;
  p.variant = variant;
  p.delta = delta;
  p.horizon = T;
  p.stride = h;
  p.values.resize(steps);
  const double z = normal_quantile(1.0 - delta);
  const long long k = std::clamp<long long>(ceil_tolerant(M * (1.0 - delta)), 1,
                                            static_cast<long long>(series_set.size()));
  std::vector<double> column(series_set.size());
  for (std::size_t n = 0; n < steps; ++n) {
    for (std::size_t i = 0; i < padded.size(); ++i) column[i] = padded[i].values[n];
    if (variant == TimeVaryingVariant::kGaussian) {
      double mean = 0.0;
      for (double v : column) mean += v;
      mean /= M;
      double ss = 0.0;
      for (double v : column) ss += (v - mean) * (v - mean);
      const double sigma = std::sqrt(ss / (M - 1));
      p.values[n] = sigma == 0 ? mean : mean + z * sigma;
    } else {
      std::nth_element(column.begin(), column.begin() + (k - 1), column.end());
      p.values[n] = column[static_cast<std::size_t>(k - 1)];
    }
  }
  p.provenance = detail::provenance(series_set, std::string(to_string(variant)));
  return p;
}

struct CalibrationOptions {
  TimeVaryingVariant variant = TimeVaryingVariant::kGaussian;
  std::uint64_t split_seed = 0;
  Modulation modulation;
};

inline ThresholdProfile calibrate(Scheme scheme, const std::vector<ScoreSeries>& series_set,
                                  double delta, const CalibrationOptions& opts = {},
                                  std::optional<long long> horizon = std::nullopt) {
  switch (scheme) {
    case Scheme::kCpConstant: return cp_constant(series_set, delta, horizon);
    case Scheme::kCpBand: return cp_band(series_set, delta, opts.split_seed, opts.modulation, horizon);
    case Scheme::kTimeVarying: return time_varying(series_set, delta, opts.variant, horizon);
  }
  throw ValueError("unknown scheme");
}

// ---------------------------------------------------------------------------
// Profile file. Infinite thresholds are written as the string "inf".

namespace detail {

inline nlohmann::ordered_json encode_threshold(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double decode_threshold(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    throw ParseError("bad threshold value '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace detail

inline nlohmann::ordered_json profile_to_json(const ThresholdProfile& p) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "threshold_profile";
  j["tool_version"] = kVersion;
  j["scheme"] = to_string(p.scheme);
  if (p.scheme == Scheme::kTimeVarying) j["variant"] = to_string(p.variant);
  j["delta"] = p.delta;
  j["T"] = p.horizon;
  j["h"] = p.stride;
  if (p.per_step()) {
    auto arr = nlohmann::ordered_json::array();
    for (double v : p.values) arr.push_back(detail::encode_threshold(v));
    j["values"] = std::move(arr);
  } else {
    j["values"] = detail::encode_threshold(p.constant);
  }
  j["provenance"] = p.provenance;
  return j;
}

inline ThresholdProfile profile_from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "threshold_profile") throw ParseError("not a threshold profile");
  if (j.at("schema_version").get<int>() != kSchemaVersion)
    throw ParseError("profile schema_version mismatch");
  ThresholdProfile p;
  p.scheme = parse_scheme(j.at("scheme").get<std::string>());
  if (j.contains("variant")) p.variant = parse_variant(j.at("variant").get<std::string>());
  p.delta = j.at("delta").get<double>();
  p.horizon = j.at("T").get<long long>();
  p.stride = j.at("h").get<long long>();
  const auto& v = j.at("values");
  if (v.is_array()) {
    for (const auto& x : v) p.values.push_back(detail::decode_threshold(x));
  } else {
    p.constant = detail::decode_threshold(v);
  }
  p.provenance = j.value("provenance", "");
  return p;
}

}  // namespace failmon::calibrate
