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

// Failure-prediction metrics and the (scheme, window, delta) sweep.
//
// Failed rollouts are positives. A true positive detected at t contributes
// 1 - t/T to the timestep-wise accuracy (TWA). Accuracy and TWA are the
// balanced variants: 1/2 (positive-side rate + TNR).

#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "failmon/ace.hpp"
#include "failmon/aggregate.hpp"
#include "failmon/calibrate.hpp"
#include "failmon/detect.hpp"
#include "failmon/rnd.hpp"
#include "failmon/trace.hpp"

namespace failmon::eval {

inline constexpr double kUnreliableRate = 0.4;

struct ConfusionCounts {
  std::size_t positives = 0;  // P
  std::size_t negatives = 0;  // N
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::vector<double> detection_fractions;  // t_i / T for each true positive

  void validate() const {
    if (tp + fn != positives || fp + tn != negatives)
      throw ValueError("ConfusionCounts: TP+FN must equal P and FP+TN must equal N");
    if (detection_fractions.size() != tp)
      throw ValueError("ConfusionCounts: one detection fraction per true positive");
    for (double f : detection_fractions)
      if (!(f >= 0 && f <= 1)) throw ValueError("ConfusionCounts: detection fraction outside [0, 1]");
  }
};

struct MetricRecord {
  std::optional<double> tpr;
  std::optional<double> tnr;
  std::optional<double> acc;  // balanced
  std::optional<double> twa;  // balanced
  std::optional<double> dt;   // mean normalised detection time over TPs
  bool dt_unreliable = false;
};

inline bool unreliable(const std::optional<double>& tpr, const std::optional<double>& tnr) {
  return (tpr && *tpr < kUnreliableRate) || (tnr && *tnr < kUnreliableRate);
}

inline MetricRecord metrics(const ConfusionCounts& c) {
  c.validate();
  MetricRecord m;
  if (c.positives > 0) m.tpr = static_cast<double>(c.tp) / static_cast<double>(c.positives);
  if (c.negatives > 0) m.tnr = static_cast<double>(c.tn) / static_cast<double>(c.negatives);
  if (m.tpr && m.tnr) {
    m.acc = 0.5 * (*m.tpr + *m.tnr);
    double early = 0.0;
    for (double f : c.detection_fractions) early += 1.0 - f;
    m.twa = 0.5 * (early / static_cast<double>(c.positives) + *m.tnr);
  }
  if (c.tp > 0) {
    double sum = 0.0;
    for (double f : c.detection_fractions) sum += f;
    m.dt = sum / static_cast<double>(c.tp);
  }
  m.dt_unreliable = unreliable(m.tpr, m.tnr);
  return m;
}

// Tallies combined detections against rollout outcomes. `detections[i]`
// belongs to `rollouts[i]`.
inline ConfusionCounts count_confusion(const RolloutSet& rollouts,
                                       const std::vector<DetectionResult>& detections) {
  if (rollouts.size() != detections.size())
    throw DimensionError("count_confusion: one detection per rollout required");
  ConfusionCounts c;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const bool flagged = detections[i].flagged();
    if (rollouts[i].is_failure()) {
      ++c.positives;
      if (flagged) {
        ++c.tp;
        c.detection_fractions.push_back(*detections[i].normalized_dt());
      } else {
        ++c.fn;
      }
    } else {
      ++c.negatives;
      flagged ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

struct SweepConfig {
  std::vector<calibrate::Scheme> schemes = {calibrate::Scheme::kCpConstant,
                                            calibrate::Scheme::kCpBand,
                                            calibrate::Scheme::kTimeVarying};
  std::vector<std::size_t> windows;
  std::vector<double> deltas;
  CombineMode mode = CombineMode::kAnd;
  calibrate::CalibrationOptions calibration;

  // delta in {0.01, ..., 0.10}, i.e. 1 - delta in {0.90, ..., 0.99}.
  static std::vector<double> default_deltas() {
    std::vector<double> d;
    for (int k = 1; k <= 10; ++k) d.push_back(k / 100.0);
    return d;
  }
};

struct SweepCell {
  calibrate::Scheme scheme;
  std::size_t window;
  std::optional<double> delta;  // empty for delta-averaged cells
  MetricRecord metrics;
};

struct EvalReport {
  std::vector<SweepCell> cells;     // one per (scheme, w, delta)
  std::vector<SweepCell> averaged;  // one per (scheme, w), averaged over delta
  std::optional<std::size_t> best;  // index into `averaged` with the highest TWA
  std::size_t overlap = 0;          // calibration ids also present in the dataset

  const SweepCell* best_cell() const { return best ? &averaged[*best] : nullptr; }
};

inline MetricRecord average(const std::vector<MetricRecord>& records) {
  auto mean_of = [&](auto field) -> std::optional<double> {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& r : records)
      if (const auto& v = r.*field) {
        sum += *v;
        ++n;
      }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  };
  MetricRecord m;
  m.tpr = mean_of(&MetricRecord::tpr);
  m.tnr = mean_of(&MetricRecord::tnr);
  m.acc = mean_of(&MetricRecord::acc);
  m.twa = mean_of(&MetricRecord::twa);
  m.dt = mean_of(&MetricRecord::dt);
  m.dt_unreliable = unreliable(m.tpr, m.tnr);
  return m;
}

// Per-rollout raw scores, computed once and reused across the grid.
inline std::vector<RawScores> score_all(const RolloutSet& set, const rnd::RndModel& model,
                                        const ace::AceConfig& ace_cfg) {
  std::vector<RawScores> out;
  out.reserve(set.size());
  for (const auto& r : set) out.push_back(raw_scores(r, model, ace_cfg));
  return out;
}

// For every (scheme, w, delta): calibrate observation and action thresholds
// on `calib`, run detection on `dataset`, compute metrics. Averages over
// delta per (scheme, w) first, then picks the cell with the highest TWA.
inline EvalReport sweep(const RolloutSet& dataset, const RolloutSet& calib, const rnd::RndModel& model,
                        const ace::AceConfig& ace_cfg, const SweepConfig& cfg) {
  if (cfg.schemes.empty() || cfg.windows.empty() || cfg.deltas.empty())
    throw ValueError("sweep: empty grid");
  if (calib.empty()) throw ValueError("sweep: empty calibration set");
  for (const auto& r : calib)
    if (r.outcome != Outcome::kSuccess || r.distribution != Distribution::kId)
      throw ValueError("sweep: calibration rollout '" + r.id + "' is not a successful ID rollout");

  EvalReport report;
  {
    std::set<std::string> ids;
    for (const auto& r : dataset) ids.insert(r.id);
    for (const auto& r : calib) report.overlap += ids.count(r.id);
  }

  const long long horizon = std::max(dataset.max_episode_length(), calib.max_episode_length());
  const auto calib_raw = score_all(calib, model, ace_cfg);
  const auto test_raw = score_all(dataset, model, ace_cfg);

  for (auto scheme : cfg.schemes) {
    for (std::size_t w : cfg.windows) {
      std::vector<ScoreSeries> calib_obs, calib_act;
      for (const auto& r : calib_raw) {
        calib_obs.push_back(window_sum(r.rnd, w));
        calib_act.push_back(window_sum(r.ace, w));
      }
      std::vector<WindowedScores> test_eta;
      for (const auto& r : test_raw) test_eta.push_back({window_sum(r.rnd, w), window_sum(r.ace, w)});

      std::vector<MetricRecord> per_delta;
      for (double delta : cfg.deltas) {
        const auto obs_profile = calibrate::calibrate(scheme, calib_obs, delta, cfg.calibration, horizon);
        const auto act_profile = calibrate::calibrate(scheme, calib_act, delta, cfg.calibration, horizon);
        std::vector<DetectionResult> combined;
        combined.reserve(test_eta.size());
        for (const auto& eta : test_eta)
          combined.push_back(detect(eta, obs_profile, act_profile, cfg.mode).combined);
        auto m = metrics(count_confusion(dataset, combined));
        report.cells.push_back({scheme, w, delta, m});
        per_delta.push_back(std::move(m));
      }
      report.averaged.push_back({scheme, w, std::nullopt, average(per_delta)});
    }
  }

  for (std::size_t i = 0; i < report.averaged.size(); ++i) {
    const auto& twa = report.averaged[i].metrics.twa;
    if (!twa) continue;
    if (!report.best || *twa > *report.averaged[*report.best].metrics.twa) report.best = i;
  }
  return report;
}

// ---------------------------------------------------------------------------
// CSV report

namespace detail {

inline std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

inline void write_row(std::ostream& os, const SweepCell& c) {
  os << calibrate::to_string(c.scheme) << ',' << c.window << ','
     << (c.delta ? fmt(c.delta) : std::string("mean")) << ',' << fmt(c.metrics.tpr) << ','
     << fmt(c.metrics.tnr) << ',' << fmt(c.metrics.acc) << ',' << fmt(c.metrics.twa) << ','
     << fmt(c.metrics.dt) << ',' << (c.metrics.dt_unreliable ? 1 : 0) << '\n';
}

}  // namespace detail

// `header` lines are emitted as '#'-prefixed comments before the column row.
inline void write_report_csv(std::ostream& os, const EvalReport& report,
                             const std::vector<std::string>& header = {}) {
  for (const auto& line : header) os << "# " << line << '\n';
  os << "# delta-averaged rows (delta=mean) average each (scheme,w) over delta before best-w selection\n";
  if (const auto* best = report.best_cell())
    os << "# best: scheme=" << calibrate::to_string(best->scheme) << " w=" << best->window
       << " twa=" << detail::fmt(best->metrics.twa) << '\n';
  os << "scheme,w,delta,tpr,tnr,acc,twa,dt,dt_unreliable_flag\n";
  for (const auto& c : report.cells) detail::write_row(os, c);
  for (const auto& c : report.averaged) detail::write_row(os, c);
}

}  // namespace failmon::eval
