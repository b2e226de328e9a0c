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

// Threshold decisions, AND/OR combination and the streaming monitor.

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "failmon/ace.hpp"
#include "failmon/aggregate.hpp"
#include "failmon/calibrate.hpp"
#include "failmon/rnd.hpp"

namespace failmon {

enum class CombineMode { kAnd, kOr };

inline std::string_view to_string(CombineMode m) { return m == CombineMode::kAnd ? "and" : "or"; }

inline CombineMode parse_combine_mode(std::string_view s) {
  if (s == "and") return CombineMode::kAnd;
  if (s == "or") return CombineMode::kOr;
  throw ParseError("unknown combine mode '" + std::string(s) + "'");
}

struct DetectionResult {
  std::string rollout_id;
  std::vector<bool> per_step;
  std::vector<long long> times;
  long long horizon = 0;  // T used to normalise the detection time
  std::optional<std::size_t> detection_index;

  bool flagged() const { return detection_index.has_value(); }

  std::optional<long long> detection_time() const {
    if (!detection_index) return std::nullopt;
    return times[*detection_index];
  }

  // t* / T.
  std::optional<double> normalized_dt() const {
    if (!detection_index) return std::nullopt;
    if (horizon <= 0) return 0.0;
    return std::min(1.0, static_cast<double>(times[*detection_index]) / static_cast<double>(horizon));
  }

  void finalize() {
    detection_index.reset();
    for (std::size_t n = 0; n < per_step.size(); ++n)
      if (per_step[n]) {
        detection_index = n;
        break;
      }
  }

  bool operator==(const DetectionResult&) const = default;
};

// per_step[n] = eta(t_n) > gamma_{t_n}; ties do not fire.
inline DetectionResult threshold_decide(const ScoreSeries& eta,
                                        const calibrate::ThresholdProfile& profile) {
  if (profile.per_step() && profile.values.size() < eta.values.size())
    throw DimensionError("threshold profile for '" + eta.rollout_id + "' is shorter than the series");
  DetectionResult r;
  r.rollout_id = eta.rollout_id;
  r.times = eta.times;
  r.horizon = profile.horizon;
  r.per_step.resize(eta.values.size());
  for (std::size_t n = 0; n < eta.values.size(); ++n) r.per_step[n] = eta.values[n] > profile.at(n);
  r.finalize();
  return r;
}

// Elementwise AND / OR of two detectors on the same rollout. Under AND both
// must exceed at the same timestep.
inline DetectionResult combine(const DetectionResult& obs, const DetectionResult& act,
                               CombineMode mode) {
  if (obs.rollout_id != act.rollout_id || obs.per_step.size() != act.per_step.size())
    throw DimensionError("combine: detector results refer to different series");
  DetectionResult r;
  r.rollout_id = obs.rollout_id;
  r.times = obs.times;
  r.horizon = obs.horizon;
  r.per_step.resize(obs.per_step.size());
  for (std::size_t n = 0; n < r.per_step.size(); ++n)
    r.per_step[n] = mode == CombineMode::kAnd ? (obs.per_step[n] && act.per_step[n])
                                              : (obs.per_step[n] || act.per_step[n]);
  r.finalize();
  return r;
}

struct RolloutDetection {
  DetectionResult obs;
  DetectionResult act;
  DetectionResult combined;
};

inline RolloutDetection detect(const WindowedScores& eta, const calibrate::ThresholdProfile& obs_profile,
                               const calibrate::ThresholdProfile& act_profile, CombineMode mode) {
  RolloutDetection d;
  d.obs = threshold_decide(eta.obs, obs_profile);
  d.act = threshold_decide(eta.act, act_profile);
  d.combined = combine(d.obs, d.act, mode);
  return d;
}

// Everything the runtime monitor needs, shared read-only across monitors.
struct MonitorSetup {
  rnd::RndModel rnd;
  ace::AceConfig ace;
  calibrate::ThresholdProfile obs_profile;
  calibrate::ThresholdProfile act_profile;
  std::size_t w_obs = 1;
  std::size_t w_act = 1;
  CombineMode mode = CombineMode::kAnd;
};

// Per-rollout streaming state. Single owner; feed policy steps in order.
class MonitorState {
 public:
  explicit MonitorState(std::shared_ptr<const MonitorSetup> setup)
      : setup_(std::move(setup)), obs_(setup_->w_obs), act_(setup_->w_act) {}

  // Scores one policy step, updates both windows, returns the combined
  // decision at this step.
  bool stream_step(const PolicyStep& step) {
    const double s_obs = rnd::rnd_score(setup_->rnd, step.embedding);
    const double s_act = ace::ace_score(setup_->ace, step);
    const double eta_obs = obs_.push(s_obs);
    const double eta_act = act_.push(s_act);
    obs_fire_ = eta_obs > setup_->obs_profile.at(index_);
    act_fire_ = eta_act > setup_->act_profile.at(index_);
    decision_ = setup_->mode == CombineMode::kAnd ? (obs_fire_ && act_fire_) : (obs_fire_ || act_fire_);
    if (decision_ && !first_alarm_) first_alarm_ = step.t;
    ++index_;
    return decision_;
  }

  bool decision() const { return decision_; }
  bool obs_decision() const { return obs_fire_; }
  bool act_decision() const { return act_fire_; }
  double eta_obs() const { return obs_.value(); }
  double eta_act() const { return act_.value(); }
  std::size_t steps_seen() const { return index_; }
  std::optional<long long> first_alarm() const { return first_alarm_; }

 private:
  std::shared_ptr<const MonitorSetup> setup_;
  WindowAccumulator obs_;
  WindowAccumulator act_;
  std::size_t index_ = 0;
  bool decision_ = false;
  bool obs_fire_ = false;
  bool act_fire_ = false;
  std::optional<long long> first_alarm_;
};

// Batch path: score the whole rollout then decide.
inline RolloutDetection detect_rollout(const Rollout& r, const MonitorSetup& setup) {
  const auto eta = score_rollout(r, setup.rnd, setup.ace, setup.w_obs, setup.w_act);
  return detect(eta, setup.obs_profile, setup.act_profile, setup.mode);
}

}  // namespace failmon
