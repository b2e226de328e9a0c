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

// Sliding-window aggregation of per-step scores.

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "failmon/ace.hpp"
#include "failmon/common.hpp"
#include "failmon/rnd.hpp"
#include "failmon/trace.hpp"

namespace failmon {

enum class ScoreKind { kRnd, kAce, kCustom };

inline std::string_view to_string(ScoreKind k) {
  switch (k) {
    case ScoreKind::kRnd: return "rnd";
    case ScoreKind::kAce: return "ace";
    case ScoreKind::kCustom: return "custom";
  }
  return "?";
}

struct ScoreSeries {
  std::string rollout_id;
  ScoreKind kind = ScoreKind::kCustom;
  long long stride = 1;          // h
  std::vector<long long> times;  // t_n = n * h
  std::vector<double> values;
  std::size_t window = 0;        // 0 for raw per-step scores

  std::size_t size() const { return values.size(); }

  static ScoreSeries from_values(std::vector<double> values, long long stride = 1,
                                 std::string id = {}, ScoreKind kind = ScoreKind::kCustom) {
    ScoreSeries s;
    s.rollout_id = std::move(id);
    s.kind = kind;
    s.stride = stride;
    for (std::size_t n = 0; n < values.size(); ++n)
      s.times.push_back(static_cast<long long>(n) * stride);
    s.values = std::move(values);
    return s;
  }

  bool operator==(const ScoreSeries&) const = default;
};

// Running window sum over the last w pushed values. The sum is re-formed
// newest-to-oldest on each push, so it is a pure function of the window
// contents and nondecreasing in w for nonnegative inputs.
class WindowAccumulator {
 public:
  explicit WindowAccumulator(std::size_t window) : window_(window), ring_(window, 0.0) {
    if (window == 0) throw ValueError("window must be >= 1");
  }

  double push(double x) {
    ring_[head_] = x;
    head_ = (head_ + 1) % window_;
    if (filled_ < window_) ++filled_;
    double sum = 0.0;
    for (std::size_t k = 0; k < filled_; ++k) sum += ring_[(head_ + window_ - 1 - k) % window_];
    current_ = sum;
    return sum;
  }

  double value() const { return current_; }
  std::size_t window() const { return window_; }

 private:
  std::size_t window_;
  std::vector<double> ring_;
  std::size_t head_ = 0;
  std::size_t filled_ = 0;
  double current_ = 0.0;
};

inline ScoreSeries window_sum(const ScoreSeries& raw, std::size_t w) {
  WindowAccumulator acc(w);
  ScoreSeries out = raw;
  for (std::size_t n = 0; n < raw.values.size(); ++n) out.values[n] = acc.push(raw.values[n]);
  out.window = w;
  return out;
}

struct RawScores {
  ScoreSeries rnd;
  ScoreSeries ace;
};

// Per-step RND and ACE scores, no aggregation.
inline RawScores raw_scores(const Rollout& r, const rnd::RndModel& model,
                            const ace::AceConfig& ace_cfg) {
  RawScores out;
  out.rnd.rollout_id = out.ace.rollout_id = r.id;
  out.rnd.kind = ScoreKind::kRnd;
  out.ace.kind = ScoreKind::kAce;
  out.rnd.stride = out.ace.stride = r.stride;
  for (const auto& s : r.steps) {
    out.rnd.times.push_back(s.t);
    out.ace.times.push_back(s.t);
    out.rnd.values.push_back(rnd::rnd_score(model, s.embedding));
    out.ace.values.push_back(ace::ace_score(ace_cfg, s));
  }
  return out;
}

struct WindowedScores {
  ScoreSeries obs;  // eta_O
  ScoreSeries act;  // eta_A
};

inline WindowedScores score_rollout(const Rollout& r, const rnd::RndModel& model,
                                    const ace::AceConfig& ace_cfg, std::size_t w_obs,
                                    std::size_t w_act) {
  const auto raw = raw_scores(r, model, ace_cfg);
  return {window_sum(raw.rnd, w_obs), window_sum(raw.ace, w_act)};
}

}  // namespace failmon
