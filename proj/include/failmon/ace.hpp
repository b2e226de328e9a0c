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

// Action-chunk entropy: binned entropy of the B actions sampled for each
// prediction step, summed over the chunk horizon.
//
// Cell widths are fixed offline as alpha * R_d, where R_d is the action range
// of dimension d over the calibration set. At runtime each dimension of a
// batch is split into ceil((max - min) / (alpha * R_d)) half-open bins
// anchored at the batch minimum; the topmost sample is clamped into the last
// bin.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "failmon/common.hpp"
#include "failmon/trace.hpp"
#include "json.hpp"

namespace failmon::ace {

inline constexpr double kDefaultAlpha = 0.05;
inline constexpr double kRangeFloor = 1e-9;

struct AceConfig {
  double alpha = kDefaultAlpha;
  std::vector<double> ranges;        // R_d per action dimension
  std::vector<bool> degenerate;      // true where R_d was floored

  void validate() const {
    if (!(alpha > 0 && alpha < 1)) throw ValueError("AceConfig: alpha must lie in (0, 1)");
    if (ranges.empty()) throw ValueError("AceConfig: no action ranges");
    for (double r : ranges)
      if (!(r > 0) || !std::isfinite(r)) throw ValueError("AceConfig: ranges must be positive");
  }

  bool operator==(const AceConfig&) const = default;
};

inline nlohmann::ordered_json to_json(const AceConfig& c) {
  nlohmann::ordered_json j;
  j["alpha"] = c.alpha;
  j["log_base"] = 2;
  j["ranges"] = c.ranges;
  j["degenerate"] = c.degenerate;
  return j;
}

inline AceConfig ace_config_from_json(const nlohmann::json& j) {
  AceConfig c;
  c.alpha = j.at("alpha").get<double>();
  c.ranges = j.at("ranges").get<std::vector<double>>();
  c.degenerate = j.value("degenerate", std::vector<bool>(c.ranges.size(), false));
  c.validate();
  return c;
}

inline AceConfig fit_ace_ranges(const RolloutSet& calib, double alpha = kDefaultAlpha) {
  if (calib.empty()) throw ValueError("fit_ace_ranges: empty calibration set");
  const std::size_t D = calib.metadata().action_dim;
  std::vector<double> lo(D, std::numeric_limits<double>::infinity());
  std::vector<double> hi(D, -std::numeric_limits<double>::infinity());
  for (const auto& r : calib)
    for (const auto& s : r.steps)
      for (std::size_t b = 0; b < s.actions.batch(); ++b)
        for (std::size_t i = 0; i < s.actions.horizon(); ++i)
          for (std::size_t d = 0; d < D; ++d) {
            lo[d] = std::min(lo[d], s.actions.at(b, i, d));
            hi[d] = std::max(hi[d], s.actions.at(b, i, d));
          }
  AceConfig cfg;
  cfg.alpha = alpha;
  for (std::size_t d = 0; d < D; ++d) {
    const double range = hi[d] - lo[d];
    const bool flat = !(range > kRangeFloor);
    cfg.ranges.push_back(flat ? kRangeFloor : range);
    cfg.degenerate.push_back(flat);
  }
  cfg.validate();
  return cfg;
}

// Per-dimension cell index of every sample; `samples` is B x D row-major.
inline std::vector<long long> cell_indices(const AceConfig& cfg, std::span<const double> samples) {
  const std::size_t D = cfg.ranges.size();
  const std::size_t B = samples.size() / D;
  std::vector<long long> cells(B * D);
  for (std::size_t d = 0; d < D; ++d) {
    double lo = samples[d], hi = samples[d];
    for (std::size_t b = 1; b < B; ++b) {
      lo = std::min(lo, samples[b * D + d]);
      hi = std::max(hi, samples[b * D + d]);
    }
    const double width = cfg.alpha * cfg.ranges[d];
    const auto bins = std::max<long long>(1, static_cast<long long>(std::ceil((hi - lo) / width)));
    for (std::size_t b = 0; b < B; ++b) {
      const auto idx = static_cast<long long>(std::floor((samples[b * D + d] - lo) / width));
      cells[b * D + d] = std::clamp<long long>(idx, 0, bins - 1);
    }
  }
  return cells;
}

// Entropy in bits of the joint histogram over occupied cells. Occupied cells
// are visited in lexicographic order of their index tuples.
inline double step_entropy(const AceConfig& cfg, std::span<const double> samples) {
  const std::size_t D = cfg.ranges.size();
  if (D == 0 || samples.size() % D != 0)
    throw DimensionError("step_entropy: sample buffer is not B x D");
  const std::size_t B = samples.size() / D;
  if (B < 2) throw ValueError("step_entropy: need at least two samples");
  if (!all_finite(samples)) throw ValueError("step_entropy: non-finite action");

  const auto cells = cell_indices(cfg, samples);
  std::vector<std::size_t> order(B);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t b) {
    return std::span<const long long>(cells.data() + b * D, D);
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ka = key(a), kb = key(b);
    return std::lexicographical_compare(ka.begin(), ka.end(), kb.begin(), kb.end());
  });

  const double n = static_cast<double>(B);
  double entropy = 0.0;
  for (std::size_t run = 0; run < B;) {
    std::size_t end = run + 1;
    while (end < B && std::ranges::equal(key(order[end]), key(order[run]))) ++end;
    const double p = static_cast<double>(end - run) / n;
    entropy -= p * std::log2(p);
    run = end;
  }
  // Rounding in the sum can overshoot the bound by an ulp.
  return std::min(entropy, std::log2(n));
}

// Sum over the H prediction steps of the step entropy of the B samples.
inline double ace_score(const AceConfig& cfg, const ActionBatch& actions) {
  if (actions.dims() != cfg.ranges.size())
    throw DimensionError("ace_score: batch has " + std::to_string(actions.dims()) +
                         " action dims, config has " + std::to_string(cfg.ranges.size()));
  double score = 0.0;
  for (std::size_t i = 0; i < actions.horizon(); ++i)
    score += step_entropy(cfg, actions.horizon_slice(i));
  return score;
}

inline double ace_score(const AceConfig& cfg, const PolicyStep& step) {
  return ace_score(cfg, step.actions);
}

}  // namespace failmon::ace
