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

// Synthetic rollouts from a mixture-of-Gaussians stand-in policy.
//
// Embeddings are i.i.d. draws from a fixed Gaussian; benign OOD rollouts
// shift that Gaussian by a constant offset. Action batches are mixtures over
// n_modes well-separated centers around a smooth nominal path. Failures
// start at floor(failure_onset_fraction * T): from then on the embedding
// drifts by embed_drift per policy step along a per-rollout direction, and
// within-mode spread grows by entropy_inflation.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "failmon/common.hpp"
#include "failmon/trace.hpp"
#include "json.hpp"

namespace failmon::synth {

enum class Label { kSuccessId, kSuccessOod, kFailId, kFailOod };

inline constexpr std::array<Label, 4> kAllLabels = {Label::kSuccessId, Label::kSuccessOod,
                                                    Label::kFailId, Label::kFailOod};

inline std::string_view to_string(Label l) {
  switch (l) {
    case Label::kSuccessId: return "success_id";
    case Label::kSuccessOod: return "success_ood";
    case Label::kFailId: return "fail_id";
    case Label::kFailOod: return "fail_ood";
  }
  return "?";
}

inline Label parse_label(std::string_view s) {
  for (Label l : kAllLabels)
    if (to_string(l) == s) return l;
  throw ParseError("unknown rollout label '" + std::string(s) + "'");
}

struct ScenarioConfig {
  std::size_t embedding_dim = 16;  // E
  std::size_t batch = 32;          // B
  std::size_t horizon = 8;         // H
  std::size_t action_dim = 3;      // D
  long long stride = 4;            // h
  long long max_episode_length = 100;  // T
  int n_modes = 3;
  double mode_separation = 1.0;
  double base_noise = 0.03;
  double embed_drift = 0.5;
  double entropy_inflation = 6.0;
  double failure_onset_fraction = 0.5;
  double embed_noise = 0.2;            // per-dimension std of the base embedding Gaussian
  double ood_offset = 0.25;            // benign embedding shift for *_ood labels
  double min_success_fraction = 0.8;   // successes end uniformly in [frac*T, T]
  std::uint64_t seed = 0;

  void validate() const {
    if (embedding_dim < 1 || batch < 2 || horizon < 1 || action_dim < 1 || stride < 1 ||
        max_episode_length < 0)
      throw ValueError("ScenarioConfig: dimensions must be positive and B >= 2");
    if (n_modes < 1) throw ValueError("ScenarioConfig: n_modes must be >= 1");
    if (!(embed_noise > 0)) throw ValueError("ScenarioConfig: embed_noise must be > 0");
    if (!(base_noise > 0)) throw ValueError("ScenarioConfig: base_noise must be > 0");
    if (!(entropy_inflation >= 1)) throw ValueError("ScenarioConfig: entropy_inflation must be >= 1");
    if (!(failure_onset_fraction >= 0 && failure_onset_fraction <= 1))
      throw ValueError("ScenarioConfig: failure_onset_fraction must lie in [0, 1]");
    if (!(min_success_fraction >= 0 && min_success_fraction <= 1))
      throw ValueError("ScenarioConfig: min_success_fraction must lie in [0, 1]");
    if (!(mode_separation >= 0) || !(embed_drift >= 0) || !(ood_offset >= 0))
      throw ValueError("ScenarioConfig: separations and offsets must be >= 0");
  }

  long long failure_onset() const {
    return static_cast<long long>(std::floor(failure_onset_fraction *
                                             static_cast<double>(max_episode_length)));
  }
};

inline nlohmann::ordered_json to_json(const ScenarioConfig& c) {
  nlohmann::ordered_json j;
  j["E"] = c.embedding_dim;
  j["B"] = c.batch;
  j["H"] = c.horizon;
  j["D"] = c.action_dim;
  j["h"] = c.stride;
  j["T"] = c.max_episode_length;
  j["n_modes"] = c.n_modes;
  j["mode_separation"] = c.mode_separation;
  j["base_noise"] = c.base_noise;
  j["embed_drift"] = c.embed_drift;
  j["entropy_inflation"] = c.entropy_inflation;
  j["failure_onset_fraction"] = c.failure_onset_fraction;
  j["embed_noise"] = c.embed_noise;
  j["ood_offset"] = c.ood_offset;
  j["min_success_fraction"] = c.min_success_fraction;
  j["seed"] = c.seed;
  return j;
}

// Missing keys keep their defaults; unknown keys are rejected.
inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  ScenarioConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "E") c.embedding_dim = v.get<std::size_t>();
    else if (key == "B") c.batch = v.get<std::size_t>();
    else if (key == "H") c.horizon = v.get<std::size_t>();
    else if (key == "D") c.action_dim = v.get<std::size_t>();
    else if (key == "h") c.stride = v.get<long long>();
    else if (key == "T") c.max_episode_length = v.get<long long>();
    else if (key == "n_modes") c.n_modes = v.get<int>();
    else if (key == "mode_separation") c.mode_separation = v.get<double>();
    else if (key == "base_noise") c.base_noise = v.get<double>();
    else if (key == "embed_drift") c.embed_drift = v.get<double>();
    else if (key == "entropy_inflation") c.entropy_inflation = v.get<double>();
    else if (key == "failure_onset_fraction") c.failure_onset_fraction = v.get<double>();
    else if (key == "embed_noise") c.embed_noise = v.get<double>();
    else if (key == "ood_offset") c.ood_offset = v.get<double>();
    else if (key == "min_success_fraction") c.min_success_fraction = v.get<double>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else throw ParseError("unknown scenario key '" + key + "'");
  }
  c.validate();
  return c;
}

namespace detail {

// Scenario-wide constants, a pure function of cfg.seed.
struct ScenarioFrame {
  std::vector<double> embed_mean;             // E
  std::vector<double> ood_direction;          // E, unit
  std::vector<std::vector<double>> modes;     // n_modes x D
  std::vector<double> path_phase;             // D
};

inline std::vector<double> random_unit(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  double norm = 0;
  for (auto& x : v) {
    x = g(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (norm == 0) {
    v.assign(n, 0.0);
    v[0] = 1.0;
    return v;
  }
  for (auto& x : v) x /= norm;
  return v;
}

inline ScenarioFrame make_frame(const ScenarioConfig& cfg) {
  std::mt19937_64 rng(derive_seed(cfg.seed, 0xF00D));
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 2 * std::numbers::pi);
  ScenarioFrame f;
  f.embed_mean.resize(cfg.embedding_dim);
  for (auto& x : f.embed_mean) x = g(rng);
  f.ood_direction = random_unit(rng, cfg.embedding_dim);
  // Collinear centers: neighbouring modes are exactly mode_separation apart.
  const auto axis = random_unit(rng, cfg.action_dim);
  for (int m = 0; m < cfg.n_modes; ++m) {
    std::vector<double> c(cfg.action_dim);
    const double offset = (m - 0.5 * (cfg.n_modes - 1)) * cfg.mode_separation;
    for (std::size_t d = 0; d < cfg.action_dim; ++d) c[d] = offset * axis[d];
    f.modes.push_back(std::move(c));
  }
  f.path_phase.resize(cfg.action_dim);
  for (auto& p : f.path_phase) p = u(rng);
  return f;
}

inline double nominal_path(const ScenarioConfig& cfg, const ScenarioFrame& f, long long k,
                           std::size_t d) {
  const double T = static_cast<double>(std::max<long long>(cfg.max_episode_length, 1));
  return 0.5 * std::sin(2 * std::numbers::pi * static_cast<double>(k) / T + f.path_phase[d]);
}

}  // namespace detail

inline Rollout generate_rollout(const ScenarioConfig& cfg, Label label, std::uint64_t seed,
                                std::string id = {}) {
  cfg.validate();
  const auto frame = detail::make_frame(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);

  const bool fails = label == Label::kFailId || label == Label::kFailOod;
  const bool ood = label == Label::kSuccessOod || label == Label::kFailOod;

  Rollout r;
  r.id = id.empty() ? std::string(to_string(label)) + "-" + std::to_string(seed) : std::move(id);
  r.outcome = fails ? Outcome::kFail : Outcome::kSuccess;
  r.distribution = ood ? Distribution::kOod : Distribution::kId;
  r.stride = cfg.stride;
  r.max_episode_length = cfg.max_episode_length;

  const long long last_index = cfg.max_episode_length / cfg.stride;
  long long n_steps = last_index + 1;
  if (!fails) {
    const auto lo = static_cast<long long>(
        std::ceil(cfg.min_success_fraction * static_cast<double>(last_index)));
    std::uniform_int_distribution<long long> len(std::min(lo, last_index), last_index);
    n_steps = len(rng) + 1;
  }

  const auto drift_dir = detail::random_unit(rng, cfg.embedding_dim);
  std::uniform_int_distribution<int> any_mode(0, cfg.n_modes - 1);
  std::bernoulli_distribution pick_sticky(0.5);
  const int sticky_mode = any_mode(rng);
  std::vector<double> rollout_offset(cfg.action_dim);
  for (auto& x : rollout_offset) x = 0.5 * cfg.base_noise * g(rng);

  const long long onset = cfg.failure_onset();
  long long onset_index = -1;
  for (long long n = 0; n < n_steps; ++n) {
    PolicyStep s;
    s.t = n * cfg.stride;
    const bool failing = fails && s.t >= onset;
    if (failing && onset_index < 0) onset_index = n;

    s.embedding.resize(cfg.embedding_dim);
    const double drift = failing ? cfg.embed_drift * static_cast<double>(n - onset_index + 1) : 0.0;
    for (std::size_t e = 0; e < cfg.embedding_dim; ++e) {
      double v = frame.embed_mean[e] + cfg.embed_noise * g(rng);
      if (ood) v += cfg.ood_offset * frame.ood_direction[e];
      v += drift * drift_dir[e];
      s.embedding[e] = v;
    }

    const double spread = cfg.base_noise * (failing ? cfg.entropy_inflation : 1.0);
    std::vector<double> step_jitter(cfg.action_dim);
    for (auto& x : step_jitter) x = 0.1 * cfg.base_noise * g(rng);
    s.actions = ActionBatch(cfg.batch, cfg.horizon, cfg.action_dim);
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const int mode = pick_sticky(rng) ? sticky_mode : any_mode(rng);
      for (std::size_t i = 0; i < cfg.horizon; ++i)
        for (std::size_t d = 0; d < cfg.action_dim; ++d)
          s.actions.at(b, i, d) = detail::nominal_path(cfg, frame, s.t + static_cast<long long>(i), d) +
                                  frame.modes[static_cast<std::size_t>(mode)][d] +
                                  rollout_offset[d] + step_jitter[d] + spread * g(rng);
    }
    r.steps.push_back(std::move(s));
  }
  return r;
}

using LabelCounts = std::map<Label, std::size_t>;

inline RolloutSet generate_dataset(const ScenarioConfig& cfg, const LabelCounts& counts,
                                   std::uint64_t seed, const std::string& id_prefix = {}) {
  cfg.validate();
  std::vector<Rollout> out;
  std::uint64_t stream = 0;
  for (Label l : kAllLabels) {
    const auto it = counts.find(l);
    const std::size_t n = it == counts.end() ? 0 : it->second;
    for (std::size_t k = 0; k < n; ++k, ++stream) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "-%05zu", k);
      out.push_back(generate_rollout(cfg, l, derive_seed(seed, stream),
                                     id_prefix + std::string(to_string(l)) + buf));
    }
  }
  nlohmann::ordered_json prov;
  prov["generator"] = "failmon.synth";
  prov["version"] = kVersion;
  prov["seed"] = seed;
  prov["scenario"] = to_json(cfg);
  return RolloutSet(std::move(out), prov.dump());
}

}  // namespace failmon::synth
