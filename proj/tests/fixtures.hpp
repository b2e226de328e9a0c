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

// Small builders shared by the test binaries.

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "failmon/failmon.hpp"

namespace failmon::testing {

// A rollout with `n_steps` steps whose values are drawn from a seeded normal.
inline Rollout random_rollout(std::string id, std::size_t n_steps, std::uint64_t seed,
                              std::size_t E = 4, std::size_t B = 6, std::size_t H = 2,
                              std::size_t D = 2, long long h = 4, long long T = -1,
                              Outcome outcome = Outcome::kSuccess,
                              Distribution dist = Distribution::kId) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Rollout r;
  r.id = std::move(id);
  r.outcome = outcome;
  r.distribution = dist;
  r.stride = h;
  r.max_episode_length = T >= 0 ? T : static_cast<long long>(n_steps - 1) * h;
  for (std::size_t n = 0; n < n_steps; ++n) {
    PolicyStep s;
    s.t = static_cast<long long>(n) * h;
    s.embedding.resize(E);
    for (auto& x : s.embedding) x = normal(rng);
    s.actions = ActionBatch(B, H, D);
    for (auto& x : s.actions.raw()) x = normal(rng);
    r.steps.push_back(std::move(s));
  }
  return r;
}

// Per-test scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("failmon-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline ScoreSeries series(std::vector<double> v, long long h = 1, std::string id = {}) {
  return ScoreSeries::from_values(std::move(v), h, std::move(id));
}

}  // namespace failmon::testing
