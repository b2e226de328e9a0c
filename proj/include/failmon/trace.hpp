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

// Rollout data model and the newline-delimited JSON trace format.
//
// One line per rollout:
//   {"id": str, "outcome": "success"|"fail", "distribution": "id"|"ood",
//    "h": int, "T_max": int,
//    "steps": [{"t": int, "embedding": [...], "actions": [[[...]]]}]}
// `actions` is nested B x H x D. An optional first line carrying
// "schema_version" (and no "steps") holds provenance metadata.

#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "failmon/common.hpp"
#include "json.hpp"

namespace failmon {

enum class Outcome { kSuccess, kFail };
enum class Distribution { kId, kOod };

inline std::string_view to_string(Outcome o) {
  return o == Outcome::kSuccess ? "success" : "fail";
}
inline std::string_view to_string(Distribution d) {
  return d == Distribution::kId ? "id" : "ood";
}

// B sampled chunks x H prediction steps x D action dims, row-major.
class ActionBatch {
 public:
  ActionBatch() = default;
  ActionBatch(std::size_t batch, std::size_t horizon, std::size_t dims)
      : batch_(batch), horizon_(horizon), dims_(dims),
        data_(batch * horizon * dims, 0.0) {}

  std::size_t batch() const { return batch_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t dims() const { return dims_; }

  double& at(std::size_t b, std::size_t i, std::size_t d) {
    return data_[(b * horizon_ + i) * dims_ + d];
  }
  double at(std::size_t b, std::size_t i, std::size_t d) const {
    return data_[(b * horizon_ + i) * dims_ + d];
  }

  // B x D samples for prediction step i, row-major.
  std::vector<double> horizon_slice(std::size_t i) const {
    std::vector<double> out(batch_ * dims_);
    for (std::size_t b = 0; b < batch_; ++b)
      for (std::size_t d = 0; d < dims_; ++d) out[b * dims_ + d] = at(b, i, d);
    return out;
  }

  std::span<const double> raw() const { return data_; }
  std::span<double> raw() { return data_; }

  bool operator==(const ActionBatch&) const = default;

 private:
  std::size_t batch_ = 0;
  std::size_t horizon_ = 0;
  std::size_t dims_ = 0;
  std::vector<double> data_;
};

struct PolicyStep {
  long long t = 0;
  std::vector<double> embedding;
  ActionBatch actions;

  bool operator==(const PolicyStep&) const = default;
};

struct Rollout {
  std::string id;
  Outcome outcome = Outcome::kSuccess;
  Distribution distribution = Distribution::kId;
  long long stride = 1;               // h
  long long max_episode_length = 0;   // T
  std::vector<PolicyStep> steps;

  // T', the last policy timestep.
  long long episode_length() const { return steps.empty() ? 0 : steps.back().t; }
  bool is_failure() const { return outcome == Outcome::kFail; }

  bool operator==(const Rollout&) const = default;
};

struct RolloutMetadata {
  std::size_t embedding_dim = 0;  // E
  long long stride = 0;           // h
  std::size_t horizon = 0;        // H
  std::size_t action_dim = 0;     // D
  std::string provenance;

  bool operator==(const RolloutMetadata&) const = default;
};

class RolloutSet {
 public:
  RolloutSet() = default;
  // Validates every rollout and the cross-rollout invariants.
  explicit RolloutSet(std::vector<Rollout> rollouts, std::string provenance = {});

  const std::vector<Rollout>& rollouts() const { return rollouts_; }
  const RolloutMetadata& metadata() const { return meta_; }
  std::size_t size() const { return rollouts_.size(); }
  bool empty() const { return rollouts_.empty(); }
  auto begin() const { return rollouts_.begin(); }
  auto end() const { return rollouts_.end(); }
  const Rollout& operator[](std::size_t i) const { return rollouts_[i]; }

  // Maximum episode length T over the set.
  long long max_episode_length() const {
    long long T = 0;
    for (const auto& r : rollouts_) T = std::max(T, r.max_episode_length);
    return T;
  }

  RolloutSet filter(Outcome o, Distribution d) const {
    std::vector<Rollout> out;
    for (const auto& r : rollouts_)
      if (r.outcome == o && r.distribution == d) out.push_back(r);
    return RolloutSet(std::move(out), meta_.provenance);
  }

  std::size_t count(Outcome o, Distribution d) const {
    return static_cast<std::size_t>(std::count_if(
        rollouts_.begin(), rollouts_.end(),
        [&](const Rollout& r) { return r.outcome == o && r.distribution == d; }));
  }

  bool operator==(const RolloutSet&) const = default;

 private:
  std::vector<Rollout> rollouts_;
  RolloutMetadata meta_;
};

namespace detail {

inline void validate_rollout(const Rollout& r) {
  if (r.steps.empty()) throw ValueError("rollout '" + r.id + "' has no steps");
  if (r.stride < 1) throw ValueError("rollout '" + r.id + "' has stride < 1");
  const auto& first = r.steps.front();
  const std::size_t E = first.embedding.size();
  const std::size_t B = first.actions.batch();
  const std::size_t H = first.actions.horizon();
  const std::size_t D = first.actions.dims();
  if (E < 1) throw DimensionError("rollout '" + r.id + "' has empty embedding");
  if (B < 2 || H < 1 || D < 1)
    throw DimensionError("rollout '" + r.id + "' needs B >= 2, H >= 1, D >= 1");
  for (std::size_t n = 0; n < r.steps.size(); ++n) {
    const auto& s = r.steps[n];
    if (s.t != static_cast<long long>(n) * r.stride)
      throw ValueError("rollout '" + r.id + "' step " + std::to_string(n) +
                       " has t=" + std::to_string(s.t) + ", expected " +
                       std::to_string(static_cast<long long>(n) * r.stride));
    if (s.embedding.size() != E || s.actions.batch() != B ||
        s.actions.horizon() != H || s.actions.dims() != D)
      throw DimensionError("rollout '" + r.id + "' step " + std::to_string(n) +
                           " dimensions differ from step 0");
    if (!all_finite(s.embedding) || !all_finite(s.actions.raw()))
      throw ValueError("rollout '" + r.id + "' step " + std::to_string(n) +
                       " has a non-finite value");
  }
  if (r.episode_length() > r.max_episode_length)
    throw ValueError("rollout '" + r.id + "' is longer than T_max");
}

}  // namespace detail

inline RolloutSet::RolloutSet(std::vector<Rollout> rollouts, std::string provenance)
    : rollouts_(std::move(rollouts)) {
  meta_.provenance = std::move(provenance);
  std::set<std::string> ids;
  for (const auto& r : rollouts_) {
    detail::validate_rollout(r);
    if (!ids.insert(r.id).second) throw ValueError("duplicate rollout id '" + r.id + "'");
    const auto& s = r.steps.front();
    if (&r == &rollouts_.front()) {
      meta_.embedding_dim = s.embedding.size();
      meta_.stride = r.stride;
      meta_.horizon = s.actions.horizon();
      meta_.action_dim = s.actions.dims();
      continue;
    }
    if (s.embedding.size() != meta_.embedding_dim || r.stride != meta_.stride ||
        s.actions.horizon() != meta_.horizon || s.actions.dims() != meta_.action_dim)
      throw DimensionError("rollout '" + r.id + "' does not share (E, h, H, D) with the set");
  }
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json rollout_to_json(const Rollout& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["outcome"] = to_string(r.outcome);
  j["distribution"] = to_string(r.distribution);
  j["h"] = r.stride;
  j["T_max"] = r.max_episode_length;
  auto steps = nlohmann::ordered_json::array();
  for (const auto& s : r.steps) {
    nlohmann::ordered_json js;
    js["t"] = s.t;
    js["embedding"] = s.embedding;
    auto chunks = nlohmann::ordered_json::array();
    for (std::size_t b = 0; b < s.actions.batch(); ++b) {
      auto chunk = nlohmann::ordered_json::array();
      for (std::size_t i = 0; i < s.actions.horizon(); ++i) {
        auto a = nlohmann::ordered_json::array();
        for (std::size_t d = 0; d < s.actions.dims(); ++d) a.push_back(s.actions.at(b, i, d));
        chunk.push_back(std::move(a));
      }
      chunks.push_back(std::move(chunk));
    }
    js["actions"] = std::move(chunks);
    steps.push_back(std::move(js));
  }
  j["steps"] = std::move(steps);
  return j;
}

namespace detail {

inline double as_double(const nlohmann::json& v) {
  if (!v.is_number()) throw ParseError("expected a number");
  return v.get<double>();
}

inline ActionBatch parse_actions(const nlohmann::json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty() ||
      !j[0][0].is_array() || j[0][0].empty())
    throw ParseError("'actions' must be a nonempty B x H x D array");
  const std::size_t B = j.size(), H = j[0].size(), D = j[0][0].size();
  ActionBatch out(B, H, D);
  for (std::size_t b = 0; b < B; ++b) {
    if (!j[b].is_array() || j[b].size() != H)
      throw DimensionError("ragged action chunk " + std::to_string(b));
    for (std::size_t i = 0; i < H; ++i) {
      const auto& a = j[b][i];
      if (!a.is_array() || a.size() != D)
        throw DimensionError("ragged action vector in chunk " + std::to_string(b));
      for (std::size_t d = 0; d < D; ++d) out.at(b, i, d) = as_double(a[d]);
    }
  }
  return out;
}

inline Outcome parse_outcome(const std::string& s) {
  if (s == "success") return Outcome::kSuccess;
  if (s == "fail") return Outcome::kFail;
  throw ParseError("unknown outcome '" + s + "'");
}

inline Distribution parse_distribution(const std::string& s) {
  if (s == "id") return Distribution::kId;
  if (s == "ood") return Distribution::kOod;
  throw ParseError("unknown distribution '" + s + "'");
}

}  // namespace detail

inline Rollout rollout_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("record is not an object");
  for (const char* key : {"id", "outcome", "distribution", "h", "T_max", "steps"})
    if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  Rollout r;
  r.id = j.at("id").get<std::string>();
  r.outcome = detail::parse_outcome(j.at("outcome").get<std::string>());
  r.distribution = detail::parse_distribution(j.at("distribution").get<std::string>());
  r.stride = j.at("h").get<long long>();
  r.max_episode_length = j.at("T_max").get<long long>();
  for (const auto& js : j.at("steps")) {
    PolicyStep s;
    s.t = js.at("t").get<long long>();
    for (const auto& v : js.at("embedding")) s.embedding.push_back(detail::as_double(v));
    s.actions = detail::parse_actions(js.at("actions"));
    r.steps.push_back(std::move(s));
  }
  return r;
}

inline void write_rollouts(std::ostream& os, const RolloutSet& set) {
  if (!set.metadata().provenance.empty()) {
    nlohmann::ordered_json header;
    header["schema_version"] = kSchemaVersion;
    header["provenance"] = set.metadata().provenance;
    os << header.dump() << '\n';
  }
  for (const auto& r : set) os << rollout_to_json(r).dump() << '\n';
}

inline std::string serialize_rollouts(const RolloutSet& set) {
  std::ostringstream os;
  write_rollouts(os, set);
  return os.str();
}

// Parses and validates a trace stream. Errors carry the 1-based line number.
inline RolloutSet read_rollouts(std::istream& is) {
  std::vector<Rollout> rollouts;
  std::string provenance;
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> ids;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.is_object() && j.contains("schema_version") && !j.contains("steps")) {
        if (j.at("schema_version").get<int>() != kSchemaVersion)
          throw ParseError("unsupported schema_version");
        if (j.contains("provenance")) provenance = j.at("provenance").get<std::string>();
        continue;
      }
      Rollout r = rollout_from_json(j);
      detail::validate_rollout(r);
      if (!ids.insert(r.id).second) throw ValueError("duplicate rollout id '" + r.id + "'");
      rollouts.push_back(std::move(r));
    } catch (const Error& e) {
      const std::string msg = "line " + std::to_string(lineno) + ": " + e.what();
      if (e.kind() == "dimension") throw DimensionError(msg);
      if (e.kind() == "value") throw ValueError(msg);
      if (e.kind() == "parse") throw ParseError(msg);
      throw Error(e.kind(), msg);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(lineno) + ": malformed record: " + e.what());
    }
  }
  if (rollouts.empty()) throw ValueError("no rollouts");
  return RolloutSet(std::move(rollouts), std::move(provenance));
}

inline RolloutSet load_rollouts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open trace file '" + path + "'");
  return read_rollouts(in);
}

inline void save_rollouts(const std::string& path, const RolloutSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write trace file '" + path + "'");
  write_rollouts(out, set);
}

struct CalibrationSplit {
  RolloutSet calibration;
  RolloutSet heldout;
};

// Draws m successful ID rollouts uniformly without replacement.
inline CalibrationSplit split_calibration(const RolloutSet& set, std::size_t m,
                                          std::uint64_t seed) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (set[i].outcome == Outcome::kSuccess && set[i].distribution == Distribution::kId)
      pool.push_back(i);
  if (pool.size() < m)
    throw ValueError("split_calibration: requested " + std::to_string(m) +
                     " successful ID rollouts, only " + std::to_string(pool.size()) +
                     " available");
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<bool> chosen(set.size(), false);
  for (std::size_t k = 0; k < m; ++k) chosen[pool[k]] = true;
  std::vector<Rollout> calib, rest;
  for (std::size_t i = 0; i < set.size(); ++i)
    (chosen[i] ? calib : rest).push_back(set[i]);
  const auto& prov = set.metadata().provenance;
  return {RolloutSet(std::move(calib), prov), RolloutSet(std::move(rest), prov)};
}

}  // namespace failmon
