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

#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"

namespace failmon {
namespace {

using testing::random_rollout;

RolloutSet mixed_set(std::size_t n_success_id, std::size_t n_other, std::uint64_t seed = 1) {
  std::vector<Rollout> rs;
  for (std::size_t i = 0; i < n_success_id; ++i)
    rs.push_back(random_rollout("s" + std::to_string(i), 3, seed + i));
  for (std::size_t i = 0; i < n_other; ++i) {
    const auto outcome = i % 2 ? Outcome::kFail : Outcome::kSuccess;
    const auto dist = i % 3 ? Distribution::kOod : Distribution::kId;
    rs.push_back(random_rollout("x" + std::to_string(i), 2 + i % 3, seed + 1000 + i, 4, 6, 2, 2, 4, 12,
                                outcome, dist == Distribution::kId && outcome == Outcome::kSuccess
                                             ? Distribution::kOod
                                             : dist));
  }
  return RolloutSet(std::move(rs));
}

TEST(TraceLoad, EmptyInputIsRejected) {
  std::istringstream in("");
  try {
    read_rollouts(in);
    FAIL() << "expected an error";
  } catch (const ValueError& e) {
    EXPECT_STREQ(e.what(), "no rollouts");
  }
}

TEST(TraceLoad, ThreeStepRolloutHasEpisodeLengthEight) {
  std::istringstream in(
      R"({"id":"a","outcome":"success","distribution":"id","h":4,"T_max":8,"steps":[)"
      R"({"t":0,"embedding":[0.5],"actions":[[[1.0]],[[2.0]]]},)"
      R"({"t":4,"embedding":[0.25],"actions":[[[1.0]],[[2.0]]]},)"
      R"({"t":8,"embedding":[0.125],"actions":[[[1.0]],[[3.0]]]}]})");
  const auto set = read_rollouts(in);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set[0].episode_length(), 8);
  EXPECT_EQ(set.metadata().stride, 4);
  EXPECT_EQ(set.metadata().embedding_dim, 1u);
  EXPECT_EQ(set.metadata().action_dim, 1u);
  EXPECT_EQ(set.metadata().horizon, 1u);
}

TEST(TraceLoad, BatchSizeChangeIsADimensionError) {
  auto r = random_rollout("a", 2, 3, 4, 32);
  r.steps[1].actions = ActionBatch(16, 2, 2);
  std::ostringstream os;
  os << rollout_to_json(random_rollout("ok", 2, 4, 4, 32)).dump() << '\n'
     << rollout_to_json(r).dump() << '\n';
  std::istringstream in(os.str());
  try {
    read_rollouts(in);
    FAIL() << "expected a dimension error";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(TraceLoad, StrideMismatchRejected) {
  auto r = random_rollout("a", 3, 3);
  r.steps[2].t = 9;
  EXPECT_THROW(RolloutSet({r}), ValueError);
}

TEST(TraceLoad, EpisodeLongerThanTmaxRejected) {
  auto r = random_rollout("a", 3, 3);
  r.max_episode_length = 7;
  EXPECT_THROW(RolloutSet({r}), ValueError);
}

TEST(TraceLoad, NonFiniteValueRejected) {
  auto r = random_rollout("a", 2, 3);
  r.steps[1].embedding[0] = std::nan("");
  EXPECT_THROW(RolloutSet({r}), ValueError);
}

TEST(TraceLoad, SingleSampleBatchRejected) {
  auto r = random_rollout("a", 2, 3, 4, 1);
  EXPECT_THROW(RolloutSet({r}), DimensionError);
}

TEST(TraceLoad, DuplicateIdsRejected) {
  EXPECT_THROW(RolloutSet({random_rollout("a", 2, 1), random_rollout("a", 2, 2)}), ValueError);
}

TEST(TraceLoad, MixedEmbeddingDimsAcrossRolloutsRejected) {
  EXPECT_THROW(RolloutSet({random_rollout("a", 2, 1, 4), random_rollout("b", 2, 2, 5)}), DimensionError);
}

TEST(TraceLoad, MalformedJsonReportsLine) {
  std::istringstream in("\n{not json\n");
  try {
    read_rollouts(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(TraceLoad, BadOutcomeStringRejected) {
  auto j = rollout_to_json(random_rollout("a", 2, 1));
  j["outcome"] = "maybe";
  std::istringstream in(j.dump());
  EXPECT_THROW(read_rollouts(in), ParseError);
}

TEST(TraceRoundTrip, SerializeLoadSerializeIsByteIdentical) {
  std::vector<Rollout> rs;
  for (int i = 0; i < 5; ++i) rs.push_back(random_rollout("r" + std::to_string(i), 2 + i, 100 + i));
  rs[1].steps[0].embedding[0] = 0.1 + 0.2;  // not exactly representable in short decimal
  rs[2].steps[0].actions.at(0, 0, 0) = 1e-300;
  rs[3].steps[0].actions.at(1, 1, 1) = -2.5e300;
  const RolloutSet set(rs, R"({"origin":"unit test"})");
  const auto text = serialize_rollouts(set);
  std::istringstream in(text);
  const auto back = read_rollouts(in);
  EXPECT_EQ(back.rollouts(), set.rollouts());
  EXPECT_EQ(back.metadata().provenance, set.metadata().provenance);
  EXPECT_EQ(serialize_rollouts(back), text);
}

TEST(TraceRoundTrip, FileRoundTrip) {
  testing::TempDir dir("trace");
  const RolloutSet set({random_rollout("a", 4, 1), random_rollout("b", 2, 2)});
  save_rollouts(dir.file("t.jsonl"), set);
  EXPECT_EQ(load_rollouts(dir.file("t.jsonl")).rollouts(), set.rollouts());
  EXPECT_THROW(load_rollouts(dir.file("missing.jsonl")), Error);
}

TEST(TraceFormat, RecordKeysFollowSchema) {
  const auto j = rollout_to_json(random_rollout("a", 2, 1, 3, 2, 2, 1));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"id", "outcome", "distribution", "h", "T_max", "steps"}));
  const auto& actions = j["steps"][0]["actions"];
  EXPECT_EQ(actions.size(), 2u);        // B
  EXPECT_EQ(actions[0].size(), 2u);     // H
  EXPECT_EQ(actions[0][0].size(), 1u);  // D
}

TEST(SplitCalibration, FiftyFiftyIsReproducible) {
  const auto set = mixed_set(100, 0);
  const auto a = split_calibration(set, 50, 7);
  const auto b = split_calibration(set, 50, 7);
  EXPECT_EQ(a.calibration.size(), 50u);
  EXPECT_EQ(a.heldout.size(), 50u);
  EXPECT_EQ(a.calibration.rollouts(), b.calibration.rollouts());
  EXPECT_EQ(a.heldout.rollouts(), b.heldout.rollouts());
  const auto c = split_calibration(set, 50, 8);
  EXPECT_NE(a.calibration.rollouts(), c.calibration.rollouts());
}

TEST(SplitCalibration, ZeroIsIdentity) {
  const auto set = mixed_set(10, 5);
  const auto s = split_calibration(set, 0, 3);
  EXPECT_TRUE(s.calibration.empty());
  EXPECT_EQ(s.heldout.rollouts(), set.rollouts());
}

TEST(SplitCalibration, TooManyRequestedFails) {
  const auto set = mixed_set(10, 6);
  EXPECT_THROW(split_calibration(set, 11, 3), ValueError);
}

TEST(SplitCalibration, OnlySuccessfulIdRolloutsAreDrawn) {
  const auto set = mixed_set(12, 9);
  const auto s = split_calibration(set, 12, 5);
  for (const auto& r : s.calibration) {
    EXPECT_EQ(r.outcome, Outcome::kSuccess);
    EXPECT_EQ(r.distribution, Distribution::kId);
  }
  EXPECT_EQ(s.heldout.size(), 9u);
  EXPECT_EQ(s.heldout.count(Outcome::kSuccess, Distribution::kId), 0u);
}

TEST(RolloutSetFilter, PartitionCountsSumToTotal) {
  const auto set = mixed_set(7, 13);
  std::size_t total = 0;
  for (auto o : {Outcome::kSuccess, Outcome::kFail})
    for (auto d : {Distribution::kId, Distribution::kOod}) {
      EXPECT_EQ(set.filter(o, d).size(), set.count(o, d));
      total += set.count(o, d);
    }
  EXPECT_EQ(total, set.size());
}

TEST(RolloutSetFilter, MaxEpisodeLengthIsLargestTmax) {
  const RolloutSet set({random_rollout("a", 2, 1, 4, 6, 2, 2, 4, 40), random_rollout("b", 2, 2, 4, 6, 2, 2, 4, 90)});
  EXPECT_EQ(set.max_episode_length(), 90);
}

}  // namespace
}  // namespace failmon
