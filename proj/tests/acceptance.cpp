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

// Acceptance gate. Runs every criterion, prints one PASS/FAIL line each with
// its wall time against the budget, and exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace failmon::acceptance {
namespace {

using calibrate::Scheme;

// Collects sub-check failures for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failures_.size() < 20) failures_.push_back(what);
    failed_ = failed_ || !ok;
  }
  void note(const std::string& line) { notes_.push_back(line); }

  bool ok() const { return !failed_; }
  std::size_t checks() const { return checks_; }
  const std::vector<std::string>& failures() const { return failures_; }
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  bool failed_ = false;
  std::size_t checks_ = 0;
  std::vector<std::string> failures_, notes_;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Conformal coverage of CP-constant and CP-band on fresh ID successes.

void coverage(Check& c) {
  synth::ScenarioConfig cfg;
  cfg.seed = 101;
  const auto train_set = synth::generate_dataset(cfg, {{synth::Label::kSuccessId, 50}}, 1, "train-");
  const auto calib = synth::generate_dataset(cfg, {{synth::Label::kSuccessId, 100}}, 2, "calib-");
  const auto fresh = synth::generate_dataset(cfg, {{synth::Label::kSuccessId, 1000}}, 3, "fresh-");

  auto model = rnd::init_rnd(cfg.embedding_dim, rnd::kDefaultOutputDim, 4, 0.125);
  rnd::TrainConfig tc;
  tc.epochs = 30;
  tc.seed = 5;
  model = rnd::train_rnd(std::move(model), rnd::id_success_embeddings(train_set), tc).model;
  const auto ace_cfg = ace::fit_ace_ranges(calib);
  const auto calib_raw = eval::score_all(calib, model, ace_cfg);
  const auto fresh_raw = eval::score_all(fresh, model, ace_cfg);

  const std::size_t w = 5;
  std::vector<ScoreSeries> cal_obs, cal_act;
  for (const auto& r : calib_raw) {
    cal_obs.push_back(window_sum(r.rnd, w));
    cal_act.push_back(window_sum(r.ace, w));
  }
  std::vector<WindowedScores> eta;
  for (const auto& r : fresh_raw) eta.push_back({window_sum(r.rnd, w), window_sum(r.ace, w)});

  for (double delta : {0.05, 0.1})
    for (auto scheme : {Scheme::kCpConstant, Scheme::kCpBand}) {
      calibrate::CalibrationOptions opts;
      opts.split_seed = 6;
      const auto po = calibrate::calibrate(scheme, cal_obs, delta, opts, cfg.max_episode_length);
      const auto pa = calibrate::calibrate(scheme, cal_act, delta, opts, cfg.max_episode_length);
      std::size_t fo = 0, fa = 0, fand = 0;
      for (const auto& e : eta) {
        const auto d = detect(e, po, pa, CombineMode::kAnd);
        fo += d.obs.flagged();
        fa += d.act.flagged();
        fand += d.combined.flagged();
      }
      const double n = static_cast<double>(eta.size());
      const double bound = delta + 0.05;
      const std::string tag = std::string(calibrate::to_string(scheme)) + fmt(" delta=%.2f", delta);
      c.note(tag + fmt(": FPR obs=%.3f act=%.3f and=%.3f (bound %.2f)", fo / n, fa / n, fand / n, bound));
      c.expect(fo / n <= bound, tag + " obs coverage");
      c.expect(fa / n <= bound, tag + " act coverage");
      c.expect(fand / n <= bound, tag + " AND coverage");
    }
}

// ---------------------------------------------------------------------------
// 2. ACE against the dense nested-loop histogram oracle.

void ace_oracle(Check& c) {
  std::mt19937_64 rng(2);
  std::size_t steps = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto k = oracle::random_ace_case(rng, 64, 8, 4);
    for (std::size_t i = 0; i < k.actions.horizon(); ++i, ++steps) {
      const auto s = k.actions.horizon_slice(i);
      c.expect(ace::step_entropy(k.cfg, s) == oracle::step_entropy(k.cfg, s),
               "step_entropy mismatch in case " + std::to_string(trial));
    }
    c.expect(ace::ace_score(k.cfg, k.actions) == oracle::ace_score(k.cfg, k.actions),
             "ace_score mismatch in case " + std::to_string(trial));
  }
  c.note("500 batches, " + std::to_string(steps) + " step entropies compared bit-for-bit");
}

// ---------------------------------------------------------------------------
// 3. Entropy bounds and invariances.

void entropy_invariants(Check& c) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> bdist(2, 64), ddist(1, 4);
  std::uniform_int_distribution<int> shift(-512, 512), alpha_k(1, 8);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t B = bdist(rng), D = ddist(rng);
    ace::AceConfig cfg;
    cfg.alpha = alpha_k(rng) / 16.0;
    cfg.ranges.assign(D, 4.0);
    cfg.degenerate.assign(D, false);
    auto s = oracle::dyadic_samples(rng, B, D);
    const std::string tag = "case " + std::to_string(trial);
    const double h = ace::step_entropy(cfg, s);
    c.expect(h >= 0 && h <= std::log2(static_cast<double>(B)), tag + " bounds");

    std::vector<std::size_t> perm(B);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> p(s.size());
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t d = 0; d < D; ++d) p[b * D + d] = s[perm[b] * D + d];
    c.expect(ace::step_entropy(cfg, p) == h, tag + " permutation");

    auto t = s;
    for (std::size_t d = 0; d < D; ++d) {
      const double off = shift(rng) / 8.0;
      for (std::size_t b = 0; b < B; ++b) t[b * D + d] += off;
    }
    c.expect(ace::step_entropy(cfg, t) == h, tag + " translation");

    std::vector<double> same(B * D);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t d = 0; d < D; ++d) same[b * D + d] = s[d];
    c.expect(ace::step_entropy(cfg, same) == 0.0, tag + " identical rows");
  }
}

// ---------------------------------------------------------------------------
// 4. RND gradients, frozen target, OOD separation after training.

double gradient_error() {
  const MlpSpec spec{{3, 4, 2}, {Activation::kLeakyRelu, Activation::kNone}, 0.01};
  const Mlp predictor(spec, 11), target(spec, 12);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 1);
  Eigen::MatrixXd x(3, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  const Eigen::MatrixXd y = target.forward(x);
  const auto analytic = Mlp::flatten(rnd::loss_and_gradient(predictor, x, y).gradient);
  Mlp probe = predictor;
  auto params = predictor.parameters();
  const double h = 1e-6;
  double diff2 = 0, norm2 = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + h;
    probe.set_parameters(params);
    const double up = rnd::mean_loss(probe, x, y);
    params[k] = saved - h;
    probe.set_parameters(params);
    const double down = rnd::mean_loss(probe, x, y);
    params[k] = saved;
    const double numeric = (up - down) / (2 * h);
    diff2 += (numeric - analytic[k]) * (numeric - analytic[k]);
    norm2 += std::max(numeric * numeric, analytic[k] * analytic[k]);
  }
  return std::sqrt(diff2 / norm2);
}

void rnd_correctness(Check& c) {
  const double err = gradient_error();
  c.note(fmt("gradient check relative error %.3e", err));
  c.expect(err <= 1e-4, "gradient check");

  synth::ScenarioConfig cfg;
  cfg.seed = 404;
  const auto set = synth::generate_dataset(cfg, {{synth::Label::kSuccessId, 90}}, 7);
  auto embeddings = rnd::id_success_embeddings(set);
  embeddings.resize(2000);
  const auto initial = rnd::init_rnd(cfg.embedding_dim, rnd::kDefaultOutputDim, 8, 0.125);
  const auto before = initial.target.parameters();
  rnd::TrainConfig tc;
  tc.epochs = 30;
  tc.seed = 9;
  const auto trained = rnd::train_rnd(initial, embeddings, tc);
  const auto after = trained.model.target.parameters();
  c.expect(before.size() == after.size() &&
               std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0,
           "target weights changed during training");

  const auto frame = synth::detail::make_frame(cfg);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0, 1);
  double id = 0, shifted = 0;
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> e(cfg.embedding_dim), o(cfg.embedding_dim);
    for (std::size_t d = 0; d < e.size(); ++d) {
      e[d] = frame.embed_mean[d] + cfg.embed_noise * g(rng);
      o[d] = e[d] + 3 * cfg.embed_noise;
    }
    id += rnd::rnd_score(trained.model, e);
    shifted += rnd::rnd_score(trained.model, o);
  }
  const auto& hist = trained.history;
  c.note(fmt("train loss %.4f -> %.4f, val %.4f", hist.initial_train_loss, hist.train.back(), hist.val.back()));
  c.note(fmt("mean score ID %.4f, 3-sigma shifted %.4f, ratio %.2f (need >= 2)", id / 1000, shifted / 1000,
             shifted / id));
  c.expect(shifted >= 2 * id, "shifted/ID score ratio");
}

// ---------------------------------------------------------------------------
// 5. Threshold arithmetic.

ScoreSeries S(std::vector<double> v) { return ScoreSeries::from_values(std::move(v)); }

void threshold_arithmetic(Check& c) {
  std::vector<ScoreSeries> nine;
  for (int i = 1; i <= 9; ++i) nine.push_back(S({0.0, i / 10.0}));
  c.expect(calibrate::cp_constant(nine, 0.1).constant == 0.9, "cp_constant M=9 delta=0.1");
  c.expect(calibrate::cp_constant(nine, 0.05).constant == kInf, "cp_constant overflow");
  c.expect(calibrate::cp_constant({S({0.2, 1.7})}, 0.5).constant == 1.7, "cp_constant M=1");

  const auto band = calibrate::cp_band_split({S({1, 1})}, {S({1, 2}), S({1, 0})}, 0.3,
                                             calibrate::Modulation::custom({1.0, 1.0}));
  c.expect(band.values == std::vector<double>{kInf, kInf}, "cp_band hand example overflow");
  std::vector<ScoreSeries> flat(10, S({2.5, 2.5, 2.5}));
  c.expect(calibrate::cp_band(flat, 0.5, 1).values == std::vector<double>(3, 2.5), "cp_band zero band");

  std::vector<ScoreSeries> five;
  for (int v : {3, 1, 5, 2, 4}) five.push_back(S({static_cast<double>(v)}));
  c.expect(calibrate::time_varying(five, 0.2, calibrate::TimeVaryingVariant::kEmpiricalQuantile).values[0] == 4,
           "tvar nearest rank");
  c.expect(calibrate::time_varying(std::vector<ScoreSeries>(3, S({0.3, 0.9})), 0.05).values ==
               std::vector<double>{0.3, 0.9},
           "tvar zero sigma");
  const auto half = calibrate::time_varying(five, 0.5);
  c.expect(half.values[0] == 3.0, "tvar Gaussian at delta=0.5 equals mean");

  std::mt19937_64 rng(5);
  std::exponential_distribution<double> e(1.0);
  std::vector<ScoreSeries> set;
  for (int i = 0; i < 60; ++i) {
    std::vector<double> v(1 + i % 15);
    for (auto& x : v) x = e(rng);
    set.push_back(S(v));
  }
  for (auto scheme : {Scheme::kCpConstant, Scheme::kCpBand, Scheme::kTimeVarying})
    for (auto variant : {calibrate::TimeVaryingVariant::kGaussian, calibrate::TimeVaryingVariant::kEmpiricalQuantile}) {
      calibrate::CalibrationOptions opts;
      opts.variant = variant;
      opts.split_seed = 3;
      auto prev = calibrate::calibrate(scheme, set, 0.5, opts);
      for (int k = 49; k >= 1; --k) {
        const auto cur = calibrate::calibrate(scheme, set, k / 100.0, opts);
        for (std::size_t n = 0; n < 15; ++n)
          c.expect(cur.at(n) >= prev.at(n), std::string(calibrate::to_string(scheme)) + " monotone in delta");
        prev = cur;
      }
    }
}

// ---------------------------------------------------------------------------
// 6. Detector algebra.

void detector_algebra(Check& c) {
  synth::ScenarioConfig cfg;
  cfg.seed = 606;
  const auto calib = synth::generate_dataset(cfg, {{synth::Label::kSuccessId, 30}}, 1, "calib-");
  const auto data = synth::generate_dataset(cfg,
                                            {{synth::Label::kSuccessId, 25},
                                             {synth::Label::kSuccessOod, 25},
                                             {synth::Label::kFailId, 25},
                                             {synth::Label::kFailOod, 25}},
                                            2);
  auto setup = std::make_shared<MonitorSetup>();
  setup->rnd = rnd::init_rnd(cfg.embedding_dim, 32, 3, 0.03);
  setup->ace = ace::fit_ace_ranges(calib);
  std::size_t compared = 0, and_flagged = 0;
  for (auto scheme : {Scheme::kCpConstant, Scheme::kCpBand, Scheme::kTimeVarying})
    for (std::size_t w : {1u, 4u, 10u}) {
      setup->w_obs = w;
      setup->w_act = w + 1;
      std::vector<ScoreSeries> obs, act;
      for (const auto& r : calib) {
        const auto eta = score_rollout(r, setup->rnd, setup->ace, setup->w_obs, setup->w_act);
        obs.push_back(eta.obs);
        act.push_back(eta.act);
      }
      calibrate::CalibrationOptions opts;
      opts.split_seed = 4;
      setup->obs_profile = calibrate::calibrate(scheme, obs, 0.1, opts, cfg.max_episode_length);
      setup->act_profile = calibrate::calibrate(scheme, act, 0.1, opts, cfg.max_episode_length);
      const std::string tag = std::string(calibrate::to_string(scheme)) + " w=" + std::to_string(w);
      for (const auto& r : data) {
        const auto batch = detect_rollout(r, *setup);
        MonitorState state(setup);
        bool same = true;
        for (std::size_t n = 0; n < r.steps.size(); ++n) {
          const bool d = state.stream_step(r.steps[n]);
          same = same && d == batch.combined.per_step[n] && state.obs_decision() == batch.obs.per_step[n] &&
                 state.act_decision() == batch.act.per_step[n];
        }
        same = same && state.first_alarm() == batch.combined.detection_time();
        c.expect(same, tag + " stream != batch for " + r.id);
        ++compared;

        const auto eta = score_rollout(r, setup->rnd, setup->ace, setup->w_obs, setup->w_act);
        const auto either = detect(eta, setup->obs_profile, setup->act_profile, CombineMode::kOr).combined;
        if (batch.combined.flagged()) {
          ++and_flagged;
          c.expect(batch.act.flagged(), tag + " AND flagged but action-only did not: " + r.id);
          c.expect(either.flagged() && *either.detection_index <= *batch.combined.detection_index,
                   tag + " AND-dominance violated: " + r.id);
        }
      }
    }
  c.note(std::to_string(compared) + " rollout replays compared, " + std::to_string(and_flagged) +
         " AND alarms checked for inclusion");
}

// ---------------------------------------------------------------------------
// 7. Metric arithmetic.

eval::ConfusionCounts counts(std::size_t P, std::size_t N, std::vector<double> f, std::size_t tn) {
  eval::ConfusionCounts c;
  c.positives = P;
  c.negatives = N;
  c.tp = f.size();
  c.fn = P - c.tp;
  c.tn = tn;
  c.fp = N - tn;
  c.detection_fractions = std::move(f);
  return c;
}

void metric_correctness(Check& c) {
  const auto m = eval::metrics(counts(2, 2, {0.5}, 1));
  c.expect(*m.twa == 0.375 && *m.acc == 0.5 && *m.dt == 0.5, "worked example");
  const auto perfect = eval::metrics(counts(4, 4, {0, 0, 0, 0}, 4));
  c.expect(*perfect.twa == 1 && *perfect.acc == 1 && *perfect.dt == 0, "perfect predictor");
  const auto all = eval::metrics(counts(4, 4, {0, 0, 0, 0}, 0));
  c.expect(*all.tpr == 1 && *all.tnr == 0 && *all.acc == 0.5 && *all.twa == 0.5, "flag-everything predictor");

  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> size(1, 100);
  std::uniform_real_distribution<double> frac(0, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t P = size(rng), N = size(rng);
    const std::size_t tp = std::uniform_int_distribution<std::size_t>(0, P)(rng);
    const std::size_t tn = std::uniform_int_distribution<std::size_t>(0, N)(rng);
    std::vector<double> f(tp);
    for (auto& x : f) x = frac(rng);
    const auto r = eval::metrics(counts(P, N, f, tn));
    c.expect(*r.twa <= *r.acc, "TWA > Acc in case " + std::to_string(trial));
  }
}

// ---------------------------------------------------------------------------
// 8. End-to-end separability on the synthetic scenario.

void separability(Check& c) {
  synth::ScenarioConfig cfg;
  cfg.entropy_inflation = 6.0;
  cfg.embed_drift = 0.5;
  cfg.failure_onset_fraction = 0.5;
  cfg.seed = 808;
  const auto calib = synth::generate_dataset(cfg, {{synth::Label::kSuccessId, 50}}, 1, "calib-");
  const auto data = synth::generate_dataset(cfg,
                                            {{synth::Label::kSuccessId, 50},
                                             {synth::Label::kSuccessOod, 50},
                                             {synth::Label::kFailId, 50},
                                             {synth::Label::kFailOod, 50}},
                                            2);
  auto model = rnd::init_rnd(cfg.embedding_dim, rnd::kDefaultOutputDim, 3, 0.125);
  rnd::TrainConfig tc;
  tc.epochs = 50;
  tc.seed = 4;
  model = rnd::train_rnd(std::move(model), rnd::id_success_embeddings(calib), tc).model;
  const auto ace_cfg = ace::fit_ace_ranges(calib);

  eval::SweepConfig sc;
  for (std::size_t w = 1; w <= 50; ++w) sc.windows.push_back(w);
  sc.deltas = eval::SweepConfig::default_deltas();
  sc.calibration.split_seed = 5;
  const auto report = eval::sweep(data, calib, model, ace_cfg, sc);
  const auto* best = report.best_cell();
  c.expect(best != nullptr, "sweep produced a best cell");
  if (!best) return;
  const auto& m = best->metrics;
  c.note(fmt("best cell: w=%.0f TPR=%.3f TNR=%.3f TWA=%.3f", static_cast<double>(best->window), *m.tpr, *m.tnr,
             *m.twa) +
         fmt(" DT=%.3f", m.dt ? *m.dt : -1.0) + " scheme=" + std::string(calibrate::to_string(best->scheme)));
  c.expect(*m.tpr >= 0.9, "TPR >= 0.9");
  c.expect(*m.tnr >= 0.9, "TNR >= 0.9");
  c.expect(m.dt && *m.dt <= 0.7, "DT <= 0.7");
}

// ---------------------------------------------------------------------------
// 9. Determinism of the full command-line pipeline.

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct PipelineRun {
  std::vector<std::string> files;
  double seconds = 0;
  bool ok = true;
};

PipelineRun run_pipeline(const testing::TempDir& dir) {
  cli::RunConfig rc;
  rc.seed = 909;
  rc.counts = {{synth::Label::kSuccessId, 10},
               {synth::Label::kSuccessOod, 10},
               {synth::Label::kFailId, 10},
               {synth::Label::kFailOod, 10}};
  rc.calibration_rollouts = 20;
  rc.train.epochs = 5;
  rc.width_scale = 0.0625;
  rc.windows = {1, 2, 4, 8, 16};
  const auto cfg = dir.file("run.json");
  std::ofstream(cfg) << cli::to_json(rc).dump(2);

  const auto traces = dir.file("traces.jsonl"), calib = dir.file("calib.jsonl"), ckpt = dir.file("rnd.json");
  const auto t0 = std::chrono::steady_clock::now();
  PipelineRun out;
  std::ostringstream sink;
  auto call = [&](std::vector<std::string> args) { out.ok = out.ok && cli::run(args, sink, sink) == 0; };
  call({"simulate", "--config", cfg, "--out", traces, "--calib-out", calib});
  call({"train-rnd", "--config", cfg, "--traces", calib, "--out", ckpt});
  for (const char* scheme : {"constant", "band", "tvar"})
    call({"calibrate", "--config", cfg, "--traces", calib, "--rnd", ckpt, "--scheme", scheme, "--delta", "0.1",
          "--w-obs", "4", "--w-act", "4", "--out", dir.file(std::string("profile-") + scheme + ".json")});
  call({"evaluate", "--config", cfg, "--traces", traces, "--calib", calib, "--rnd", ckpt, "--out",
        dir.file("report.csv")});
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const char* f : {"traces.jsonl", "calib.jsonl", "rnd.json", "profile-constant.json", "profile-band.json",
                        "profile-tvar.json", "report.csv"})
    out.files.push_back(slurp(dir.file(f)));
  return out;
}

void determinism(Check& c) {
  testing::TempDir a("accept-a"), b("accept-b");
  const auto first = run_pipeline(a);
  const auto second = run_pipeline(b);
  c.expect(first.ok && second.ok, "pipeline commands succeeded");
  const char* names[] = {"traces", "calibration traces", "checkpoint", "constant profile", "band profile",
                         "tvar profile", "report CSV"};
  for (std::size_t k = 0; k < first.files.size(); ++k) {
    c.expect(!first.files[k].empty(), std::string(names[k]) + " is empty");
    c.expect(first.files[k] == second.files[k], std::string(names[k]) + " differs between runs");
  }
  c.note(fmt("pipeline runs took %.1f s and %.1f s", first.seconds, second.seconds));
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<void(Check&)> run;
};

}  // namespace
}  // namespace failmon::acceptance

int main() {
  using namespace failmon::acceptance;
  const std::vector<Criterion> criteria = {
      {1, "conformal coverage (CP constant and band, M=100, 1000 fresh)", 120, coverage},
      {2, "ACE oracle equivalence (500 batches)", 30, ace_oracle},
      {3, "entropy bounds and invariances (1000 cases)", 10, entropy_invariants},
      {4, "RND gradient check, frozen target, OOD ratio", 180, rnd_correctness},
      {5, "threshold arithmetic and delta monotonicity", 10, threshold_arithmetic},
      {6, "detector algebra (stream/batch, AND inclusion)", 30, detector_algebra},
      {7, "metric arithmetic and TWA <= Acc", 5, metric_correctness},
      {8, "end-to-end separability of the synthetic scenario", 600, separability},
      {9, "pipeline determinism", 0, determinism},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = cr.budget_seconds <= 0 || secs <= cr.budget_seconds;
    const bool pass = check.ok() && in_budget;
    failed += !pass;
    for (const auto& n : check.notes()) std::printf("    %s\n", n.c_str());
    for (const auto& f : check.failures()) std::printf("    failed: %s\n", f.c_str());
    if (!in_budget) std::printf("    over budget: %.1f s > %.0f s\n", secs, cr.budget_seconds);
    if (cr.budget_seconds > 0)
      std::printf("%s %d %s [%zu checks, %.1f s / %.0f s]\n", pass ? "PASS" : "FAIL", cr.id, cr.name,
                  check.checks(), secs, cr.budget_seconds);
    else
      std::printf("%s %d %s [%zu checks, %.1f s]\n", pass ? "PASS" : "FAIL", cr.id, cr.name, check.checks(), secs);
    std::fflush(stdout);
  }
  std::printf("%s: %d of %zu criteria failed\n", failed ? "FAIL" : "PASS", failed, criteria.size());
  return failed ? 1 : 0;
}
