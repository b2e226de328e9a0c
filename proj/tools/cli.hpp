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

// The `failmon` command: simulate, train-rnd, calibrate, monitor, evaluate.
//
// All subcommands accept `--config <run.json>`; command-line flags override
// the file, and FAILMON_SEED overrides the file's global seed. Errors are
// reported on stderr as a single JSON object and a nonzero exit status.

#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "failmon/failmon.hpp"
#include "json.hpp"

namespace failmon::cli {

using ordered_json = nlohmann::ordered_json;

// Seed streams for the pipeline stages, all derived from the global seed.
enum SeedStream : std::uint64_t {
  kDatasetStream = 11,
  kCalibDatasetStream = 12,
  kModelStream = 21,
  kTrainStream = 22,
  kSplitStream = 31,
};

struct Paths {
  std::string traces, calib, rnd, profile, report;
};

struct RunConfig {
  std::uint64_t seed = 0;
  synth::ScenarioConfig scenario;
  synth::LabelCounts counts = {{synth::Label::kSuccessId, 50},
                               {synth::Label::kSuccessOod, 50},
                               {synth::Label::kFailId, 50},
                               {synth::Label::kFailOod, 50}};
  std::size_t calibration_rollouts = 50;
  rnd::TrainConfig train;
  std::size_t output_dim = rnd::kDefaultOutputDim;
  double width_scale = 1.0;
  double ace_alpha = ace::kDefaultAlpha;
  std::vector<std::size_t> windows;
  std::vector<double> deltas = eval::SweepConfig::default_deltas();
  std::vector<calibrate::Scheme> schemes = eval::SweepConfig{}.schemes;
  CombineMode mode = CombineMode::kAnd;
  calibrate::TimeVaryingVariant variant = calibrate::TimeVaryingVariant::kGaussian;
  Paths paths;

  RunConfig() {
    for (std::size_t w = 1; w <= 50; ++w) windows.push_back(w);
  }
};

// "1..50" or "1,2,5".
inline std::vector<std::size_t> parse_windows(const std::string& s) {
  std::vector<std::size_t> out;
  try {
    if (const auto dots = s.find(".."); dots != std::string::npos) {
      const auto lo = std::stoull(s.substr(0, dots));
      const auto hi = std::stoull(s.substr(dots + 2));
      if (lo < 1 || hi < lo) throw ParseError("bad window range '" + s + "'");
      for (auto w = lo; w <= hi; ++w) out.push_back(w);
      return out;
    }
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');) {
      const auto w = std::stoull(tok);
      if (w < 1) throw ParseError("window must be >= 1");
      out.push_back(w);
    }
  } catch (const std::logic_error&) {
    throw ParseError("bad window list '" + s + "'");
  }
  if (out.empty()) throw ParseError("empty window list");
  return out;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');)
    if (!tok.empty()) out.push_back(tok);
  return out;
}

inline std::vector<calibrate::Scheme> parse_schemes(const std::string& s) {
  std::vector<calibrate::Scheme> out;
  for (const auto& tok : split_list(s)) out.push_back(calibrate::parse_scheme(tok));
  if (out.empty()) throw ParseError("empty scheme list");
  return out;
}

inline std::vector<double> parse_deltas(const std::string& s) {
  std::vector<double> out;
  try {
    for (const auto& tok : split_list(s)) out.push_back(std::stod(tok));
  } catch (const std::logic_error&) {
    throw ParseError("bad delta list '" + s + "'");
  }
  for (double d : out) calibrate::check_delta(d);
  if (out.empty()) throw ParseError("empty delta list");
  return out;
}

inline ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = c.seed;
  j["scenario"] = synth::to_json(c.scenario);
  ordered_json counts;
  for (const auto& [label, n] : c.counts) counts[std::string(synth::to_string(label))] = n;
  j["counts"] = counts;
  j["calibration_rollouts"] = c.calibration_rollouts;
  j["train"] = rnd::to_json(c.train);
  j["output_dim"] = c.output_dim;
  j["width_scale"] = c.width_scale;
  j["ace_alpha"] = c.ace_alpha;
  j["windows"] = c.windows;
  j["deltas"] = c.deltas;
  auto schemes = ordered_json::array();
  for (auto s : c.schemes) schemes.push_back(calibrate::to_string(s));
  j["schemes"] = schemes;
  j["mode"] = to_string(c.mode);
  j["tvar_variant"] = calibrate::to_string(c.variant);
  j["paths"] = {{"traces", c.paths.traces}, {"calib", c.paths.calib}, {"rnd", c.paths.rnd},
                {"profile", c.paths.profile}, {"report", c.paths.report}};
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("config: expected an object");
  if (!j.contains("schema_version")) throw ParseError("config: missing schema_version");
  if (j.at("schema_version").get<int>() != kSchemaVersion)
    throw ParseError("config: schema_version " + j.at("schema_version").dump() +
                     " is not supported (expected " + std::to_string(kSchemaVersion) + ")");
  RunConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "schema_version") continue;
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "scenario") c.scenario = synth::scenario_from_json(v);
      else if (key == "counts") {
        c.counts.clear();
        for (const auto& [label, n] : v.items()) c.counts[synth::parse_label(label)] = n.get<std::size_t>();
      } else if (key == "calibration_rollouts") c.calibration_rollouts = v.get<std::size_t>();
      else if (key == "train") c.train = rnd::train_config_from_json(v);
      else if (key == "output_dim") c.output_dim = v.get<std::size_t>();
      else if (key == "width_scale") c.width_scale = v.get<double>();
      else if (key == "ace_alpha") c.ace_alpha = v.get<double>();
      else if (key == "windows") {
        c.windows = v.is_string() ? parse_windows(v.get<std::string>()) : v.get<std::vector<std::size_t>>();
      } else if (key == "deltas") c.deltas = v.get<std::vector<double>>();
      else if (key == "schemes") {
        c.schemes.clear();
        for (const auto& s : v) c.schemes.push_back(calibrate::parse_scheme(s.get<std::string>()));
      } else if (key == "mode") c.mode = parse_combine_mode(v.get<std::string>());
      else if (key == "tvar_variant") c.variant = calibrate::parse_variant(v.get<std::string>());
      else if (key == "paths") {
        for (const auto& [name, p] : v.items()) {
          const auto s = p.get<std::string>();
          if (name == "traces") c.paths.traces = s;
          else if (name == "calib") c.paths.calib = s;
          else if (name == "rnd") c.paths.rnd = s;
          else if (name == "profile") c.paths.profile = s;
          else if (name == "report") c.paths.report = s;
          else throw ParseError("config: unknown path key '" + name + "'");
        }
      } else {
        throw ParseError("config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open config '" + path + "'");
  try {
    return run_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("config '" + path + "': " + e.what());
  }
}

inline std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string config_hash(const ordered_json& j) { return hex(fnv1a(j.dump())); }

// Output-file stamp: tool version, hash of the inputs that determine the file,
// and the seed.
inline ordered_json stamp(const ordered_json& effective, std::uint64_t seed) {
  ordered_json s;
  s["tool_version"] = kVersion;
  s["config_hash"] = config_hash(effective);
  s["seed"] = seed;
  return s;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write '" + path + "'");
  out << text;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

inline std::string require_path(const std::string& value, const char* what) {
  if (value.empty()) throw ValueError(std::string("missing ") + what);
  return value;
}

// ---------------------------------------------------------------------------
// Profile bundle: both thresholds plus their windows and the ACE config.

struct ProfileSection {
  calibrate::ThresholdProfile profile;
  std::size_t window = 1;
  std::optional<ace::AceConfig> ace;
};

inline ordered_json section_to_json(const ProfileSection& s) {
  auto j = calibrate::profile_to_json(s.profile);
  j["window"] = s.window;
  if (s.ace) j["ace"] = ace::to_json(*s.ace);
  return j;
}

inline ProfileSection section_from_json(const nlohmann::json& j) {
  ProfileSection s;
  s.profile = calibrate::profile_from_json(j);
  s.window = j.at("window").get<std::size_t>();
  if (s.window == 0) throw ValueError("profile window must be >= 1");
  if (j.contains("ace")) s.ace = ace::ace_config_from_json(j.at("ace"));
  return s;
}

// Accepts either a bundle written by `calibrate` (picks `which`) or a bare
// single-profile file.
inline ProfileSection load_profile_section(const std::string& path, const std::string& which) {
  const auto j = read_json_file(path);
  try {
    if (j.value("kind", "") == "profile_bundle") {
      if (j.at("schema_version").get<int>() != kSchemaVersion)
        throw ParseError("profile bundle schema_version mismatch");
      return section_from_json(j.at(which));
    }
    return section_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Subcommands

struct Context {
  std::ostream& out;
  std::ostream& err;
};

inline void cmd_simulate(const RunConfig& c, const std::string& calib_out, Context ctx) {
  const auto out_path = require_path(c.paths.traces, "--out");
  auto effective = to_json(c);
  effective.erase("paths");
  const auto st = stamp(effective, c.seed);

  auto with_stamp = [&](const RolloutSet& set) {
    auto prov = ordered_json::parse(set.metadata().provenance);
    prov.update(st);
    return RolloutSet(set.rollouts(), prov.dump());
  };
  const auto data = synth::generate_dataset(c.scenario, c.counts, derive_seed(c.seed, kDatasetStream));
  save_rollouts(out_path, with_stamp(data));
  std::size_t n_calib = 0;
  if (!calib_out.empty()) {
    const auto calib =
        synth::generate_dataset(c.scenario, {{synth::Label::kSuccessId, c.calibration_rollouts}},
                                derive_seed(c.seed, kCalibDatasetStream), "calib-");
    save_rollouts(calib_out, with_stamp(calib));
    n_calib = calib.size();
  }
  ordered_json rec{{"command", "simulate"}, {"rollouts", data.size()}, {"calibration_rollouts", n_calib}};
  ctx.out << rec.dump() << '\n';
}

inline void cmd_train(const RunConfig& c, Context ctx) {
  const auto set = load_rollouts(require_path(c.paths.traces, "--traces"));
  const auto embeddings = rnd::id_success_embeddings(set);
  if (embeddings.empty()) throw ValueError("train-rnd: no successful ID rollouts in the trace file");
  auto model = rnd::init_rnd(set.metadata().embedding_dim, c.output_dim, derive_seed(c.seed, kModelStream),
                             c.width_scale);
  auto tc = c.train;
  tc.seed = derive_seed(c.seed, kTrainStream);
  const auto result = rnd::train_rnd(std::move(model), embeddings, tc);
  auto ckpt = rnd::checkpoint_to_json(result.model, &result.history);
  ordered_json eff{{"train", rnd::to_json(tc)}, {"output_dim", c.output_dim}, {"width_scale", c.width_scale},
                   {"traces_provenance", set.metadata().provenance}};
  ckpt["config_hash"] = config_hash(eff);
  ckpt["global_seed"] = c.seed;
  write_text(require_path(c.paths.rnd, "--out"), ckpt.dump() + "\n");
  ordered_json rec{{"command", "train-rnd"}, {"embeddings", embeddings.size()}, {"epochs", tc.epochs}};
  if (!result.history.train.empty()) rec["final_train_loss"] = result.history.train.back();
  ctx.out << rec.dump() << '\n';
}

inline std::vector<ScoreSeries> windowed(const std::vector<RawScores>& raw, bool obs, std::size_t w) {
  std::vector<ScoreSeries> out;
  for (const auto& r : raw) out.push_back(window_sum(obs ? r.rnd : r.ace, w));
  return out;
}

inline void cmd_calibrate(const RunConfig& c, calibrate::Scheme scheme, double delta, std::size_t w_obs,
                          std::size_t w_act, Context ctx) {
  const auto all = load_rollouts(require_path(c.paths.traces, "--traces"));
  const auto calib = all.filter(Outcome::kSuccess, Distribution::kId);
  if (calib.empty()) throw ValueError("calibrate: no successful ID rollouts in the trace file");
  if (calib.size() != all.size()) {
    ordered_json warn{{"warning", "non_calibration_rollouts_ignored"}, {"count", all.size() - calib.size()}};
    ctx.err << warn.dump() << '\n';
  }
  const auto model = rnd::load_checkpoint(require_path(c.paths.rnd, "--rnd"));
  const auto ace_cfg = ace::fit_ace_ranges(calib, c.ace_alpha);
  const auto raw = eval::score_all(calib, model, ace_cfg);
  calibrate::CalibrationOptions opts;
  opts.variant = c.variant;
  opts.split_seed = derive_seed(c.seed, kSplitStream);
  const auto T = calib.max_episode_length();

  ProfileSection obs{calibrate::calibrate(scheme, windowed(raw, true, w_obs), delta, opts, T), w_obs, {}};
  ProfileSection act{calibrate::calibrate(scheme, windowed(raw, false, w_act), delta, opts, T), w_act, ace_cfg};

  ordered_json eff{{"scheme", calibrate::to_string(scheme)}, {"delta", delta},
                   {"w_obs", w_obs}, {"w_act", w_act}, {"ace_alpha", c.ace_alpha},
                   {"tvar_variant", calibrate::to_string(c.variant)},
                   {"traces_provenance", all.metadata().provenance},
                   {"rnd_config_hash", fnv1a(rnd::to_json(model.train_config).dump())}};
  ordered_json bundle;
  bundle["schema_version"] = kSchemaVersion;
  bundle["kind"] = "profile_bundle";
  bundle.update(stamp(eff, c.seed));
  bundle["obs"] = section_to_json(obs);
  bundle["act"] = section_to_json(act);
  write_text(require_path(c.paths.profile, "--out"), bundle.dump() + "\n");
  ordered_json rec{{"command", "calibrate"}, {"calibration_rollouts", calib.size()},
                   {"scheme", calibrate::to_string(scheme)}, {"delta", delta}};
  ctx.out << rec.dump() << '\n';
}

inline void cmd_monitor(const RunConfig& c, const std::string& obs_path, const std::string& act_path,
                        const std::string& out_path, Context ctx) {
  const auto set = load_rollouts(require_path(c.paths.traces, "--traces"));
  auto setup = std::make_shared<MonitorSetup>();
  setup->rnd = rnd::load_checkpoint(require_path(c.paths.rnd, "--rnd"));
  const auto obs = load_profile_section(require_path(obs_path, "--profile-obs"), "obs");
  const auto act = load_profile_section(require_path(act_path, "--profile-act"), "act");
  if (!act.ace) throw ValueError("monitor: action profile carries no ACE config");
  setup->ace = *act.ace;
  setup->obs_profile = obs.profile;
  setup->act_profile = act.profile;
  setup->w_obs = obs.window;
  setup->w_act = act.window;
  setup->mode = c.mode;
  if (setup->rnd.input_dim() != set.metadata().embedding_dim)
    throw DimensionError("monitor: checkpoint expects embedding dim " + std::to_string(setup->rnd.input_dim()));

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary);
    if (!file) throw Error("io", "cannot write '" + out_path + "'");
  }
  std::ostream& os = out_path.empty() ? ctx.out : file;
  const long long T = std::max(obs.profile.horizon, act.profile.horizon);
  for (const auto& r : set) {
    MonitorState state(setup);
    for (const auto& step : r.steps) state.stream_step(step);
    ordered_json rec;
    rec["id"] = r.id;
    const auto t = state.first_alarm();
    rec["flagged"] = t.has_value();
    rec["t_star"] = t ? ordered_json(*t) : ordered_json(nullptr);
    if (t)
      rec["normalized_dt"] = T > 0 ? std::min(1.0, static_cast<double>(*t) / static_cast<double>(T)) : 0.0;
    else
      rec["normalized_dt"] = nullptr;
    os << rec.dump() << '\n';
  }
}

inline void cmd_evaluate(const RunConfig& c, Context ctx) {
  const auto data = load_rollouts(require_path(c.paths.traces, "--traces"));
  const auto calib = load_rollouts(require_path(c.paths.calib, "--calib"));
  const auto model = rnd::load_checkpoint(require_path(c.paths.rnd, "--rnd"));
  const auto ace_cfg = ace::fit_ace_ranges(calib, c.ace_alpha);
  eval::SweepConfig sc;
  sc.schemes = c.schemes;
  sc.windows = c.windows;
  sc.deltas = c.deltas;
  sc.mode = c.mode;
  sc.calibration.variant = c.variant;
  sc.calibration.split_seed = derive_seed(c.seed, kSplitStream);
  const auto report = eval::sweep(data, calib, model, ace_cfg, sc);
  if (report.overlap > 0) {
    ordered_json warn{{"warning", "calibration_overlap"},
                      {"count", report.overlap},
                      {"message", "calibration ids also appear in the evaluation traces; proceeding"}};
    ctx.err << warn.dump() << '\n';
  }

  auto eff = to_json(c);
  eff.erase("paths");
  eff.erase("scenario");
  eff.erase("counts");
  eff["traces_provenance"] = data.metadata().provenance;
  eff["calib_provenance"] = calib.metadata().provenance;
  eff["rnd_config_hash"] = fnv1a(rnd::to_json(model.train_config).dump());
  const auto st = stamp(eff, c.seed);
  std::ostringstream csv;
  eval::write_report_csv(csv,
                         report,
                         {"tool_version=" + std::string(kVersion), "config_hash=" + st["config_hash"].get<std::string>(),
                          "seed=" + std::to_string(c.seed), "mode=" + std::string(to_string(c.mode))});
  write_text(require_path(c.paths.report, "--out"), csv.str());

  ordered_json rec{{"command", "evaluate"}, {"cells", report.cells.size()}};
  if (const auto* best = report.best_cell()) {
    rec["best_scheme"] = calibrate::to_string(best->scheme);
    rec["best_w"] = best->window;
    rec["best_twa"] = *best->metrics.twa;
  }
  ctx.out << rec.dump() << '\n';
}

// ---------------------------------------------------------------------------

inline void error_record(std::ostream& err, std::string_view kind, std::string_view message) {
  ordered_json j{{"error", kind}, {"message", message}};
  err << j.dump() << '\n';
}

// Entry point; `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"failmon: runtime failure prediction for action-chunk policies", "failmon"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<double> width_scale, ace_alpha;
  std::optional<std::size_t> m_flag, epochs_flag, calib_count;
  std::string out_path, traces, calib_path, rnd_path, calib_out, profile_obs, profile_act;
  std::string scheme_s = "constant", mode_s, schemes_s, windows_s, deltas_s, variant_s;
  double delta = 0.1;
  std::size_t w_obs = 1, w_act = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration (JSON)");
    sub->add_option("--seed", seed_flag, "Global seed (overrides config and FAILMON_SEED)");
  };

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic trace file");
  add_common(simulate);
  simulate->add_option("--out", out_path, "Output trace file");
  simulate->add_option("--calib-out", calib_out, "Also write a calibration set of successful ID rollouts");
  simulate->add_option("--calib-count", calib_count, "Number of calibration rollouts");

  auto* train = app.add_subcommand("train-rnd", "Train the RND predictor on successful ID embeddings");
  add_common(train);
  train->add_option("--traces", traces, "Trace file")->check(CLI::ExistingFile);
  train->add_option("--out", out_path, "Output checkpoint");
  train->add_option("--width-scale", width_scale, "Width multiplier for both networks");
  train->add_option("--m", m_flag, "RND output dimension");
  train->add_option("--epochs", epochs_flag, "Training epochs");

  auto* calib = app.add_subcommand("calibrate", "Calibrate observation and action thresholds");
  add_common(calib);
  calib->add_option("--traces", traces, "Calibration trace file")->check(CLI::ExistingFile);
  calib->add_option("--rnd", rnd_path, "RND checkpoint")->check(CLI::ExistingFile);
  calib->add_option("--scheme", scheme_s, "constant | band | tvar");
  calib->add_option("--delta", delta, "Target false-positive bound");
  calib->add_option("--w-obs", w_obs, "Observation window")->check(CLI::PositiveNumber);
  calib->add_option("--w-act", w_act, "Action window")->check(CLI::PositiveNumber);
  calib->add_option("--ace-alpha", ace_alpha, "ACE bin width fraction");
  calib->add_option("--variant", variant_s, "tvar variant: gaussian | quantile");
  calib->add_option("--out", out_path, "Output profile bundle");

  auto* monitor = app.add_subcommand("monitor", "Run the streaming monitor over a trace file");
  add_common(monitor);
  monitor->add_option("--traces", traces, "Trace file")->check(CLI::ExistingFile);
  monitor->add_option("--rnd", rnd_path, "RND checkpoint")->check(CLI::ExistingFile);
  monitor->add_option("--profile-obs", profile_obs, "Observation profile")->check(CLI::ExistingFile);
  monitor->add_option("--profile-act", profile_act, "Action profile")->check(CLI::ExistingFile);
  monitor->add_option("--mode", mode_s, "and | or");
  monitor->add_option("--out", out_path, "Write result records here instead of stdout");

  auto* evaluate = app.add_subcommand("evaluate", "Sweep schemes, windows and deltas; write a CSV report");
  add_common(evaluate);
  evaluate->add_option("--traces", traces, "Evaluation trace file")->check(CLI::ExistingFile);
  evaluate->add_option("--calib", calib_path, "Calibration trace file")->check(CLI::ExistingFile);
  evaluate->add_option("--rnd", rnd_path, "RND checkpoint")->check(CLI::ExistingFile);
  evaluate->add_option("--schemes", schemes_s, "Comma-separated schemes");
  evaluate->add_option("--w", windows_s, "Windows, e.g. 1..50 or 1,5,10");
  evaluate->add_option("--deltas", deltas_s, "Comma-separated deltas");
  evaluate->add_option("--mode", mode_s, "and | or");
  evaluate->add_option("--ace-alpha", ace_alpha, "ACE bin width fraction");
  evaluate->add_option("--variant", variant_s, "tvar variant: gaussian | quantile");
  evaluate->add_option("--out", out_path, "Output CSV report");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    error_record(err, "usage", e.what());
    return 2;
  }

  try {
    RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (const char* env = std::getenv("FAILMON_SEED"); env && *env) {
      try {
        c.seed = std::stoull(env);
      } catch (const std::logic_error&) {
        throw ParseError("FAILMON_SEED is not an unsigned integer");
      }
    }
    if (seed_flag) c.seed = *seed_flag;
    if (width_scale) c.width_scale = *width_scale;
    if (m_flag) c.output_dim = *m_flag;
    if (epochs_flag) c.train.epochs = *epochs_flag;
    if (calib_count) c.calibration_rollouts = *calib_count;
    if (ace_alpha) c.ace_alpha = *ace_alpha;
    if (!mode_s.empty()) c.mode = parse_combine_mode(mode_s);
    if (!schemes_s.empty()) c.schemes = parse_schemes(schemes_s);
    if (!windows_s.empty()) c.windows = parse_windows(windows_s);
    if (!deltas_s.empty()) c.deltas = parse_deltas(deltas_s);
    if (!variant_s.empty()) c.variant = calibrate::parse_variant(variant_s);
    if (!traces.empty()) c.paths.traces = traces;
    if (!calib_path.empty()) c.paths.calib = calib_path;
    if (!rnd_path.empty()) c.paths.rnd = rnd_path;
    Context ctx{out, err};

    if (simulate->parsed()) {
      if (!out_path.empty()) c.paths.traces = out_path;
      if (calib_out.empty()) calib_out = c.paths.calib;
      cmd_simulate(c, calib_out, ctx);
    } else if (train->parsed()) {
      if (!out_path.empty()) c.paths.rnd = out_path;
      cmd_train(c, ctx);
    } else if (calib->parsed()) {
      if (!out_path.empty()) c.paths.profile = out_path;
      calibrate::check_delta(delta);
      cmd_calibrate(c, calibrate::parse_scheme(scheme_s), delta, w_obs, w_act, ctx);
    } else if (monitor->parsed()) {
      if (profile_obs.empty()) profile_obs = c.paths.profile;
      if (profile_act.empty()) profile_act = c.paths.profile;
      cmd_monitor(c, profile_obs, profile_act, out_path, ctx);
    } else if (evaluate->parsed()) {
      if (!out_path.empty()) c.paths.report = out_path;
      cmd_evaluate(c, ctx);
    }
  } catch (const Error& e) {
    error_record(err, e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    error_record(err, "internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace failmon::cli
