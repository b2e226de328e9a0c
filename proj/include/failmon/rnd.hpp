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

// Random network distillation over observation embeddings.
//
// A frozen, randomly initialized target network g and a trainable predictor
// f are both fed the policy's embedding. The predictor is trained on
// successful in-distribution embeddings to minimise E[||f(x) - g(x)||_2];
// the same distance is the runtime novelty score.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "failmon/common.hpp"
#include "failmon/mlp.hpp"
#include "failmon/trace.hpp"
#include "json.hpp"

namespace failmon::rnd {

inline constexpr std::size_t kDefaultOutputDim = 256;

struct TrainConfig {
  std::size_t batch_size = 256;
  std::size_t epochs = 250;
  double learning_rate = 1e-4;  // peak of the cosine schedule
  double weight_decay = 1e-5;
  double eps = 1e-8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double train_fraction = 0.9;  // remainder is validation
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size == 0) throw ValueError("TrainConfig: batch_size must be positive");
    if (!(learning_rate > 0) || !(eps > 0) || !(weight_decay >= 0))
      throw ValueError("TrainConfig: learning rate and eps must be positive");
    if (!(train_fraction > 0 && train_fraction <= 1))
      throw ValueError("TrainConfig: train fraction must lie in (0, 1]");
  }

  bool operator==(const TrainConfig&) const = default;
};

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["lr"] = c.learning_rate;
  j["lr_schedule"] = "cosine";
  j["optimizer"] = "adamw";
  j["weight_decay"] = c.weight_decay;
  j["eps"] = c.eps;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["train_fraction"] = c.train_fraction;
  j["seed"] = c.seed;
  return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "batch_size") c.batch_size = v.get<std::size_t>();
    else if (key == "epochs") c.epochs = v.get<std::size_t>();
    else if (key == "lr") c.learning_rate = v.get<double>();
    else if (key == "weight_decay") c.weight_decay = v.get<double>();
    else if (key == "eps") c.eps = v.get<double>();
    else if (key == "beta1") c.beta1 = v.get<double>();
    else if (key == "beta2") c.beta2 = v.get<double>();
    else if (key == "train_fraction") c.train_fraction = v.get<double>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "lr_schedule") {
      if (v.get<std::string>() != "cosine") throw ParseError("only the cosine schedule is supported");
    } else if (key == "optimizer") {
      if (v.get<std::string>() != "adamw") throw ParseError("only adamw is supported");
    } else {
      throw ParseError("unknown train config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

inline std::size_t scaled_width(std::size_t base, double width_scale) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(base * width_scale)));
}

// E -> 1024 -> 2048 -> 4096 -> m, LeakyReLU after every layer but the last.
inline MlpSpec target_spec(std::size_t input_dim, std::size_t output_dim, double width_scale = 1.0,
                           double leaky_slope = 0.01) {
  MlpSpec s;
  s.widths = {input_dim, scaled_width(1024, width_scale), scaled_width(2048, width_scale),
              scaled_width(4096, width_scale), output_dim};
  s.activations = {Activation::kLeakyRelu, Activation::kLeakyRelu, Activation::kLeakyRelu,
                   Activation::kNone};
  s.leaky_slope = leaky_slope;
  return s;
}

// Target trunk plus two narrowing ReLU layers:
// E -> 1024 -> 2048 -> 4096 -> 2048 -> 1024 -> m.
inline MlpSpec predictor_spec(std::size_t input_dim, std::size_t output_dim,
                              double width_scale = 1.0, double leaky_slope = 0.01) {
  MlpSpec s;
  s.widths = {input_dim,
              scaled_width(1024, width_scale),
              scaled_width(2048, width_scale),
              scaled_width(4096, width_scale),
              scaled_width(2048, width_scale),
              scaled_width(1024, width_scale),
              output_dim};
  s.activations = {Activation::kLeakyRelu, Activation::kLeakyRelu, Activation::kLeakyRelu,
                   Activation::kRelu,      Activation::kRelu,      Activation::kNone};
  s.leaky_slope = leaky_slope;
  return s;
}

struct RndModel {
  Mlp target;     // frozen
  Mlp predictor;  // trained
  std::uint64_t seed = 0;
  double width_scale = 1.0;
  bool trained = false;
  TrainConfig train_config;

  std::size_t input_dim() const { return target.input_dim(); }
  std::size_t output_dim() const { return target.output_dim(); }

  bool operator==(const RndModel&) const = default;
};

// Builds a model from explicit network specs. Both nets must agree on input
// and output widths.
inline RndModel make_rnd(MlpSpec target, MlpSpec predictor, std::uint64_t seed) {
  target.validate();
  predictor.validate();
  if (target.widths.front() != predictor.widths.front() ||
      target.widths.back() != predictor.widths.back())
    throw DimensionError("target and predictor must share input and output dims");
  RndModel m;
  m.seed = seed;
  m.target = Mlp(std::move(target), derive_seed(seed, 1));
  m.predictor = Mlp(std::move(predictor), derive_seed(seed, 2));
  return m;
}

inline RndModel init_rnd(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed,
                         double width_scale = 1.0) {
  if (input_dim < 1 || output_dim < 1) throw ValueError("init_rnd: dims must be >= 1");
  if (!(width_scale > 0)) throw ValueError("init_rnd: width_scale must be positive");
  auto m = make_rnd(target_spec(input_dim, output_dim, width_scale),
                    predictor_spec(input_dim, output_dim, width_scale), seed);
  m.width_scale = width_scale;
  return m;
}

// ||f(x) - g(x)||_2.
inline double rnd_score(const RndModel& model, std::span<const double> embedding) {
  if (embedding.size() != model.input_dim())
    throw DimensionError("rnd_score: embedding has " + std::to_string(embedding.size()) +
                         " entries, model expects " + std::to_string(model.input_dim()));
  if (!all_finite(embedding)) throw ValueError("rnd_score: non-finite embedding");
  const Eigen::VectorXd x =
      Eigen::Map<const Eigen::VectorXd>(embedding.data(), static_cast<Eigen::Index>(embedding.size()));
  return (model.predictor.forward(x) - model.target.forward(x)).norm();
}

namespace detail {

inline Eigen::MatrixXd to_columns(std::span<const std::vector<double>> xs,
                                  std::span<const std::size_t> idx, std::size_t dim) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c)
    for (std::size_t r = 0; r < dim; ++r)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = xs[idx[c]][r];
  return m;
}

}  // namespace detail

// Mean RND distance over the columns of `inputs` given cached target outputs,
// and its gradient with respect to the predictor parameters.
struct LossAndGradient {
  double loss = 0;
  Mlp::Gradient gradient;
};

inline LossAndGradient loss_and_gradient(const Mlp& predictor, const Eigen::MatrixXd& inputs,
                                         const Eigen::MatrixXd& targets) {
  Mlp::Tape tape;
  const Eigen::MatrixXd out = predictor.forward(inputs, &tape);
  const Eigen::MatrixXd diff = out - targets;
  const auto n = static_cast<double>(inputs.cols());
  Eigen::MatrixXd grad_out(diff.rows(), diff.cols());
  double loss = 0;
  for (Eigen::Index c = 0; c < diff.cols(); ++c) {
    const double norm = diff.col(c).norm();
    loss += norm;
    // d||r||/dr = r/||r||; the subgradient at r = 0 is taken as 0.
    if (norm > 0) grad_out.col(c) = diff.col(c) / (norm * n);
    else grad_out.col(c).setZero();
  }
  return {loss / n, predictor.backward(tape, std::move(grad_out))};
}

inline double mean_loss(const Mlp& predictor, const Eigen::MatrixXd& inputs,
                        const Eigen::MatrixXd& targets) {
  if (inputs.cols() == 0) return 0;
  const Eigen::MatrixXd diff = predictor.forward(inputs) - targets;
  double loss = 0;
  for (Eigen::Index c = 0; c < diff.cols(); ++c) loss += diff.col(c).norm();
  return loss / static_cast<double>(inputs.cols());
}

struct LossHistory {
  double initial_train_loss = 0;
  double initial_val_loss = 0;
  std::vector<double> train;  // after each epoch
  std::vector<double> val;    // after each epoch; empty if no validation split

  bool operator==(const LossHistory&) const = default;
};

struct TrainResult {
  RndModel model;
  LossHistory history;
};

// Cosine-annealed learning rate for epoch e of `epochs` (no warmup).
inline double cosine_lr(double base, std::size_t epoch, std::size_t epochs) {
  if (epochs == 0) return base;
  return 0.5 * base *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(epochs)));
}

// Decoupled-weight-decay Adam over an Mlp's parameters.
class AdamW {
 public:
  AdamW(const Mlp& net, const TrainConfig& cfg) : cfg_(cfg) {
    for (std::size_t l = 0; l < net.weights().size(); ++l) {
      m_w_.push_back(Eigen::MatrixXd::Zero(net.weights()[l].rows(), net.weights()[l].cols()));
      v_w_.push_back(m_w_.back());
      m_b_.push_back(Eigen::VectorXd::Zero(net.biases()[l].size()));
      v_b_.push_back(m_b_.back());
    }
  }

  void step(Mlp& net, const Mlp::Gradient& g, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t l = 0; l < net.weights().size(); ++l) {
      update(net.weights()[l], g.weights[l], m_w_[l], v_w_[l], lr, c1, c2);
      update(net.biases()[l], g.biases[l], m_b_[l], v_b_[l], lr, c1, c2);
    }
  }

 private:
  template <typename P>
  void update(P& p, const P& g, P& m, P& v, double lr, double c1, double c2) {
    p *= (1.0 - lr * cfg_.weight_decay);
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const P m_hat = m / c1;
    const P v_hat = v / c2;
    p.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + cfg_.eps);
  }

  TrainConfig cfg_;
  long long t_ = 0;
  std::vector<Eigen::MatrixXd> m_w_, v_w_;
  std::vector<Eigen::VectorXd> m_b_, v_b_;
};

// Minibatch AdamW on the mean RND distance. The target network is never
// touched. Deterministic for a fixed cfg.seed.
inline TrainResult train_rnd(RndModel model, std::span<const std::vector<double>> embeddings,
                             const TrainConfig& cfg) {
  cfg.validate();
  if (embeddings.empty()) throw ValueError("train_rnd: empty embedding set");
  const std::size_t dim = model.input_dim();
  for (const auto& e : embeddings) {
    if (e.size() != dim) throw DimensionError("train_rnd: embedding dimension mismatch");
    if (!all_finite(e)) throw ValueError("train_rnd: non-finite embedding");
  }

  TrainResult result;
  if (cfg.epochs == 0) {
    result.model = std::move(model);
    return result;
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(embeddings.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n = embeddings.size();
  std::size_t n_train = static_cast<std::size_t>(std::lround(cfg.train_fraction * n));
  n_train = std::clamp<std::size_t>(n_train, 1, n);
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  const std::vector<std::size_t> val_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  const Eigen::MatrixXd train_x = detail::to_columns(embeddings, train_idx, dim);
  const Eigen::MatrixXd val_x = detail::to_columns(embeddings, val_idx, dim);
  const Eigen::MatrixXd train_y = model.target.forward(train_x);
  const Eigen::MatrixXd val_y = model.target.forward(val_x);

  auto& hist = result.history;
  hist.initial_train_loss = mean_loss(model.predictor, train_x, train_y);
  hist.initial_val_loss = mean_loss(model.predictor, val_x, val_y);

  const std::size_t batch = std::min(cfg.batch_size, n_train);
  AdamW opt(model.predictor, cfg);
  std::vector<Eigen::Index> perm(n_train);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(cfg.learning_rate, epoch, cfg.epochs);
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t start = 0; start < n_train; start += batch) {
      const std::size_t len = std::min(batch, n_train - start);
      Eigen::MatrixXd bx(train_x.rows(), static_cast<Eigen::Index>(len));
      Eigen::MatrixXd by(train_y.rows(), static_cast<Eigen::Index>(len));
      for (std::size_t c = 0; c < len; ++c) {
        bx.col(static_cast<Eigen::Index>(c)) = train_x.col(perm[start + c]);
        by.col(static_cast<Eigen::Index>(c)) = train_y.col(perm[start + c]);
      }
      const auto lg = loss_and_gradient(model.predictor, bx, by);
      opt.step(model.predictor, lg.gradient, lr);
    }
    hist.train.push_back(mean_loss(model.predictor, train_x, train_y));
    if (!val_idx.empty()) hist.val.push_back(mean_loss(model.predictor, val_x, val_y));
  }
  model.trained = true;
  model.train_config = cfg;
  result.model = std::move(model);
  return result;
}

// Every embedding of every successful ID rollout in the set.
inline std::vector<std::vector<double>> id_success_embeddings(const RolloutSet& set) {
  std::vector<std::vector<double>> out;
  for (const auto& r : set)
    if (r.outcome == Outcome::kSuccess && r.distribution == Distribution::kId)
      for (const auto& s : r.steps) out.push_back(s.embedding);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint file

namespace detail {

inline nlohmann::ordered_json mlp_to_json(const Mlp& net) {
  nlohmann::ordered_json j;
  j["widths"] = net.spec().widths;
  auto acts = nlohmann::ordered_json::array();
  for (auto a : net.spec().activations) acts.push_back(to_string(a));
  j["activations"] = std::move(acts);
  j["leaky_slope"] = net.spec().leaky_slope;
  auto layers = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    const auto& w = net.weights()[l];
    const auto& b = net.biases()[l];
    nlohmann::ordered_json jl;
    jl["W"] = std::vector<double>(w.data(), w.data() + w.size());  // column-major
    jl["b"] = std::vector<double>(b.data(), b.data() + b.size());
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  MlpSpec spec;
  spec.widths = j.at("widths").get<std::vector<std::size_t>>();
  for (const auto& a : j.at("activations")) spec.activations.push_back(parse_activation(a.get<std::string>()));
  spec.leaky_slope = j.at("leaky_slope").get<double>();
  Mlp net(spec, 0);
  std::vector<double> flat;
  const auto& layers = j.at("layers");
  if (layers.size() != spec.layers()) throw ParseError("checkpoint layer count mismatch");
  for (const auto& jl : layers) {
    const auto w = jl.at("W").get<std::vector<double>>();
    const auto b = jl.at("b").get<std::vector<double>>();
    flat.insert(flat.end(), w.begin(), w.end());
    flat.insert(flat.end(), b.begin(), b.end());
  }
  net.set_parameters(flat);
  return net;
}

}  // namespace detail

inline nlohmann::ordered_json checkpoint_to_json(const RndModel& m, const LossHistory* history = nullptr) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "rnd_checkpoint";
  j["tool_version"] = kVersion;
  const auto cfg = to_json(m.train_config);
  j["config_hash"] = fnv1a(cfg.dump());
  j["seed"] = m.seed;
  j["width_scale"] = m.width_scale;
  j["trained"] = m.trained;
  j["train_config"] = cfg;
  if (history) {
    nlohmann::ordered_json h;
    h["initial_train_loss"] = history->initial_train_loss;
    h["initial_val_loss"] = history->initial_val_loss;
    h["train"] = history->train;
    h["val"] = history->val;
    j["history"] = std::move(h);
  }
  j["target"] = detail::mlp_to_json(m.target);
  j["predictor"] = detail::mlp_to_json(m.predictor);
  return j;
}

inline RndModel checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "rnd_checkpoint") throw ParseError("not an RND checkpoint");
  if (j.at("schema_version").get<int>() != kSchemaVersion)
    throw ParseError("checkpoint schema_version mismatch");
  RndModel m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.width_scale = j.at("width_scale").get<double>();
  m.trained = j.at("trained").get<bool>();
  m.train_config = train_config_from_json(j.at("train_config"));
  m.target = detail::mlp_from_json(j.at("target"));
  m.predictor = detail::mlp_from_json(j.at("predictor"));
  if (m.target.input_dim() != m.predictor.input_dim() || m.target.output_dim() != m.predictor.output_dim())
    throw DimensionError("checkpoint networks disagree on input/output dims");
  return m;
}

inline void save_checkpoint(const std::string& path, const RndModel& m,
                            const LossHistory* history = nullptr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(m, history).dump() << '\n';
}

inline RndModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open checkpoint '" + path + "'");
  try {
    return checkpoint_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint '" + path + "': " + e.what());
  }
}

}  // namespace failmon::rnd
