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

// Dense feed-forward network with manual backprop.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "failmon/common.hpp"

namespace failmon {

enum class Activation { kNone, kRelu, kLeakyRelu };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kNone: return "none";
    case Activation::kRelu: return "relu";
    case Activation::kLeakyRelu: return "leaky_relu";
  }
  return "?";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "none") return Activation::kNone;
  if (s == "relu") return Activation::kRelu;
  if (s == "leaky_relu") return Activation::kLeakyRelu;
  throw ParseError("unknown activation '" + std::string(s) + "'");
}

// widths = {input, hidden..., output}; one activation per linear layer.
struct MlpSpec {
  std::vector<std::size_t> widths;
  std::vector<Activation> activations;
  double leaky_slope = 0.01;

  std::size_t layers() const { return widths.empty() ? 0 : widths.size() - 1; }

  void validate() const {
    if (widths.size() < 2) throw ValueError("MlpSpec needs at least input and output widths");
    for (auto w : widths)
      if (w == 0) throw ValueError("MlpSpec widths must be positive");
    if (activations.size() != layers())
      throw ValueError("MlpSpec needs one activation per linear layer");
  }

  bool operator==(const MlpSpec&) const = default;
};

class Mlp {
 public:
  // Per-layer forward values kept for backprop. inputs[l] feeds layer l;
  // pre[l] is the affine output of layer l before its activation.
  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> pre;
    Eigen::MatrixXd output;
  };

  struct Gradient {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
  };

  Mlp() = default;

  // Uniform fan-in initialization: every weight and bias of layer l is drawn
  // from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Mlp(MlpSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < spec_.layers(); ++l) {
      const auto in = static_cast<Eigen::Index>(spec_.widths[l]);
      const auto out = static_cast<Eigen::Index>(spec_.widths[l + 1]);
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      std::uniform_real_distribution<double> u(-bound, bound);
      Eigen::MatrixXd w(out, in);
      for (Eigen::Index r = 0; r < out; ++r)
        for (Eigen::Index c = 0; c < in; ++c) w(r, c) = u(rng);
      Eigen::VectorXd b(out);
      for (Eigen::Index r = 0; r < out; ++r) b(r) = u(rng);
      weights_.push_back(std::move(w));
      biases_.push_back(std::move(b));
    }
  }

  const MlpSpec& spec() const { return spec_; }
  std::size_t input_dim() const { return spec_.widths.front(); }
  std::size_t output_dim() const { return spec_.widths.back(); }

  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

  // Single input vector.
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::VectorXd z = weights_[l] * a + biases_[l];
      apply(spec_.activations[l], z);
      a = std::move(z);
    }
    return a;
  }

  // Column-batched forward; X is input_dim x n.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Tape* tape = nullptr) const {
    Eigen::MatrixXd a = x;
    if (tape) {
      tape->inputs.clear();
      tape->pre.clear();
    }
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::MatrixXd z = weights_[l] * a;
      z.colwise() += biases_[l];
      if (tape) {
        tape->inputs.push_back(std::move(a));
        tape->pre.push_back(z);
      }
      apply(spec_.activations[l], z);
      a = std::move(z);
    }
    if (tape) tape->output = a;
    return a;
  }

  // Given dLoss/dOutput (output_dim x n), returns dLoss/dParameters.
  Gradient backward(const Tape& tape, Eigen::MatrixXd grad_out) const {
    Gradient g;
    g.weights.resize(weights_.size());
    g.biases.resize(weights_.size());
    for (std::size_t k = weights_.size(); k-- > 0;) {
      apply_derivative(spec_.activations[k], tape.pre[k], grad_out);
      g.weights[k] = grad_out * tape.inputs[k].transpose();
      g.biases[k] = grad_out.rowwise().sum();
      if (k > 0) grad_out = weights_[k].transpose() * grad_out;
    }
    return g;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l)
      n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
    return n;
  }

  // Flattened parameters: per layer, W column-major then b.
  std::vector<double> parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      out.insert(out.end(), weights_[l].data(), weights_[l].data() + weights_[l].size());
      out.insert(out.end(), biases_[l].data(), biases_[l].data() + biases_[l].size());
    }
    return out;
  }

  void set_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw DimensionError("parameter vector size mismatch");
    std::size_t off = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), weights_[l].size(),
                  weights_[l].data());
      off += static_cast<std::size_t>(weights_[l].size());
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), biases_[l].size(),
                  biases_[l].data());
      off += static_cast<std::size_t>(biases_[l].size());
    }
  }

  static std::vector<double> flatten(const Gradient& g) {
    std::vector<double> out;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
      out.insert(out.end(), g.weights[l].data(), g.weights[l].data() + g.weights[l].size());
      out.insert(out.end(), g.biases[l].data(), g.biases[l].data() + g.biases[l].size());
    }
    return out;
  }

  bool operator==(const Mlp& o) const {
    return spec_ == o.spec_ && parameters() == o.parameters();
  }

 private:
  template <typename M>
  void apply(Activation act, M& z) const {
    switch (act) {
      case Activation::kNone: break;
      case Activation::kRelu: z = z.cwiseMax(0.0); break;
      case Activation::kLeakyRelu: {
        const double s = spec_.leaky_slope;
        z = z.unaryExpr([s](double v) { return v > 0 ? v : s * v; });
        break;
      }
    }
  }

  void apply_derivative(Activation act, const Eigen::MatrixXd& pre, Eigen::MatrixXd& grad) const {
    switch (act) {
      case Activation::kNone: break;
      case Activation::kRelu:
        grad = grad.cwiseProduct(pre.unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; }));
        break;
      case Activation::kLeakyRelu: {
        const double s = spec_.leaky_slope;
        grad = grad.cwiseProduct(pre.unaryExpr([s](double v) { return v > 0 ? 1.0 : s; }));
        break;
      }
    }
  }

  MlpSpec spec_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

}  // namespace failmon
