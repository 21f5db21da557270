// Copyright 2026 The prefscale Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prefscale/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prefscale/errors.hpp"

namespace prefscale {

// splitmix64 finalizer.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed, StreamId stream)
    : Rng(seed, static_cast<std::uint64_t>(stream)) {}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : engine_(mix_seed(seed, stream)) {}

double Rng::uniform(double low, double high) {
  return std::uniform_real_distribution<double>(low, high)(engine_);
}

double Rng::normal(double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

std::size_t Rng::index(std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

Rng Rng::fork(std::uint64_t salt) { return Rng(engine_(), salt); }

// ---------------------------------------------------------------------------

MlpParams::MlpParams(std::vector<LayerShape> layers)
    : layers_(std::move(layers)) {
  std::size_t offset = 0;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.in_dim <= 0 || l.out_dim <= 0) {
      throw ConfigError("MLP layer dimensions must be positive");
    }
    if (k > 0 && layers_[k - 1].out_dim != l.in_dim) {
      throw ConfigError("MLP layer dimensions do not chain");
    }
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(l.in_dim) * l.out_dim + l.out_dim;
  }
  values_ = Vector::Zero(static_cast<Eigen::Index>(offset));
}

int MlpParams::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().in_dim;
}

int MlpParams::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().out_dim;
}

Eigen::Map<RowMajorMatrix> MlpParams::weight(std::size_t layer) {
  const auto& l = layers_.at(layer);
  return {values_.data() + offsets_[layer], l.out_dim, l.in_dim};
}

Eigen::Map<const RowMajorMatrix> MlpParams::weight(std::size_t layer) const {
  const auto& l = layers_.at(layer);
  return {values_.data() + offsets_[layer], l.out_dim, l.in_dim};
}

Eigen::Map<Vector> MlpParams::bias(std::size_t layer) {
  const auto& l = layers_.at(layer);
  return {values_.data() + offsets_[layer] +
              static_cast<std::size_t>(l.in_dim) * l.out_dim,
          l.out_dim};
}

Eigen::Map<const Vector> MlpParams::bias(std::size_t layer) const {
  const auto& l = layers_.at(layer);
  return {values_.data() + offsets_[layer] +
              static_cast<std::size_t>(l.in_dim) * l.out_dim,
          l.out_dim};
}

MlpParams MlpParams::zeros_like() const {
  MlpParams out = *this;
  out.values_.setZero();
  return out;
}

bool MlpParams::same_shape(const MlpParams& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (layers_[k].in_dim != other.layers_[k].in_dim ||
        layers_[k].out_dim != other.layers_[k].out_dim ||
        layers_[k].activation != other.layers_[k].activation) {
      return false;
    }
  }
  return true;
}

bool operator==(const MlpParams& a, const MlpParams& b) {
  return a.same_shape(b) && a.values_ == b.values_;
}

MlpParams make_mlp(int in_dim, const std::vector<int>& hidden, int out_dim,
                   Activation hidden_activation, Rng& rng) {
  std::vector<LayerShape> layers;
  int prev = in_dim;
  for (int width : hidden) {
    layers.push_back({prev, width, hidden_activation});
    prev = width;
  }
  layers.push_back({prev, out_dim, Activation::kIdentity});
  MlpParams params(std::move(layers));
  for (std::size_t k = 0; k < params.layers().size(); ++k) {
    const auto& l = params.layers()[k];
    const double limit = std::sqrt(6.0 / (l.in_dim + l.out_dim));
    auto w = params.weight(k);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        w(r, c) = rng.uniform(-limit, limit);
      }
    }
  }
  return params;
}

namespace {

void apply_activation(Activation act, Matrix& m) {
  switch (act) {
    case Activation::kTanh:
      m = m.array().tanh();
      break;
    case Activation::kRelu:
      m = m.array().max(0.0);
      break;
    case Activation::kIdentity:
      break;
  }
}

// Multiplies `grad` in place by the activation derivative, expressed through
// the post-activation output.
void apply_activation_derivative(Activation act, const Matrix& output,
                                 Matrix& grad) {
  switch (act) {
    case Activation::kTanh:
      grad.array() *= 1.0 - output.array().square();
      break;
    case Activation::kRelu:
      grad.array() *= (output.array() > 0.0).cast<double>();
      break;
    case Activation::kIdentity:
      break;
  }
}

}  // namespace

Matrix mlp_forward_batch(const MlpParams& params, const Matrix& inputs,
                         MlpCache* cache) {
  if (params.layers().empty()) throw ConfigError("MLP has no layers");
  if (inputs.rows() != params.input_dim()) {
    throw ConfigError("MLP input has " + std::to_string(inputs.rows()) +
                      " rows, expected " +
                      std::to_string(params.input_dim()));
  }
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  Matrix x = inputs;
  for (std::size_t k = 0; k < params.layers().size(); ++k) {
    Matrix z = params.weight(k) * x;
    z.colwise() += params.bias(k);
    apply_activation(params.layers()[k].activation, z);
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(x));
      cache->outputs.push_back(z);
    }
    x = std::move(z);
  }
  return x;
}

MlpParams mlp_backward_batch(const MlpParams& params, const MlpCache& cache,
                             const Matrix& upstream, Matrix* input_grad) {
  const std::size_t n_layers = params.layers().size();
  if (cache.outputs.size() != n_layers ||
      upstream.rows() != params.output_dim() ||
      upstream.cols() != cache.outputs.back().cols()) {
    throw ConfigError("MLP backward shape mismatch");
  }
  MlpParams grad = params.zeros_like();
  Matrix delta = upstream;
  for (std::size_t k = n_layers; k-- > 0;) {
    apply_activation_derivative(params.layers()[k].activation,
                                cache.outputs[k], delta);
    grad.weight(k).noalias() = delta * cache.inputs[k].transpose();
    grad.bias(k) = delta.rowwise().sum();
    if (k > 0 || input_grad != nullptr) {
      Matrix next = params.weight(k).transpose() * delta;
      delta = std::move(next);
    }
  }
  if (input_grad != nullptr) *input_grad = std::move(delta);
  return grad;
}

Vector mlp_forward(const MlpParams& params, const Vector& input) {
  return mlp_forward_batch(params, input);
}

MlpParams mlp_backward(const MlpParams& params, const Vector& input,
                       const Vector& upstream_grad) {
  MlpCache cache;
  mlp_forward_batch(params, input, &cache);
  return mlp_backward_batch(params, cache, upstream_grad);
}

// ---------------------------------------------------------------------------

AdamState AdamState::for_size(std::size_t n, double step_size) {
  AdamState s;
  s.first_moment = Vector::Zero(static_cast<Eigen::Index>(n));
  s.second_moment = Vector::Zero(static_cast<Eigen::Index>(n));
  s.step_size = step_size;
  return s;
}

bool adam_step(AdamState& state, Eigen::Ref<Vector> params,
               const Eigen::Ref<const Vector>& grad) {
  if (grad.size() != params.size()) {
    throw ConfigError("Adam gradient size does not match parameters");
  }
  if (state.first_moment.size() != params.size()) {
    state.first_moment = Vector::Zero(params.size());
    state.second_moment = Vector::Zero(params.size());
  }
  if (!grad.allFinite()) {
    ++state.skipped_updates;
    return false;
  }
  ++state.step_count;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
  state.second_moment = state.beta2 * state.second_moment +
                        (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  params.array() -= state.step_size * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + state.epsilon);
  return true;
}

bool adam_step(AdamState& state, MlpParams& params, const MlpParams& grad) {
  if (!params.same_shape(grad)) {
    throw ConfigError("Adam gradient shape does not match parameters");
  }
  return adam_step(state, params.values(), grad.values());
}

// ---------------------------------------------------------------------------

void RunningStats::push(double x) {
  ++count_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (x - mean_);
}

RunningStats RunningStats::from_moments(std::int64_t count, double mean,
                                        double variance) {
  RunningStats s;
  s.count_ = count;
  s.mean_ = mean;
  s.m2_ = variance * static_cast<double>(count);
  return s;
}

double RunningStats::variance() const {
  return count_ > 0 ? m2_ / static_cast<double>(count_) : 0.0;
}

double RunningStats::stddev() const { return std::sqrt(variance()); }

// ---------------------------------------------------------------------------

GradientCheckReport gradient_check(
    const std::function<double(const Vector&)>& loss_fn, const Vector& params,
    const Vector& analytic, double tolerance, double step,
    std::size_t max_coordinates, std::uint64_t seed) {
  if (analytic.size() != params.size()) {
    throw ConfigError("gradient_check: analytic gradient has wrong size");
  }
  const auto n = static_cast<std::size_t>(params.size());
  std::vector<std::size_t> coords(n);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (n > max_coordinates) {
    Rng rng(seed, StreamId::kInit);
    std::shuffle(coords.begin(), coords.end(), rng.engine());
    coords.resize(max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  GradientCheckReport report;
  Vector probe = params;
  for (std::size_t i : coords) {
    const auto idx = static_cast<Eigen::Index>(i);
    const double original = probe[idx];
    probe[idx] = original + step;
    const double plus = loss_fn(probe);
    probe[idx] = original - step;
    const double minus = loss_fn(probe);
    probe[idx] = original;
    const double numeric = (plus - minus) / (2.0 * step);
    const double a = analytic[idx];
    const double rel =
        std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-6);
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
    ++report.coordinates_checked;
  }
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace prefscale
