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

#ifndef PREFSCALE_NUMERICS_HPP_
#define PREFSCALE_NUMERICS_HPP_

#include <cstdint>
#include <functional>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace prefscale {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Seeded random streams.
// ---------------------------------------------------------------------------

enum class StreamId : std::uint64_t {
  kEnvironment = 1,
  kPolicy = 2,
  kQuerySelection = 3,
  kEstimatorSplit = 4,
  kRewardModel = 5,
  kInit = 6,
  kEvaluation = 7,
};

// A pseudo-random stream keyed by (seed, stream_id). Two streams with the same
// key produce the same draws.
class Rng {
 public:
  Rng(std::uint64_t seed, StreamId stream);
  Rng(std::uint64_t seed, std::uint64_t stream);

  double uniform(double low, double high);
  double normal(double mean, double stddev);
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  std::uint64_t next_u64() { return engine_(); }

  // Derives an independent child stream, e.g. one per episode.
  Rng fork(std::uint64_t salt);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// ---------------------------------------------------------------------------
// Multi-layer perceptron.
// ---------------------------------------------------------------------------

enum class Activation { kTanh, kRelu, kIdentity };

struct LayerShape {
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::kIdentity;
};

// All layer weights and biases live in one contiguous vector. Layer k stores
// its out_dim x in_dim weight block row-major, followed by out_dim biases.
// Gradients use the same type and layout.
class MlpParams {
 public:
  MlpParams() = default;
  explicit MlpParams(std::vector<LayerShape> layers);

  const std::vector<LayerShape>& layers() const { return layers_; }
  int input_dim() const;
  int output_dim() const;
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }

  Eigen::Map<RowMajorMatrix> weight(std::size_t layer);
  Eigen::Map<const RowMajorMatrix> weight(std::size_t layer) const;
  Eigen::Map<Vector> bias(std::size_t layer);
  Eigen::Map<const Vector> bias(std::size_t layer) const;

  // Same shapes, all values zero.
  MlpParams zeros_like() const;
  bool same_shape(const MlpParams& other) const;
  bool all_finite() const { return values_.allFinite(); }

  friend bool operator==(const MlpParams& a, const MlpParams& b);

 private:
  std::vector<LayerShape> layers_;
  std::vector<std::size_t> offsets_;
  Vector values_;
};

// Builds in -> hidden... -> out with `hidden_activation` on hidden layers and
// identity on the output. Weights are Glorot-uniform, biases zero.
MlpParams make_mlp(int in_dim, const std::vector<int>& hidden, int out_dim,
                   Activation hidden_activation, Rng& rng);

// Per-layer activations recorded by a batched forward pass. Column j of every
// matrix belongs to sample j.
struct MlpCache {
  std::vector<Matrix> inputs;   // input to layer k
  std::vector<Matrix> outputs;  // post-activation output of layer k
};

// Batched forward pass; `inputs` is in_dim x batch.
Matrix mlp_forward_batch(const MlpParams& params, const Matrix& inputs,
                         MlpCache* cache = nullptr);

// Gradient of sum_j upstream(:,j) . output(:,j) with respect to the
// parameters. When `input_grad` is non-null it receives the gradient with
// respect to the inputs.
MlpParams mlp_backward_batch(const MlpParams& params, const MlpCache& cache,
                             const Matrix& upstream,
                             Matrix* input_grad = nullptr);

Vector mlp_forward(const MlpParams& params, const Vector& input);
MlpParams mlp_backward(const MlpParams& params, const Vector& input,
                       const Vector& upstream_grad);

// ---------------------------------------------------------------------------
// Adam.
// ---------------------------------------------------------------------------

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  std::int64_t step_count = 0;
  double step_size = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t skipped_updates = 0;

  static AdamState for_size(std::size_t n, double step_size);
};

// One bias-corrected update of `params` in place. A gradient containing a
// non-finite entry leaves both params and moments untouched and bumps
// `skipped_updates`. Returns false when the update was skipped.
bool adam_step(AdamState& state, Eigen::Ref<Vector> params,
               const Eigen::Ref<const Vector>& grad);
bool adam_step(AdamState& state, MlpParams& params, const MlpParams& grad);

// ---------------------------------------------------------------------------
// Running statistics (population variance).
// ---------------------------------------------------------------------------

class RunningStats {
 public:
  void push(double x);
  void reset() { *this = RunningStats(); }
  static RunningStats from_moments(std::int64_t count, double mean,
                                   double variance);
  std::int64_t count() const { return count_; }
  double mean() const { return mean_; }
  double variance() const;
  double stddev() const;

 private:
  std::int64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// ---------------------------------------------------------------------------
// Finite-difference gradient verification.
// ---------------------------------------------------------------------------

struct GradientCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
  bool pass = false;
};

// Compares `analytic` against central differences of `loss_fn` around
// `params`. Relative error per coordinate is |a - n| / max(|a| + |n|, 1e-6).
// When params has more than `max_coordinates` entries a random subset of that
// size is checked.
GradientCheckReport gradient_check(
    const std::function<double(const Vector&)>& loss_fn, const Vector& params,
    const Vector& analytic, double tolerance, double step = 1e-5,
    std::size_t max_coordinates = 200, std::uint64_t seed = 0);

}  // namespace prefscale

#endif  // PREFSCALE_NUMERICS_HPP_
