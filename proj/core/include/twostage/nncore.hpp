/*
 * Copyright 2026 The twostage Authors.
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

// Dense multilayer perceptron with analytic gradients, Adam, a warmup plus
// cosine learning-rate schedule and a finite-difference gradient checker.
//
// Hidden layers use a rectifier; the last layer is linear and produces logits.
// Everything trains in double precision. Inputs are laid out one sample per
// column, so a batch of B inputs of width n is an (n x B) matrix.

#ifndef TWOSTAGE_NNCORE_HPP_
#define TWOSTAGE_NNCORE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "twostage/random.hpp"

namespace twostage {

struct DenseLayer {
  Eigen::MatrixXd weight;  // (fan_out x fan_in)
  Eigen::VectorXd bias;    // fan_out

  bool operator==(const DenseLayer& other) const {
    return weight == other.weight && bias == other.bias;
  }
};

class MlpModel {
 public:
  MlpModel() = default;

  // All parameters zero. Requires at least two positive dims.
  explicit MlpModel(std::vector<std::size_t> layer_dims);

  // Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static MlpModel initialized(std::vector<std::size_t> layer_dims, Rng& rng);

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  // Width of the penultimate activation (the input itself for a one-layer
  // model).
  std::size_t feature_dim() const { return dims_[dims_.size() - 2]; }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::size_t parameter_count() const;
  bool all_finite() const;

  bool operator==(const MlpModel& other) const {
    return dims_ == other.dims_ && layers_ == other.layers_;
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<DenseLayer> layers_;
};

struct ForwardResult {
  Eigen::VectorXd features;  // penultimate activation z
  Eigen::VectorXd logits;    // W_head z + b_head
};

ForwardResult forward(const MlpModel& model, std::span<const double> input);

// Batched logits; one column per sample.
Eigen::MatrixXd forward_logits(const MlpModel& model,
                               const Eigen::MatrixXd& inputs);

// A probability vector: entries in [0, 1] summing to 1.
class ProbVector {
 public:
  ProbVector() = default;

  // Validates the invariant (tolerance 1e-9 on the sum).
  static ProbVector from_values(Eigen::VectorXd values);

  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
  const Eigen::VectorXd& values() const { return values_; }

  // Index of the largest entry; ties go to the lowest index.
  std::size_t argmax() const;

  bool operator==(const ProbVector& other) const { return values_ == other.values_; }

 private:
  friend ProbVector softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);
  explicit ProbVector(Eigen::VectorXd values) : values_(std::move(values)) {}
  Eigen::VectorXd values_;
};

// Max-shifted softmax; total on finite logits.
ProbVector softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);
ProbVector softmax(std::span<const double> logits);

// Column-wise softmax of a logits matrix.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

// Added to the probability inside the log so the loss stays finite.
inline constexpr double kProbClip = 1e-12;

// -ln(probs[true_class] + kProbClip).
double cross_entropy(const ProbVector& probs, std::size_t true_class);

// weights[true_class] * cross_entropy(probs, true_class). Every weight must be
// strictly positive.
double weighted_cross_entropy(const ProbVector& probs, std::size_t true_class,
                              std::span<const double> weights);

struct Batch {
  Eigen::MatrixXd inputs;            // (input_dim x B)
  std::vector<std::size_t> labels;   // B class indices

  std::size_t size() const { return labels.size(); }
};

// Same shapes as the model's layers, plus the batch loss they were taken at.
struct Gradients {
  std::vector<DenseLayer> layers;
  double loss = 0.0;
};

// Mean over the batch of weights[y] * -ln(p_y + kProbClip). Class weights must
// be finite and non-negative, one per output; an empty span means all ones.
double batch_loss(const MlpModel& model, const Batch& batch,
                  std::span<const double> class_weights = {});

// Analytic gradient of batch_loss with respect to every weight and bias.
Gradients backward(const MlpModel& model, const Batch& batch,
                   std::span<const double> class_weights = {});

// Same, writing into `out` and reusing its storage across calls.
void backward(const MlpModel& model, const Batch& batch, std::span<const double> class_weights,
              Gradients& out);

struct AdamState {
  std::uint64_t step = 0;
  std::vector<DenseLayer> m;
  std::vector<DenseLayer> v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Zero moments shaped like the model.
  static AdamState for_model(const MlpModel& model);
};

// Bias-corrected Adam update in place; increments state.step.
void adam_step(MlpModel& model, const Gradients& grads, AdamState& state,
               double lr);

// One optimization step: backward followed by adam_step, except that the first
// layer's weight gradient is applied column by column instead of being stored.
// Returns the batch loss. When the loss is not finite, nothing is updated.
// `scratch` holds reusable buffers; its first-layer weight gradient is left
// unset.
double train_step(MlpModel& model, const Batch& batch, std::span<const double> class_weights,
                  AdamState& state, double lr, Gradients& scratch);

struct LrSchedule {
  double peak_lr = 1e-4;
  double min_lr = 1e-6;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 1;

  // Warmup of 5% of total steps and min_lr = peak_lr / 100.
  static LrSchedule standard(std::size_t total_steps, double peak_lr = 1e-4);

  void validate() const;
};

// Linear ramp peak * (step + 1) / warmup for step < warmup, then cosine decay
// from peak_lr at step == warmup to min_lr at step == total_steps.
double lr_at(const LrSchedule& schedule, std::size_t step);

// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|,
// 1e-8), numeric gradients from central differences with step h.
double grad_check(const MlpModel& model, const Batch& batch,
                  std::span<const double> class_weights = {}, double h = 1e-4);

// Same, against caller-provided analytic gradients.
double grad_check(const MlpModel& model, const Batch& batch,
                  std::span<const double> class_weights,
                  const Gradients& analytic, double h = 1e-4);

}  // namespace twostage

#endif  // TWOSTAGE_NNCORE_HPP_
