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

#include "twostage/nncore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "twostage/error.hpp"

namespace twostage {
namespace {

using Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

std::vector<double> resolve_weights(std::span<const double> class_weights,
                                    std::size_t num_classes) {
  if (class_weights.empty()) return std::vector<double>(num_classes, 1.0);
  if (class_weights.size() != num_classes) {
    throw InvalidInput("class weight count " +
                       std::to_string(class_weights.size()) +
                       " does not match output width " +
                       std::to_string(num_classes));
  }
  for (double w : class_weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw ConfigError("class weights must be finite and non-negative");
    }
  }
  return {class_weights.begin(), class_weights.end()};
}

void check_batch(const MlpModel& model, const Batch& batch) {
  if (batch.size() == 0) throw InvalidInput("empty batch");
  if (batch.inputs.cols() != idx(batch.size())) {
    throw InvalidInput("batch has " + std::to_string(batch.inputs.cols()) +
                       " input columns but " + std::to_string(batch.size()) +
                       " labels");
  }
  if (batch.inputs.rows() != idx(model.input_dim())) {
    throw InvalidInput("input width " + std::to_string(batch.inputs.rows()) +
                       " does not match model input " +
                       std::to_string(model.input_dim()));
  }
  for (std::size_t label : batch.labels) {
    if (label >= model.output_dim()) {
      throw InvalidInput("label " + std::to_string(label) +
                         " outside head width " +
                         std::to_string(model.output_dim()));
    }
  }
}

// Pre-activations of every layer for a batch.
std::vector<Eigen::MatrixXd> forward_all(const MlpModel& model,
                                         const Eigen::MatrixXd& inputs) {
  const auto& layers = model.layers();
  std::vector<Eigen::MatrixXd> pre(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (l == 0) {
      pre[l].noalias() = layers[l].weight * inputs;
    } else {
      pre[l].noalias() = layers[l].weight * pre[l - 1].cwiseMax(0.0);
    }
    pre[l].colwise() += layers[l].bias;
  }
  return pre;
}

std::vector<double*> parameter_pointers(MlpModel& model) {
  std::vector<double*> out;
  out.reserve(model.parameter_count());
  for (auto& layer : model.layers()) {
    for (Index i = 0; i < layer.weight.size(); ++i) out.push_back(layer.weight.data() + i);
    for (Index i = 0; i < layer.bias.size(); ++i) out.push_back(layer.bias.data() + i);
  }
  return out;
}

std::vector<double> flatten(const std::vector<DenseLayer>& layers) {
  std::vector<double> out;
  for (const auto& layer : layers) {
    out.insert(out.end(), layer.weight.data(),
               layer.weight.data() + layer.weight.size());
    out.insert(out.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return out;
}

}  // namespace

MlpModel::MlpModel(std::vector<std::size_t> layer_dims) : dims_(std::move(layer_dims)) {
  if (dims_.size() < 2) throw InvalidInput("an MLP needs at least two layer dims");
  for (std::size_t d : dims_) {
    if (d == 0) throw InvalidInput("layer dims must be positive");
  }
  layers_.reserve(dims_.size() - 1);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    layers_.push_back({Eigen::MatrixXd::Zero(idx(dims_[l + 1]), idx(dims_[l])),
                       Eigen::VectorXd::Zero(idx(dims_[l + 1]))});
  }
}

MlpModel MlpModel::initialized(std::vector<std::size_t> layer_dims, Rng& rng) {
  MlpModel model(std::move(layer_dims));
  for (auto& layer : model.layers_) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
    // Column-major fill order is part of the reproducibility contract.
    for (Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = rng.uniform(-limit, limit);
    }
  }
  return model;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  }
  return n;
}

bool MlpModel::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const DenseLayer& layer) {
    return layer.weight.allFinite() && layer.bias.allFinite();
  });
}

ForwardResult forward(const MlpModel& model, std::span<const double> input) {
  if (input.size() != model.input_dim()) {
    throw InvalidInput("input length " + std::to_string(input.size()) +
                       " does not match model input " +
                       std::to_string(model.input_dim()));
  }
  Eigen::VectorXd activation =
      Eigen::Map<const Eigen::VectorXd>(input.data(), idx(input.size()));
  if (!activation.allFinite()) throw InvalidInput("input contains non-finite values");

  const auto& layers = model.layers();
  ForwardResult out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (l + 1 == layers.size()) {
      out.features = activation;
      out.logits = layers[l].weight * activation + layers[l].bias;
    } else {
      activation = (layers[l].weight * activation + layers[l].bias).cwiseMax(0.0);
    }
  }
  return out;
}

Eigen::MatrixXd forward_logits(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != idx(model.input_dim())) {
    throw InvalidInput("input width " + std::to_string(inputs.rows()) +
                       " does not match model input " +
                       std::to_string(model.input_dim()));
  }
  return forward_all(model, inputs).back();
}

ProbVector ProbVector::from_values(Eigen::VectorXd values) {
  if (values.size() == 0) throw InvalidInput("empty probability vector");
  for (Index i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0 && values[i] <= 1.0)) {
      throw InvalidInput("probability outside [0, 1]");
    }
  }
  if (std::abs(values.sum() - 1.0) > 1e-9) {
    throw InvalidInput("probabilities do not sum to 1");
  }
  return ProbVector(std::move(values));
}

std::size_t ProbVector::argmax() const {
  Index best = 0;
  for (Index i = 1; i < values_.size(); ++i) {
    if (values_[i] > values_[best]) best = i;
  }
  return static_cast<std::size_t>(best);
}

ProbVector softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  if (logits.size() == 0) throw InvalidInput("softmax of an empty vector");
  const Eigen::VectorXd shifted = (logits.array() - logits.maxCoeff()).exp();
  return ProbVector(shifted / shifted.sum());
}

ProbVector softmax(std::span<const double> logits) {
  return softmax(Eigen::Map<const Eigen::VectorXd>(logits.data(), idx(logits.size())));
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Index j = 0; j < logits.cols(); ++j) {
    out.col(j) = softmax(Eigen::VectorXd(logits.col(j))).values();
  }
  return out;
}

double cross_entropy(const ProbVector& probs, std::size_t true_class) {
  if (true_class >= probs.size()) {
    throw InvalidInput("class " + std::to_string(true_class) + " out of range for " +
                       std::to_string(probs.size()) + " probabilities");
  }
  return -std::log(probs[true_class] + kProbClip);
}

double weighted_cross_entropy(const ProbVector& probs, std::size_t true_class,
                              std::span<const double> weights) {
  if (weights.size() != probs.size()) {
    throw ConfigError("weight count " + std::to_string(weights.size()) +
                      " does not match class count " + std::to_string(probs.size()));
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw ConfigError("class weights must be positive");
    }
  }
  const double loss = cross_entropy(probs, true_class);
  return weights[true_class] * loss;
}

double batch_loss(const MlpModel& model, const Batch& batch,
                  std::span<const double> class_weights) {
  check_batch(model, batch);
  const auto weights = resolve_weights(class_weights, model.output_dim());
  const Eigen::MatrixXd logits = forward_all(model, batch.inputs).back();
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const ProbVector probs = softmax(Eigen::VectorXd(logits.col(idx(i))));
    total += weights[batch.labels[i]] * cross_entropy(probs, batch.labels[i]);
  }
  return total / static_cast<double>(batch.size());
}

Gradients backward(const MlpModel& model, const Batch& batch,
                   std::span<const double> class_weights) {
  Gradients grads;
  backward(model, batch, class_weights, grads);
  return grads;
}

namespace {

// Fills grads with the analytic gradient. When first_delta is given, the first
// layer's weight gradient is left unset and the error signal at that layer is
// stored instead, so the caller can form the gradient column by column.
void backward_into(const MlpModel& model, const Batch& batch,
                   std::span<const double> class_weights, Gradients& grads,
                   Eigen::MatrixXd* first_delta) {
  check_batch(model, batch);
  const auto weights = resolve_weights(class_weights, model.output_dim());
  const auto& layers = model.layers();
  const std::vector<Eigen::MatrixXd> pre = forward_all(model, batch.inputs);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  grads.layers.resize(layers.size());

  // d/dlogits of w_y * -ln(p_y + eps) is w_y * p_y / (p_y + eps) * (p - onehot).
  Eigen::MatrixXd delta(pre.back().rows(), pre.back().cols());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const ProbVector probs = softmax(Eigen::VectorXd(pre.back().col(idx(i))));
    const std::size_t y = batch.labels[i];
    const double w = weights[y];
    total += w * cross_entropy(probs, y);
    const double scale = w * probs[y] / (probs[y] + kProbClip) * inv_batch;
    delta.col(idx(i)) = probs.values() * scale;
    delta(idx(y), idx(i)) -= scale;
  }
  grads.loss = total * inv_batch;

  for (std::size_t l = layers.size(); l-- > 0;) {
    if (l > 0) {
      grads.layers[l].weight.noalias() = delta * pre[l - 1].cwiseMax(0.0).transpose();
    } else if (first_delta == nullptr) {
      grads.layers[l].weight.noalias() = delta * batch.inputs.transpose();
    }
    grads.layers[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd upstream = layers[l].weight.transpose() * delta;
      delta = (pre[l - 1].array() > 0.0).select(upstream, 0.0);
    }
  }
  if (first_delta != nullptr) *first_delta = std::move(delta);
}

struct AdamCoefficients {
  double b1;
  double b2;
  double eps;
  double step_size;
  double inv_sqrt_correction2;
};

void check_adam_state(const MlpModel& model, const AdamState& state) {
  const auto& layers = model.layers();
  if (state.m.size() != layers.size() || state.v.size() != layers.size()) {
    throw InvalidInput("optimizer state layer count does not match model");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (const auto* moments : {&state.m[l], &state.v[l]}) {
      if (moments->weight.rows() != layers[l].weight.rows() ||
          moments->weight.cols() != layers[l].weight.cols() ||
          moments->bias.size() != layers[l].bias.size()) {
        throw InvalidInput("optimizer state shape mismatch in layer " + std::to_string(l));
      }
    }
  }
}

// Advances the step counter and returns this step's update coefficients.
AdamCoefficients begin_adam_step(AdamState& state, double lr) {
  if (!(lr >= 0.0)) throw InvalidInput("learning rate must be non-negative");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  return {state.beta1, state.beta2, state.epsilon, lr / correction1,
          1.0 / std::sqrt(correction2)};
}

// p -= lr * m_hat / (sqrt(v_hat) + eps), fused into one pass per buffer.
inline void adam_update(const AdamCoefficients& c, double* param, const double* grad, double* m,
                        double* v, Index n) {
  for (Index i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.b1 * m[i] + (1.0 - c.b1) * g;
    v[i] = c.b2 * v[i] + (1.0 - c.b2) * g * g;
    param[i] -= c.step_size * m[i] / (std::sqrt(v[i]) * c.inv_sqrt_correction2 + c.eps);
  }
}

}  // namespace

void backward(const MlpModel& model, const Batch& batch, std::span<const double> class_weights,
              Gradients& grads) {
  backward_into(model, batch, class_weights, grads, nullptr);
}

AdamState AdamState::for_model(const MlpModel& model) {
  AdamState state;
  for (const auto& layer : model.layers()) {
    DenseLayer zero{Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                    Eigen::VectorXd::Zero(layer.bias.size())};
    state.m.push_back(zero);
    state.v.push_back(std::move(zero));
  }
  return state;
}

void adam_step(MlpModel& model, const Gradients& grads, AdamState& state, double lr) {
  auto& layers = model.layers();
  check_adam_state(model, state);
  if (grads.layers.size() != layers.size()) {
    throw InvalidInput("gradient layer count does not match model");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (grads.layers[l].weight.rows() != layers[l].weight.rows() ||
        grads.layers[l].weight.cols() != layers[l].weight.cols() ||
        grads.layers[l].bias.size() != layers[l].bias.size()) {
      throw InvalidInput("gradient shape mismatch in layer " + std::to_string(l));
    }
  }
  const AdamCoefficients c = begin_adam_step(state, lr);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    adam_update(c, layers[l].weight.data(), grads.layers[l].weight.data(),
                state.m[l].weight.data(), state.v[l].weight.data(), layers[l].weight.size());
    adam_update(c, layers[l].bias.data(), grads.layers[l].bias.data(), state.m[l].bias.data(),
                state.v[l].bias.data(), layers[l].bias.size());
  }
}

double train_step(MlpModel& model, const Batch& batch, std::span<const double> class_weights,
                  AdamState& state, double lr, Gradients& scratch) {
  check_adam_state(model, state);
  Eigen::MatrixXd delta;
  backward_into(model, batch, class_weights, scratch, &delta);
  if (!std::isfinite(scratch.loss)) return scratch.loss;

  auto& layers = model.layers();
  const AdamCoefficients c = begin_adam_step(state, lr);
  for (std::size_t l = 1; l < layers.size(); ++l) {
    adam_update(c, layers[l].weight.data(), scratch.layers[l].weight.data(),
                state.m[l].weight.data(), state.v[l].weight.data(), layers[l].weight.size());
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    adam_update(c, layers[l].bias.data(), scratch.layers[l].bias.data(), state.m[l].bias.data(),
                state.v[l].bias.data(), layers[l].bias.size());
  }

  // First-layer weights: column j of the gradient is delta * x_j, where x_j
  // holds input feature j across the batch.
  auto& first = layers[0];
  const Index rows = first.weight.rows();
  const Eigen::MatrixXd inputs_t = batch.inputs.transpose();
  Eigen::VectorXd grad_col(rows);
  for (Index j = 0; j < first.weight.cols(); ++j) {
    grad_col.noalias() = delta * inputs_t.col(j);
    adam_update(c, first.weight.col(j).data(), grad_col.data(), state.m[0].weight.col(j).data(),
                state.v[0].weight.col(j).data(), rows);
  }
  return scratch.loss;
}

LrSchedule LrSchedule::standard(std::size_t total_steps, double peak_lr) {
  LrSchedule s;
  s.peak_lr = peak_lr;
  s.min_lr = peak_lr / 100.0;
  s.total_steps = total_steps;
  s.warmup_steps = total_steps / 20;
  return s;
}

void LrSchedule::validate() const {
  if (total_steps == 0) throw ConfigError("schedule total_steps must be positive");
  if (warmup_steps >= total_steps) {
    throw ConfigError("schedule warmup_steps must be below total_steps");
  }
  if (!(min_lr >= 0.0) || !(min_lr <= peak_lr) || !std::isfinite(peak_lr)) {
    throw ConfigError("schedule needs 0 <= min_lr <= peak_lr");
  }
}

double lr_at(const LrSchedule& schedule, std::size_t step) {
  schedule.validate();
  if (step > schedule.total_steps) {
    throw InvalidInput("step " + std::to_string(step) + " beyond schedule end " +
                       std::to_string(schedule.total_steps));
  }
  if (step < schedule.warmup_steps) {
    return schedule.peak_lr * (static_cast<double>(step + 1) /
                               static_cast<double>(schedule.warmup_steps));
  }
  const double progress = static_cast<double>(step - schedule.warmup_steps) /
                          static_cast<double>(schedule.total_steps - schedule.warmup_steps);
  return schedule.min_lr + 0.5 * (schedule.peak_lr - schedule.min_lr) *
                               (1.0 + std::cos(std::numbers::pi * progress));
}

double grad_check(const MlpModel& model, const Batch& batch,
                  std::span<const double> class_weights, double h) {
  return grad_check(model, batch, class_weights, backward(model, batch, class_weights), h);
}

double grad_check(const MlpModel& model, const Batch& batch,
                  std::span<const double> class_weights, const Gradients& analytic,
                  double h) {
  const std::vector<double> analytic_flat = flatten(analytic.layers);
  MlpModel probe = model;
  std::vector<double*> params = parameter_pointers(probe);
  if (analytic_flat.size() != params.size()) {
    throw InvalidInput("analytic gradient size does not match model");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double original = *params[i];
    *params[i] = original + h;
    const double plus = batch_loss(probe, batch, class_weights);
    *params[i] = original - h;
    const double minus = batch_loss(probe, batch, class_weights);
    *params[i] = original;
    const double numeric = (plus - minus) / (2.0 * h);
    const double a = analytic_flat[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace twostage
