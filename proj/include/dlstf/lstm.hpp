#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dlstf/tensor.hpp"

namespace dlstf {

/// Parameters of one LSTM layer. Gate order everywhere is forget, input,
/// candidate (k), output.
struct LstmLayerParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Matrix w_f, w_i, w_k, w_o;  // hidden x input
  Matrix u_f, u_i, u_k, u_o;  // hidden x hidden
  Vector b_f, b_i, b_k, b_o;  // hidden
  ActivationKind gate_activation = ActivationKind::Sigmoid;

  LstmLayerParams() = default;
  LstmLayerParams(std::size_t input_dim, std::size_t hidden_dim,
                  ActivationKind gate = ActivationKind::Sigmoid);

  /// Visits the twelve parameter blocks in serialization order
  /// (W_f, W_i, W_k, W_o, U_f, U_i, U_k, U_o, b_f, b_i, b_k, b_o).
  template <typename F>
  void for_each_block(F&& f) {
    for (Matrix* m : {&w_f, &w_i, &w_k, &w_o, &u_f, &u_i, &u_k, &u_o}) f(m->span());
    for (Vector* v : {&b_f, &b_i, &b_k, &b_o}) f(v->span());
  }
  template <typename F>
  void for_each_block(F&& f) const {
    for (const Matrix* m : {&w_f, &w_i, &w_k, &w_o, &u_f, &u_i, &u_k, &u_o}) f(m->span());
    for (const Vector* v : {&b_f, &b_i, &b_k, &b_o}) f(v->span());
  }

  std::size_t parameter_count() const;
  void validate() const;

  bool operator==(const LstmLayerParams&) const = default;
};

/// Everything one forward step produced, kept for the backward pass.
struct LstmStepState {
  Vector f, i, k, c, o, h;
  Vector z_f, z_i, z_k, z_o;  // pre-activations
  Vector tanh_c;
};

/// Stacked LSTM with a dense head on the top layer's final hidden state.
struct LstmNetwork {
  std::vector<LstmLayerParams> layers;
  Matrix head_weights;  // n x top hidden
  Vector head_bias;     // n
  ActivationKind head_activation = ActivationKind::Identity;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().input_dim; }
  std::size_t output_dim() const { return head_bias.size(); }
  std::vector<std::size_t> layer_widths() const;

  template <typename F>
  void for_each_block(F&& f) {
    for (auto& layer : layers) layer.for_each_block(f);
    f(head_weights.span());
    f(head_bias.span());
  }
  template <typename F>
  void for_each_block(F&& f) const {
    for (const auto& layer : layers) layer.for_each_block(f);
    f(head_weights.span());
    f(head_bias.span());
  }

  std::size_t parameter_count() const;
  /// Throws ShapeError if the dimension chain is broken anywhere.
  void validate() const;

  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  bool operator==(const LstmNetwork&) const = default;
};

/// Gradients share the network's layout.
using NetworkGradients = LstmNetwork;

/// Same architecture as `net` with every parameter zero.
LstmNetwork zeros_like(const LstmNetwork& net);

/// A training or evaluation example: `sequence` of station vectors, `target` the next one.
struct Sample {
  std::vector<Vector> sequence;
  Vector target;
};

struct StepInputGradients {
  Vector dx;
  Vector dh_prev;
  Vector dc_prev;
};

struct LayerStepCache {
  Vector x;
  Vector h_prev;
  Vector c_prev;
  LstmStepState state;
};

struct ForwardCache {
  std::vector<std::vector<LayerStepCache>> layers;  // [layer][step]
  Vector head_input;
  Vector head_pre;
};

struct ForwardResult {
  Vector prediction;
  ForwardCache cache;
};

/// Mutation switches for checking that gradient_check catches broken backward passes.
struct BackwardHooks {
  bool flip_forget_gate_sign = false;
};

LstmStepState lstm_step_forward(const LstmLayerParams& p, const Vector& x_t, const Vector& h_prev,
                                const Vector& c_prev);

/// Adds this step's parameter gradients into `grads` and returns the
/// gradients flowing to the step's inputs.
StepInputGradients lstm_step_backward(const LstmLayerParams& p, const LstmStepState& state,
                                      const Vector& x_t, const Vector& h_prev,
                                      const Vector& c_prev, const Vector& dh_t,
                                      const Vector& dc_t, LstmLayerParams& grads,
                                      const BackwardHooks& hooks = {});

/// Runs `seq` through every layer from zero initial state, then the head.
ForwardResult net_forward(const LstmNetwork& net, std::span<const Vector> seq);

/// Same arithmetic as net_forward without retaining caches.
Vector net_predict(const LstmNetwork& net, std::span<const Vector> seq);

NetworkGradients net_backward(const LstmNetwork& net, const ForwardCache& cache,
                              const Vector& dloss_dpred, const BackwardHooks& hooks = {});
/// net_backward into `grads`, which must be shaped like `net`. Zeroes it first.
void net_backward_into(const LstmNetwork& net, const ForwardCache& cache,
                       const Vector& dloss_dpred, NetworkGradients& grads,
                       const BackwardHooks& hooks = {});

/// Maximum relative error between net_backward and central differences over
/// every parameter, for the loss 0.5 * ||prediction - target||^2.
/// Relative error is |a - fd| / max(1e-8, |a| + |fd|). Differences are taken
/// in double precision first; any parameter that does not agree to 1e-7 is
/// re-differenced in quad precision, which removes cancellation roundoff on
/// very small gradients.
double gradient_check(const LstmNetwork& net, const Sample& sample, double eps,
                      const BackwardHooks& hooks = {});

/// Builds a network with one LSTM layer per entry of `layer_widths` and an
/// n-wide input and head. Weights are uniform in +-1/sqrt(fan_in) where
/// fan_in is input_dim + hidden_dim for gate blocks and the top width for the
/// head, drawn from Rng(seed) block by block in serialization order.
/// Biases are zero except b_f = 1.
LstmNetwork init_params(std::span<const std::size_t> layer_widths, std::size_t n,
                        std::uint64_t seed, ActivationKind gate = ActivationKind::Sigmoid,
                        ActivationKind head = ActivationKind::Identity);

/// A seeded network and sample for gradient checks: init_params weights,
/// every bias uniform in [-0.5, 0.5], inputs and target uniform in [0, 1].
struct GradCheckCase {
  LstmNetwork net;
  Sample sample;
};
GradCheckCase random_gradcheck_case(std::uint64_t seed, std::size_t layers, std::size_t hidden,
                                    std::size_t n, std::size_t steps);

}  // namespace dlstf
