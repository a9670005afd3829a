#include "dlstf/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <quadmath.h>

#include "dlstf/rng.hpp"

namespace dlstf {

LstmLayerParams::LstmLayerParams(std::size_t in, std::size_t hidden, ActivationKind gate)
    : input_dim(in),
      hidden_dim(hidden),
      w_f(hidden, in),
      w_i(hidden, in),
      w_k(hidden, in),
      w_o(hidden, in),
      u_f(hidden, hidden),
      u_i(hidden, hidden),
      u_k(hidden, hidden),
      u_o(hidden, hidden),
      b_f(hidden),
      b_i(hidden),
      b_k(hidden),
      b_o(hidden),
      gate_activation(gate) {}

std::size_t LstmLayerParams::parameter_count() const {
  return 4 * hidden_dim * (input_dim + hidden_dim + 1);
}

void LstmLayerParams::validate() const {
  auto expect = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      throw ShapeError(std::string("LSTM layer block ") + name + " is " + m.shape_string() +
                       ", expected " + std::to_string(r) + "x" + std::to_string(c));
    }
  };
  expect(w_f, hidden_dim, input_dim, "W_f");
  expect(w_i, hidden_dim, input_dim, "W_i");
  expect(w_k, hidden_dim, input_dim, "W_k");
  expect(w_o, hidden_dim, input_dim, "W_o");
  expect(u_f, hidden_dim, hidden_dim, "U_f");
  expect(u_i, hidden_dim, hidden_dim, "U_i");
  expect(u_k, hidden_dim, hidden_dim, "U_k");
  expect(u_o, hidden_dim, hidden_dim, "U_o");
  for (const Vector* b : {&b_f, &b_i, &b_k, &b_o}) {
    if (b->size() != hidden_dim) throw ShapeError("LSTM layer bias has wrong length");
  }
  if (gate_activation != ActivationKind::Sigmoid && gate_activation != ActivationKind::ReLU) {
    throw std::invalid_argument("gate activation must be sigmoid or relu");
  }
}

std::vector<std::size_t> LstmNetwork::layer_widths() const {
  std::vector<std::size_t> widths;
  widths.reserve(layers.size());
  for (const auto& l : layers) widths.push_back(l.hidden_dim);
  return widths;
}

std::size_t LstmNetwork::parameter_count() const {
  std::size_t count = head_weights.size() + head_bias.size();
  for (const auto& l : layers) count += l.parameter_count();
  return count;
}

void LstmNetwork::validate() const {
  if (layers.empty()) throw ShapeError("network has no LSTM layers");
  for (std::size_t j = 0; j < layers.size(); ++j) {
    layers[j].validate();
    if (j > 0 && layers[j].input_dim != layers[j - 1].hidden_dim) {
      throw ShapeError("layer " + std::to_string(j) + " input_dim " +
                       std::to_string(layers[j].input_dim) + " != layer " +
                       std::to_string(j - 1) + " hidden_dim " +
                       std::to_string(layers[j - 1].hidden_dim));
    }
  }
  if (head_weights.cols() != layers.back().hidden_dim || head_weights.rows() != head_bias.size()) {
    throw ShapeError("head is " + head_weights.shape_string() + " with bias " +
                     std::to_string(head_bias.size()) + " on top of hidden width " +
                     std::to_string(layers.back().hidden_dim));
  }
}

std::vector<double> LstmNetwork::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for_each_block([&](std::span<const double> s) { flat.insert(flat.end(), s.begin(), s.end()); });
  return flat;
}

void LstmNetwork::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw ShapeError("assign: got " + std::to_string(flat.size()) + " values for " +
                     std::to_string(parameter_count()) + " parameters");
  }
  std::size_t offset = 0;
  for_each_block([&](std::span<double> s) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), s.size(), s.begin());
    offset += s.size();
  });
}

LstmNetwork zeros_like(const LstmNetwork& net) {
  LstmNetwork out = net;
  out.for_each_block([](std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); });
  return out;
}

LstmStepState lstm_step_forward(const LstmLayerParams& p, const Vector& x_t, const Vector& h_prev,
                                const Vector& c_prev) {
  if (x_t.size() != p.input_dim || h_prev.size() != p.hidden_dim ||
      c_prev.size() != p.hidden_dim) {
    throw ShapeError("lstm_step_forward: x " + std::to_string(x_t.size()) + ", h " +
                     std::to_string(h_prev.size()) + ", c " + std::to_string(c_prev.size()) +
                     " for layer " + std::to_string(p.input_dim) + "->" +
                     std::to_string(p.hidden_dim));
  }
  LstmStepState s;
  s.z_f = affine_combine(p.w_f, x_t, p.u_f, h_prev, p.b_f);
  s.z_i = affine_combine(p.w_i, x_t, p.u_i, h_prev, p.b_i);
  s.z_k = affine_combine(p.w_k, x_t, p.u_k, h_prev, p.b_k);
  s.z_o = affine_combine(p.w_o, x_t, p.u_o, h_prev, p.b_o);
  s.f = activation_apply(s.z_f, p.gate_activation);
  s.i = activation_apply(s.z_i, p.gate_activation);
  s.k = activation_apply(s.z_k, ActivationKind::Tanh);
  s.o = activation_apply(s.z_o, p.gate_activation);

  const std::size_t hd = p.hidden_dim;
  s.c = Vector(hd);
  s.tanh_c = Vector(hd);
  s.h = Vector(hd);
  for (std::size_t j = 0; j < hd; ++j) {
    s.c[j] = s.f[j] * c_prev[j] + s.i[j] * s.k[j];
    s.tanh_c[j] = std::tanh(s.c[j]);
    s.h[j] = s.o[j] * s.tanh_c[j];
  }
  return s;
}

StepInputGradients lstm_step_backward(const LstmLayerParams& p, const LstmStepState& s,
                                      const Vector& x_t, const Vector& h_prev,
                                      const Vector& c_prev, const Vector& dh_t,
                                      const Vector& dc_t, LstmLayerParams& grads,
                                      const BackwardHooks& hooks) {
  const std::size_t hd = p.hidden_dim;
  if (dh_t.size() != hd || dc_t.size() != hd || s.h.size() != hd || x_t.size() != p.input_dim ||
      h_prev.size() != hd || c_prev.size() != hd || grads.hidden_dim != hd ||
      grads.input_dim != p.input_dim) {
    throw ShapeError("lstm_step_backward: inconsistent shapes for layer " +
                     std::to_string(p.input_dim) + "->" + std::to_string(hd));
  }

  Vector dz_f(hd), dz_i(hd), dz_k(hd), dz_o(hd);
  StepInputGradients out{Vector(p.input_dim), Vector(hd), Vector(hd)};
  const ActivationKind g = p.gate_activation;
  const double forget_sign = hooks.flip_forget_gate_sign ? -1.0 : 1.0;
  for (std::size_t j = 0; j < hd; ++j) {
    const double d_o = dh_t[j] * s.tanh_c[j];
    const double dc = dc_t[j] + dh_t[j] * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
    const double d_f = dc * c_prev[j];
    const double d_i = dc * s.k[j];
    const double d_k = dc * s.i[j];
    out.dc_prev[j] = dc * s.f[j];
    dz_f[j] = forget_sign * d_f * activate_derivative(s.z_f[j], g);
    dz_i[j] = d_i * activate_derivative(s.z_i[j], g);
    dz_k[j] = d_k * (1.0 - s.k[j] * s.k[j]);
    dz_o[j] = d_o * activate_derivative(s.z_o[j], g);
  }

  add_outer(grads.w_f, dz_f.span(), x_t.span());
  add_outer(grads.w_i, dz_i.span(), x_t.span());
  add_outer(grads.w_k, dz_k.span(), x_t.span());
  add_outer(grads.w_o, dz_o.span(), x_t.span());
  add_outer(grads.u_f, dz_f.span(), h_prev.span());
  add_outer(grads.u_i, dz_i.span(), h_prev.span());
  add_outer(grads.u_k, dz_k.span(), h_prev.span());
  add_outer(grads.u_o, dz_o.span(), h_prev.span());
  for (std::size_t j = 0; j < hd; ++j) {
    grads.b_f[j] += dz_f[j];
    grads.b_i[j] += dz_i[j];
    grads.b_k[j] += dz_k[j];
    grads.b_o[j] += dz_o[j];
  }

  add_transpose_matvec(p.w_f, dz_f.span(), out.dx.span());
  add_transpose_matvec(p.w_i, dz_i.span(), out.dx.span());
  add_transpose_matvec(p.w_k, dz_k.span(), out.dx.span());
  add_transpose_matvec(p.w_o, dz_o.span(), out.dx.span());
  add_transpose_matvec(p.u_f, dz_f.span(), out.dh_prev.span());
  add_transpose_matvec(p.u_i, dz_i.span(), out.dh_prev.span());
  add_transpose_matvec(p.u_k, dz_k.span(), out.dh_prev.span());
  add_transpose_matvec(p.u_o, dz_o.span(), out.dh_prev.span());
  return out;
}

namespace {

void check_sequence(const LstmNetwork& net, std::span<const Vector> seq) {
  if (seq.empty()) throw std::invalid_argument("net_forward: empty input sequence");
  if (net.layers.empty()) throw ShapeError("net_forward: network has no layers");
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t].size() != net.input_dim()) {
      throw ShapeError("net_forward: step " + std::to_string(t) + " has length " +
                       std::to_string(seq[t].size()) + ", expected " +
                       std::to_string(net.input_dim()));
    }
  }
}

Vector apply_head(const LstmNetwork& net, const Vector& top, Vector* pre_out) {
  Vector pre = matvec(net.head_weights, top.span());
  if (pre.size() != net.head_bias.size()) throw ShapeError("head bias length mismatch");
  for (std::size_t j = 0; j < pre.size(); ++j) pre[j] += net.head_bias[j];
  Vector out = activation_apply(pre, net.head_activation);
  if (pre_out != nullptr) *pre_out = std::move(pre);
  return out;
}

}  // namespace

ForwardResult net_forward(const LstmNetwork& net, std::span<const Vector> seq) {
  check_sequence(net, seq);
  ForwardResult result;
  result.cache.layers.resize(net.layers.size());

  std::vector<Vector> inputs(seq.begin(), seq.end());
  for (std::size_t j = 0; j < net.layers.size(); ++j) {
    const auto& layer = net.layers[j];
    auto& steps = result.cache.layers[j];
    steps.reserve(inputs.size());
    Vector h(layer.hidden_dim), c(layer.hidden_dim);
    std::vector<Vector> outputs;
    outputs.reserve(inputs.size());
    for (auto& x : inputs) {
      LayerStepCache step{std::move(x), h, c, {}};
      step.state = lstm_step_forward(layer, step.x, h, c);
      h = step.state.h;
      c = step.state.c;
      outputs.push_back(h);
      steps.push_back(std::move(step));
    }
    inputs = std::move(outputs);
  }
  result.cache.head_input = inputs.back();
  result.prediction = apply_head(net, result.cache.head_input, &result.cache.head_pre);
  return result;
}

Vector net_predict(const LstmNetwork& net, std::span<const Vector> seq) {
  check_sequence(net, seq);
  std::vector<Vector> inputs(seq.begin(), seq.end());
  for (const auto& layer : net.layers) {
    Vector h(layer.hidden_dim), c(layer.hidden_dim);
    for (auto& x : inputs) {
      LstmStepState s = lstm_step_forward(layer, x, h, c);
      h = std::move(s.h);
      c = std::move(s.c);
      x = h;
    }
  }
  return apply_head(net, inputs.back(), nullptr);
}

NetworkGradients net_backward(const LstmNetwork& net, const ForwardCache& cache,
                              const Vector& dloss_dpred, const BackwardHooks& hooks) {
  NetworkGradients grads = zeros_like(net);
  net_backward_into(net, cache, dloss_dpred, grads, hooks);
  return grads;
}

void net_backward_into(const LstmNetwork& net, const ForwardCache& cache,
                       const Vector& dloss_dpred, NetworkGradients& grads,
                       const BackwardHooks& hooks) {
  if (cache.layers.size() != net.layers.size() || cache.layers.empty() ||
      cache.layers.front().empty() || cache.head_pre.size() != net.output_dim() ||
      dloss_dpred.size() != net.output_dim()) {
    throw ShapeError("net_backward: cache does not match network");
  }
  const std::size_t steps = cache.layers.front().size();
  for (const auto& layer_cache : cache.layers) {
    if (layer_cache.size() != steps) throw ShapeError("net_backward: ragged cache");
  }

  if (grads.layers.size() != net.layers.size() ||
      grads.head_weights.rows() != net.head_weights.rows() ||
      grads.head_weights.cols() != net.head_weights.cols() ||
      grads.head_bias.size() != net.head_bias.size()) {
    throw ShapeError("net_backward: gradient buffer does not match network");
  }
  grads.for_each_block([](std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); });

  Vector d_pre(dloss_dpred.size());
  for (std::size_t j = 0; j < d_pre.size(); ++j) {
    d_pre[j] = dloss_dpred[j] * activate_derivative(cache.head_pre[j], net.head_activation);
  }
  add_outer(grads.head_weights, d_pre.span(), cache.head_input.span());
  for (std::size_t j = 0; j < d_pre.size(); ++j) grads.head_bias[j] += d_pre[j];

  // Upstream dh for every step of the current layer; only the final step of
  // the top layer feeds the head.
  std::vector<Vector> dh_seq(steps, Vector(net.layers.back().hidden_dim));
  add_transpose_matvec(net.head_weights, d_pre.span(), dh_seq.back().span());

  for (std::size_t jj = net.layers.size(); jj-- > 0;) {
    const auto& layer = net.layers[jj];
    const auto& layer_cache = cache.layers[jj];
    std::vector<Vector> dx_seq(steps);
    Vector dh_next(layer.hidden_dim), dc_next(layer.hidden_dim);
    for (std::size_t t = steps; t-- > 0;) {
      const auto& step = layer_cache[t];
      Vector dh = dh_seq[t];
      for (std::size_t k = 0; k < dh.size(); ++k) dh[k] += dh_next[k];
      auto g = lstm_step_backward(layer, step.state, step.x, step.h_prev, step.c_prev, dh,
                                  dc_next, grads.layers[jj], hooks);
      dh_next = std::move(g.dh_prev);
      dc_next = std::move(g.dc_prev);
      dx_seq[t] = std::move(g.dx);
    }
    dh_seq = std::move(dx_seq);
  }
}

namespace {

double squared_loss(const Vector& pred, const Vector& target) {
  double acc = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double e = pred[j] - target[j];
    acc += e * e;
  }
  return 0.5 * acc;
}

// Finite differences run in quad precision on a flat parameter vector laid
// out like LstmNetwork::flatten, so that roundoff stays far below the
// gradients being checked.
using Quad = __float128;

Quad quad_activate(ActivationKind kind, Quad z) {
  switch (kind) {
    case ActivationKind::Sigmoid:
      if (z >= 0) return 1 / (1 + expq(-z));
      return expq(z) / (1 + expq(z));
    case ActivationKind::Tanh:
      return tanhq(z);
    case ActivationKind::ReLU:
      return z > 0 ? z : Quad(0);
    case ActivationKind::Identity:
      return z;
  }
  return z;
}

Quad quad_squared_loss(const LstmNetwork& net, const std::vector<Quad>& theta,
                       std::span<const Vector> seq, const Vector& target) {
  std::size_t at = 0;
  std::vector<std::vector<Quad>> inputs;
  for (const auto& x : seq) inputs.emplace_back(x.begin(), x.end());

  for (const auto& layer : net.layers) {
    const std::size_t in = layer.input_dim, hid = layer.hidden_dim;
    const Quad* w = theta.data() + at;                 // 4 blocks hid x in
    const Quad* u = w + 4 * hid * in;                  // 4 blocks hid x hid
    const Quad* b = u + 4 * hid * hid;                 // 4 blocks hid
    at += layer.parameter_count();
    std::vector<Quad> h(hid, 0), c(hid, 0), z(4 * hid);
    for (auto& x : inputs) {
      for (std::size_t g = 0; g < 4; ++g) {
        for (std::size_t r = 0; r < hid; ++r) {
          Quad acc = 0;
          for (std::size_t k = 0; k < in; ++k) acc += w[(g * hid + r) * in + k] * x[k];
          for (std::size_t k = 0; k < hid; ++k) acc += u[(g * hid + r) * hid + k] * h[k];
          z[g * hid + r] = acc + b[g * hid + r];
        }
      }
      for (std::size_t r = 0; r < hid; ++r) {
        const Quad f = quad_activate(layer.gate_activation, z[r]);
        const Quad i = quad_activate(layer.gate_activation, z[hid + r]);
        const Quad k = tanhq(z[2 * hid + r]);
        const Quad o = quad_activate(layer.gate_activation, z[3 * hid + r]);
        c[r] = f * c[r] + i * k;
        h[r] = o * tanhq(c[r]);
      }
      x = h;
    }
  }

  const std::size_t n = net.output_dim(), top = inputs.back().size();
  const Quad* hw = theta.data() + at;
  const Quad* hb = hw + n * top;
  Quad loss = 0;
  for (std::size_t r = 0; r < n; ++r) {
    Quad acc = 0;
    for (std::size_t k = 0; k < top; ++k) acc += hw[r * top + k] * inputs.back()[k];
    const Quad e = quad_activate(net.head_activation, acc + hb[r]) - Quad(target[r]);
    loss += e * e;
  }
  return loss / 2;
}

}  // namespace

double gradient_check(const LstmNetwork& net, const Sample& sample, double eps,
                      const BackwardHooks& hooks) {
  if (sample.target.size() != net.output_dim()) {
    throw ShapeError("gradient_check: target length does not match network output");
  }
  const auto fwd = net_forward(net, sample.sequence);
  Vector dpred(fwd.prediction.size());
  for (std::size_t j = 0; j < dpred.size(); ++j) dpred[j] = fwd.prediction[j] - sample.target[j];
  const std::vector<double> analytic = net_backward(net, fwd.cache, dpred, hooks).flatten();

  auto relative = [](double x, double y) {
    return std::abs(x - y) / std::max(1e-8, std::abs(x) + std::abs(y));
  };
  // Double-precision differences settle most parameters; the rest, where
  // roundoff could dominate a small gradient, are redone in quad precision.
  constexpr double kSettled = 1e-7;
  std::vector<double> theta = net.flatten();
  std::vector<Quad> theta_q(theta.begin(), theta.end());
  LstmNetwork probe = net;
  double worst = 0.0;
  for (std::size_t p = 0; p < theta.size(); ++p) {
    const double saved = theta[p];
    theta[p] = saved + eps;
    probe.assign(theta);
    const double up = squared_loss(net_predict(probe, sample.sequence), sample.target);
    theta[p] = saved - eps;
    probe.assign(theta);
    const double down = squared_loss(net_predict(probe, sample.sequence), sample.target);
    theta[p] = saved;
    double err = relative(analytic[p], (up - down) / (2.0 * eps));

    if (err > kSettled) {
      const Quad step = eps;
      const Quad saved_q = theta_q[p];
      theta_q[p] = saved_q + step;
      const Quad up_q = quad_squared_loss(net, theta_q, sample.sequence, sample.target);
      theta_q[p] = saved_q - step;
      const Quad down_q = quad_squared_loss(net, theta_q, sample.sequence, sample.target);
      theta_q[p] = saved_q;
      err = relative(analytic[p], static_cast<double>((up_q - down_q) / (2 * step)));
    }
    worst = std::max(worst, err);
  }
  return worst;
}

LstmNetwork init_params(std::span<const std::size_t> layer_widths, std::size_t n,
                        std::uint64_t seed, ActivationKind gate, ActivationKind head) {
  if (layer_widths.empty()) throw std::invalid_argument("init_params: no layer widths");
  if (n == 0) throw std::invalid_argument("init_params: n must be positive");
  for (auto w : layer_widths) {
    if (w == 0) throw std::invalid_argument("init_params: layer width must be positive");
  }

  Rng rng(seed);
  auto fill = [&rng](std::span<double> s, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : s) v = rng.uniform(-bound, bound);
  };

  LstmNetwork net;
  std::size_t in = n;
  for (auto width : layer_widths) {
    LstmLayerParams layer(in, width, gate);
    for (Matrix* m : {&layer.w_f, &layer.w_i, &layer.w_k, &layer.w_o, &layer.u_f, &layer.u_i,
                      &layer.u_k, &layer.u_o}) {
      fill(m->span(), in + width);
    }
    std::fill(layer.b_f.begin(), layer.b_f.end(), 1.0);
    net.layers.push_back(std::move(layer));
    in = width;
  }
  net.head_weights = Matrix(n, in);
  fill(net.head_weights.span(), in);
  net.head_bias = Vector(n);
  net.head_activation = head;
  return net;
}

GradCheckCase random_gradcheck_case(std::uint64_t seed, std::size_t layers, std::size_t hidden,
                                    std::size_t n, std::size_t steps) {
  if (layers == 0 || steps == 0) throw std::invalid_argument("gradcheck case needs layers and steps");
  const std::vector<std::size_t> widths(layers, hidden);
  GradCheckCase gc{init_params(widths, n, seed), {}};
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (auto& layer : gc.net.layers) {
    for (Vector* b : {&layer.b_f, &layer.b_i, &layer.b_k, &layer.b_o}) {
      for (double& v : *b) v = rng.uniform(-0.5, 0.5);
    }
  }
  for (double& v : gc.net.head_bias) v = rng.uniform(-0.5, 0.5);
  for (std::size_t t = 0; t < steps; ++t) {
    Vector x(n);
    for (double& v : x) v = rng.uniform01();
    gc.sample.sequence.push_back(std::move(x));
  }
  gc.sample.target = Vector(n);
  for (double& v : gc.sample.target) v = rng.uniform01();
  return gc;
}

}  // namespace dlstf
