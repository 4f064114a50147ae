#include "evtrojan/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "evtrojan/error.hpp"

namespace evtrojan::nn {

namespace {

double logistic(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

void fill_uniform(std::vector<double>& v, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& x : v) x = dist(rng);
}

}  // namespace

std::vector<double> Mlp::forward(std::span<const double> input, Trace* trace) const {
  if (static_cast<int>(input.size()) != input_dim())
    throw Error(Errc::shape_mismatch, "mlp input has " + std::to_string(input.size()) +
                                          " values, expected " + std::to_string(input_dim()));
  std::vector<double> x(input.begin(), input.end());
  if (trace) {
    trace->values.clear();
    trace->values.push_back(x);
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Dense& layer = layers[l];
    const bool last = l + 1 == layers.size();
    std::vector<double> y(layer.bias);
    for (int o = 0; o < layer.out; ++o) {
      const double* row = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
      double acc = 0.0;
      for (int i = 0; i < layer.in; ++i) acc += row[i] * x[i];
      y[o] += acc;
    }
    if (!last) {
      for (double& v : y) v = std::max(0.0, v);
    } else if (activation == OutputActivation::logistic) {
      for (double& v : y) v = logistic(v);
    }
    x = std::move(y);
    if (trace) trace->values.push_back(x);
  }
  return x;
}

std::vector<double> Mlp::backward(const Trace& trace, std::span<const double> d_output,
                                  Mlp& grad) const {
  std::vector<double> delta(d_output.begin(), d_output.end());
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Dense& layer = layers[l];
    const std::vector<double>& out = trace.values[l + 1];
    const std::vector<double>& in = trace.values[l];
    const bool last = l + 1 == layers.size();
    // delta: d loss / d post-activation -> d loss / d pre-activation
    for (int o = 0; o < layer.out; ++o) {
      if (!last) {
        if (out[o] <= 0.0) delta[o] = 0.0;
      } else if (activation == OutputActivation::logistic) {
        delta[o] *= out[o] * (1.0 - out[o]);
      }
    }
    Dense& g = grad.layers[l];
    std::vector<double> d_in(static_cast<std::size_t>(layer.in), 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      g.bias[o] += d;
      if (d == 0.0) continue;
      const std::size_t row = static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) {
        g.weight[row + i] += d * in[i];
        d_in[i] += d * layer.weight[row + i];
      }
    }
    delta = std::move(d_in);
  }
  return delta;
}

std::vector<std::span<double>> Mlp::tensors() {
  std::vector<std::span<double>> out;
  for (Dense& l : layers) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  }
  return out;
}

std::vector<std::span<const double>> Mlp::tensors() const {
  std::vector<std::span<const double>> out;
  for (const Dense& l : layers) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  }
  return out;
}

Mlp make_mlp(std::span<const int> widths, OutputActivation activation, std::uint64_t seed) {
  if (widths.size() < 2) throw Error(Errc::config_invalid, "mlp needs at least two widths");
  for (int w : widths)
    if (w < 1) throw Error(Errc::config_invalid, "mlp widths must be >= 1");
  std::mt19937_64 rng(seed);
  Mlp net;
  net.activation = activation;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Dense layer(widths[l], widths[l + 1]);
    const bool last = l + 2 == widths.size();
    const double limit = last ? std::sqrt(6.0 / (widths[l] + widths[l + 1]))
                              : std::sqrt(6.0 / widths[l]);
    fill_uniform(layer.weight, limit, rng);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Mlp zeros_like(const Mlp& net) {
  Mlp out;
  out.activation = net.activation;
  for (const Dense& l : net.layers) out.layers.emplace_back(l.in, l.out);
  return out;
}

std::vector<std::span<double>> ModelParams::tensors() {
  std::vector<std::span<double>> out{std::span<double>(omega_scale), std::span<double>(omega_shift)};
  for (auto t : net.tensors()) out.push_back(t);
  return out;
}

std::vector<std::span<const double>> ModelParams::tensors() const {
  std::vector<std::span<const double>> out{std::span<const double>(omega_scale),
                                           std::span<const double>(omega_shift)};
  for (auto t : net.tensors()) out.push_back(t);
  return out;
}

ModelParams init_model(const ClassifierShape& shape, std::uint64_t seed) {
  if (shape.channels < 1 || shape.pooled_height < 1 || shape.pooled_width < 1 ||
      shape.hidden < 1 || shape.classes < 2)
    throw Error(Errc::config_invalid, "invalid classifier shape");
  ModelParams p;
  p.shape = shape;
  p.omega_scale.assign(static_cast<std::size_t>(shape.channels), 1.0);
  p.omega_shift.assign(static_cast<std::size_t>(shape.channels), 0.0);
  const int widths[] = {shape.features(), shape.hidden, shape.classes};
  p.net = make_mlp(widths, OutputActivation::identity, seed);
  return p;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams g;
  g.shape = params.shape;
  g.omega_scale.assign(params.omega_scale.size(), 0.0);
  g.omega_shift.assign(params.omega_shift.size(), 0.0);
  g.net = zeros_like(params.net);
  return g;
}

std::vector<double> average_pool(const RepresentationTensor& rep, int ph, int pw) {
  std::vector<double> out(static_cast<std::size_t>(rep.channels) * ph * pw, 0.0);
  for (int c = 0; c < rep.channels; ++c) {
    for (int i = 0; i < ph; ++i) {
      const int y0 = i * rep.height / ph;
      const int y1 = ((i + 1) * rep.height + ph - 1) / ph;
      for (int j = 0; j < pw; ++j) {
        const int x0 = j * rep.width / pw;
        const int x1 = ((j + 1) * rep.width + pw - 1) / pw;
        double acc = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) acc += rep.at(c, y, x);
        out[(static_cast<std::size_t>(c) * ph + i) * pw + j] = acc / ((y1 - y0) * (x1 - x0));
      }
    }
  }
  return out;
}

namespace {

std::vector<double> pooled_input(const ModelParams& params, const RepresentationTensor& rep) {
  if (rep.channels != params.shape.channels || rep.height < 1 || rep.width < 1)
    throw Error(Errc::shape_mismatch, "representation has " + std::to_string(rep.channels) +
                                          " channels, model expects " +
                                          std::to_string(params.shape.channels));
  std::vector<double> x = average_pool(rep, params.shape.pooled_height, params.shape.pooled_width);
  if (!params.input_scale.empty()) {
    if (params.input_scale.size() != x.size() || params.input_mean.size() != x.size())
      throw Error(Errc::shape_mismatch, "input standardization does not match the feature count");
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = (x[i] - params.input_mean[i]) * params.input_scale[i];
    for (double& v : x) v = std::clamp(v, -params.input_clip, params.input_clip);
  }
  return x;
}

std::vector<double> apply_omega(const ModelParams& params, std::vector<double> x) {
  const std::size_t cell = static_cast<std::size_t>(params.shape.pooled_height) *
                           params.shape.pooled_width;
  for (int c = 0; c < params.shape.channels; ++c)
    for (std::size_t k = 0; k < cell; ++k) {
      double& v = x[c * cell + k];
      v = params.omega_scale[c] * v + params.omega_shift[c];
    }
  return x;
}

}  // namespace

std::vector<double> forward(const ModelParams& params, const RepresentationTensor& rep) {
  return params.net.forward(apply_omega(params, pooled_input(params, rep)));
}

std::vector<double> softmax(std::span<const double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) sum += p[k] = std::exp(logits[k] - peak);
  for (double& v : p) v /= sum;
  return p;
}

LossGrad ce_loss_backward(const ModelParams& params, const RepresentationTensor& rep, int label) {
  if (label < 0 || label >= params.shape.classes)
    throw Error(Errc::shape_mismatch, "label " + std::to_string(label) + " out of range");
  const std::vector<double> pooled = pooled_input(params, rep);
  Mlp::Trace trace;
  const std::vector<double> logits = params.net.forward(apply_omega(params, pooled), &trace);

  const double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - peak);
  LossGrad out;
  out.loss = peak + std::log(sum) - logits[static_cast<std::size_t>(label)];

  std::vector<double> d_logits = softmax(logits);
  d_logits[static_cast<std::size_t>(label)] -= 1.0;

  out.grad = zeros_like(params);
  const std::vector<double> d_in = params.net.backward(trace, d_logits, out.grad.net);
  const std::size_t cell = static_cast<std::size_t>(params.shape.pooled_height) *
                           params.shape.pooled_width;
  for (int c = 0; c < params.shape.channels; ++c) {
    double ds = 0.0, db = 0.0;
    for (std::size_t k = 0; k < cell; ++k) {
      ds += d_in[c * cell + k] * pooled[c * cell + k];
      db += d_in[c * cell + k];
    }
    out.grad.omega_scale[c] = ds;
    out.grad.omega_shift[c] = db;
  }
  return out;
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  return best;
}

void sgd_step(std::span<const std::span<double>> params,
              std::span<const std::span<const double>> grads, OptimState& state) {
  if (params.size() != grads.size())
    throw Error(Errc::shape_mismatch, "parameter and gradient tensor counts differ");
  if (state.velocity.empty()) {
    for (const auto& p : params) state.velocity.emplace_back(p.size(), 0.0);
  }
  if (state.velocity.size() != params.size())
    throw Error(Errc::shape_mismatch, "momentum buffers do not match parameters");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != grads[t].size() || params[t].size() != state.velocity[t].size())
      throw Error(Errc::shape_mismatch, "tensor " + std::to_string(t) + " size mismatch");
    std::vector<double>& v = state.velocity[t];
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = state.momentum * v[i] + grads[t][i];
      params[t][i] -= state.lr * v[i];
    }
  }
}

void sgd_step(ModelParams& params, const ModelParams& grads, OptimState& state) {
  const auto p = params.tensors();
  const auto g = grads.tensors();
  sgd_step(p, g, state);
}

void sgd_step(Mlp& params, const Mlp& grads, OptimState& state) {
  const auto p = params.tensors();
  const auto g = grads.tensors();
  sgd_step(p, g, state);
}

double lr_schedule(int epoch, double lr0, double gamma) {
  return lr0 * std::pow(gamma, epoch);
}

double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> point, std::span<const double> analytic, double eps,
                  std::size_t max_coords, std::uint64_t seed) {
  if (point.size() != analytic.size())
    throw Error(Errc::length_mismatch, "gradient and point sizes differ");
  std::vector<std::size_t> coords(point.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (max_coords > 0 && max_coords < coords.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
  }
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i : coords) {
    const double saved = x[i];
    // Divide by the steps actually taken, not the nominal ones.
    x[i] = saved + eps;
    const double hi = x[i];
    const double up = f(x);
    x[i] = saved - eps;
    const double lo = x[i];
    const double down = f(x);
    x[i] = saved;
    const double numeric = (up - down) / (hi - lo);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-7});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

std::vector<double> flatten(std::span<const std::span<const double>> tensors) {
  std::vector<double> out;
  for (const auto& t : tensors) out.insert(out.end(), t.begin(), t.end());
  return out;
}

void unflatten(std::span<const double> flat, std::span<const std::span<double>> tensors) {
  std::size_t off = 0;
  for (const auto& t : tensors) {
    if (off + t.size() > flat.size()) throw Error(Errc::length_mismatch, "flat vector too short");
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), t.size(), t.begin());
    off += t.size();
  }
  if (off != flat.size()) throw Error(Errc::length_mismatch, "flat vector too long");
}

}  // namespace evtrojan::nn
