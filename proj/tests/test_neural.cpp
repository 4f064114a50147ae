#include <cmath>
#include <random>

#include "doctest.h"
#include "evtrojan/error.hpp"
#include "evtrojan/neural.hpp"
#include "oracles.hpp"

using namespace evtrojan;

namespace {

RepresentationTensor random_rep(std::mt19937_64& rng, int c, int h, int w) {
  RepresentationTensor r(c, h, w, Method::est);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& v : r.data) v = n(rng);
  return r;
}

nn::ModelParams random_model(std::mt19937_64& rng, const nn::ClassifierShape& shape) {
  nn::ModelParams p = nn::init_model(shape, rng());
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto t : p.tensors())
    for (double& v : t) v += n(rng);
  return p;
}

}  // namespace

TEST_CASE("forward examples") {
  const nn::ClassifierShape shape{2, 4, 4, 16, 3};
  nn::ModelParams zero = nn::zeros_like(nn::init_model(shape, 1));
  std::mt19937_64 rng(1);
  const auto rep = random_rep(rng, 2, 12, 12);
  const auto logits = nn::forward(zero, rep);
  CHECK(logits == std::vector<double>(3, 0.0));

  const nn::ModelParams p = nn::init_model(shape, 2);
  CHECK(p.omega_scale == std::vector<double>(2, 1.0));
  CHECK(p.omega_shift == std::vector<double>(2, 0.0));
  const auto pooled = nn::average_pool(rep, 4, 4);
  CHECK(nn::forward(p, rep) == p.net.forward(pooled));

  RepresentationTensor wrong(3, 12, 12, Method::est);
  CHECK_THROWS_AS(nn::forward(p, wrong), Error);
}

TEST_CASE("forward matches the layer-by-layer oracle") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const nn::ClassifierShape shape{1 + static_cast<int>(rng() % 4), 8, 8, 32, 4};
    nn::ModelParams p = random_model(rng, shape);
    const auto r = random_rep(rng, shape.channels, 20 + static_cast<int>(rng() % 20), 32);
    if (rep % 2) {
      p.input_mean.resize(static_cast<std::size_t>(shape.features()));
      p.input_scale.resize(p.input_mean.size());
      for (double& v : p.input_mean) v = std::normal_distribution<double>(0, 0.2)(rng);
      for (double& v : p.input_scale) v = std::uniform_real_distribution<double>(0.5, 20)(rng);
      p.input_clip = 3.0;
    }
    const auto got = nn::forward(p, r);
    const auto want = oracle::classifier_forward(p, r);
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(std::abs(got[k] - want[k]) <= 1e-12);
    CHECK(nn::forward(p, r) == got);
  }
}

TEST_CASE("adaptive pooling with uneven cells") {
  RepresentationTensor r(1, 3, 3, Method::ef);
  for (int i = 0; i < 9; ++i) r.data[static_cast<std::size_t>(i)] = i;
  const auto p = nn::average_pool(r, 2, 2);
  // Rows/cols {0,1} and {1,2} overlap at the middle.
  CHECK(p[0] == doctest::Approx((0 + 1 + 3 + 4) / 4.0));
  CHECK(p[3] == doctest::Approx((4 + 5 + 7 + 8) / 4.0));
}

TEST_CASE("softmax and cross-entropy examples") {
  const auto s = nn::softmax(std::vector<double>{1.0, -2.0, 0.5, 3.0});
  CHECK(std::abs(std::accumulate(s.begin(), s.end(), 0.0) - 1.0) <= 1e-12);

  const nn::ClassifierShape shape{1, 2, 2, 4, 5};
  nn::ModelParams zero = nn::zeros_like(nn::init_model(shape, 1));
  RepresentationTensor r(1, 4, 4, Method::ef);
  CHECK(nn::ce_loss_backward(zero, r, 2).loss == doctest::Approx(std::log(5.0)).epsilon(1e-15));

  // Saturated logits: 50 vs 0.
  zero.net.layers.back().bias = {50.0, 0.0, 0.0, 0.0, 0.0};
  CHECK(nn::ce_loss_backward(zero, r, 0).loss < 1e-15);
  CHECK_THROWS_AS(nn::ce_loss_backward(zero, r, 5), Error);
  CHECK(nn::argmax(std::vector<double>{1.0, 3.0, 3.0}) == 1);
}

TEST_CASE("cross-entropy gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const nn::ClassifierShape shape{2, 4, 4, 12, 3};
    nn::ModelParams p = random_model(rng, shape);
    const auto r = random_rep(rng, 2, 8, 8);
    const int label = static_cast<int>(rng() % 3);
    const nn::LossGrad lg = nn::ce_loss_backward(p, r, label);
    const auto point = nn::flatten(std::as_const(p).tensors());
    const auto analytic = nn::flatten(std::as_const(lg.grad).tensors());
    const double err = nn::grad_check(
        [&](std::span<const double> x) {
          nn::ModelParams q = p;
          nn::unflatten(x, q.tensors());
          return nn::ce_loss_backward(q, r, label).loss;
        },
        point, analytic, 1e-6);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("grad_check on a quadratic bowl") {
  const std::vector<double> p{0.3, -0.2, 0.125, 0.0};
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = 2 * p[i];
  const double err = nn::grad_check(
      [](std::span<const double> x) {
        double s = 0;
        for (double v : x) s += v * v;
        return s;
      },
      p, g);
  CHECK(err < 1e-10);
}

TEST_CASE("sgd with momentum") {
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> zero{0.0, 0.0};
  std::vector<std::span<double>> ps{p};
  std::vector<std::span<const double>> gz{zero};
  nn::OptimState opt{0.1, 0.9, {}};
  nn::sgd_step(ps, gz, opt);
  CHECK(p == std::vector<double>{1.0, -2.0});

  const std::vector<double> g{0.5, -1.0};
  std::vector<std::span<const double>> gs{g};
  std::vector<double> q{1.0, -2.0};
  std::vector<std::span<double>> qs{q};
  nn::OptimState fresh{0.1, 0.9, {}};
  nn::sgd_step(qs, gs, fresh);
  CHECK(q[0] == doctest::Approx(1.0 - 0.1 * 0.5).epsilon(1e-15));
  CHECK(q[1] == doctest::Approx(-2.0 + 0.1 * 1.0).epsilon(1e-15));
  nn::sgd_step(qs, gs, fresh);
  CHECK(q[0] == doctest::Approx(1.0 - 0.1 * 0.5 - 0.1 * 1.9 * 0.5).epsilon(1e-15));
  CHECK(q[1] == doctest::Approx(-2.0 + 0.1 * 1.0 + 0.1 * 1.9 * 1.0).epsilon(1e-15));

  std::vector<double> short_g{1.0};
  std::vector<std::span<const double>> bad{short_g};
  CHECK_THROWS_AS(nn::sgd_step(qs, bad, fresh), Error);
}

TEST_CASE("lr schedule") {
  CHECK(nn::lr_schedule(0, 1e-4) == 1e-4);
  CHECK(nn::lr_schedule(1, 1e-4) == 5e-5);
  CHECK(nn::lr_schedule(3, 1e-4) == doctest::Approx(1.25e-5).epsilon(1e-15));
  CHECK(nn::lr_schedule(10, 1.0) == 1.0 / 1024.0);
}

TEST_CASE("init is seeded") {
  const nn::ClassifierShape shape{2, 8, 8, 128, 4};
  const auto a = nn::init_model(shape, 3), b = nn::init_model(shape, 3), c = nn::init_model(shape, 4);
  CHECK(nn::flatten(a.tensors()) == nn::flatten(b.tensors()));
  CHECK(nn::flatten(a.tensors()) != nn::flatten(c.tensors()));
}
