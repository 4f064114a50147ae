#include <random>

#include "doctest.h"
#include "evtrojan/error.hpp"
#include "evtrojan/evaluation.hpp"
#include "oracles.hpp"

using namespace evtrojan;

namespace {

// Zero weights: logits equal the final bias.
nn::ModelParams constant_model(std::vector<double> logits) {
  const nn::ClassifierShape shape{1, 2, 2, 4, static_cast<int>(logits.size())};
  nn::ModelParams p = nn::zeros_like(nn::init_model(shape, 0));
  p.net.layers.back().bias = std::move(logits);
  return p;
}

std::vector<LabeledStream> labeled(const std::vector<int>& labels) {
  std::vector<LabeledStream> out;
  for (int l : labels) {
    LabeledStream s;
    s.stream.geometry = {8, 8};
    s.stream.events = {{1, 1, 0.5, 1.0}};
    s.label = l;
    out.push_back(s);
  }
  return out;
}

RepresentationTensor random_rep(std::mt19937_64& rng, int c, int h, int w) {
  RepresentationTensor r(c, h, w, Method::est);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (double& v : r.data) v = u(rng);
  return r;
}

ReprConfig ef() {
  ReprConfig c;
  c.method = Method::ef;
  return c;
}

}  // namespace

TEST_CASE("cda") {
  const auto ties = constant_model({0.0, 0.0, 0.0});
  CHECK(cda(ties, ef(), labeled({0, 0, 0})).rate == 1.0);
  CHECK(cda(ties, ef(), labeled({1, 2, 1})).rate == 0.0);
  const RateResult r = cda(ties, ef(), labeled({0, 1, 0, 2}));
  CHECK(r.hits == 2);
  CHECK(r.total == 4);
  CHECK_THROWS_AS(cda(ties, ef(), labeled({})), Error);
}

TEST_CASE("cda agrees with per-sample argmax") {
  std::mt19937_64 rng(1);
  DatasetRecipe recipe;
  recipe.samples = 20;
  const auto data = make_dataset(recipe);
  const ReprConfig repr;
  nn::ModelParams m = nn::init_model({8, 8, 8, 16, 4}, 3);
  std::size_t hits = 0;
  for (const auto& s : data) {
    const auto z = oracle::classifier_forward(m, represent(s.stream, repr));
    hits += static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin()) == s.label;
  }
  const RateResult r = cda(m, repr, data);
  CHECK(r.hits == hits);
  CHECK(r.rate == static_cast<double>(hits) / 20.0);
}

TEST_CASE("asr") {
  const auto always2 = constant_model({0.0, 0.0, 1.0});
  const auto never2 = constant_model({1.0, 0.0, 0.0});
  CHECK(asr(always2, ef(), labeled({0, 1, 0}), 2).rate == 1.0);
  CHECK(asr(never2, ef(), labeled({0, 1, 0}), 2).rate == 0.0);

  // Samples already in the target class are excluded.
  const RateResult r = asr(always2, ef(), labeled({2, 0, 2, 1}), 2);
  CHECK(r.total == 2);
  CHECK(r.hits == 2);
  try {
    asr(always2, ef(), labeled({2, 2}), 2);
    FAIL("expected AllSamplesTargetClass");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::all_samples_target_class);
  }
  CHECK_THROWS_AS(asr(always2, ef(), labeled({}), 2), Error);
}

TEST_CASE("psnr") {
  std::mt19937_64 rng(2);
  const auto a = random_rep(rng, 2, 12, 12);
  CHECK(psnr(a, a) == kPsnrIdentical);

  // Range [0, 255] pinned by two fixed pixels; everything else differs by one level.
  RepresentationTensor x(1, 12, 12, Method::ef), y(1, 12, 12, Method::ef);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    x.data[i] = 100.0;
    y.data[i] = 101.0;
  }
  x.data[0] = y.data[0] = 0.0;
  x.data[1] = y.data[1] = 255.0;
  const double mse = (x.data.size() - 2.0) / x.data.size();
  CHECK(psnr(x, y) == doctest::Approx(10 * std::log10(255.0 * 255.0 / mse)).epsilon(1e-12));

  for (int rep = 0; rep < 10; ++rep) {
    const auto p = random_rep(rng, 3, 16, 16), q = random_rep(rng, 3, 16, 16);
    CHECK(std::abs(psnr(p, q) - oracle::psnr(p, q)) <= 1e-9);
    CHECK(psnr(p, q) == psnr(q, p));
  }
  CHECK_THROWS_AS(psnr(a, random_rep(rng, 1, 12, 12)), Error);
}

TEST_CASE("ssim") {
  std::mt19937_64 rng(3);
  const auto a = random_rep(rng, 2, 16, 16);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  RepresentationTensor neg = a;
  for (double& v : neg.data) v = -v;
  CHECK(ssim(a, neg) <= 0.0);

  for (int rep = 0; rep < 10; ++rep) {
    const auto p = random_rep(rng, 2, 11 + static_cast<int>(rng() % 10), 11 + static_cast<int>(rng() % 10));
    RepresentationTensor q = p;
    for (double& v : q.data) v += std::normal_distribution<double>(0, 0.3)(rng);
    CHECK(std::abs(ssim(p, q) - oracle::ssim(p, q)) <= 1e-9);
    CHECK(std::abs(ssim(p, q) - ssim(q, p)) <= 1e-12);
  }
  RepresentationTensor small(1, 10, 12, Method::ef);
  try {
    ssim(small, small);
    FAIL("expected ImageTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::image_too_small);
  }
}

TEST_CASE("stc filter examples") {
  EventStream one;
  one.geometry = {8, 8};
  one.events = {{3, 3, 0.5, 1.0}};
  CHECK(stc_filter(one).empty());

  EventStream pair = one;
  pair.events.push_back({3, 3, 0.5, -1.0});
  CHECK(stc_filter(pair).size() == 2);

  EventStream apart = one;
  apart.events = {{3, 3, 0.5, 1.0}, {5, 3, 0.5, 1.0}, {4, 4, 0.56, 1.0}};
  CHECK(stc_filter(apart).empty());

  EventStream empty;
  CHECK(stc_filter(empty).empty());

  StcConfig bad;
  bad.radius = 0;
  CHECK_THROWS_AS(stc_filter(one, bad), Error);
}

TEST_CASE("stc filter matches the pairwise oracle") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 30; ++rep) {
    EventStream s = oracle::random_stream(rng, 400, 12, 12);
    StcConfig cfg;
    cfg.radius = 1 + static_cast<int>(rng() % 2);
    cfg.window = rep % 3 == 0 ? 0.05 : 0.01 * (1 + rng() % 10);
    CHECK(stc_filter(s, cfg).events == oracle::stc(s, cfg.radius, cfg.window));
  }
}

TEST_CASE("immutable trigger survives stc untouched") {
  const EventStream t = make_immutable_trigger(TriggerSpec{}, {32, 32});
  CHECK(stc_filter(t).events == t.events);
}
