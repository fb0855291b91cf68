#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dpd/diffusion.hpp"
#include "dpd/rng.hpp"

using dpd::LatentVector;
using dpd::NoiseSchedule;

TEST_CASE("linear schedule hand values at T=2") {
  NoiseSchedule s = dpd::build_schedule(2, 0.1, 0.2);
  CHECK(s.beta[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(s.beta[1] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(s.alpha[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(s.alpha[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(s.alpha_bar[0] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(s.alpha_bar[1] == doctest::Approx(0.72).epsilon(1e-12));
  CHECK(s.alpha_bar_at(0) == 1.0);
}

TEST_CASE("schedule validates its inputs") {
  CHECK_THROWS_AS(dpd::build_schedule(0, 1e-4, 0.02), std::invalid_argument);
  CHECK_THROWS_AS(dpd::build_schedule(10, 0.0, 0.02), std::invalid_argument);
  CHECK_THROWS_AS(dpd::build_schedule(10, 0.02, 1e-4), std::invalid_argument);
  CHECK_THROWS_AS(dpd::build_schedule(10, 1e-4, 1.0), std::invalid_argument);
}

TEST_CASE("forward diffusion then clean estimation round-trips") {
  NoiseSchedule sched = dpd::build_schedule(200, 1e-4, 0.02);
  auto rng = dpd::make_rng(3, "roundtrip");
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> tdist(1, 200);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t d = 1 + trial % 8;
    LatentVector z0(d), eps(d);
    for (std::size_t i = 0; i < d; ++i) z0[i] = g(rng), eps[i] = g(rng);
    std::size_t t = tdist(rng);
    LatentVector zt = dpd::forward_diffuse(z0, t, eps, sched);
    LatentVector back = dpd::estimate_clean(zt, eps, t, sched);
    for (std::size_t i = 0; i < d; ++i) worst = std::max(worst, std::abs(back[i] - z0[i]));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("forward diffusion interpolates between signal and noise") {
  NoiseSchedule sched = dpd::build_schedule(200, 1e-4, 0.02);
  LatentVector z0{1.0}, eps{-2.0};
  LatentVector z1 = dpd::forward_diffuse(z0, 1, eps, sched);
  double ab = sched.alpha_bar_at(1);
  CHECK(z1[0] == doctest::Approx(std::sqrt(ab) * 1.0 + std::sqrt(1 - ab) * -2.0).epsilon(1e-14));
  CHECK_THROWS_AS(dpd::forward_diffuse(z0, 0, eps, sched), std::invalid_argument);
  CHECK_THROWS_AS(dpd::forward_diffuse(z0, 201, eps, sched), std::invalid_argument);
}

TEST_CASE("sampling timesteps are decreasing from t_start to zero") {
  auto ts = dpd::sampling_timesteps(200, 50);
  CHECK(ts.front() == 200);
  CHECK(ts.back() == 0);
  for (std::size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
  CHECK(ts.size() == 51);

  auto full = dpd::sampling_timesteps(5, 5);
  CHECK(full == std::vector<std::size_t>{5, 4, 3, 2, 1, 0});
  CHECK_THROWS_AS(dpd::sampling_timesteps(5, 6), std::invalid_argument);
}

TEST_CASE("zero denoiser gives the closed-form ddim trajectory") {
  // With eps_hat = 0 every step rescales by sqrt(abar_prev/abar_t), so the
  // whole chain collapses to z / sqrt(abar_{t_start}).
  NoiseSchedule sched = dpd::build_schedule(100, 1e-4, 0.02);
  LatentVector z{0.3, -1.7, 2.2};
  dpd::SamplerConfig cfg;
  cfg.t_start = 60;
  cfg.num_steps = 13;
  LatentVector out = dpd::sample(
      [](const LatentVector& zt, std::size_t) { return LatentVector(zt.size(), 0.0); }, z, cfg,
      sched);
  double scale = 1.0 / std::sqrt(sched.alpha_bar_at(60));
  for (std::size_t i = 0; i < z.size(); ++i)
    CHECK(out[i] == doctest::Approx(z[i] * scale).epsilon(1e-12));
}

TEST_CASE("ddim with the analytic gaussian denoiser transports the marginal") {
  // 1-D data z0 ~ N(mu, sigma^2). The posterior-mean noise predictor is
  // available in closed form, so deterministic sampling from the exact
  // t=T marginal must land near the data distribution.
  const double mu = 1.2, sigma = 0.7;
  const std::size_t T = 200;
  NoiseSchedule sched = dpd::build_schedule(T, 1e-4, 0.02);
  auto denoiser = [&](const LatentVector& zt, std::size_t t) {
    double ab = sched.alpha_bar_at(t);
    double var_t = ab * sigma * sigma + (1.0 - ab);
    double e_z0 = mu + (std::sqrt(ab) * sigma * sigma / var_t) * (zt[0] - std::sqrt(ab) * mu);
    double e_eps = (zt[0] - std::sqrt(ab) * e_z0) / std::sqrt(1.0 - ab);
    return LatentVector{e_eps};
  };

  auto rng = dpd::make_rng(17, "gauss-oracle");
  std::normal_distribution<double> g(0.0, 1.0);
  dpd::SamplerConfig cfg;
  cfg.t_start = T;
  cfg.num_steps = T;
  const int n = 4000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double z0 = mu + sigma * g(rng);
    LatentVector zt = dpd::forward_diffuse({z0}, T, {g(rng)}, sched);
    double out = dpd::sample(denoiser, zt, cfg, sched)[0];
    sum += out;
    sum2 += out * out;
  }
  double mean = sum / n;
  double std = std::sqrt(sum2 / n - mean * mean);
  CHECK(mean == doctest::Approx(mu).epsilon(0.05));
  CHECK(std == doctest::Approx(sigma).epsilon(0.08));
}

TEST_CASE("stochastic sampling requires an rng") {
  NoiseSchedule sched = dpd::build_schedule(10, 1e-4, 0.02);
  dpd::SamplerConfig cfg;
  cfg.t_start = 10;
  cfg.num_steps = 5;
  cfg.eta = 0.5;
  auto zero = [](const LatentVector& zt, std::size_t) { return LatentVector(zt.size(), 0.0); };
  CHECK_THROWS_AS(dpd::sample(zero, {1.0}, cfg, sched, nullptr), std::invalid_argument);
  auto rng = dpd::make_rng(1, "eta");
  CHECK_NOTHROW(dpd::sample(zero, {1.0}, cfg, sched, &rng));
}
