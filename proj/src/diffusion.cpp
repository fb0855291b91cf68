#include "dpd/diffusion.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dpd {

namespace {

void check_t(std::size_t t, const NoiseSchedule& sched, const char* op) {
  if (t < 1 || t > sched.timesteps()) {
    std::ostringstream os;
    os << op << ": timestep " << t << " out of range [1," << sched.timesteps() << "]";
    throw std::invalid_argument(os.str());
  }
}

void check_dim(const LatentVector& a, const LatentVector& b, const char* op) {
  if (a.size() != b.size()) {
    std::ostringstream os;
    os << op << ": latent dimensions differ (" << a.size() << " vs " << b.size() << ")";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

double NoiseSchedule::alpha_bar_at(std::size_t t) const {
  if (t == 0) return 1.0;
  if (t > alpha_bar.size()) throw std::invalid_argument("alpha_bar_at: timestep out of range");
  return alpha_bar[t - 1];
}

NoiseSchedule build_schedule(std::size_t T, double beta_start, double beta_end) {
  if (T < 1) throw std::invalid_argument("build_schedule: T must be >= 1");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
    throw std::invalid_argument("build_schedule: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.beta.resize(T);
  s.alpha.resize(T);
  s.alpha_bar.resize(T);
  double running = 1.0;
  for (std::size_t i = 0; i < T; ++i) {
    double frac = T == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(T - 1);
    s.beta[i] = beta_start + (beta_end - beta_start) * frac;
    s.alpha[i] = 1.0 - s.beta[i];
    running *= s.alpha[i];
    s.alpha_bar[i] = running;
  }
  return s;
}

LatentVector forward_diffuse(const LatentVector& z0, std::size_t t, const LatentVector& eps,
                             const NoiseSchedule& sched) {
  check_t(t, sched, "forward_diffuse");
  check_dim(z0, eps, "forward_diffuse");
  double ab = sched.alpha_bar_at(t);
  double a = std::sqrt(ab);
  double b = std::sqrt(1.0 - ab);
  LatentVector out(z0.size());
  for (std::size_t i = 0; i < z0.size(); ++i) out[i] = a * z0[i] + b * eps[i];
  return out;
}

LatentVector estimate_clean(const LatentVector& zt, const LatentVector& eps_hat, std::size_t t,
                            const NoiseSchedule& sched) {
  check_t(t, sched, "estimate_clean");
  check_dim(zt, eps_hat, "estimate_clean");
  double ab = sched.alpha_bar_at(t);
  double a = std::sqrt(ab);
  double b = std::sqrt(1.0 - ab);
  LatentVector out(zt.size());
  for (std::size_t i = 0; i < zt.size(); ++i) out[i] = (zt[i] - b * eps_hat[i]) / a;
  return out;
}

LatentVector ddim_step(const LatentVector& zt, const LatentVector& eps_hat, std::size_t t,
                       std::size_t t_prev, const NoiseSchedule& sched) {
  check_t(t, sched, "ddim_step");
  if (t_prev > t) throw std::invalid_argument("ddim_step: t_prev must not exceed t");
  if (t_prev == t) return zt;
  LatentVector zhat0 = estimate_clean(zt, eps_hat, t, sched);
  double ab_prev = sched.alpha_bar_at(t_prev);
  double a = std::sqrt(ab_prev);
  double b = std::sqrt(1.0 - ab_prev);
  LatentVector out(zt.size());
  for (std::size_t i = 0; i < zt.size(); ++i) out[i] = a * zhat0[i] + b * eps_hat[i];
  return out;
}

std::vector<std::size_t> sampling_timesteps(std::size_t t_start, std::size_t num_steps) {
  if (num_steps < 1) throw std::invalid_argument("sampling_timesteps: num_steps must be >= 1");
  if (num_steps > t_start)
    throw std::invalid_argument("sampling_timesteps: num_steps must not exceed t_start");
  std::vector<std::size_t> ts(num_steps + 1);
  for (std::size_t i = 0; i <= num_steps; ++i) {
    double frac = static_cast<double>(num_steps - i) / static_cast<double>(num_steps);
    ts[i] = static_cast<std::size_t>(std::llround(static_cast<double>(t_start) * frac));
  }
  return ts;
}

LatentVector sample(const DenoiserFn& denoiser_fn, const LatentVector& z_init,
                    const SamplerConfig& cfg, const NoiseSchedule& sched, std::mt19937_64* rng) {
  if (cfg.eta != 0.0 && rng == nullptr)
    throw std::invalid_argument("sample: eta > 0 requires an rng");
  std::vector<std::size_t> ts = sampling_timesteps(cfg.t_start, cfg.num_steps);
  LatentVector z = z_init;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    std::size_t t = ts[i];
    std::size_t t_prev = ts[i + 1];
    LatentVector eps_hat = denoiser_fn(z, t);
    if (eps_hat.size() != z.size())
      throw std::invalid_argument("sample: denoiser output dimension mismatch");
    if (cfg.eta == 0.0) {
      z = ddim_step(z, eps_hat, t, t_prev, sched);
    } else {
      double ab_t = sched.alpha_bar_at(t);
      double ab_prev = sched.alpha_bar_at(t_prev);
      double sigma = cfg.eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab_t)) *
                     std::sqrt(1.0 - ab_t / ab_prev);
      LatentVector zhat0 = estimate_clean(z, eps_hat, t, sched);
      double a = std::sqrt(ab_prev);
      double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma));
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (std::size_t j = 0; j < z.size(); ++j)
        z[j] = a * zhat0[j] + dir * eps_hat[j] + sigma * gauss(*rng);
    }
  }
  return z;
}

}  // namespace dpd
