#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace dpd {

using LatentVector = std::vector<double>;

// Precomputed beta/alpha/alpha_bar tables. Timesteps are 1-based; index t-1
// into the arrays. alpha_bar_at(0) == 1 by convention so the final sampling
// step decodes to the clean estimate exactly.
struct NoiseSchedule {
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  std::size_t timesteps() const { return beta.size(); }
  double alpha_bar_at(std::size_t t) const;
};

NoiseSchedule build_schedule(std::size_t T, double beta_start, double beta_end);

struct SamplerConfig {
  std::size_t num_steps = 50;
  std::size_t t_start = 0;
  double eta = 0.0;  // 0 => deterministic DDIM
};

// z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps. Caller owns the
// randomness behind eps.
LatentVector forward_diffuse(const LatentVector& z0, std::size_t t, const LatentVector& eps,
                             const NoiseSchedule& sched);

// zhat0 = (z_t - sqrt(1 - alpha_bar_t) eps_hat) / sqrt(alpha_bar_t)
LatentVector estimate_clean(const LatentVector& zt, const LatentVector& eps_hat, std::size_t t,
                            const NoiseSchedule& sched);

// Deterministic DDIM update from level t down to t_prev (t_prev < t; t_prev
// may be 0, meaning fully denoised).
LatentVector ddim_step(const LatentVector& zt, const LatentVector& eps_hat, std::size_t t,
                       std::size_t t_prev, const NoiseSchedule& sched);

using DenoiserFn = std::function<LatentVector(const LatentVector& zt, std::size_t t)>;

// Uniformly spaced decreasing timestep subsequence from t_start down to 0,
// num_steps steps. Includes t_start and terminates at the alpha_bar=1 point.
std::vector<std::size_t> sampling_timesteps(std::size_t t_start, std::size_t num_steps);

// Runs ddim_step along the subsequence; z_init must already be noised to
// level t_start. The text embedding is baked into denoiser_fn by the caller.
// eta > 0 draws the stochastic component from *rng (required in that case).
LatentVector sample(const DenoiserFn& denoiser_fn, const LatentVector& z_init,
                    const SamplerConfig& cfg, const NoiseSchedule& sched,
                    std::mt19937_64* rng = nullptr);

}  // namespace dpd
