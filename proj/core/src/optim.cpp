#include "pgn/optim.hpp"

#include <cmath>

#include "pgn/errors.hpp"

namespace pgn {

void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg) {
  if (cfg.lr <= 0.0f) throw ConfigError("diffcore", "adam learning rate must be positive");
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    p->step_count += 1;
    const double t = static_cast<double>(p->step_count);
    const float m_corr = static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(cfg.beta1), t)));
    const float v_corr = static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(cfg.beta2), t)));
    float* w = p->value.data();
    float* g = p->grad.data();
    float* m = p->adam_m.data();
    float* v = p->adam_v.data();
    const std::int64_t n = p->value.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0f - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0f - cfg.beta2) * g[i] * g[i];
      const float m_hat = m[i] * m_corr;
      const float v_hat = v[i] * v_corr;
      w[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
      g[i] = 0.0f;
    }
  }
}

void zero_grad(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

void he_uniform_init(Tensor& w, int fan_in, Rng& rng) {
  const float limit = std::sqrt(6.0f / static_cast<float>(fan_in));
  for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-limit, limit);
}

}  // namespace pgn
