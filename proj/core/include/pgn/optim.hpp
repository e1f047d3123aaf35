#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgn/rng.hpp"
#include "pgn/tensor.hpp"

namespace pgn {

// A trainable tensor plus its gradient accumulator and Adam state. Gradients
// are filled by Graph::backward and consumed (then cleared) by adam_step.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  std::int64_t step_count = 0;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Tensor::zeros(value.shape())),
        adam_m(Tensor::zeros(value.shape())),
        adam_v(Tensor::zeros(value.shape())),
        step_count(0) {}

  void zero_grad() {
    for (std::int64_t i = 0; i < grad.numel(); ++i) grad[i] = 0.0f;
  }
};

struct AdamConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Bias-corrected Adam update over a parameter set. Frozen parameters are left
// untouched. Gradients are cleared after being applied.
void adam_step(const std::vector<Parameter*>& params, const AdamConfig& cfg);

void zero_grad(const std::vector<Parameter*>& params);

// He-uniform fill: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
void he_uniform_init(Tensor& w, int fan_in, Rng& rng);

}  // namespace pgn
