#pragma once

#include <vector>

#include "pgn/graph.hpp"

namespace pgn {

enum class Mode { Enhance, Adversarial };
enum class LossVariant { LeastSquares, CrossEntropy };

// Discriminator target bits: enhance sets g=1 where the perturbed image is
// classified correctly, adversarial where it is not.
std::vector<int> assign_targets(const std::vector<int>& predictions,
                                const std::vector<int>& labels, Mode mode);

// Differentiable loss builders over the discriminator outputs o (shape (N,1)
// or (N,)). `targets` enters as a constant.
//   least squares:  (1/2N) * sum[ g*(o-1)^2 + (1-g)*o^2 ]
//   cross entropy:  (1/2N) * sum[ -g*log(o) - (1-g)*log(1-o) ]
Var discriminator_loss(Graph& g, Var o, const std::vector<int>& targets, LossVariant variant);

// Generator adversarial term; drives every o toward 1 regardless of g.
//   least squares:  (1/2N) * sum (o-1)^2
//   cross entropy:  (1/N)  * sum -log(o)
Var generator_adversarial_term(Graph& g, Var o, LossVariant variant);

// L_r = (1/N) * sum_i ||M_i||_1 over a batch of perturbations.
Var l1_regularizer(Graph& g, Var m);

// L_g' = L_g + gamma * L_r.
Var generator_loss(Graph& g, Var o, Var m, float gamma, LossVariant variant);

// Value-level conveniences (evaluate the same builders on a throwaway tape).
double discriminator_loss_value(const std::vector<float>& o, const std::vector<int>& targets,
                                LossVariant variant);
double generator_adversarial_term_value(const std::vector<float>& o, LossVariant variant);
double l1_regularizer_value(const Tensor& m);

// Sigmoid outputs are clamped into this range before cross-entropy logs.
inline constexpr float kProbClampLo = 1e-6f;
inline constexpr float kProbClampHi = 1.0f - 1e-6f;

}  // namespace pgn
