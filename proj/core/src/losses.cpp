#include "pgn/losses.hpp"

#include "pgn/errors.hpp"

namespace pgn {

namespace {

constexpr const char* kModule = "pgn-train";

void check_probs(const Tensor& o) {
  for (std::int64_t i = 0; i < o.numel(); ++i) {
    if (!(o[i] > 0.0f && o[i] < 1.0f)) {
      throw DomainError(kModule, "discriminator output " + std::to_string(o[i]) +
                                     " outside (0,1) at index " + std::to_string(i));
    }
  }
}

Tensor target_tensor(const std::vector<int>& targets, const std::vector<int>& shape) {
  Tensor t(shape);
  for (std::size_t i = 0; i < targets.size(); ++i) t[static_cast<std::int64_t>(i)] = static_cast<float>(targets[i]);
  return t;
}

}  // namespace

std::vector<int> assign_targets(const std::vector<int>& predictions,
                                const std::vector<int>& labels, Mode mode) {
  if (predictions.size() != labels.size()) {
    throw ContractError(kModule, "assign_targets length mismatch: " +
                                     std::to_string(predictions.size()) + " predictions vs " +
                                     std::to_string(labels.size()) + " labels");
  }
  std::vector<int> g(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool correct = predictions[i] == labels[i];
    g[i] = (mode == Mode::Enhance) ? (correct ? 1 : 0) : (correct ? 0 : 1);
  }
  return g;
}

Var discriminator_loss(Graph& g, Var o, const std::vector<int>& targets, LossVariant variant) {
  const Tensor& ov = g.value(o);
  check_probs(ov);
  if (static_cast<std::int64_t>(targets.size()) != ov.numel()) {
    throw ContractError(kModule, "discriminator_loss needs one target per output");
  }
  const float n = static_cast<float>(ov.numel());
  Var gv = g.constant(target_tensor(targets, ov.shape()));
  Var gbar = affine(g, gv, -1.0f, 1.0f);  // 1-g
  if (variant == LossVariant::LeastSquares) {
    Var om1 = affine(g, o, 1.0f, -1.0f);
    Var pos = mul(g, gv, mul(g, om1, om1));
    Var neg = mul(g, gbar, mul(g, o, o));
    return affine(g, sum(g, add(g, pos, neg)), 0.5f / n, 0.0f);
  }
  Var oc = clamp(g, o, kProbClampLo, kProbClampHi);
  Var pos = mul(g, gv, log_val(g, oc));
  Var neg = mul(g, gbar, log_val(g, affine(g, oc, -1.0f, 1.0f)));
  return affine(g, sum(g, add(g, pos, neg)), -0.5f / n, 0.0f);
}

Var generator_adversarial_term(Graph& g, Var o, LossVariant variant) {
  const Tensor& ov = g.value(o);
  check_probs(ov);
  const float n = static_cast<float>(ov.numel());
  if (variant == LossVariant::LeastSquares) {
    Var om1 = affine(g, o, 1.0f, -1.0f);
    return affine(g, sum(g, mul(g, om1, om1)), 0.5f / n, 0.0f);
  }
  Var oc = clamp(g, o, kProbClampLo, kProbClampHi);
  return affine(g, sum(g, log_val(g, oc)), -1.0f / n, 0.0f);
}

Var l1_regularizer(Graph& g, Var m) {
  const Tensor& mv = g.value(m);
  const float n = static_cast<float>(mv.dim(0));
  return affine(g, sum(g, abs_val(g, m)), 1.0f / n, 0.0f);
}

Var generator_loss(Graph& g, Var o, Var m, float gamma, LossVariant variant) {
  if (gamma < 0.0f) throw ConfigError(kModule, "gamma must be non-negative");
  Var adv = generator_adversarial_term(g, o, variant);
  if (gamma == 0.0f) return adv;
  Var reg = l1_regularizer(g, m);
  return add(g, adv, affine(g, reg, gamma, 0.0f));
}

double discriminator_loss_value(const std::vector<float>& o, const std::vector<int>& targets,
                                LossVariant variant) {
  Graph g;
  Var ov = g.constant(Tensor({static_cast<int>(o.size())}, o));
  return static_cast<double>(g.value(discriminator_loss(g, ov, targets, variant)).item());
}

double generator_adversarial_term_value(const std::vector<float>& o, LossVariant variant) {
  Graph g;
  Var ov = g.constant(Tensor({static_cast<int>(o.size())}, o));
  return static_cast<double>(g.value(generator_adversarial_term(g, ov, variant)).item());
}

double l1_regularizer_value(const Tensor& m) {
  Graph g;
  Var mv = g.constant(m);
  return static_cast<double>(g.value(l1_regularizer(g, mv)).item());
}

}  // namespace pgn
