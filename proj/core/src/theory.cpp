#include "pgn/theory.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "pgn/errors.hpp"
#include "pgn/network.hpp"
#include "pgn/optim.hpp"
#include "pgn/rng.hpp"

namespace pgn {

namespace {
constexpr const char* kModule = "theory-verify";
}

DiscreteGame::DiscreteGame(std::vector<double> p) : p_g(std::move(p)) {
  for (double v : p_g) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ContractError(kModule, "p_g value " + std::to_string(v) + " outside [0,1]");
    }
  }
}

double pointwise_discriminator_loss(double d, double p, LossVariant variant) {
  if (variant == LossVariant::LeastSquares) {
    return p * (d - 1.0) * (d - 1.0) + (1.0 - p) * d * d;
  }
  // -p*log(d) - (1-p)*log(1-d); infinite at the clamped endpoints.
  double loss = 0.0;
  if (p > 0.0) loss += (d > 0.0) ? -p * std::log(d) : std::numeric_limits<double>::infinity();
  if (p < 1.0)
    loss += (d < 1.0) ? -(1.0 - p) * std::log(1.0 - d) : std::numeric_limits<double>::infinity();
  return loss;
}

OptimalDiscriminatorResult optimal_discriminator(const DiscreteGame& game, LossVariant variant) {
  OptimalDiscriminatorResult res;
  res.analytic = game.p_g;
  res.grid_minimizer.resize(game.p_g.size());
  for (std::size_t s = 0; s < game.p_g.size(); ++s) {
    const double p = game.p_g[s];
    double best_d = 0.0;
    double best_loss = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 1000; ++i) {
      const double d = static_cast<double>(i) / 1000.0;
      const double loss = pointwise_discriminator_loss(d, p, variant);
      if (loss < best_loss) {
        best_loss = loss;
        best_d = d;
      }
    }
    res.grid_minimizer[s] = best_d;
    res.max_abs_diff = std::max(res.max_abs_diff, std::fabs(best_d - p));
  }
  return res;
}

DescentResult generator_descent(const DiscreteGame& game, double step, int iters,
                                LossVariant variant) {
  if (step <= 0.0) throw ConfigError(kModule, "descent step must be positive");
  DescentResult res;
  std::vector<double> p = game.p_g;
  res.trajectory.push_back(p);
  for (int t = 0; t < iters; ++t) {
    for (std::size_t s = 0; s < p.size(); ++s) {
      const double before_gap = std::fabs(p[s] - 1.0);
      double grad;
      if (variant == LossVariant::LeastSquares) {
        grad = 2.0 * (p[s] - 1.0);
      } else {
        // d/dp of -log(p); the optimum d = p is substituted first.
        grad = (p[s] > 0.0) ? -1.0 / p[s] : -1.0 / 1e-12;
      }
      p[s] = std::min(1.0, std::max(0.0, p[s] - step * grad));
      if (std::fabs(p[s] - 1.0) > before_gap + 1e-12) res.oscillated = true;
    }
    res.trajectory.push_back(p);
  }
  return res;
}

OptimumCheckResult empirical_optimum_check(LossVariant variant, double p,
                                           const OptimumCheckOptions& opt) {
  if (!(p >= 0.0 && p <= 1.0)) throw ContractError(kModule, "p must lie in [0,1]");
  const int positives = static_cast<int>(std::lround(p * opt.copies));
  if (std::fabs(p * opt.copies - positives) > 1e-9) {
    throw ContractError(kModule, "p*copies must be integral to realize the fraction exactly");
  }

  Rng rng(opt.seed);
  // One fixed input, duplicated; a small conv discriminator on an 8x8 patch.
  Tensor base({1, 1, 8, 8});
  for (std::int64_t i = 0; i < base.numel(); ++i) base[i] = rng.uniform(0.0f, 1.0f);
  Tensor batch({opt.copies, 1, 8, 8});
  for (int c = 0; c < opt.copies; ++c)
    for (std::int64_t i = 0; i < base.numel(); ++i) batch[c * base.numel() + i] = base[i];
  std::vector<int> targets(static_cast<std::size_t>(opt.copies), 0);
  for (int i = 0; i < positives; ++i) targets[static_cast<std::size_t>(i)] = 1;

  NetworkSpec spec;
  spec.name = "tiny-disc";
  spec.input_shape = {1, 8, 8};
  spec.output = OutputArity::SigmoidUnit;
  spec.layers = {
      {LayerKind::Conv, 8, 3, 2, 1, Activation::Relu},
      {LayerKind::Conv, 16, 3, 2, 1, Activation::Relu},
      {LayerKind::Flatten, 0, 0, 1, 0, Activation::None},
      {LayerKind::Dense, 1, 0, 1, 0, Activation::Sigmoid},
  };
  Network disc = build_discriminator(spec, DiscriminatorInit::Fresh, rng);
  const AdamConfig adam{opt.lr, 0.9f, 0.999f, 1e-8f};

  OptimumCheckResult res;
  res.target_p = p;
  for (int step = 0; step < opt.max_steps; ++step) {
    Graph g;
    Var in = g.constant(batch);
    Var o = disc.forward(g, in);
    Var loss = discriminator_loss(g, o, targets, variant);
    zero_grad(disc.parameters());
    g.backward(loss);
    adam_step(disc.parameters(), adam);
    res.steps_used = step + 1;

    if ((step + 1) % 50 == 0 || step + 1 == opt.max_steps) {
      const Tensor& ov = g.value(o);
      double mx = 0.0, mean = 0.0;
      for (std::int64_t i = 0; i < ov.numel(); ++i) {
        mx = std::max(mx, std::fabs(static_cast<double>(ov[i]) - p));
        mean += ov[i];
      }
      res.max_abs_deviation = mx;
      res.mean_output = mean / ov.numel();
      if (mx < opt.tolerance * 0.5) {
        res.converged = true;
        break;
      }
    }
  }
  if (!res.converged && res.max_abs_deviation >= opt.tolerance) {
    res.converged = false;  // reported, not masked
  } else if (res.max_abs_deviation < opt.tolerance) {
    res.converged = true;
  }
  return res;
}

TheoryReport run_theory_checks(std::uint64_t seed) {
  TheoryReport report;
  Rng rng(seed);
  auto add = [&report](const std::string& name, double deviation, double limit) {
    report.lines.push_back({name, deviation, limit, deviation < limit});
  };

  for (LossVariant variant : {LossVariant::LeastSquares, LossVariant::CrossEntropy}) {
    const char* vn = variant == LossVariant::LeastSquares ? "ls" : "ce";
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> p(4);
      for (double& v : p) v = rng.uniform();
      const OptimalDiscriminatorResult r = optimal_discriminator(DiscreteGame(p), variant);
      worst = std::max(worst, r.max_abs_diff);
    }
    add(std::string("optimal-discriminator/") + vn + " grid vs analytic", worst, 0.001 + 1e-12);

    double worst_gap = 0.0;
    std::vector<double> starts;
    for (int i = 1; i <= 9; ++i) starts.push_back(0.1 * i);
    const DescentResult d = generator_descent(DiscreteGame(starts), 0.1, 500, variant);
    for (double v : d.trajectory.back()) worst_gap = std::max(worst_gap, 1.0 - v);
    add(std::string("generator-descent/") + vn + " gap to 1", worst_gap, 0.001);
  }

  for (LossVariant variant : {LossVariant::LeastSquares, LossVariant::CrossEntropy}) {
    const char* vn = variant == LossVariant::LeastSquares ? "ls" : "ce";
    for (double p : {0.25, 0.5, 1.0}) {
      OptimumCheckOptions opt;
      opt.seed = rng.next_u64();
      const OptimumCheckResult r = empirical_optimum_check(variant, p, opt);
      char name[64];
      std::snprintf(name, sizeof(name), "empirical-optimum/%s p=%.2f", vn, p);
      add(name, r.max_abs_deviation, opt.tolerance);
    }
  }

  report.all_pass = true;
  for (const auto& l : report.lines) report.all_pass = report.all_pass && l.pass;
  return report;
}

std::string render_theory_report(const TheoryReport& report) {
  std::ostringstream os;
  std::size_t w = 0;
  for (const auto& l : report.lines) w = std::max(w, l.name.size());
  for (const auto& l : report.lines) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-*s  max dev %.6f  limit %.6f  %s\n", static_cast<int>(w),
                  l.name.c_str(), l.deviation, l.limit, l.pass ? "PASS" : "FAIL");
    os << buf;
  }
  os << (report.all_pass ? "all checks passed\n" : "SOME CHECKS FAILED\n");
  return os.str();
}

}  // namespace pgn
