#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgn/losses.hpp"

namespace pgn {

// Finite discrete sample space standing in for the continuous densities of
// the convergence analysis: one probability-of-success atom per point.
struct DiscreteGame {
  std::vector<double> p_g;  // p(g=1) per sample point, each in [0,1]
  DiscreteGame() = default;
  explicit DiscreteGame(std::vector<double> p);
};

struct OptimalDiscriminatorResult {
  std::vector<double> analytic;        // d* = p_g for both variants
  std::vector<double> grid_minimizer;  // exhaustive search over {0, 0.001, ..., 1}
  double max_abs_diff = 0.0;
};

OptimalDiscriminatorResult optimal_discriminator(const DiscreteGame& game, LossVariant variant);

// Pointwise loss of a discriminator value d against success probability p.
double pointwise_discriminator_loss(double d, double p, LossVariant variant);

struct DescentResult {
  // trajectory[t][s]: p_g of point s after t updates (row 0 = start).
  std::vector<std::vector<double>> trajectory;
  bool oscillated = false;  // |p-1| grew at some step (step size too large)
};

// Idealized alternating game: d is set to the optimal p_g each iteration,
// then p_g takes one clamped gradient step on L_g.
DescentResult generator_descent(const DiscreteGame& game, double step, int iters,
                                LossVariant variant);

struct OptimumCheckResult {
  double target_p = 0.0;
  double max_abs_deviation = 0.0;  // max |o - p| over the duplicated copies
  double mean_output = 0.0;
  int steps_used = 0;
  bool converged = false;
};

struct OptimumCheckOptions {
  int copies = 8;
  int max_steps = 6000;
  float lr = 5e-3f;
  double tolerance = 0.02;
  std::uint64_t seed = 99;
};

// Trains a small discriminator alone on one input duplicated `copies` times
// with a fraction p of positive targets; its output must approach p.
OptimumCheckResult empirical_optimum_check(LossVariant variant, double p,
                                           const OptimumCheckOptions& opt = {});

struct TheoryReport {
  struct Line {
    std::string name;
    double deviation = 0.0;
    double limit = 0.0;
    bool pass = false;
  };
  std::vector<Line> lines;
  bool all_pass = false;
};

// The checks behind the verify-theory command: grid-vs-analytic optima,
// descent convergence, and the empirical optimum runs.
TheoryReport run_theory_checks(std::uint64_t seed);
std::string render_theory_report(const TheoryReport& report);

}  // namespace pgn
