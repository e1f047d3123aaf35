#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pgn/network.hpp"
#include "pgn/tensor.hpp"

namespace pgn {

struct MetricsRow {
  int epoch = 0;
  double l_d = 0.0;
  double l_g = 0.0;  // generator adversarial term (without the l1 part)
  double l_r = 0.0;
  double top1 = 0.0;
  double map = -1.0;  // -1 when unavailable (black-box evaluation)
  int pos_transitions = 0;
  int neg_transitions = 0;
};

double top1_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// One-vs-rest average precision from (N,K) scores, averaged over classes with
// at least one positive. Ties rank by ascending sample index.
double mean_average_precision(const Tensor& scores, const std::vector<int>& labels);

// (pos, neg): pos counts false->correct flips, neg counts correct->false.
std::pair<int, int> count_transitions(const std::vector<int>& r_vanilla,
                                      const std::vector<int>& r_perturbed,
                                      const std::vector<int>& labels);

// One-step gradient-sign baseline: J = I + eps * sign(dCE/dI). When the
// pipeline is normalized, eps (given in vanilla pixel scale) is divided by
// the per-channel std. White-box access required.
Tensor fgsm_perturb(FrozenClassifier& f, const Tensor& images, const std::vector<int>& labels,
                    float epsilon, const std::vector<float>& channel_std = {});
double fgsm_baseline(FrozenClassifier& f, const Tensor& images, const std::vector<int>& labels,
                     float epsilon, const std::vector<float>& channel_std = {});

// CSV with header epoch,L_d,L_g,L_r,top1,mAP,pos,neg; floats at 6 decimals,
// LF line endings.
void export_curves(const std::vector<MetricsRow>& rows, const std::string& path);
std::vector<MetricsRow> parse_curves(const std::string& path);

struct SummaryRow {
  std::string dataset;
  std::string classifier;
  std::string vanilla;
  std::string proposed;
  std::string baseline;
};

// Aligned plain-text table with the vanilla / proposed / baseline columns.
std::string render_summary_table(const std::vector<SummaryRow>& rows);

// "61.0% / 0.588" style cell; pass map < 0 for "n/a".
std::string format_score_cell(double top1, double map);

}  // namespace pgn
