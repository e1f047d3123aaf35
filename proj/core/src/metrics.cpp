#include "pgn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pgn/errors.hpp"
#include "pgn/graph.hpp"

namespace pgn {

namespace {
constexpr const char* kModule = "eval-metrics";
}

double top1_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.empty() || predictions.size() != labels.size()) {
    throw ContractError(kModule, "top1_accuracy requires equal-length nonempty label vectors");
  }
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == labels[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(predictions.size());
}

double mean_average_precision(const Tensor& scores, const std::vector<int>& labels) {
  if (scores.ndim() != 2) throw ContractError(kModule, "mAP expects (N,K) scores");
  const int n = scores.dim(0), k = scores.dim(1);
  if (static_cast<int>(labels.size()) != n || n == 0) {
    throw ContractError(kModule, "mAP requires one label per score row");
  }
  double total = 0.0;
  int classes_with_positives = 0;
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int cls = 0; cls < k; ++cls) {
    int positives = 0;
    for (int l : labels) {
      if (l == cls) ++positives;
    }
    if (positives == 0) continue;  // classes without positives are excluded
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const float sa = scores.at2(a, cls), sb = scores.at2(b, cls);
      if (sa != sb) return sa > sb;
      return a < b;
    });
    double ap = 0.0;
    int seen_pos = 0;
    for (int rank = 0; rank < n; ++rank) {
      if (labels[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])] == cls) {
        ++seen_pos;
        ap += static_cast<double>(seen_pos) / static_cast<double>(rank + 1);
      }
    }
    total += ap / positives;
    ++classes_with_positives;
  }
  if (classes_with_positives == 0) {
    throw ContractError(kModule, "mAP undefined: no class has a positive sample");
  }
  return total / classes_with_positives;
}

std::pair<int, int> count_transitions(const std::vector<int>& r_vanilla,
                                      const std::vector<int>& r_perturbed,
                                      const std::vector<int>& labels) {
  if (r_vanilla.size() != r_perturbed.size() || r_vanilla.size() != labels.size()) {
    throw ContractError(kModule, "count_transitions requires equal-length vectors");
  }
  int pos = 0, neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool was = r_vanilla[i] == labels[i];
    const bool now = r_perturbed[i] == labels[i];
    if (!was && now) ++pos;
    if (was && !now) ++neg;
  }
  return {pos, neg};
}

Tensor fgsm_perturb(FrozenClassifier& f, const Tensor& images, const std::vector<int>& labels,
                    float epsilon, const std::vector<float>& channel_std) {
  if (f.policy == AccessPolicy::BlackBoxLabels) {
    throw AccessPolicyError(kModule, "fgsm_baseline needs white-box gradients");
  }
  const int n = images.dim(0);
  const int c = images.dim(1);
  Tensor out(images.shape());
  const std::int64_t row = images.numel() / n;
  const std::int64_t plane = row / c;
  const int chunk = 64;
  for (int start = 0; start < n; start += chunk) {
    const int cnt = std::min(chunk, n - start);
    std::vector<int> idx(static_cast<std::size_t>(cnt));
    std::iota(idx.begin(), idx.end(), start);
    Tensor batch({cnt, images.dim(1), images.dim(2), images.dim(3)});
    std::copy(images.data() + start * row, images.data() + (start + cnt) * row, batch.data());
    std::vector<int> batch_labels(labels.begin() + start, labels.begin() + start + cnt);

    Graph g;
    Var in = g.leaf(batch, /*track_grad=*/true);
    Var logits = f.net.forward(g, in);
    Var loss = softmax_cross_entropy(g, logits, batch_labels);
    g.backward(loss);
    const Tensor& gin = g.grad(in);
    if (gin.numel() == 0) throw ContractError(kModule, "fgsm got no input gradient");
    for (int i = 0; i < cnt; ++i) {
      for (int ch = 0; ch < c; ++ch) {
        const float eps_ch =
            channel_std.empty() ? epsilon : epsilon / channel_std[static_cast<std::size_t>(ch)];
        const std::int64_t off = (static_cast<std::int64_t>(i) * c + ch) * plane;
        const std::int64_t dst = (static_cast<std::int64_t>(start + i) * c + ch) * plane;
        for (std::int64_t j = 0; j < plane; ++j) {
          const float gv = gin[off + j];
          const float sign = gv > 0.0f ? 1.0f : (gv < 0.0f ? -1.0f : 0.0f);
          out[dst + j] = batch[off + j] + eps_ch * sign;
        }
      }
    }
  }
  return out;
}

double fgsm_baseline(FrozenClassifier& f, const Tensor& images, const std::vector<int>& labels,
                     float epsilon, const std::vector<float>& channel_std) {
  const Tensor adv = fgsm_perturb(f, images, labels, epsilon, channel_std);
  return top1_accuracy(f.predict(adv), labels);
}

void export_curves(const std::vector<MetricsRow>& rows, const std::string& path) {
  if (rows.empty()) throw ContractError(kModule, "export_curves needs at least one row");
  std::ofstream out(path);
  if (!out) throw IoError(kModule, path + ": cannot open for writing");
  out << "epoch,L_d,L_g,L_r,top1,mAP,pos,neg\n";
  char buf[256];
  for (const MetricsRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%d,%d\n", r.epoch, r.l_d, r.l_g,
                  r.l_r, r.top1, r.map, r.pos_transitions, r.neg_transitions);
    out << buf;
  }
  if (!out) throw IoError(kModule, path + ": write failed");
}

std::vector<MetricsRow> parse_curves(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(kModule, path + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || line != "epoch,L_d,L_g,L_r,top1,mAP,pos,neg") {
    throw IoError(kModule, path + ": unexpected curves header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRow r;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    if (!(is >> r.epoch >> r.l_d >> r.l_g >> r.l_r >> r.top1 >> r.map >> r.pos_transitions >>
          r.neg_transitions)) {
      throw IoError(kModule, path + ": malformed curves row '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

std::string format_score_cell(double top1, double map) {
  char buf[64];
  if (map < 0.0) {
    std::snprintf(buf, sizeof(buf), "%.1f%% / n/a", top1 * 100.0);
  } else {
    std::snprintf(buf, sizeof(buf), "%.1f%% / %.3f", top1 * 100.0, map);
  }
  return buf;
}

std::string render_summary_table(const std::vector<SummaryRow>& rows) {
  const std::vector<std::string> header = {"dataset", "classifier", "vanilla", "proposed", "EHA"};
  std::vector<std::size_t> width(5);
  for (std::size_t i = 0; i < 5; ++i) width[i] = header[i].size();
  for (const SummaryRow& r : rows) {
    width[0] = std::max(width[0], r.dataset.size());
    width[1] = std::max(width[1], r.classifier.size());
    width[2] = std::max(width[2], r.vanilla.size());
    width[3] = std::max(width[3], r.proposed.size());
    width[4] = std::max(width[4], r.baseline.size());
  }
  auto pad = [](const std::string& s, std::size_t w) {
    return s + std::string(w - s.size() + 2, ' ');
  };
  std::ostringstream os;
  for (std::size_t i = 0; i < 5; ++i) os << pad(header[i], width[i]);
  os << "\n";
  for (const SummaryRow& r : rows) {
    os << pad(r.dataset, width[0]) << pad(r.classifier, width[1]) << pad(r.vanilla, width[2])
       << pad(r.proposed, width[3]) << pad(r.baseline, width[4]) << "\n";
  }
  return os.str();
}

}  // namespace pgn
