// Diagnostic harness for the enhance-game mechanisms; not part of the
// shipped CLI. Measures (a) how fast discriminator variants separate
// correctly-classified from misclassified images and (b) whether ascending a
// trained discriminator's input gradient actually fixes misclassified
// samples.
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "pgn/config.hpp"
#include "pgn/dataset.hpp"
#include "pgn/graph.hpp"
#include "pgn/losses.hpp"
#include "pgn/metrics.hpp"
#include "pgn/network.hpp"
#include "pgn/train.hpp"

using namespace pgn;

namespace {

struct Stats {
  double mean_pos = 0, mean_neg = 0, auc = 0;
};

Stats o_stats(const std::vector<float>& o, const std::vector<int>& g) {
  Stats s;
  int np = 0, nn = 0;
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (g[i]) {
      s.mean_pos += o[i];
      ++np;
    } else {
      s.mean_neg += o[i];
      ++nn;
    }
  }
  s.mean_pos /= std::max(1, np);
  s.mean_neg /= std::max(1, nn);
  double wins = 0;
  for (std::size_t i = 0; i < o.size(); ++i)
    for (std::size_t j = 0; j < o.size(); ++j)
      if (g[i] && !g[j]) wins += (o[i] > o[j]) ? 1.0 : (o[i] == o[j] ? 0.5 : 0.0);
  s.auc = wins / (static_cast<double>(np) * nn);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  std::string disc_dsl;
  int d_steps = 1000;
  float ascent = 0.5f;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--disc" && i + 1 < argc) disc_dsl = argv[++i];
    if (a == "--steps" && i + 1 < argc) d_steps = std::stoi(argv[++i]);
    if (a == "--ascent" && i + 1 < argc) ascent = std::stof(argv[++i]);
  }

  SynthConfig sc;
  Dataset ds = make_synthetic_dataset(sc);
  ClassifierTrainOptions copt;
  copt.stop_at_accuracy = 0.65;
  FrozenClassifier f = train_classifier(ds, desk_classifier_spec(), copt);
  std::printf("classifier: train %.3f test %.3f\n", f.vanilla_train_acc, f.vanilla_test_acc);

  const bool fresh = disc_dsl == "fresh";
  NetworkSpec dspec = desk_discriminator_spec(fresh);
  if (!disc_dsl.empty() && !fresh) dspec.layers = parse_layer_dsl(disc_dsl, "probe");
  Rng rng(5);
  Network disc = fresh ? build_discriminator(dspec, DiscriminatorInit::Fresh, rng)
                       : build_discriminator(dspec, DiscriminatorInit::FromClassifierTrunk, rng, &f.net);
  int trainable = 0;
  for (Parameter* p : disc.parameters())
    if (p->trainable) trainable += static_cast<int>(p->value.numel());
  std::printf("discriminator trainable params: %d\n", trainable);

  // Train D alone on clean images with g = vanilla correctness.
  const int n = ds.train_images.dim(0);
  std::vector<int> g_all(n);
  for (int i = 0; i < n; ++i) g_all[i] = f.vanilla_train_preds[i] == ds.train_labels[i] ? 1 : 0;
  const AdamConfig adam{1e-4f, 0.9f, 0.999f, 1e-8f};
  Rng shuffle_rng(7);
  std::vector<int> order(n);
  const int bs = 32;
  int step = 0;
  for (int epoch = 0; step < d_steps; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(order);
    for (int s = 0; s < n && step < d_steps; s += bs, ++step) {
      const int cnt = std::min(bs, n - s);
      std::vector<int> idx(order.begin() + s, order.begin() + s + cnt);
      Graph g;
      Var in = g.constant(gather_rows(ds.train_images, idx));
      Var o = disc.forward(g, in);
      std::vector<int> gb(cnt);
      for (int i = 0; i < cnt; ++i) gb[i] = g_all[idx[i]];
      Var ld = discriminator_loss(g, o, gb, LossVariant::LeastSquares);
      if (step % 200 == 0) {
        std::printf("step %4d  L_d %.4f\n", step, g.value(ld).item());
      }
      zero_grad(disc.parameters());
      g.backward(ld);
      adam_step(disc.parameters(), adam);
    }
  }

  // Separation on a held-out probe batch.
  std::vector<int> probe_idx(256);
  std::iota(probe_idx.begin(), probe_idx.end(), 0);
  Tensor probe = gather_rows(ds.train_images, probe_idx);
  std::vector<int> probe_g(256);
  for (int i = 0; i < 256; ++i) probe_g[i] = g_all[probe_idx[i]];
  {
    Graph g;
    Var o = disc.forward(g, g.constant(probe));
    std::vector<float> ov(g.value(o).data(), g.value(o).data() + 256);
    Stats st = o_stats(ov, probe_g);
    std::printf("separation: mean o | g=1: %.3f, g=0: %.3f, AUC %.3f\n", st.mean_pos, st.mean_neg,
                st.auc);
  }

  // Gradient-usefulness: ascend dD/dJ from clean images, in a few sizes.
  for (float a : {ascent * 0.2f, ascent, ascent * 5.0f}) {
    Graph g;
    Var in = g.leaf(probe, true);
    Var o = disc.forward(g, in);
    Var obj = sum(g, o);
    g.backward(obj);
    const Tensor& gin = g.grad(in);
    double gnorm = 0;
    for (std::int64_t i = 0; i < gin.numel(); ++i) gnorm += static_cast<double>(gin[i]) * gin[i];
    gnorm = std::sqrt(gnorm / gin.numel());
    Tensor j(probe.shape());
    for (std::int64_t i = 0; i < probe.numel(); ++i)
      j[i] = probe[i] + a * gin[i] / static_cast<float>(gnorm);
    std::vector<int> labels(ds.train_labels.begin(), ds.train_labels.begin() + 256);
    const std::vector<int> before = f.predict(probe);
    const std::vector<int> after = f.predict(j);
    auto [pos, neg] = count_transitions(before, after, labels);
    const double l1 = l1_regularizer_value(j) - 0.0;
    std::printf("ascent %.3f (rms-normalized): pos %d neg %d  top1 %.3f -> %.3f\n", a, pos, neg,
                top1_accuracy(before, labels), top1_accuracy(after, labels));
    (void)l1;
  }
  return 0;
}
