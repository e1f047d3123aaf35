#include "pgn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pgn/errors.hpp"
#include "pgn/kernels.hpp"

namespace pgn {

namespace {

constexpr const char* kModule = "pgn-train";
constexpr double kDivergenceLimit = 1e6;

void check_finite_losses(double l_d, double l_g, double l_r) {
  if (!std::isfinite(l_d) || !std::isfinite(l_g) || !std::isfinite(l_r) ||
      l_d > kDivergenceLimit || l_g > kDivergenceLimit || l_r > kDivergenceLimit) {
    std::ostringstream os;
    os << "training diverged: L_d=" << l_d << " L_g=" << l_g << " L_r=" << l_r;
    throw TrainingError(kModule, os.str());
  }
}

std::vector<float> probe_values(const Tensor& t) {
  return std::vector<float>(t.data(), t.data() + t.numel());
}

}  // namespace

void TrainConfig::validate() const {
  if (gamma < 0.0f) throw ConfigError(kModule, "gamma must be >= 0");
  if (epochs < 1) throw ConfigError(kModule, "epochs must be >= 1");
  if (batch_size < 1) throw ConfigError(kModule, "batch_size must be >= 1");
  if (lr <= 0.0f) throw ConfigError(kModule, "lr must be > 0");
  if (access_policy == AccessPolicy::BlackBoxLabels &&
      discriminator_init == DiscriminatorInit::FromClassifierTrunk) {
    throw ConfigError(kModule, "black-box access cannot initialize the discriminator from the classifier trunk");
  }
}

StepResult train_step(const Tensor& images, const std::vector<int>& labels, Network& generator,
                      Network& discriminator, FrozenClassifier& classifier,
                      const TrainConfig& cfg) {
  cfg.validate();
  if (images.dim(0) != static_cast<int>(labels.size())) {
    throw ContractError(kModule, "train_step batch images/labels mismatch");
  }
  StepResult res;
  const AdamConfig adam{cfg.lr, 0.9f, 0.999f, 1e-8f};

  // Generator tape: M <- G(I), J <- I + lambda*M.
  Graph tape_g;
  Var img = tape_g.constant(images);
  Var m = generator.forward(tape_g, img);
  Var j = perturb(tape_g, img, m, cfg.lambda);
  const Tensor& j_values = tape_g.value(j);

  // Classifier boundary: labels always, logits only when white-box.
  if (cfg.access_policy == AccessPolicy::WhiteBoxLogits) {
    res.logits = classifier.logits(j_values);
    res.predictions = argmax_rows(res.logits);
  } else {
    res.predictions = classifier.predict(j_values);
  }
  const std::vector<int> targets = assign_targets(res.predictions, labels, cfg.mode);

  // Discriminator update on its own tape; J enters as a constant.
  Graph tape_d;
  Var j_const = tape_d.constant(j_values);
  Var o1 = discriminator.forward(tape_d, j_const);
  res.o_before = probe_values(tape_d.value(o1));
  Var l_d = discriminator_loss(tape_d, o1, targets, cfg.loss_variant);
  res.l_d = tape_d.value(l_d).item();
  zero_grad(discriminator.parameters());
  tape_d.backward(l_d);
  adam_step(discriminator.parameters(), adam);

  // Re-evaluate o with the updated discriminator, then update the generator.
  Var o2 = discriminator.forward(tape_g, j);
  res.o_after = probe_values(tape_g.value(o2));
  Var l_g = generator_adversarial_term(tape_g, o2, cfg.loss_variant);
  Var l_r = l1_regularizer(tape_g, m);
  Var l_g_prime = add(tape_g, l_g, affine(tape_g, l_r, cfg.gamma, 0.0f));
  res.l_g = tape_g.value(l_g).item();
  res.l_r = tape_g.value(l_r).item();
  res.l_g_prime = tape_g.value(l_g_prime).item();
  check_finite_losses(res.l_d, res.l_g, res.l_r);

  zero_grad(generator.parameters());
  zero_grad(discriminator.parameters());
  tape_g.backward(l_g_prime);
  res.generator_registry = tape_g.grad_registry();
  adam_step(generator.parameters(), adam);
  // The generator backward also filled discriminator gradients; those are
  // never applied (alternating-update isolation).
  zero_grad(discriminator.parameters());

  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (res.predictions[i] == labels[i]) ++res.n_correct;
    else ++res.n_wrong;
  }
  return res;
}

std::vector<MetricsRow> train_pgn(const Dataset& ds, Network& generator, Network& discriminator,
                                  FrozenClassifier& classifier, const TrainConfig& cfg,
                                  const TrainHooks& hooks, Rng* resume_rng, int start_epoch) {
  cfg.validate();
  const int n = ds.train_images.dim(0);
  if (n == 0) throw ContractError(kModule, "train_pgn needs a nonempty dataset");
  if (classifier.vanilla_train_preds.size() != static_cast<std::size_t>(n)) {
    throw ContractError(kModule, "classifier is missing vanilla predictions; call record_vanilla");
  }

  Rng local(cfg.seed);
  Rng& rng = resume_rng ? *resume_rng : local;
  const bool white_box = cfg.access_policy == AccessPolicy::WhiteBoxLogits;

  std::vector<MetricsRow> rows;
  std::vector<int> order(static_cast<std::size_t>(n));

  // Warm-started discriminator: with the generator still at hand but unused,
  // fit D on clean images so the alternating game starts from a separating
  // initial condition. Resumed runs skip this; their state already has it.
  if (start_epoch == 0 && cfg.disc_warmup_steps > 0) {
    const AdamConfig adam{cfg.lr, 0.9f, 0.999f, 1e-8f};
    int step = 0;
    while (step < cfg.disc_warmup_steps) {
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
      for (int start = 0; start < n && step < cfg.disc_warmup_steps;
           start += cfg.batch_size, ++step) {
        const int cnt = std::min(cfg.batch_size, n - start);
        std::vector<int> idx(order.begin() + start, order.begin() + start + cnt);
        const Tensor batch = gather_rows(ds.train_images, idx);
        const std::vector<int> labels = gather_labels(ds.train_labels, idx);
        const std::vector<int> preds = classifier.predict(batch);
        const std::vector<int> targets = assign_targets(preds, labels, cfg.mode);
        Graph g;
        Var o = discriminator.forward(g, g.constant(batch));
        Var l_d = discriminator_loss(g, o, targets, cfg.loss_variant);
        if (!std::isfinite(g.value(l_d).item())) {
          throw TrainingError(kModule, "discriminator warmup loss became non-finite");
        }
        zero_grad(discriminator.parameters());
        g.backward(l_d);
        adam_step(discriminator.parameters(), adam);
      }
    }
  }
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    double sum_ld = 0.0, sum_lg = 0.0, sum_lr = 0.0;
    int batches = 0;
    int correct = 0;
    int pos = 0, neg = 0;
    std::vector<int> epoch_preds;
    epoch_preds.reserve(static_cast<std::size_t>(n));
    Tensor epoch_scores;
    if (white_box) epoch_scores = Tensor({n, ds.num_classes});
    int row_cursor = 0;

    for (int start = 0; start < n; start += cfg.batch_size) {
      const int cnt = std::min(cfg.batch_size, n - start);
      std::vector<int> idx(order.begin() + start, order.begin() + start + cnt);
      const Tensor batch = gather_rows(ds.train_images, idx);
      const std::vector<int> labels = gather_labels(ds.train_labels, idx);

      StepResult step = train_step(batch, labels, generator, discriminator, classifier, cfg);
      sum_ld += step.l_d;
      sum_lg += step.l_g;
      sum_lr += step.l_r;
      ++batches;
      correct += step.n_correct;
      for (int i = 0; i < cnt; ++i) {
        const int sample = idx[static_cast<std::size_t>(i)];
        const int vanilla = classifier.vanilla_train_preds[static_cast<std::size_t>(sample)];
        const int truth = labels[static_cast<std::size_t>(i)];
        const int now = step.predictions[static_cast<std::size_t>(i)];
        if (vanilla != truth && now == truth) ++pos;
        if (vanilla == truth && now != truth) ++neg;
        epoch_preds.push_back(now);
      }
      if (white_box) {
        const Tensor sm = kernels::softmax_forward(step.logits);
        for (int i = 0; i < cnt; ++i)
          for (int k = 0; k < ds.num_classes; ++k)
            epoch_scores.at2(row_cursor + i, k) = sm.at2(i, k);
      }
      row_cursor += cnt;
    }

    MetricsRow row;
    row.epoch = epoch + 1;
    row.l_d = sum_ld / batches;
    row.l_g = sum_lg / batches;
    row.l_r = sum_lr / batches;
    row.top1 = static_cast<double>(correct) / static_cast<double>(n);
    if (white_box) {
      std::vector<int> shuffled_labels = gather_labels(ds.train_labels, order);
      row.map = mean_average_precision(epoch_scores, shuffled_labels);
    }
    row.pos_transitions = pos;
    row.neg_transitions = neg;
    rows.push_back(row);

    if (hooks.on_epoch) hooks.on_epoch(epoch + 1, order, epoch_preds);
  }
  return rows;
}

FrozenClassifier train_classifier(const Dataset& ds, const NetworkSpec& spec,
                                  const ClassifierTrainOptions& opt) {
  if (ds.train_labels.empty()) throw ContractError(kModule, "train_classifier needs labeled data");
  if (spec.num_classes != ds.num_classes) {
    throw SpecError(kModule, "classifier spec declares K=" + std::to_string(spec.num_classes) +
                                 " but dataset has " + std::to_string(ds.num_classes) + " classes");
  }
  if (opt.lr <= 0.0f) throw ConfigError(kModule, "classifier lr must be > 0");

  Rng rng(opt.seed);
  FrozenClassifier f;
  f.net = build_classifier(spec, rng);
  const AdamConfig adam{opt.lr, 0.9f, 0.999f, 1e-8f};

  const int n = ds.train_images.dim(0);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (int start = 0; start < n; start += opt.batch_size) {
      const int cnt = std::min(opt.batch_size, n - start);
      std::vector<int> idx(order.begin() + start, order.begin() + start + cnt);
      const Tensor batch = gather_rows(ds.train_images, idx);
      const std::vector<int> labels = gather_labels(ds.train_labels, idx);

      Graph g;
      Var in = g.constant(batch);
      Var logits = f.net.forward(g, in);
      Var loss = softmax_cross_entropy(g, logits, labels);
      if (!std::isfinite(g.value(loss).item())) {
        throw TrainingError(kModule, "classifier loss became non-finite");
      }
      zero_grad(f.net.parameters());
      g.backward(loss);
      adam_step(f.net.parameters(), adam);
    }
    if (opt.stop_at_accuracy) {
      const double acc =
          top1_accuracy(predict_in_chunks(f.net, ds.test_images), ds.test_labels);
      if (acc >= *opt.stop_at_accuracy) break;
    }
  }

  f.net.set_frozen(true);
  record_vanilla(f, ds);
  return f;
}

void record_vanilla(FrozenClassifier& f, const Dataset& ds) {
  f.vanilla_train_preds = predict_in_chunks(f, ds.train_images);
  f.vanilla_test_preds = predict_in_chunks(f, ds.test_images);
  f.vanilla_train_acc = top1_accuracy(f.vanilla_train_preds, ds.train_labels);
  f.vanilla_test_acc = top1_accuracy(f.vanilla_test_preds, ds.test_labels);
}

Tensor generate_perturbations(Network& generator, const Tensor& images, int chunk) {
  const int n = images.dim(0);
  Tensor out(images.shape());
  const std::int64_t row = images.numel() / n;
  for (int start = 0; start < n; start += chunk) {
    const int cnt = std::min(chunk, n - start);
    Tensor batch({cnt, images.dim(1), images.dim(2), images.dim(3)});
    std::copy(images.data() + start * row, images.data() + (start + cnt) * row, batch.data());
    const Tensor m = generator.forward_values(batch);
    std::copy(m.data(), m.data() + m.numel(), out.data() + start * row);
  }
  return out;
}

std::vector<int> predict_in_chunks(Network& net, const Tensor& images, int chunk) {
  const int n = images.dim(0);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n));
  const std::int64_t row = images.numel() / n;
  for (int start = 0; start < n; start += chunk) {
    const int cnt = std::min(chunk, n - start);
    Tensor batch({cnt, images.dim(1), images.dim(2), images.dim(3)});
    std::copy(images.data() + start * row, images.data() + (start + cnt) * row, batch.data());
    const std::vector<int> preds = argmax_rows(net.forward_values(batch));
    out.insert(out.end(), preds.begin(), preds.end());
  }
  return out;
}

std::vector<int> predict_in_chunks(FrozenClassifier& f, const Tensor& images, int chunk) {
  return predict_in_chunks(f.net, images, chunk);
}

}  // namespace pgn
