#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "pgn/dataset.hpp"
#include "pgn/losses.hpp"
#include "pgn/metrics.hpp"
#include "pgn/network.hpp"
#include "pgn/rng.hpp"

namespace pgn {

struct TrainConfig {
  Mode mode = Mode::Enhance;
  LossVariant loss_variant = LossVariant::LeastSquares;
  float gamma = 1e-4f;  // 3 is the adversarial-mode default
  float lambda = 1.0f;
  float lr = 1e-4f;
  int epochs = 20;
  int batch_size = 32;
  std::uint64_t seed = 7;
  AccessPolicy access_policy = AccessPolicy::WhiteBoxLogits;
  DiscriminatorInit discriminator_init = DiscriminatorInit::FromClassifierTrunk;
  // Initial-condition design: discriminator-only steps on unperturbed images
  // (targets from the classifier's labels) before the alternating loop.
  int disc_warmup_steps = 1500;

  void validate() const;
};

struct StepResult {
  double l_d = 0.0;
  double l_g = 0.0;       // adversarial term
  double l_r = 0.0;       // mean per-image l1
  double l_g_prime = 0.0; // l_g + gamma*l_r
  int n_correct = 0;      // r_i == l_i on the perturbed batch
  int n_wrong = 0;
  std::vector<int> predictions;    // r on J
  std::vector<float> o_before;     // D(J) before the discriminator update
  std::vector<float> o_after;      // D(J) after it (used by the generator loss)
  // Trainable parameters that received gradient from the generator loss.
  std::vector<Parameter*> generator_registry;
  // White-box only: classifier logits on J (empty otherwise).
  Tensor logits;
};

// One Algorithm-1 iteration: generate, classify, set targets, update D, then
// re-evaluate D and update G. The classifier is consulted through the label
// boundary only; its parameters never move.
StepResult train_step(const Tensor& images, const std::vector<int>& labels, Network& generator,
                      Network& discriminator, FrozenClassifier& classifier,
                      const TrainConfig& cfg);

struct TrainHooks {
  // Called once per epoch with the sample order used and per-sample
  // predictions r gathered during training.
  std::function<void(int epoch, const std::vector<int>& indices, const std::vector<int>& preds)>
      on_epoch = nullptr;
};

// Full training run over shuffled batches; emits one MetricsRow per epoch
// computed on the training split (running statistics, as training progresses).
// `resume_rng`/`start_epoch` support exact checkpoint resume.
std::vector<MetricsRow> train_pgn(const Dataset& ds, Network& generator, Network& discriminator,
                                  FrozenClassifier& classifier, const TrainConfig& cfg,
                                  const TrainHooks& hooks = {}, Rng* resume_rng = nullptr,
                                  int start_epoch = 0);

struct ClassifierTrainOptions {
  float lr = 5e-4f;
  int epochs = 20;
  int batch_size = 32;
  std::uint64_t seed = 11;
  // Early stop: freeze at the first epoch whose test-split accuracy reaches
  // this value (deliberate under-training for the enhancing experiments).
  std::optional<double> stop_at_accuracy;
};

FrozenClassifier train_classifier(const Dataset& ds, const NetworkSpec& spec,
                                  const ClassifierTrainOptions& opt);

// Re-derives the stored vanilla predictions/accuracies (used after loading a
// classifier from a checkpoint; the forward pass is deterministic).
void record_vanilla(FrozenClassifier& f, const Dataset& ds);

// Generator output and classifier predictions over a full split, in chunks.
Tensor generate_perturbations(Network& generator, const Tensor& images, int chunk = 64);
std::vector<int> predict_in_chunks(Network& net, const Tensor& images, int chunk = 256);
std::vector<int> predict_in_chunks(FrozenClassifier& f, const Tensor& images, int chunk = 256);

}  // namespace pgn
