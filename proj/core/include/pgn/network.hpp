#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pgn/graph.hpp"
#include "pgn/optim.hpp"
#include "pgn/rng.hpp"
#include "pgn/tensor.hpp"

namespace pgn {

enum class LayerKind { Conv, ConvTranspose, Dense, AvgPool, Flatten };
enum class Activation { None, Relu, Sigmoid };

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  int out_channels = 0;  // conv/deconv/dense output width
  int kernel = 0;        // conv/deconv kernel, avgpool window
  int stride = 1;
  int padding = 0;
  Activation act = Activation::None;
};

enum class OutputArity { ClassLogits, SigmoidUnit, Image };

struct NetworkSpec {
  std::string name;
  std::vector<int> input_shape;  // {C,H,W}
  // Classifier and discriminator use `layers`; the generator uses the
  // encoder/decoder pair so the up/downsampling contract can be checked.
  std::vector<LayerSpec> layers;
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> decoder;
  OutputArity output = OutputArity::ClassLogits;
  int num_classes = 0;
};

// Shape bookkeeping while walking a layer stack: either spatial (C,H,W) or
// flattened features.
struct ShapeState {
  bool spatial = true;
  int c = 0, h = 0, w = 0;
  int features = 0;
};

ShapeState walk_layers(const std::string& name, const std::vector<LayerSpec>& layers,
                       const std::vector<int>& input_shape);

// Validation-only checks (no parameters are allocated, so they also apply to
// full-scale reference specs).
void check_classifier_spec(const NetworkSpec& spec);
void check_generator_spec(const NetworkSpec& spec);
void check_discriminator_spec(const NetworkSpec& spec);

class Network {
 public:
  struct Layer {
    LayerSpec cfg;
    int in_width = 0;  // input channels (conv/deconv) or features (dense)
    Parameter w, b;
    bool has_params = false;
  };

  NetworkSpec spec;
  std::vector<Layer> layers;
  bool frozen = false;

  Var forward(Graph& g, Var x);
  // Convenience forward on plain values (fresh throwaway tape).
  Tensor forward_values(const Tensor& x);

  std::vector<Parameter*> parameters();
  void set_frozen(bool on);
  std::uint64_t checksum() const;
};

struct GeneratorOptions {
  // Zero final layer makes G the zero map at step 0, so training starts from
  // unperturbed images.
  bool zero_init_final = true;
  // Scale on the decoder weight init; values < 1 damp the decoder's early
  // output drift so the discriminator separates before perturbations grow.
  float decoder_gain = 1.0f;
};

Network build_classifier(const NetworkSpec& spec, Rng& rng);
Network build_generator(const NetworkSpec& spec, Rng& rng, const GeneratorOptions& opts = {});

enum class DiscriminatorInit { FromClassifierTrunk, Fresh };
Network build_discriminator(const NetworkSpec& spec, DiscriminatorInit init, Rng& rng,
                            const Network* classifier = nullptr);

// Eq. J = I + lambda*M; no clipping.
Tensor perturb(const Tensor& images, const Tensor& perturbations, float lambda);
Var perturb(Graph& g, Var images, Var perturbations, float lambda);

enum class AccessPolicy { WhiteBoxLogits, BlackBoxLabels };

struct FrozenClassifier {
  Network net;
  AccessPolicy policy = AccessPolicy::WhiteBoxLogits;
  // Recorded at freeze time on the clean training/test splits.
  std::vector<int> vanilla_train_preds;
  std::vector<int> vanilla_test_preds;
  double vanilla_train_acc = 0.0;
  double vanilla_test_acc = 0.0;

  // Label-only boundary: allowed under both policies, never differentiable.
  std::vector<int> predict(const Tensor& images);
  // White-box only; throws AccessPolicyError under black_box_labels.
  Tensor logits(const Tensor& images);

  std::uint64_t checksum() const { return net.checksum(); }
};

std::vector<int> argmax_rows(const Tensor& scores);

// Desk-scale default architectures (32x32x3, K=10).
NetworkSpec desk_classifier_spec();
NetworkSpec desk_generator_spec();
NetworkSpec desk_discriminator_spec(bool black_box);
// Full-scale generator layout described for 224x224 inputs: 13 deconvolution
// layers in four (2,1,1)-stride blocks plus a final 4x4 stride-2 layer.
NetworkSpec reference_generator_spec();

struct PerturbationBatch {
  Tensor images;          // I
  Tensor perturbations;   // M
  Tensor perturbed;       // J
  std::vector<int> labels;       // l
  std::vector<int> predictions;  // r on J
  std::vector<int> targets;      // g
  std::vector<float> disc_out;   // o
  float lambda = 1.0f;

  void validate() const;  // checks the J == I + lambda*M and range invariants
};

}  // namespace pgn
