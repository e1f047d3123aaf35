#include "pgn/network.hpp"

#include <cmath>
#include <cstring>

#include "pgn/errors.hpp"
#include "pgn/kernels.hpp"

namespace pgn {

namespace {

constexpr const char* kModule = "models";

}  // namespace

ShapeState walk_layers(const std::string& name, const std::vector<LayerSpec>& layers,
                       const std::vector<int>& input_shape) {
  if (input_shape.size() != 3) {
    throw SpecError(kModule, name + ": input shape must be (C,H,W), got " +
                                 shape_to_string(input_shape));
  }
  ShapeState s;
  s.spatial = true;
  s.c = input_shape[0];
  s.h = input_shape[1];
  s.w = input_shape[2];
  int idx = 0;
  for (const LayerSpec& l : layers) {
    const std::string where = name + " layer " + std::to_string(idx);
    switch (l.kind) {
      case LayerKind::Conv: {
        if (!s.spatial) throw SpecError(kModule, where + ": conv after flatten");
        s.h = kernels::conv_out_size(s.h, l.kernel, l.stride, l.padding);
        s.w = kernels::conv_out_size(s.w, l.kernel, l.stride, l.padding);
        s.c = l.out_channels;
        break;
      }
      case LayerKind::ConvTranspose: {
        if (!s.spatial) throw SpecError(kModule, where + ": deconv after flatten");
        s.h = kernels::conv_transpose_out_size(s.h, l.kernel, l.stride, l.padding);
        s.w = kernels::conv_transpose_out_size(s.w, l.kernel, l.stride, l.padding);
        s.c = l.out_channels;
        break;
      }
      case LayerKind::AvgPool: {
        if (!s.spatial) throw SpecError(kModule, where + ": pool after flatten");
        if (l.kernel <= 0 || s.h % l.kernel != 0 || s.w % l.kernel != 0) {
          throw SpecError(kModule, where + ": pool window " + std::to_string(l.kernel) +
                                       " does not divide " + std::to_string(s.h) + "x" +
                                       std::to_string(s.w));
        }
        s.h /= l.kernel;
        s.w /= l.kernel;
        break;
      }
      case LayerKind::Flatten: {
        if (!s.spatial) throw SpecError(kModule, where + ": repeated flatten");
        s.spatial = false;
        s.features = s.c * s.h * s.w;
        break;
      }
      case LayerKind::Dense: {
        if (s.spatial) throw SpecError(kModule, where + ": dense requires flatten first");
        s.features = l.out_channels;
        break;
      }
    }
    ++idx;
  }
  return s;
}

namespace {

int spatial_factor(const std::string& name, const std::vector<LayerSpec>& layers, bool down) {
  int factor = 1;
  for (const LayerSpec& l : layers) {
    if (l.kind == LayerKind::Conv && down) factor *= l.stride;
    if (l.kind == LayerKind::ConvTranspose && !down) factor *= l.stride;
    if (l.kind == LayerKind::AvgPool) {
      throw SpecError(kModule, name + ": pooling not supported inside a generator");
    }
  }
  return factor;
}

Network instantiate(const NetworkSpec& spec, const std::vector<LayerSpec>& layers, Rng& rng) {
  Network net;
  net.spec = spec;
  ShapeState s;
  s.spatial = true;
  s.c = spec.input_shape[0];
  s.h = spec.input_shape[1];
  s.w = spec.input_shape[2];
  int idx = 0;
  for (const LayerSpec& l : layers) {
    Network::Layer layer;
    layer.cfg = l;
    const std::string pname = spec.name + "." + std::to_string(idx);
    switch (l.kind) {
      case LayerKind::Conv: {
        layer.in_width = s.c;
        layer.w = Parameter(pname + ".w", Tensor({l.out_channels, s.c, l.kernel, l.kernel}));
        layer.b = Parameter(pname + ".b", Tensor({l.out_channels}));
        he_uniform_init(layer.w.value, s.c * l.kernel * l.kernel, rng);
        layer.has_params = true;
        s.h = kernels::conv_out_size(s.h, l.kernel, l.stride, l.padding);
        s.w = kernels::conv_out_size(s.w, l.kernel, l.stride, l.padding);
        s.c = l.out_channels;
        break;
      }
      case LayerKind::ConvTranspose: {
        layer.in_width = s.c;
        layer.w = Parameter(pname + ".w", Tensor({s.c, l.out_channels, l.kernel, l.kernel}));
        layer.b = Parameter(pname + ".b", Tensor({l.out_channels}));
        he_uniform_init(layer.w.value, l.out_channels * l.kernel * l.kernel, rng);
        layer.has_params = true;
        s.h = kernels::conv_transpose_out_size(s.h, l.kernel, l.stride, l.padding);
        s.w = kernels::conv_transpose_out_size(s.w, l.kernel, l.stride, l.padding);
        s.c = l.out_channels;
        break;
      }
      case LayerKind::AvgPool: {
        s.h /= l.kernel;
        s.w /= l.kernel;
        break;
      }
      case LayerKind::Flatten: {
        s.spatial = false;
        s.features = s.c * s.h * s.w;
        break;
      }
      case LayerKind::Dense: {
        layer.in_width = s.features;
        layer.w = Parameter(pname + ".w", Tensor({l.out_channels, s.features}));
        layer.b = Parameter(pname + ".b", Tensor({l.out_channels}));
        he_uniform_init(layer.w.value, s.features, rng);
        layer.has_params = true;
        s.features = l.out_channels;
        break;
      }
    }
    net.layers.push_back(std::move(layer));
    ++idx;
  }
  return net;
}

}  // namespace

void check_classifier_spec(const NetworkSpec& spec) {
  if (spec.output != OutputArity::ClassLogits || spec.num_classes < 2) {
    throw SpecError(kModule, spec.name + ": classifier spec must declare K>=2 class logits");
  }
  if (spec.layers.empty() || spec.layers.back().kind != LayerKind::Dense) {
    throw SpecError(kModule, spec.name + ": classifier must end in a dense layer");
  }
  const ShapeState out = walk_layers(spec.name, spec.layers, spec.input_shape);
  if (out.spatial || out.features != spec.num_classes) {
    throw SpecError(kModule, spec.name + ": classifier output arity " +
                                 std::to_string(out.spatial ? -1 : out.features) +
                                 " does not match K=" + std::to_string(spec.num_classes));
  }
}

void check_generator_spec(const NetworkSpec& spec) {
  if (spec.output != OutputArity::Image) {
    throw SpecError(kModule, spec.name + ": generator spec must declare image output");
  }
  const int down = spatial_factor(spec.name, spec.encoder, true);
  const int up = spatial_factor(spec.name, spec.decoder, false);
  if (down != up) {
    throw SpecError(kModule, spec.name + ": decoder upsampling x" + std::to_string(up) +
                                 " does not match encoder downsampling x" + std::to_string(down));
  }
  std::vector<LayerSpec> all = spec.encoder;
  all.insert(all.end(), spec.decoder.begin(), spec.decoder.end());
  const ShapeState out = walk_layers(spec.name, all, spec.input_shape);
  if (!out.spatial || out.c != spec.input_shape[0] || out.h != spec.input_shape[1] ||
      out.w != spec.input_shape[2]) {
    throw SpecError(kModule, spec.name + ": generator output shape (" + std::to_string(out.c) +
                                 "," + std::to_string(out.h) + "," + std::to_string(out.w) +
                                 ") does not reproduce input shape " +
                                 shape_to_string(spec.input_shape));
  }
}

void check_discriminator_spec(const NetworkSpec& spec) {
  if (spec.output != OutputArity::SigmoidUnit) {
    throw SpecError(kModule, spec.name + ": discriminator spec must declare a sigmoid unit output");
  }
  if (spec.layers.empty()) throw SpecError(kModule, spec.name + ": empty discriminator spec");
  const LayerSpec& last = spec.layers.back();
  if (last.kind != LayerKind::Dense || last.out_channels != 1 || last.act != Activation::Sigmoid) {
    throw SpecError(kModule,
                    spec.name + ": discriminator must end in one dense unit with sigmoid");
  }
  walk_layers(spec.name, spec.layers, spec.input_shape);
}

Var Network::forward(Graph& g, Var x) {
  Var cur = x;
  for (Layer& l : layers) {
    switch (l.cfg.kind) {
      case LayerKind::Conv: {
        Var w = frozen ? g.constant(l.w.value) : g.param(l.w);
        Var b = frozen ? g.constant(l.b.value) : g.param(l.b);
        cur = conv2d(g, cur, w, b, l.cfg.stride, l.cfg.padding);
        break;
      }
      case LayerKind::ConvTranspose: {
        Var w = frozen ? g.constant(l.w.value) : g.param(l.w);
        Var b = frozen ? g.constant(l.b.value) : g.param(l.b);
        cur = conv_transpose2d(g, cur, w, b, l.cfg.stride, l.cfg.padding);
        break;
      }
      case LayerKind::Dense: {
        Var w = frozen ? g.constant(l.w.value) : g.param(l.w);
        Var b = frozen ? g.constant(l.b.value) : g.param(l.b);
        cur = dense(g, cur, w, b);
        break;
      }
      case LayerKind::AvgPool:
        cur = avg_pool2d(g, cur, l.cfg.kernel);
        break;
      case LayerKind::Flatten:
        cur = flatten(g, cur);
        break;
    }
    if (l.cfg.act == Activation::Relu) cur = relu(g, cur);
    if (l.cfg.act == Activation::Sigmoid) cur = sigmoid(g, cur);
  }
  return cur;
}

Tensor Network::forward_values(const Tensor& x) {
  Graph g;
  Var in = g.constant(x);
  Var out = forward(g, in);
  return g.value(out);
}

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> out;
  for (Layer& l : layers) {
    if (!l.has_params) continue;
    out.push_back(&l.w);
    out.push_back(&l.b);
  }
  return out;
}

void Network::set_frozen(bool on) {
  frozen = on;
  for (Layer& l : layers) {
    if (!l.has_params) continue;
    l.w.trainable = !on;
    l.b.trainable = !on;
  }
}

std::uint64_t Network::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  auto mix = [&h](const Tensor& t) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
    const std::size_t n = static_cast<std::size_t>(t.numel()) * sizeof(float);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const Layer& l : layers) {
    if (!l.has_params) continue;
    mix(l.w.value);
    mix(l.b.value);
  }
  return h;
}

Network build_classifier(const NetworkSpec& spec, Rng& rng) {
  check_classifier_spec(spec);
  return instantiate(spec, spec.layers, rng);
}

Network build_generator(const NetworkSpec& spec, Rng& rng, const GeneratorOptions& opts) {
  check_generator_spec(spec);
  std::vector<LayerSpec> all = spec.encoder;
  all.insert(all.end(), spec.decoder.begin(), spec.decoder.end());
  NetworkSpec s = spec;
  Network net = instantiate(s, all, rng);
  if (opts.decoder_gain != 1.0f && net.layers.size() >= 2) {
    // Scale only the layer feeding the output conv; this sets the pace at
    // which the output can drift without deadening the whole decoder.
    Network::Layer& penult = net.layers[net.layers.size() - 2];
    if (penult.has_params) {
      for (std::int64_t k = 0; k < penult.w.value.numel(); ++k)
        penult.w.value[k] *= opts.decoder_gain;
    }
  }
  if (opts.zero_init_final) {
    Network::Layer& last = net.layers.back();
    for (std::int64_t i = 0; i < last.w.value.numel(); ++i) last.w.value[i] = 0.0f;
    for (std::int64_t i = 0; i < last.b.value.numel(); ++i) last.b.value[i] = 0.0f;
  }
  return net;
}

Network build_discriminator(const NetworkSpec& spec, DiscriminatorInit init, Rng& rng,
                            const Network* classifier) {
  check_discriminator_spec(spec);
  Network net = instantiate(spec, spec.layers, rng);
  if (init == DiscriminatorInit::FromClassifierTrunk) {
    if (classifier == nullptr) {
      throw SpecError(kModule, spec.name + ": trunk initialization requires a classifier");
    }
    // The shared trunk is the longest common prefix of identically-shaped
    // layers; it takes the classifier's weights and stays fixed, so only the
    // fully connected head trains.
    std::size_t copied = 0;
    for (std::size_t i = 0; i + 1 < net.layers.size() && i < classifier->layers.size(); ++i) {
      Network::Layer& dst = net.layers[i];
      const Network::Layer& src = classifier->layers[i];
      if (dst.cfg.kind != src.cfg.kind || dst.cfg.out_channels != src.cfg.out_channels ||
          dst.cfg.kernel != src.cfg.kernel || dst.cfg.stride != src.cfg.stride ||
          dst.cfg.padding != src.cfg.padding) {
        break;
      }
      if (!dst.has_params) {
        ++copied;
        continue;
      }
      if (!src.has_params || !src.w.value.same_shape(dst.w.value)) break;
      dst.w.value = src.w.value;
      dst.b.value = src.b.value;
      dst.w.trainable = false;
      dst.b.trainable = false;
      ++copied;
    }
    if (copied == 0) {
      throw SpecError(kModule, spec.name + ": no trunk layer is compatible with the classifier");
    }
  }
  return net;
}

Tensor perturb(const Tensor& images, const Tensor& perturbations, float lambda) {
  if (!images.same_shape(perturbations)) {
    throw DimensionError(kModule, "perturb shape mismatch: " + images.shape_str() + " vs " +
                                      perturbations.shape_str());
  }
  Tensor j(images.shape());
  for (std::int64_t i = 0; i < images.numel(); ++i) j[i] = images[i] + lambda * perturbations[i];
  return j;
}

Var perturb(Graph& g, Var images, Var perturbations, float lambda) {
  if (!g.value(images).same_shape(g.value(perturbations))) {
    throw DimensionError(kModule, "perturb shape mismatch: " + g.value(images).shape_str() +
                                      " vs " + g.value(perturbations).shape_str());
  }
  return add(g, images, affine(g, perturbations, lambda, 0.0f));
}

std::vector<int> argmax_rows(const Tensor& scores) {
  const int n = scores.dim(0), k = scores.dim(1);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    int best = 0;
    float bv = scores.at2(r, 0);
    for (int c = 1; c < k; ++c) {
      // Ties resolve to the lowest class index.
      if (scores.at2(r, c) > bv) {
        bv = scores.at2(r, c);
        best = c;
      }
    }
    out[static_cast<std::size_t>(r)] = best;
  }
  return out;
}

std::vector<int> FrozenClassifier::predict(const Tensor& images) {
  return argmax_rows(net.forward_values(images));
}

Tensor FrozenClassifier::logits(const Tensor& images) {
  if (policy == AccessPolicy::BlackBoxLabels) {
    throw AccessPolicyError(kModule, "logits requested under black_box_labels access policy");
  }
  return net.forward_values(images);
}

NetworkSpec desk_classifier_spec() {
  NetworkSpec s;
  s.name = "desk-cnn";
  s.input_shape = {3, 32, 32};
  s.output = OutputArity::ClassLogits;
  s.num_classes = 10;
  // The leading pool keeps the classifier keyed to low-frequency structure.
  s.layers = {
      {LayerKind::AvgPool, 0, 2, 1, 0, Activation::None},
      {LayerKind::Conv, 16, 3, 2, 1, Activation::Relu},
      {LayerKind::Conv, 32, 3, 2, 1, Activation::Relu},
      {LayerKind::Conv, 64, 3, 1, 1, Activation::Relu},
      {LayerKind::Conv, 64, 3, 1, 1, Activation::Relu},
      {LayerKind::AvgPool, 0, 4, 1, 0, Activation::None},
      {LayerKind::Flatten, 0, 0, 1, 0, Activation::None},
      {LayerKind::Dense, 10, 0, 1, 0, Activation::None},
  };
  return s;
}

NetworkSpec desk_generator_spec() {
  NetworkSpec s;
  s.name = "desk-gen";
  s.input_shape = {3, 32, 32};
  s.output = OutputArity::Image;
  s.encoder = {
      {LayerKind::Conv, 16, 3, 2, 1, Activation::Relu},
      {LayerKind::Conv, 32, 3, 2, 1, Activation::Relu},
      {LayerKind::Conv, 64, 3, 2, 1, Activation::Relu},
  };
  // Two (2,1,1) deconvolution blocks plus the final 4x4 stride-2 layer.
  s.decoder = {
      {LayerKind::ConvTranspose, 32, 4, 2, 1, Activation::Relu},
      {LayerKind::ConvTranspose, 32, 3, 1, 1, Activation::Relu},
      {LayerKind::ConvTranspose, 32, 3, 1, 1, Activation::Relu},
      {LayerKind::ConvTranspose, 16, 4, 2, 1, Activation::Relu},
      {LayerKind::ConvTranspose, 16, 3, 1, 1, Activation::Relu},
      {LayerKind::ConvTranspose, 16, 3, 1, 1, Activation::Relu},
      {LayerKind::ConvTranspose, 3, 4, 2, 1, Activation::None},
  };
  return s;
}

NetworkSpec desk_discriminator_spec(bool black_box) {
  NetworkSpec s;
  s.input_shape = {3, 32, 32};
  s.output = OutputArity::SigmoidUnit;
  if (!black_box) {
    // Classifier conv trunk plus fully connected layers ending in the
    // sigmoid unit; with trunk init only the dense head trains.
    s.name = "desk-disc";
    s.layers = {
        {LayerKind::AvgPool, 0, 2, 1, 0, Activation::None},
        {LayerKind::Conv, 16, 3, 2, 1, Activation::Relu},
        {LayerKind::Conv, 32, 3, 2, 1, Activation::Relu},
        {LayerKind::Conv, 64, 3, 1, 1, Activation::Relu},
        {LayerKind::Conv, 64, 3, 1, 1, Activation::Relu},
        {LayerKind::Flatten, 0, 0, 1, 0, Activation::None},
        {LayerKind::Dense, 128, 0, 1, 0, Activation::Relu},
        {LayerKind::Dense, 1, 0, 1, 0, Activation::Sigmoid},
    };
  } else {
    // Structurally unrelated to the target classifier.
    s.name = "desk-disc-bb";
    s.layers = {
        {LayerKind::AvgPool, 0, 2, 1, 0, Activation::None},
        {LayerKind::Conv, 24, 3, 2, 1, Activation::Relu},
        {LayerKind::Conv, 48, 3, 2, 1, Activation::Relu},
        {LayerKind::Conv, 96, 3, 1, 1, Activation::Relu},
        {LayerKind::Flatten, 0, 0, 1, 0, Activation::None},
        {LayerKind::Dense, 128, 0, 1, 0, Activation::Relu},
        {LayerKind::Dense, 1, 0, 1, 0, Activation::Sigmoid},
    };
  }
  return s;
}

NetworkSpec reference_generator_spec() {
  NetworkSpec s;
  s.name = "reference-gen";
  s.input_shape = {3, 224, 224};
  s.output = OutputArity::Image;
  // Stand-in encoder with the x32 downsampling of the full-scale backbone.
  s.encoder = {
      {LayerKind::Conv, 64, 3, 2, 1, Activation::Relu},
      {LayerKind::Conv, 256, 3, 2, 1, Activation::Relu},
      {LayerKind::Conv, 512, 3, 2, 1, Activation::Relu},
      {LayerKind::Conv, 1024, 3, 2, 1, Activation::Relu},
      {LayerKind::Conv, 2048, 3, 2, 1, Activation::Relu},
  };
  const int ch[13] = {2048, 1024, 512, 512, 256, 256, 256, 128, 128, 128, 64, 64, 3};
  for (int block = 0; block < 4; ++block) {
    s.decoder.push_back({LayerKind::ConvTranspose, ch[block * 3 + 0], 4, 2, 1, Activation::Relu});
    s.decoder.push_back({LayerKind::ConvTranspose, ch[block * 3 + 1], 3, 1, 1, Activation::Relu});
    s.decoder.push_back({LayerKind::ConvTranspose, ch[block * 3 + 2], 3, 1, 1, Activation::Relu});
  }
  s.decoder.push_back({LayerKind::ConvTranspose, ch[12], 4, 2, 1, Activation::None});
  return s;
}

void PerturbationBatch::validate() const {
  if (!images.same_shape(perturbations) || !images.same_shape(perturbed)) {
    throw ContractError(kModule, "perturbation batch tensors must share one shape");
  }
  for (std::int64_t i = 0; i < images.numel(); ++i) {
    const float expect = images[i] + lambda * perturbations[i];
    if (perturbed[i] != expect) {
      throw ContractError(kModule, "perturbed image does not equal I + lambda*M at element " +
                                       std::to_string(i));
    }
  }
  for (float o : disc_out) {
    if (!(o > 0.0f && o < 1.0f)) {
      throw ContractError(kModule, "discriminator output outside (0,1): " + std::to_string(o));
    }
  }
  const std::size_t n = labels.size();
  if (predictions.size() != n || targets.size() != n || disc_out.size() != n) {
    throw ContractError(kModule, "perturbation batch per-sample fields must align");
  }
}

}  // namespace pgn
