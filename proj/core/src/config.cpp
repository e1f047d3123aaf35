#include "pgn/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "pgn/errors.hpp"

namespace pgn {

namespace {

constexpr const char* kModule = "data-io";

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

struct KeyValue {
  std::string section;
  std::string key;
  std::string value;
};

std::vector<KeyValue> tokenize(const std::string& text) {
  std::vector<KeyValue> out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError(kModule, "line " + std::to_string(lineno) + ": unterminated section header");
      }
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) {
        throw ConfigError(kModule, "line " + std::to_string(lineno) + ": empty section name");
      }
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(kModule, "line " + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
    }
    KeyValue kv;
    kv.section = section;
    kv.key = trim(t.substr(0, eq));
    kv.value = trim(t.substr(eq + 1));
    if (kv.key.empty()) {
      throw ConfigError(kModule, "line " + std::to_string(lineno) + ": empty key");
    }
    if (kv.section.empty()) {
      throw ConfigError(kModule, "line " + std::to_string(lineno) + ": key '" + kv.key +
                                     "' appears before any [section]");
    }
    out.push_back(kv);
  }
  return out;
}

double parse_double(const KeyValue& kv) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(kv.value, &pos);
    if (pos != kv.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError(kModule, kv.section + "." + kv.key + ": expected a number, got '" + kv.value + "'");
  }
}

std::int64_t parse_int(const KeyValue& kv) {
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(kv.value, &pos);
    if (pos != kv.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError(kModule, kv.section + "." + kv.key + ": expected an integer, got '" + kv.value + "'");
  }
}

std::uint64_t parse_u64(const KeyValue& kv) {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(kv.value, &pos);
    if (pos != kv.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError(kModule, kv.section + "." + kv.key + ": expected an unsigned integer, got '" +
                                   kv.value + "'");
  }
}

bool parse_bool(const KeyValue& kv) {
  if (kv.value == "true" || kv.value == "1" || kv.value == "yes") return true;
  if (kv.value == "false" || kv.value == "0" || kv.value == "no") return false;
  throw ConfigError(kModule, kv.section + "." + kv.key + ": expected true/false, got '" + kv.value + "'");
}

Activation parse_act(const std::string& s, const std::string& where) {
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "none") return Activation::None;
  throw ConfigError(kModule, where + ": unknown activation '" + s + "'");
}

}  // namespace

std::vector<LayerSpec> parse_layer_dsl(const std::string& text, const std::string& where) {
  std::vector<LayerSpec> layers;
  std::stringstream ss(text);
  std::string item;
  int idx = 0;
  while (std::getline(ss, item, '|')) {
    const std::string t = trim(item);
    if (t.empty()) throw ConfigError(kModule, where + ": empty layer descriptor");
    std::istringstream is(t);
    std::string kind;
    is >> kind;
    LayerSpec l;
    const std::string here = where + " layer " + std::to_string(idx);
    if (kind == "conv" || kind == "deconv") {
      l.kind = kind == "conv" ? LayerKind::Conv : LayerKind::ConvTranspose;
      if (!(is >> l.out_channels)) throw ConfigError(kModule, here + ": missing channel count");
      std::string tok;
      while (is >> tok) {
        if (tok.size() >= 2 && tok[0] == 'k') l.kernel = std::stoi(tok.substr(1));
        else if (tok.size() >= 2 && tok[0] == 's') l.stride = std::stoi(tok.substr(1));
        else if (tok.size() >= 2 && tok[0] == 'p') l.padding = std::stoi(tok.substr(1));
        else l.act = parse_act(tok, here);
      }
      if (l.kernel <= 0) throw ConfigError(kModule, here + ": conv needs k<n>");
    } else if (kind == "dense") {
      l.kind = LayerKind::Dense;
      if (!(is >> l.out_channels)) throw ConfigError(kModule, here + ": missing unit count");
      std::string tok;
      if (is >> tok) l.act = parse_act(tok, here);
    } else if (kind == "avgpool") {
      l.kind = LayerKind::AvgPool;
      if (!(is >> l.kernel)) throw ConfigError(kModule, here + ": missing pool window");
    } else if (kind == "flatten") {
      l.kind = LayerKind::Flatten;
    } else {
      throw ConfigError(kModule, here + ": unknown layer kind '" + kind + "'");
    }
    layers.push_back(l);
    ++idx;
  }
  if (layers.empty()) throw ConfigError(kModule, where + ": no layers given");
  return layers;
}

std::string render_layer_dsl(const std::vector<LayerSpec>& layers) {
  std::ostringstream os;
  bool first = true;
  for (const LayerSpec& l : layers) {
    if (!first) os << " | ";
    first = false;
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::ConvTranspose:
        os << (l.kind == LayerKind::Conv ? "conv " : "deconv ") << l.out_channels << " k" << l.kernel
           << " s" << l.stride << " p" << l.padding;
        if (l.act == Activation::Relu) os << " relu";
        if (l.act == Activation::Sigmoid) os << " sigmoid";
        break;
      case LayerKind::Dense:
        os << "dense " << l.out_channels;
        if (l.act == Activation::Relu) os << " relu";
        if (l.act == Activation::Sigmoid) os << " sigmoid";
        break;
      case LayerKind::AvgPool:
        os << "avgpool " << l.kernel;
        break;
      case LayerKind::Flatten:
        os << "flatten";
        break;
    }
  }
  return os.str();
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.classifier.spec = desk_classifier_spec();
  cfg.classifier.stop_at_accuracy = std::nullopt;
  cfg.generator = desk_generator_spec();
  cfg.discriminator = desk_discriminator_spec(false);
  return cfg;
}

RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides) {
  std::vector<KeyValue> kvs = tokenize(text);
  for (const std::string& ov : overrides) {
    const std::size_t eq = ov.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(kModule, "override '" + ov + "' must look like section.key=value");
    }
    const std::string lhs = trim(ov.substr(0, eq));
    const std::size_t dot = lhs.find('.');
    if (dot == std::string::npos) {
      throw ConfigError(kModule, "override '" + ov + "' must name section.key");
    }
    KeyValue kv;
    kv.section = lhs.substr(0, dot);
    kv.key = lhs.substr(dot + 1);
    kv.value = trim(ov.substr(eq + 1));
    kvs.push_back(kv);
  }

  RunConfig cfg = default_config();
  bool gamma_explicit = false;
  bool disc_init_explicit = false;
  std::vector<int> clf_input, gen_input;

  for (const KeyValue& kv : kvs) {
    const std::string full = kv.section + "." + kv.key;
    if (kv.section == "train") {
      if (kv.key == "mode") {
        if (kv.value == "enhance") cfg.train.mode = Mode::Enhance;
        else if (kv.value == "adversarial") cfg.train.mode = Mode::Adversarial;
        else throw ConfigError(kModule, full + ": expected enhance|adversarial, got '" + kv.value + "'");
        cfg.mode_explicit = true;
      } else if (kv.key == "loss") {
        if (kv.value == "ls" || kv.value == "least_squares") cfg.train.loss_variant = LossVariant::LeastSquares;
        else if (kv.value == "ce" || kv.value == "cross_entropy") cfg.train.loss_variant = LossVariant::CrossEntropy;
        else throw ConfigError(kModule, full + ": expected ls|ce, got '" + kv.value + "'");
      } else if (kv.key == "gamma") {
        cfg.train.gamma = static_cast<float>(parse_double(kv));
        gamma_explicit = true;
        if (cfg.train.gamma < 0.0f) throw ConfigError(kModule, full + ": gamma must be >= 0");
      } else if (kv.key == "lambda") {
        cfg.train.lambda = static_cast<float>(parse_double(kv));
      } else if (kv.key == "lr") {
        cfg.train.lr = static_cast<float>(parse_double(kv));
        if (cfg.train.lr <= 0.0f) throw ConfigError(kModule, full + ": lr must be > 0");
      } else if (kv.key == "epochs") {
        cfg.train.epochs = static_cast<int>(parse_int(kv));
        if (cfg.train.epochs < 1) throw ConfigError(kModule, full + ": epochs must be >= 1");
      } else if (kv.key == "batch_size") {
        cfg.train.batch_size = static_cast<int>(parse_int(kv));
        if (cfg.train.batch_size < 1) throw ConfigError(kModule, full + ": batch_size must be >= 1");
      } else if (kv.key == "seed") {
        cfg.train.seed = parse_u64(kv);
      } else if (kv.key == "black_box") {
        cfg.train.access_policy =
            parse_bool(kv) ? AccessPolicy::BlackBoxLabels : AccessPolicy::WhiteBoxLogits;
      } else if (kv.key == "disc_warmup") {
        cfg.train.disc_warmup_steps = static_cast<int>(parse_int(kv));
        if (cfg.train.disc_warmup_steps < 0) throw ConfigError(kModule, full + ": disc_warmup must be >= 0");
      } else if (kv.key == "disc_init") {
        if (kv.value == "trunk") cfg.train.discriminator_init = DiscriminatorInit::FromClassifierTrunk;
        else if (kv.value == "fresh") cfg.train.discriminator_init = DiscriminatorInit::Fresh;
        else throw ConfigError(kModule, full + ": expected trunk|fresh, got '" + kv.value + "'");
        disc_init_explicit = true;
      } else {
        throw ConfigError(kModule, "unknown key '" + full + "'");
      }
    } else if (kv.section == "data") {
      if (kv.key == "source") {
        if (kv.value != "synthetic" && kv.value != "idx" && kv.value != "raw") {
          throw ConfigError(kModule, full + ": expected synthetic|idx|raw, got '" + kv.value + "'");
        }
        cfg.data.source = kv.value;
      } else if (kv.key == "path") {
        cfg.data.path = kv.value;
      } else if (kv.key == "format") {
        if (kv.value != "idx" && kv.value != "raw") {
          throw ConfigError(kModule, full + ": expected idx|raw, got '" + kv.value + "'");
        }
        cfg.data.format = kv.value;
      } else if (kv.key == "train_size") {
        cfg.data.train_size = static_cast<int>(parse_int(kv));
      } else if (kv.key == "test_size") {
        cfg.data.test_size = static_cast<int>(parse_int(kv));
      } else if (kv.key == "noise") {
        cfg.data.noise = static_cast<float>(parse_double(kv));
      } else if (kv.key == "hue_jitter") {
        cfg.data.hue_jitter = static_cast<float>(parse_double(kv));
      } else if (kv.key == "fade_min") {
        cfg.data.fade_min = static_cast<float>(parse_double(kv));
      } else if (kv.key == "seed") {
        cfg.data.seed = parse_u64(kv);
      } else if (kv.key == "normalization") {
        if (kv.value == "vanilla") cfg.data.normalization = NormalizationMode::Vanilla01;
        else if (kv.value == "standard") cfg.data.normalization = NormalizationMode::ZeroMeanUnitVar;
        else throw ConfigError(kModule, full + ": expected vanilla|standard, got '" + kv.value + "'");
      } else {
        throw ConfigError(kModule, "unknown key '" + full + "'");
      }
    } else if (kv.section == "classifier") {
      if (kv.key == "layers") {
        cfg.classifier.spec.layers = parse_layer_dsl(kv.value, full);
      } else if (kv.key == "input") {
        std::istringstream is(kv.value);
        clf_input.clear();
        int d;
        char x;
        if (is >> d) clf_input.push_back(d);
        while (is >> x >> d) clf_input.push_back(d);
        if (clf_input.size() != 3) throw ConfigError(kModule, full + ": expected CxHxW");
      } else if (kv.key == "classes") {
        cfg.classifier.spec.num_classes = static_cast<int>(parse_int(kv));
      } else if (kv.key == "lr") {
        cfg.classifier.lr = static_cast<float>(parse_double(kv));
      } else if (kv.key == "epochs") {
        cfg.classifier.epochs = static_cast<int>(parse_int(kv));
      } else if (kv.key == "seed") {
        cfg.classifier.seed = parse_u64(kv);
      } else if (kv.key == "stop_at_accuracy") {
        cfg.classifier.stop_at_accuracy = parse_double(kv);
      } else {
        throw ConfigError(kModule, "unknown key '" + full + "'");
      }
    } else if (kv.section == "generator") {
      if (kv.key == "encoder") {
        cfg.generator.encoder = parse_layer_dsl(kv.value, full);
      } else if (kv.key == "decoder") {
        cfg.generator.decoder = parse_layer_dsl(kv.value, full);
      } else if (kv.key == "input") {
        std::istringstream is(kv.value);
        gen_input.clear();
        int d;
        char x;
        if (is >> d) gen_input.push_back(d);
        while (is >> x >> d) gen_input.push_back(d);
        if (gen_input.size() != 3) throw ConfigError(kModule, full + ": expected CxHxW");
      } else if (kv.key == "zero_init_final") {
        cfg.generator_zero_init_final = parse_bool(kv);
      } else if (kv.key == "gain") {
        cfg.generator_decoder_gain = static_cast<float>(parse_double(kv));
      } else {
        throw ConfigError(kModule, "unknown key '" + full + "'");
      }
    } else if (kv.section == "discriminator") {
      if (kv.key == "layers") {
        cfg.discriminator.layers = parse_layer_dsl(kv.value, full);
        cfg.discriminator_explicit = true;
      } else {
        throw ConfigError(kModule, "unknown key '" + full + "'");
      }
    } else if (kv.section == "eval") {
      if (kv.key == "checkpoint") {
        cfg.eval.checkpoint = kv.value;
      } else if (kv.key == "fgsm_epsilon") {
        cfg.eval.fgsm_epsilon = static_cast<float>(parse_double(kv));
      } else {
        throw ConfigError(kModule, "unknown key '" + full + "'");
      }
    } else {
      throw ConfigError(kModule, "unknown section '[" + kv.section + "]'");
    }
  }

  if (!clf_input.empty()) cfg.classifier.spec.input_shape = clf_input;
  if (!gen_input.empty()) cfg.generator.input_shape = gen_input;

  // Mode-dependent defaults: gamma per problem, fresh discriminator under the
  // black-box policy.
  if (!gamma_explicit) {
    cfg.train.gamma = cfg.train.mode == Mode::Enhance ? 1e-4f : 3.0f;
  }
  if (!disc_init_explicit && cfg.train.access_policy == AccessPolicy::BlackBoxLabels) {
    cfg.train.discriminator_init = DiscriminatorInit::Fresh;
  }
  if (!cfg.discriminator_explicit) {
    cfg.discriminator =
        desk_discriminator_spec(cfg.train.discriminator_init == DiscriminatorInit::Fresh);
  }
  cfg.train.validate();
  return cfg;
}

RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(kModule, path + ": cannot open config file");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config_text(os.str(), overrides);
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "[train]\n";
  os << "mode = " << (train.mode == Mode::Enhance ? "enhance" : "adversarial") << "\n";
  os << "loss = " << (train.loss_variant == LossVariant::LeastSquares ? "ls" : "ce") << "\n";
  os << "gamma = " << train.gamma << "\n";
  os << "lambda = " << train.lambda << "\n";
  os << "lr = " << train.lr << "\n";
  os << "epochs = " << train.epochs << "\n";
  os << "batch_size = " << train.batch_size << "\n";
  os << "seed = " << train.seed << "\n";
  os << "black_box = " << (train.access_policy == AccessPolicy::BlackBoxLabels ? "true" : "false")
     << "\n";
  os << "disc_init = "
     << (train.discriminator_init == DiscriminatorInit::FromClassifierTrunk ? "trunk" : "fresh")
     << "\n";
  os << "disc_warmup = " << train.disc_warmup_steps << "\n";
  os << "\n[data]\n";
  os << "source = " << data.source << "\n";
  if (!data.path.empty()) os << "path = " << data.path << "\n";
  os << "format = " << data.format << "\n";
  os << "train_size = " << data.train_size << "\n";
  os << "test_size = " << data.test_size << "\n";
  os << "noise = " << data.noise << "\n";
  os << "hue_jitter = " << data.hue_jitter << "\n";
  os << "fade_min = " << data.fade_min << "\n";
  os << "seed = " << data.seed << "\n";
  os << "normalization = "
     << (data.normalization == NormalizationMode::Vanilla01 ? "vanilla" : "standard") << "\n";
  os << "\n[classifier]\n";
  os << "input = " << classifier.spec.input_shape[0] << "x" << classifier.spec.input_shape[1] << "x"
     << classifier.spec.input_shape[2] << "\n";
  os << "classes = " << classifier.spec.num_classes << "\n";
  os << "layers = " << render_layer_dsl(classifier.spec.layers) << "\n";
  os << "lr = " << classifier.lr << "\n";
  os << "epochs = " << classifier.epochs << "\n";
  os << "seed = " << classifier.seed << "\n";
  if (classifier.stop_at_accuracy) os << "stop_at_accuracy = " << *classifier.stop_at_accuracy << "\n";
  os << "\n[generator]\n";
  os << "input = " << generator.input_shape[0] << "x" << generator.input_shape[1] << "x"
     << generator.input_shape[2] << "\n";
  os << "encoder = " << render_layer_dsl(generator.encoder) << "\n";
  os << "decoder = " << render_layer_dsl(generator.decoder) << "\n";
  os << "zero_init_final = " << (generator_zero_init_final ? "true" : "false") << "\n";
  os << "gain = " << generator_decoder_gain << "\n";
  os << "\n[discriminator]\n";
  os << "layers = " << render_layer_dsl(discriminator.layers) << "\n";
  os << "\n[eval]\n";
  if (!eval.checkpoint.empty()) os << "checkpoint = " << eval.checkpoint << "\n";
  os << "fgsm_epsilon = " << eval.fgsm_epsilon << "\n";
  return os.str();
}

Dataset load_dataset_from_config(const DataConfig& cfg) {
  if (cfg.source == "synthetic") {
    SynthConfig s;
    s.train_size = cfg.train_size;
    s.test_size = cfg.test_size;
    s.noise = cfg.noise;
    s.hue_jitter = cfg.hue_jitter;
    s.fade_min = cfg.fade_min;
    s.seed = cfg.seed;
    Dataset ds = make_synthetic_dataset(s);
    if (cfg.normalization == NormalizationMode::ZeroMeanUnitVar) {
      ds = normalize(ds, NormalizationMode::ZeroMeanUnitVar);
    }
    return ds;
  }
  if (cfg.path.empty()) throw ConfigError(kModule, "data.path required for source=" + cfg.source);
  Dataset ds = load_dataset(cfg.path, cfg.source == "idx" ? DatasetFormat::IdxBinary
                                                          : DatasetFormat::RawTensorDir);
  if (cfg.normalization == NormalizationMode::ZeroMeanUnitVar &&
      ds.norm == NormalizationMode::Vanilla01) {
    ds = normalize(ds, NormalizationMode::ZeroMeanUnitVar);
  }
  return ds;
}

}  // namespace pgn
