#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pgn/dataset.hpp"
#include "pgn/network.hpp"
#include "pgn/train.hpp"

namespace pgn {

struct DataConfig {
  std::string source = "synthetic";  // synthetic | idx | raw
  std::string path;                  // dataset directory for idx/raw
  std::string format = "idx";        // written by gen-synthetic-data
  int train_size = 1600;
  int test_size = 400;
  float noise = 0.32f;
  float hue_jitter = 0.35f;
  float fade_min = 0.3f;
  std::uint64_t seed = 1234;
  NormalizationMode normalization = NormalizationMode::Vanilla01;
};

struct ClassifierConfig {
  NetworkSpec spec;  // desk default unless overridden
  float lr = 5e-4f;
  int epochs = 30;
  std::uint64_t seed = 11;
  std::optional<double> stop_at_accuracy;
};

struct EvalConfig {
  std::string checkpoint;
  float fgsm_epsilon = 0.03f;
};

struct RunConfig {
  TrainConfig train;
  DataConfig data;
  ClassifierConfig classifier;
  NetworkSpec generator;
  NetworkSpec discriminator;  // resolved from black_box/disc_init unless set
  bool generator_zero_init_final = true;
  float generator_decoder_gain = 1.0f;
  EvalConfig eval;

  bool mode_explicit = false;  // train-pgn refuses to run without it
  bool discriminator_explicit = false;

  std::string to_text() const;  // round-trippable resolved snapshot
};

// Parses the flat `key = value` format ([section] headers, # comments).
// Overrides are dotted keys ("train.gamma=0.01") applied after the file.
// Every malformed input yields a named ConfigError.
RunConfig parse_config_text(const std::string& text,
                            const std::vector<std::string>& overrides = {});
RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides = {});
RunConfig default_config();

// Layer DSL: layers separated by '|', e.g.
//   conv 16 k3 s2 p1 relu | flatten | dense 10
std::vector<LayerSpec> parse_layer_dsl(const std::string& text, const std::string& where);
std::string render_layer_dsl(const std::vector<LayerSpec>& layers);

Dataset load_dataset_from_config(const DataConfig& cfg);

}  // namespace pgn
