#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pgn/tensor.hpp"

namespace pgn {

enum class NormalizationMode { Vanilla01, ZeroMeanUnitVar };

struct Dataset {
  Tensor train_images;  // (N,C,H,W)
  std::vector<int> train_labels;
  Tensor test_images;
  std::vector<int> test_labels;
  int num_classes = 0;
  NormalizationMode norm = NormalizationMode::Vanilla01;
  // Per-channel train-split stats; populated when normalized so that
  // denormalization is exact.
  std::vector<float> channel_mean;
  std::vector<float> channel_std;
};

struct SynthConfig {
  int train_size = 1600;
  int test_size = 400;
  int num_classes = 10;
  int image_size = 32;
  float noise = 0.32f;       // per-pixel gaussian noise sigma
  float hue_jitter = 0.35f;  // fraction of the inter-class hue gap
  float fade_min = 0.3f;     // lower bound of the per-sample evidence fade
  std::uint64_t seed = 1234;
};

// Deterministic 10-class colored-shapes generator; every class pairs one
// shape with one hue band.
Dataset make_synthetic_dataset(const SynthConfig& cfg);

// zero_mean_unit_var computes per-channel stats on the train split and
// applies them to both splits; vanilla mode is the identity.
Dataset normalize(const Dataset& ds, NormalizationMode mode);
Dataset denormalize(const Dataset& ds);

enum class DatasetFormat { IdxBinary, RawTensorDir };

void save_dataset(const Dataset& ds, const std::string& dir, DatasetFormat fmt);
Dataset load_dataset(const std::string& dir, DatasetFormat fmt);

// Batch selection helpers.
Tensor gather_rows(const Tensor& t, const std::vector<int>& indices);
std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<int>& indices);

}  // namespace pgn
