#include "pgn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pgn/errors.hpp"
#include "pgn/rng.hpp"

namespace fs = std::filesystem;

namespace pgn {

namespace {

constexpr const char* kModule = "data-io";

void hsv_to_rgb(float h, float s, float v, float* rgb) {
  h = h - std::floor(h);  // wrap into [0,1)
  const float hh = h * 6.0f;
  const int sector = static_cast<int>(hh) % 6;
  const float f = hh - std::floor(hh);
  const float p = v * (1.0f - s);
  const float q = v * (1.0f - s * f);
  const float t = v * (1.0f - s * (1.0f - f));
  switch (sector) {
    case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
    case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
    case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
    case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
    case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
    default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
  }
}

bool inside_shape(int shape, float dx, float dy, float a) {
  const float ax = std::fabs(dx), ay = std::fabs(dy);
  switch (shape) {
    case 0:  // circle
      return dx * dx + dy * dy <= a * a;
    case 1:  // square
      return ax <= a * 0.85f && ay <= a * 0.85f;
    case 2:  // diamond
      return ax + ay <= a * 1.2f;
    case 3:  // ring
      return dx * dx + dy * dy <= a * a && dx * dx + dy * dy >= (0.5f * a) * (0.5f * a);
    case 4:  // plus
      return (ax <= a * 0.35f || ay <= a * 0.35f) && ax <= a && ay <= a;
    case 5:  // X cross
      return std::fabs(ax - ay) <= a * 0.35f && ax <= a && ay <= a;
    case 6:  // triangle
      return dy >= -a * 0.8f && ay <= a && ax <= (a - dy) * 0.55f;
    case 7:  // horizontal bars
      return ax <= a && ay <= a && (static_cast<int>(std::floor((dy + a) / 3.0f)) % 2 == 0);
    case 8:  // vertical bars
      return ax <= a && ay <= a && (static_cast<int>(std::floor((dx + a) / 3.0f)) % 2 == 0);
    default:  // checkerboard patch
      return ax <= a && ay <= a &&
             ((static_cast<int>(std::floor((dx + a) / 3.0f)) +
               static_cast<int>(std::floor((dy + a) / 3.0f))) % 2 == 0);
  }
}

void render_split(Tensor& images, std::vector<int>& labels, int count, const SynthConfig& cfg,
                  Rng& rng) {
  const int hw = cfg.image_size;
  const int k = cfg.num_classes;
  labels.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) labels[static_cast<std::size_t>(i)] = i % k;
  rng.shuffle(labels);

  images = Tensor({count, 3, hw, hw});
  for (int i = 0; i < count; ++i) {
    const int cls = labels[static_cast<std::size_t>(i)];
    const float hue =
        (static_cast<float>(cls) + cfg.hue_jitter * rng.uniform(-1.0f, 1.0f)) / static_cast<float>(k);
    const float sat = rng.uniform(0.55f, 0.95f);
    const float val = rng.uniform(0.6f, 0.95f);
    float color[3];
    hsv_to_rgb(hue, sat, val, color);

    const float bg = rng.uniform(0.15f, 0.45f);
    const float cx = hw / 2.0f + rng.uniform(-3.5f, 3.5f);
    const float cy = hw / 2.0f + rng.uniform(-3.5f, 3.5f);
    const float a = rng.uniform(6.5f, 10.5f);
    // Per-sample fade of the class evidence; heavily faded samples are the
    // recoverable hard cases.
    const float fade = rng.uniform(cfg.fade_min, 0.95f);

    for (int y = 0; y < hw; ++y) {
      for (int x = 0; x < hw; ++x) {
        const bool in = inside_shape(cls, static_cast<float>(x) - cx, static_cast<float>(y) - cy, a);
        for (int c = 0; c < 3; ++c) {
          float v = in ? bg + fade * (color[c] - bg) : bg;
          v += cfg.noise * rng.normal();
          images.at4(i, c, y, x) = std::min(1.0f, std::max(0.0f, v));
        }
      }
    }
  }
}

// --- binary helpers -------------------------------------------------------

void write_u32_be(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_be(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw IoError(kModule, path + ": truncated header");
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

constexpr unsigned char kIdxFloat32 = 0x0D;
constexpr unsigned char kIdxInt32 = 0x0C;

void write_idx_floats(const std::string& path, const Tensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(kModule, path + ": cannot open for writing");
  f.put(0);
  f.put(0);
  f.put(static_cast<char>(kIdxFloat32));
  f.put(static_cast<char>(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) write_u32_be(f, static_cast<std::uint32_t>(t.dim(i)));
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    std::uint32_t bits;
    float v = t[i];
    std::memcpy(&bits, &v, 4);
    write_u32_be(f, bits);
  }
  if (!f) throw IoError(kModule, path + ": write failed");
}

void write_idx_ints(const std::string& path, const std::vector<int>& v) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(kModule, path + ": cannot open for writing");
  f.put(0);
  f.put(0);
  f.put(static_cast<char>(kIdxInt32));
  f.put(1);
  write_u32_be(f, static_cast<std::uint32_t>(v.size()));
  for (int x : v) write_u32_be(f, static_cast<std::uint32_t>(x));
  if (!f) throw IoError(kModule, path + ": write failed");
}

Tensor read_idx_floats(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(kModule, path + ": cannot open");
  unsigned char magic[4];
  f.read(reinterpret_cast<char*>(magic), 4);
  if (!f || magic[0] != 0 || magic[1] != 0) throw IoError(kModule, path + ": corrupt header magic");
  if (magic[2] != kIdxFloat32) {
    throw IoError(kModule, path + ": corrupt header, expected float32 dtype code 0x0D");
  }
  const int ndim = magic[3];
  if (ndim < 1 || ndim > 4) throw IoError(kModule, path + ": corrupt header, bad rank");
  std::vector<int> shape(static_cast<std::size_t>(ndim));
  for (int i = 0; i < ndim; ++i) shape[static_cast<std::size_t>(i)] = static_cast<int>(read_u32_be(f, path));
  Tensor t(shape);
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    const std::uint32_t bits = [&] {
      unsigned char b[4];
      f.read(reinterpret_cast<char*>(b), 4);
      if (!f) throw IoError(kModule, path + ": truncated payload");
      return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
             (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
    }();
    float v;
    std::memcpy(&v, &bits, 4);
    t[i] = v;
  }
  return t;
}

std::vector<int> read_idx_ints(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(kModule, path + ": cannot open");
  unsigned char magic[4];
  f.read(reinterpret_cast<char*>(magic), 4);
  if (!f || magic[0] != 0 || magic[1] != 0) throw IoError(kModule, path + ": corrupt header magic");
  if (magic[2] != kIdxInt32) throw IoError(kModule, path + ": corrupt header, expected int32 dtype code 0x0C");
  if (magic[3] != 1) throw IoError(kModule, path + ": corrupt header, labels must be rank 1");
  const std::uint32_t n = read_u32_be(f, path);
  std::vector<int> v(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    v[i] = static_cast<int>(read_u32_be(f, path));
    if (!f) throw IoError(kModule, path + ": truncated payload");
  }
  return v;
}

void write_raw_floats(const std::string& path, const Tensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(kModule, path + ": cannot open for writing");
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    std::uint32_t bits;
    float v = t[i];
    std::memcpy(&bits, &v, 4);
    unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                          static_cast<unsigned char>(bits >> 16),
                          static_cast<unsigned char>(bits >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
  }
}

Tensor read_raw_floats(const std::string& path, const std::vector<int>& shape) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(kModule, path + ": cannot open");
  Tensor t(shape);
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw IoError(kModule, path + ": truncated payload");
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                               (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) |
                               (static_cast<std::uint32_t>(b[3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    t[i] = v;
  }
  return t;
}

void write_raw_ints(const std::string& path, const std::vector<int>& v) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(kModule, path + ": cannot open for writing");
  for (int x : v) {
    const std::uint32_t bits = static_cast<std::uint32_t>(x);
    unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                          static_cast<unsigned char>(bits >> 16),
                          static_cast<unsigned char>(bits >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
  }
}

std::vector<int> read_raw_ints(const std::string& path, int count) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(kModule, path + ": cannot open");
  std::vector<int> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw IoError(kModule, path + ": truncated payload");
    v[static_cast<std::size_t>(i)] = static_cast<int>(
        static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
        (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24));
  }
  return v;
}

void check_labels(const std::vector<int>& labels, int num_classes, const std::string& where) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw IoError(kModule, where + ": label out of range at index " + std::to_string(i) +
                                 " (got " + std::to_string(labels[i]) + ", classes " +
                                 std::to_string(num_classes) + ")");
    }
  }
}

}  // namespace

Dataset make_synthetic_dataset(const SynthConfig& cfg) {
  if (cfg.num_classes != 10) {
    throw ConfigError(kModule, "synthetic generator defines exactly 10 shape classes");
  }
  if (cfg.train_size < cfg.num_classes || cfg.test_size < 1) {
    throw ConfigError(kModule, "synthetic dataset sizes too small");
  }
  Dataset ds;
  ds.num_classes = cfg.num_classes;
  Rng rng(cfg.seed);
  render_split(ds.train_images, ds.train_labels, cfg.train_size, cfg, rng);
  render_split(ds.test_images, ds.test_labels, cfg.test_size, cfg, rng);
  return ds;
}

Dataset normalize(const Dataset& ds, NormalizationMode mode) {
  if (mode == NormalizationMode::Vanilla01) return ds;
  if (ds.norm == NormalizationMode::ZeroMeanUnitVar) {
    throw ConfigError(kModule, "dataset is already normalized");
  }
  Dataset out = ds;
  const int c = ds.train_images.dim(1);
  const std::int64_t n = ds.train_images.dim(0);
  const std::int64_t hw = static_cast<std::int64_t>(ds.train_images.dim(2)) * ds.train_images.dim(3);
  out.channel_mean.assign(static_cast<std::size_t>(c), 0.0f);
  out.channel_std.assign(static_cast<std::size_t>(c), 0.0f);
  for (int ch = 0; ch < c; ++ch) {
    double sum = 0.0, sq = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const float* p = ds.train_images.data() + (i * c + ch) * hw;
      for (std::int64_t j = 0; j < hw; ++j) {
        sum += p[j];
        sq += static_cast<double>(p[j]) * p[j];
      }
    }
    const double cnt = static_cast<double>(n * hw);
    const double mean = sum / cnt;
    const double var = sq / cnt - mean * mean;
    const double sd = std::sqrt(std::max(0.0, var));
    if (sd == 0.0) {
      throw DomainError(kModule, "degenerate channel " + std::to_string(ch) + ": zero variance");
    }
    out.channel_mean[static_cast<std::size_t>(ch)] = static_cast<float>(mean);
    out.channel_std[static_cast<std::size_t>(ch)] = static_cast<float>(sd);
  }
  auto apply = [&](Tensor& images) {
    const std::int64_t cnt = images.dim(0);
    for (std::int64_t i = 0; i < cnt; ++i) {
      for (int ch = 0; ch < c; ++ch) {
        float* p = images.data() + (i * c + ch) * hw;
        const float m = out.channel_mean[static_cast<std::size_t>(ch)];
        const float inv = 1.0f / out.channel_std[static_cast<std::size_t>(ch)];
        for (std::int64_t j = 0; j < hw; ++j) p[j] = (p[j] - m) * inv;
      }
    }
  };
  apply(out.train_images);
  apply(out.test_images);
  out.norm = NormalizationMode::ZeroMeanUnitVar;
  return out;
}

Dataset denormalize(const Dataset& ds) {
  if (ds.norm == NormalizationMode::Vanilla01) return ds;
  Dataset out = ds;
  const int c = ds.train_images.dim(1);
  const std::int64_t hw = static_cast<std::int64_t>(ds.train_images.dim(2)) * ds.train_images.dim(3);
  auto apply = [&](Tensor& images) {
    const std::int64_t cnt = images.dim(0);
    for (std::int64_t i = 0; i < cnt; ++i) {
      for (int ch = 0; ch < c; ++ch) {
        float* p = images.data() + (i * c + ch) * hw;
        const float m = ds.channel_mean[static_cast<std::size_t>(ch)];
        const float sd = ds.channel_std[static_cast<std::size_t>(ch)];
        for (std::int64_t j = 0; j < hw; ++j) p[j] = p[j] * sd + m;
      }
    }
  };
  apply(out.train_images);
  apply(out.test_images);
  out.norm = NormalizationMode::Vanilla01;
  out.channel_mean.clear();
  out.channel_std.clear();
  return out;
}

void save_dataset(const Dataset& ds, const std::string& dir, DatasetFormat fmt) {
  fs::create_directories(dir);
  if (fmt == DatasetFormat::IdxBinary) {
    if (ds.norm != NormalizationMode::Vanilla01) {
      throw IoError(kModule, "idx_binary stores vanilla datasets only; use raw_tensor_dir");
    }
    write_idx_floats(dir + "/train-images.idx", ds.train_images);
    write_idx_ints(dir + "/train-labels.idx", ds.train_labels);
    write_idx_floats(dir + "/test-images.idx", ds.test_images);
    write_idx_ints(dir + "/test-labels.idx", ds.test_labels);
    return;
  }
  std::ofstream mf(dir + "/manifest.txt");
  if (!mf) throw IoError(kModule, dir + "/manifest.txt: cannot open for writing");
  mf << "num_classes " << ds.num_classes << "\n";
  mf << "normalization " << (ds.norm == NormalizationMode::Vanilla01 ? "vanilla" : "standard") << "\n";
  auto dims = [](const Tensor& t) {
    std::ostringstream os;
    for (int i = 0; i < t.ndim(); ++i) os << " " << t.dim(i);
    return os.str();
  };
  mf << "train_images" << dims(ds.train_images) << "\n";
  mf << "train_labels " << ds.train_labels.size() << "\n";
  mf << "test_images" << dims(ds.test_images) << "\n";
  mf << "test_labels " << ds.test_labels.size() << "\n";
  if (ds.norm == NormalizationMode::ZeroMeanUnitVar) {
    mf << "channel_mean";
    for (float v : ds.channel_mean) mf << " " << std::hexfloat << v << std::defaultfloat;
    mf << "\nchannel_std";
    for (float v : ds.channel_std) mf << " " << std::hexfloat << v << std::defaultfloat;
    mf << "\n";
  }
  write_raw_floats(dir + "/train_images.f32", ds.train_images);
  write_raw_ints(dir + "/train_labels.i32", ds.train_labels);
  write_raw_floats(dir + "/test_images.f32", ds.test_images);
  write_raw_ints(dir + "/test_labels.i32", ds.test_labels);
}

Dataset load_dataset(const std::string& dir, DatasetFormat fmt) {
  Dataset ds;
  if (fmt == DatasetFormat::IdxBinary) {
    ds.train_images = read_idx_floats(dir + "/train-images.idx");
    ds.train_labels = read_idx_ints(dir + "/train-labels.idx");
    ds.test_images = read_idx_floats(dir + "/test-images.idx");
    ds.test_labels = read_idx_ints(dir + "/test-labels.idx");
    int mx = 0;
    for (int l : ds.train_labels) mx = std::max(mx, l);
    for (int l : ds.test_labels) mx = std::max(mx, l);
    ds.num_classes = mx + 1;
    check_labels(ds.train_labels, ds.num_classes, dir + "/train-labels.idx");
    check_labels(ds.test_labels, ds.num_classes, dir + "/test-labels.idx");
  } else {
    std::ifstream mf(dir + "/manifest.txt");
    if (!mf) throw IoError(kModule, dir + "/manifest.txt: cannot open");
    std::string line;
    std::vector<int> tr_shape, te_shape;
    int tr_labels = -1, te_labels = -1;
    while (std::getline(mf, line)) {
      std::istringstream is(line);
      std::string key;
      is >> key;
      if (key.empty()) continue;
      if (key == "num_classes") {
        is >> ds.num_classes;
      } else if (key == "normalization") {
        std::string v;
        is >> v;
        if (v == "vanilla") ds.norm = NormalizationMode::Vanilla01;
        else if (v == "standard") ds.norm = NormalizationMode::ZeroMeanUnitVar;
        else throw IoError(kModule, dir + ": corrupt header, unknown normalization '" + v + "'");
      } else if (key == "train_images" || key == "test_images") {
        std::vector<int>& s = (key == "train_images") ? tr_shape : te_shape;
        int d;
        while (is >> d) s.push_back(d);
      } else if (key == "train_labels") {
        is >> tr_labels;
      } else if (key == "test_labels") {
        is >> te_labels;
      } else if (key == "channel_mean" || key == "channel_std") {
        std::vector<float>& v = (key == "channel_mean") ? ds.channel_mean : ds.channel_std;
        std::string tok;
        while (is >> tok) v.push_back(std::strtof(tok.c_str(), nullptr));
      } else {
        throw IoError(kModule, dir + ": corrupt header, unknown manifest key '" + key + "'");
      }
    }
    if (ds.num_classes <= 0 || tr_shape.size() != 4 || te_shape.size() != 4 || tr_labels < 0 ||
        te_labels < 0) {
      throw IoError(kModule, dir + ": corrupt header, incomplete manifest");
    }
    ds.train_images = read_raw_floats(dir + "/train_images.f32", tr_shape);
    ds.train_labels = read_raw_ints(dir + "/train_labels.i32", tr_labels);
    ds.test_images = read_raw_floats(dir + "/test_images.f32", te_shape);
    ds.test_labels = read_raw_ints(dir + "/test_labels.i32", te_labels);
    check_labels(ds.train_labels, ds.num_classes, dir + "/train_labels.i32");
    check_labels(ds.test_labels, ds.num_classes, dir + "/test_labels.i32");
  }
  if (ds.train_images.dim(0) != static_cast<int>(ds.train_labels.size()) ||
      ds.test_images.dim(0) != static_cast<int>(ds.test_labels.size())) {
    throw IoError(kModule, dir + ": image count does not match label count");
  }
  return ds;
}

Tensor gather_rows(const Tensor& t, const std::vector<int>& indices) {
  std::vector<int> shape = t.shape();
  shape[0] = static_cast<int>(indices.size());
  Tensor out(shape);
  const std::int64_t row = t.numel() / t.dim(0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int src = indices[i];
    std::memcpy(out.data() + static_cast<std::int64_t>(i) * row, t.data() + src * row,
                sizeof(float) * static_cast<std::size_t>(row));
  }
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<int>& indices) {
  std::vector<int> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) out[i] = labels[static_cast<std::size_t>(indices[i])];
  return out;
}

}  // namespace pgn
