#include "pgn/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "pgn/errors.hpp"

namespace fs = std::filesystem;

namespace pgn {

namespace {

constexpr const char* kModule = "data-io";

struct TensorRef {
  std::string name;
  Tensor* tensor;
};

// Every parameter contributes value/m/v buffers; step counts are text lines.
void collect(const std::vector<NetEntry>& nets, std::vector<TensorRef>& tensors,
             std::vector<std::pair<std::string, std::int64_t*>>& steps) {
  for (const NetEntry& e : nets) {
    if (e.net == nullptr) throw ContractError(kModule, "checkpoint net entry is null");
    for (Parameter* p : e.net->parameters()) {
      const std::string base = e.name + "/" + p->name;
      tensors.push_back({base + ":value", &p->value});
      tensors.push_back({base + ":m", &p->adam_m});
      tensors.push_back({base + ":v", &p->adam_v});
      steps.emplace_back(base, &p->step_count);
    }
  }
}

void write_le_floats(std::ofstream& f, const Tensor& t) {
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

void read_le_floats(std::ifstream& f, Tensor& t, const std::string& where) {
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw IoError(kModule, where + ": payload/manifest length mismatch (truncated)");
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                               (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) |
                               (static_cast<std::uint32_t>(b[3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    t[i] = v;
  }
}

}  // namespace

void save_checkpoint(const std::string& dir, const std::vector<NetEntry>& nets,
                     const CheckpointMeta& meta) {
  std::vector<TensorRef> tensors;
  std::vector<std::pair<std::string, std::int64_t*>> steps;
  collect(nets, tensors, steps);

  const fs::path target(dir);
  const fs::path tmp = target.string() + ".tmp";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp);

  {
    std::ofstream payload(tmp / "payload.bin", std::ios::binary);
    if (!payload) throw IoError(kModule, (tmp / "payload.bin").string() + ": cannot open");
    std::ofstream manifest(tmp / "manifest.txt");
    if (!manifest) throw IoError(kModule, (tmp / "manifest.txt").string() + ": cannot open");

    std::int64_t total_bytes = 0;
    for (const TensorRef& r : tensors) total_bytes += r.tensor->numel() * 4;
    manifest << "pgn-checkpoint 1\n";
    manifest << "payload_bytes " << total_bytes << "\n";
    manifest << "rng_state " << meta.rng_state << "\n";
    manifest << "epochs_completed " << meta.epochs_completed << "\n";

    std::int64_t offset = 0;
    for (const TensorRef& r : tensors) {
      manifest << "tensor " << r.name << " dims";
      for (int i = 0; i < r.tensor->ndim(); ++i) manifest << " " << r.tensor->dim(i);
      manifest << " offset " << offset << "\n";
      write_le_floats(payload, *r.tensor);
      offset += r.tensor->numel() * 4;
    }
    for (const auto& [name, count] : steps) manifest << "steps " << name << " " << *count << "\n";
    if (!payload || !manifest) throw IoError(kModule, dir + ": checkpoint write failed");
  }
  {
    std::ofstream cfg(tmp / "config.ini");
    cfg << meta.config_text;
    if (!cfg) throw IoError(kModule, dir + ": config snapshot write failed");
  }

  fs::remove_all(target, ec);
  fs::rename(tmp, target);
}

std::string read_checkpoint_config(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "config.ini");
  if (!in) throw IoError(kModule, dir + "/config.ini: cannot open");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> checkpoint_tensor_names(const std::string& dir) {
  std::ifstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw IoError(kModule, dir + "/manifest.txt: cannot open");
  std::vector<std::string> names;
  std::string line;
  while (std::getline(manifest, line)) {
    std::istringstream is(line);
    std::string key, name;
    is >> key;
    if (key == "tensor" && (is >> name)) names.push_back(name);
  }
  return names;
}

CheckpointMeta load_checkpoint_into(const std::string& dir, const std::vector<NetEntry>& nets) {
  std::vector<TensorRef> tensors;
  std::vector<std::pair<std::string, std::int64_t*>> steps;
  collect(nets, tensors, steps);

  std::ifstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw IoError(kModule, dir + "/manifest.txt: cannot open");

  CheckpointMeta meta;
  meta.config_text = read_checkpoint_config(dir);

  struct Entry {
    std::vector<int> dims;
    std::int64_t offset = 0;
  };
  std::map<std::string, Entry> entries;
  std::map<std::string, std::int64_t> step_counts;
  std::int64_t payload_bytes = -1;

  std::string line;
  if (!std::getline(manifest, line) || line.rfind("pgn-checkpoint", 0) != 0) {
    throw IoError(kModule, dir + ": not a pgn checkpoint (bad manifest header)");
  }
  while (std::getline(manifest, line)) {
    std::istringstream is(line);
    std::string key;
    is >> key;
    if (key.empty()) continue;
    if (key == "payload_bytes") {
      is >> payload_bytes;
    } else if (key == "rng_state") {
      is >> meta.rng_state;
    } else if (key == "epochs_completed") {
      is >> meta.epochs_completed;
    } else if (key == "tensor") {
      std::string name, dims_kw, off_kw;
      Entry e;
      is >> name >> dims_kw;
      if (dims_kw != "dims") throw IoError(kModule, dir + ": malformed manifest tensor line");
      std::string tok;
      while (is >> tok) {
        if (tok == "offset") {
          is >> e.offset;
          break;
        }
        e.dims.push_back(std::stoi(tok));
      }
      entries[name] = e;
    } else if (key == "steps") {
      std::string name;
      std::int64_t c;
      is >> name >> c;
      step_counts[name] = c;
    } else {
      throw IoError(kModule, dir + ": unknown manifest key '" + key + "'");
    }
  }

  const fs::path payload_path = fs::path(dir) / "payload.bin";
  std::ifstream payload(payload_path, std::ios::binary);
  if (!payload) throw IoError(kModule, payload_path.string() + ": cannot open");
  payload.seekg(0, std::ios::end);
  const std::int64_t actual = payload.tellg();
  if (payload_bytes < 0 || actual != payload_bytes) {
    throw IoError(kModule, dir + ": payload/manifest length mismatch (manifest says " +
                               std::to_string(payload_bytes) + " bytes, file has " +
                               std::to_string(actual) + ")");
  }

  for (TensorRef& r : tensors) {
    auto it = entries.find(r.name);
    if (it == entries.end()) throw IoError(kModule, dir + ": checkpoint is missing tensor " + r.name);
    if (it->second.dims != r.tensor->shape()) {
      throw IoError(kModule, dir + ": tensor " + r.name + " has shape " +
                                 shape_to_string(it->second.dims) + ", expected " +
                                 r.tensor->shape_str());
    }
    payload.seekg(it->second.offset);
    read_le_floats(payload, *r.tensor, dir + ":" + r.name);
  }
  for (auto& [name, count] : steps) {
    auto it = step_counts.find(name);
    if (it == step_counts.end()) throw IoError(kModule, dir + ": missing step count for " + name);
    *count = it->second;
  }
  return meta;
}

}  // namespace pgn
