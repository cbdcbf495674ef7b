#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "adff/model.hpp"
#include "adff/tensor.hpp"

namespace adff {

// Checkpoints are a flat list of named tensors (name, shape, little-endian
// float32 data) prefixed with the serialized model configuration. Writing a
// freshly loaded checkpoint reproduces it byte for byte.

namespace detail {

inline void put_u32le(std::string& s, uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline uint32_t get_u32le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline std::string task_name(Task t) { return to_string(t); }

inline Task task_from(const std::string& s) {
  if (s == "valence") return Task::valence;
  if (s == "arousal") return Task::arousal;
  if (s == "multi") return Task::multi;
  if (s == "two_v") return Task::two_v;
  if (s == "two_a") return Task::two_a;
  if (s == "four") return Task::four;
  throw std::runtime_error("unknown task '" + s + "'");
}

inline Variant variant_from(const std::string& s) {
  if (s == "full") return Variant::full;
  if (s == "no_se") return Variant::no_se;
  if (s == "no_tflm") return Variant::no_tflm;
  throw std::runtime_error("unknown variant '" + s + "'");
}

}  // namespace detail

inline std::string serialize_model_config(const ModelConfig& cfg) {
  std::ostringstream s;
  s.precision(17);
  s << "seg_num=" << cfg.seg_num << "\n";
  s << "width=" << cfg.width << "\n";
  s << "se_reduction=" << cfg.se_reduction << "\n";
  s << "lstm_hidden=" << cfg.lstm_hidden << "\n";
  s << "lstm_layers=" << cfg.lstm_layers << "\n";
  s << "head_dims=" << cfg.head_dims[0] << "," << cfg.head_dims[1] << "\n";
  s << "task=" << to_string(cfg.task) << "\n";
  s << "variant=" << to_string(cfg.variant) << "\n";
  return s.str();
}

inline ModelConfig parse_model_config(const std::string& text) {
  ModelConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "seg_num") cfg.seg_num = std::stoi(val);
    else if (key == "width") cfg.width = std::stod(val);
    else if (key == "se_reduction") cfg.se_reduction = std::stoi(val);
    else if (key == "lstm_hidden") cfg.lstm_hidden = std::stoi(val);
    else if (key == "lstm_layers") cfg.lstm_layers = std::stoi(val);
    else if (key == "head_dims") {
      cfg.head_dims.clear();
      std::istringstream hs(val);
      std::string tok;
      while (std::getline(hs, tok, ',')) cfg.head_dims.push_back(std::stoi(tok));
    } else if (key == "task") cfg.task = detail::task_from(val);
    else if (key == "variant") cfg.variant = detail::variant_from(val);
    else throw std::runtime_error("unknown checkpoint config key '" + key + "'");
  }
  return cfg;
}

inline void save_checkpoint(const std::string& path, AdffModel& model) {
  std::string out = "ADFFCKPT";
  detail::put_u32le(out, 1);  // format version
  const std::string cfg = serialize_model_config(model.config());
  detail::put_u32le(out, static_cast<uint32_t>(cfg.size()));
  out += cfg;
  auto state = model.named_state();
  detail::put_u32le(out, static_cast<uint32_t>(state.size()));
  for (auto& [name, tensor] : state) {
    detail::put_u32le(out, static_cast<uint32_t>(name.size()));
    out += name;
    detail::put_u32le(out, static_cast<uint32_t>(tensor->ndim()));
    for (int d = 0; d < tensor->ndim(); ++d)
      detail::put_u32le(out, static_cast<uint32_t>(tensor->dim(d)));
    for (int64_t i = 0; i < tensor->size(); ++i) {
      const float v = static_cast<float>((*tensor)[i]);
      uint32_t u;
      std::memcpy(&u, &v, 4);
      detail::put_u32le(out, u);
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("short checkpoint write: " + path);
}

// Reconstructs the model (config and weights) stored at `path`.
inline AdffModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  size_t pos = 0;
  auto need = [&](size_t n) {
    if (pos + n > bytes.size()) throw std::runtime_error("truncated checkpoint " + path);
  };
  need(8);
  if (std::memcmp(bytes.data(), "ADFFCKPT", 8) != 0)
    throw std::runtime_error("bad checkpoint magic in " + path);
  pos = 8;
  auto read_u32 = [&]() {
    need(4);
    const uint32_t v = detail::get_u32le(bytes.data() + pos);
    pos += 4;
    return v;
  };
  const uint32_t version = read_u32();
  if (version != 1) throw std::runtime_error("unsupported checkpoint version");
  const uint32_t cfg_len = read_u32();
  need(cfg_len);
  const std::string cfg_text(reinterpret_cast<const char*>(bytes.data() + pos), cfg_len);
  pos += cfg_len;
  AdffModel model(parse_model_config(cfg_text), /*init_seed=*/0);

  auto state = model.named_state();
  const uint32_t n_tensors = read_u32();
  if (n_tensors != state.size())
    throw std::runtime_error("checkpoint tensor count mismatch in " + path);
  for (uint32_t k = 0; k < n_tensors; ++k) {
    const uint32_t name_len = read_u32();
    need(name_len);
    const std::string name(reinterpret_cast<const char*>(bytes.data() + pos), name_len);
    pos += name_len;
    if (name != state[k].first)
      throw std::runtime_error("checkpoint tensor order mismatch: expected '" + state[k].first +
                               "', found '" + name + "'");
    Tensor& t = *state[k].second;
    const uint32_t ndim = read_u32();
    if (static_cast<int>(ndim) != t.ndim())
      throw std::runtime_error("checkpoint rank mismatch for " + name);
    for (uint32_t d = 0; d < ndim; ++d) {
      if (static_cast<int>(read_u32()) != t.dim(static_cast<int>(d)))
        throw std::runtime_error("checkpoint shape mismatch for " + name);
    }
    for (int64_t i = 0; i < t.size(); ++i) {
      const uint32_t u = read_u32();
      float v;
      std::memcpy(&v, &u, 4);
      t[i] = static_cast<double>(v);
    }
  }
  return model;
}

}  // namespace adff
