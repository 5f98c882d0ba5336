// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "w2l/adam.hpp"
#include "w2l/alphabet.hpp"
#include "w2l/common.hpp"
#include "w2l/net.hpp"

namespace w2l {

// Layout (all integers little-endian):
//   0  char[8]  magic "W2LCKPT\0"
//   8  u32      format version
//   12 u32      CRC-32 of the payload
//   16 u64      payload length in bytes
//   24 payload:
//        u32 n, then n bytes of UTF-8 JSON {"n_mels", "layers", "alphabet"}
//        u64 training step
//        per layer: f32 weight[out][in][kw], f32 bias[out]
//        u8 has_adam; if 1: f64 lr, beta1, beta2, eps; u64 adam step;
//          per layer: u8 present; if 1: f32 m_w, v_w, m_b, v_b
inline constexpr char kCheckpointMagic[8] = {'W', '2', 'L', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams<float> params;
  std::optional<AdamState<float>> adam;
  std::uint64_t step = 0;
};

inline nlohmann::json config_to_json(const ModelConfig& config, const Alphabet& alphabet) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : config.layers) {
    layers.push_back({{"kernel_width", l.kernel_width},
                      {"stride", l.stride},
                      {"in_channels", l.in_channels},
                      {"out_channels", l.out_channels},
                      {"activation", to_string(l.activation)}});
  }
  return {{"n_mels", config.n_mels}, {"layers", layers}, {"alphabet", alphabet.labels()}};
}

inline std::pair<ModelConfig, Alphabet> config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.n_mels = j.at("n_mels").get<int>();
    for (const auto& l : j.at("layers")) {
      c.layers.push_back({l.at("kernel_width").get<int>(), l.at("stride").get<int>(), l.at("in_channels").get<int>(),
                          l.at("out_channels").get<int>(), activation_from_string(l.at("activation").get<std::string>())});
    }
    c.validate();
    return {c, Alphabet(j.at("alphabet").get<std::vector<std::string>>())};
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid model config block: ") + e.what());
  }
}

namespace detail {

class ByteWriter {
public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    u32(v);
  }
  void f64(double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    u64(v);
  }
  void bytes(const std::string& s) { buf_ += s; }
  template <typename Derived>
  void floats(const Eigen::DenseBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) f32(m.derived().data()[i]);
  }
  std::string& str() { return buf_; }

private:
  std::string buf_;
};

class ByteReader {
public:
  ByteReader(const char* data, std::size_t size) : p_(data), end_(data + size) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(*take(1)); }
  std::uint32_t u32() {
    const auto* b = reinterpret_cast<const unsigned char*>(take(4));
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto* b = reinterpret_cast<const unsigned char*>(take(8));
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  float f32() {
    const std::uint32_t v = u32();
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }
  double f64() {
    const std::uint64_t v = u64();
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  std::string bytes(std::size_t n) { return {take(n), n}; }
  template <typename Derived>
  void floats(Eigen::DenseBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.derived().data()[i] = f32();
  }
  bool done() const { return p_ == end_; }

private:
  const char* take(std::size_t n) {
    if (static_cast<std::size_t>(end_ - p_) < n) throw Error("truncated checkpoint payload");
    const char* out = p_;
    p_ += n;
    return out;
  }
  const char* p_;
  const char* end_;
};

inline std::uint32_t crc32_of(const std::string& payload) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
}

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
  ck.params.validate();
  detail::ByteWriter w;
  const std::string meta = config_to_json(ck.params.config, ck.params.alphabet).dump();
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.bytes(meta);
  w.u64(ck.step);
  for (const auto& l : ck.params.layers) {
    w.floats(l.weight);
    w.floats(l.bias);
  }
  w.u8(ck.adam ? 1 : 0);
  if (ck.adam) {
    const auto& a = *ck.adam;
    if (static_cast<int>(a.layers.size()) != ck.params.num_layers()) {
      throw Error("optimizer state does not match model layer count");
    }
    w.f64(a.hyper.lr);
    w.f64(a.hyper.beta1);
    w.f64(a.hyper.beta2);
    w.f64(a.hyper.eps);
    w.u64(a.step);
    for (const auto& m : a.layers) {
      w.u8(m ? 1 : 0);
      if (!m) continue;
      w.floats(m->m_weight);
      w.floats(m->v_weight);
      w.floats(m->m_bias);
      w.floats(m->v_bias);
    }
  }
  const std::string& payload = w.str();

  detail::ByteWriter h;
  h.bytes(std::string(kCheckpointMagic, sizeof(kCheckpointMagic)));
  h.u32(kCheckpointVersion);
  h.u32(detail::crc32_of(payload));
  h.u64(payload.size());
  h.bytes(payload);
  return std::move(h.str());
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw Error("not a checkpoint file (bad magic)");
  }
  detail::ByteReader head(bytes.data() + 8, 16);
  const std::uint32_t version = head.u32();
  if (version != kCheckpointVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t crc = head.u32();
  const std::uint64_t size = head.u64();
  if (bytes.size() - 24 != size) throw Error("corrupt checkpoint: payload length mismatch");
  const std::string payload = bytes.substr(24);
  if (detail::crc32_of(payload) != crc) throw Error("corrupt checkpoint: checksum mismatch");

  detail::ByteReader r(payload.data(), payload.size());
  Checkpoint ck;
  const std::uint32_t meta_len = r.u32();
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.bytes(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("corrupt checkpoint: config block: ") + e.what());
  }
  auto [config, alphabet] = config_from_json(meta);
  ck.params.config = std::move(config);
  ck.params.alphabet = std::move(alphabet);
  ck.step = r.u64();
  for (const auto& spec : ck.params.config.layers) {
    Layer<float> l{Mat<float>(spec.out_channels, spec.fan_in()), Vec<float>(spec.out_channels)};
    r.floats(l.weight);
    r.floats(l.bias);
    ck.params.layers.push_back(std::move(l));
  }
  if (r.u8() != 0) {
    AdamState<float> a;
    a.hyper.lr = r.f64();
    a.hyper.beta1 = r.f64();
    a.hyper.beta2 = r.f64();
    a.hyper.eps = r.f64();
    a.step = r.u64();
    for (const auto& p : ck.params.layers) {
      if (r.u8() == 0) {
        a.layers.emplace_back();
        continue;
      }
      AdamMoments<float> m{Mat<float>(p.weight.rows(), p.weight.cols()), Mat<float>(p.weight.rows(), p.weight.cols()),
                           Vec<float>(p.bias.size()), Vec<float>(p.bias.size())};
      r.floats(m.m_weight);
      r.floats(m.v_weight);
      r.floats(m.m_bias);
      r.floats(m.v_bias);
      a.layers.emplace_back(std::move(m));
    }
    ck.adam = std::move(a);
  }
  if (!r.done()) throw Error("corrupt checkpoint: trailing bytes");
  ck.params.validate();
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto bytes = encode_checkpoint(ck);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint '" + tmp + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing checkpoint '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace w2l
