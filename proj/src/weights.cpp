#include <bit>
#include <cmath>
#include <cstring>
#include <json.hpp>
#include <random>

#include "opcast/error.hpp"
#include "opcast/inference.hpp"
#include "opcast/io.hpp"

namespace opcast {

namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'O', 'P', 'F', 'W'};
constexpr const char* kGates[4] = {"i", "f", "o", "g"};

std::string shape_text(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t k = 0; k < shape.size(); ++k) s += (k ? ", " : "") + std::to_string(shape[k]);
  return s + ")";
}

int config_int(const json& cfg, const char* key) {
  if (!cfg.contains(key) || !cfg[key].is_number_integer()) {
    throw Error(Errc::ShapeMismatch, "config", std::string("manifest config lacks integer '") + key + "'");
  }
  return cfg[key].get<int>();
}

}  // namespace

std::size_t Tensor::size() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

const Tensor& ConvLstmWeights::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw Error(Errc::MissingTensor, name);
  return it->second;
}

void validate_thresholds(const std::vector<double>& thresholds) {
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    const double t = thresholds[k];
    if (!(t > 0.0 && t < 1.0)) throw Error(Errc::BadThresholds, std::to_string(t), "thresholds must lie in (0, 1)");
    if (k > 0 && !(thresholds[k - 1] < t)) {
      throw Error(Errc::BadThresholds, std::to_string(t), "thresholds must be strictly ascending");
    }
  }
}

void ModelConfig::validate() const {
  if (nf <= 0 || days <= 0 || hidden <= 0 || kernel <= 0) {
    throw Error(Errc::ShapeMismatch, "config", "nf, days, hidden and kernel must be positive");
  }
  if (kernel % 2 == 0) throw Error(Errc::ShapeMismatch, "kernel", "kernel size must be odd");
  if (classes != 2) throw Error(Errc::ShapeMismatch, "classes", "the head has exactly two classes");
  validate_thresholds(thresholds);
}

std::map<std::string, std::vector<std::size_t>> expected_shapes(const ModelConfig& cfg) {
  const auto h = static_cast<std::size_t>(cfg.hidden);
  const auto nf = static_cast<std::size_t>(cfg.nf);
  const auto k = static_cast<std::size_t>(cfg.kernel);
  std::map<std::string, std::vector<std::size_t>> out;
  for (const char* g : kGates) {
    out[std::string("W_x") + g] = {h, nf, k, k};
    out[std::string("W_h") + g] = {h, h, k, k};
    out[std::string("b_") + g] = {h};
  }
  out["head_W"] = {2, h};
  out["head_b"] = {2};
  return out;
}

void validate_weights(const ModelConfig& cfg, const ConvLstmWeights& w) {
  for (const auto& [name, shape] : expected_shapes(cfg)) {
    const Tensor& t = w.at(name);
    if (t.shape != shape) {
      throw Error(Errc::ShapeMismatch, name, "expected " + shape_text(shape) + ", found " + shape_text(t.shape));
    }
    if (t.data.size() != t.size()) throw Error(Errc::ShapeMismatch, name, "data length does not match shape");
    for (float v : t.data) {
      if (!std::isfinite(v)) throw Error(Errc::NonFiniteWeight, name);
    }
  }
}

std::vector<std::uint8_t> encode_weights(const ModelConfig& cfg, const ConvLstmWeights& w) {
  validate_weights(cfg, w);
  json tensors = json::object();
  std::size_t offset = 0;
  for (const auto& [name, t] : w.tensors) {
    tensors[name] = {{"shape", t.shape}, {"dtype", "float32"}, {"offset", offset}};
    offset += 4 * t.data.size();
  }
  const json manifest = {
      {"config", {{"nf", cfg.nf}, {"days", cfg.days}, {"hidden", cfg.hidden}, {"kernel", cfg.kernel}}},
      {"tensors", tensors}};
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kOpfwVersion);
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(len >> (8 * k)));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& [name, t] : w.tensors) {
    for (float v : t.data) {
      const auto u = std::bit_cast<std::uint32_t>(v);
      for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(u >> (8 * k)));
    }
  }
  return out;
}

LoadedModel decode_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error(Errc::BadMagic, "OPFW");
  if (bytes[4] != kOpfwVersion) {
    throw Error(Errc::BadMagic, "OPFW", "unsupported version " + std::to_string(bytes[4]));
  }
  if (bytes.size() < 9) throw Error(Errc::TruncatedPayload, "OPFW", "file ends inside the manifest length");
  const std::uint32_t len = std::uint32_t{bytes[5]} | std::uint32_t{bytes[6]} << 8 | std::uint32_t{bytes[7]} << 16 |
                            std::uint32_t{bytes[8]} << 24;
  if (9 + std::size_t{len} > bytes.size()) throw Error(Errc::TruncatedPayload, "OPFW", "manifest extends past end");

  json manifest;
  try {
    manifest = json::parse(bytes.begin() + 9, bytes.begin() + 9 + len);
  } catch (const json::exception& e) {
    throw Error(Errc::BadMagic, "OPFW", std::string("unreadable manifest: ") + e.what());
  }
  const auto payload = bytes.subspan(9 + len);

  LoadedModel out;
  const json cfg = manifest.value("config", json::object());
  out.config.nf = config_int(cfg, "nf");
  out.config.days = config_int(cfg, "days");
  out.config.hidden = config_int(cfg, "hidden");
  out.config.kernel = config_int(cfg, "kernel");
  out.config.validate();

  const json tensors = manifest.value("tensors", json::object());
  for (const auto& [name, desc] : tensors.items()) {
    Tensor t;
    try {
      t.shape = desc.at("shape").get<std::vector<std::size_t>>();
      if (desc.value("dtype", std::string("float32")) != "float32") {
        throw Error(Errc::ShapeMismatch, name, "only float32 tensors are supported");
      }
      const auto offset = desc.at("offset").get<std::size_t>();
      if (offset + 4 * t.size() > payload.size()) {
        throw Error(Errc::TruncatedPayload, name, "tensor data extends past end of file");
      }
      t.data.resize(t.size());
      const std::uint8_t* p = payload.data() + offset;
      for (std::size_t k = 0; k < t.data.size(); ++k, p += 4) {
        t.data[k] = std::bit_cast<float>(std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 |
                                         std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24);
      }
    } catch (const json::exception& e) {
      throw Error(Errc::ShapeMismatch, name, std::string("bad tensor descriptor: ") + e.what());
    }
    out.weights.tensors.emplace(name, std::move(t));
  }
  validate_weights(out.config, out.weights);
  return out;
}

LoadedModel load_weights(const std::filesystem::path& path) { return decode_weights(read_file_bytes(path)); }

void write_weights(const std::filesystem::path& path, const ModelConfig& cfg, const ConvLstmWeights& w) {
  write_file_atomic(path, encode_weights(cfg, w));
}

ConvLstmWeights random_weights(const ModelConfig& cfg, std::uint64_t seed, float scale) {
  std::mt19937_64 rng(seed);
  ConvLstmWeights w;
  for (const auto& [name, shape] : expected_shapes(cfg)) {
    Tensor t{shape, {}};
    t.data.resize(t.size());
    for (float& v : t.data) {
      // uniform in [0, 1) from the top 24 bits
      const float u = static_cast<float>(rng() >> 40) * 0x1.0p-24f;
      v = scale * (2.0f * u - 1.0f);
    }
    w.tensors.emplace(name, std::move(t));
  }
  return w;
}

ConvLstmWeights zero_weights(const ModelConfig& cfg) {
  ConvLstmWeights w;
  for (const auto& [name, shape] : expected_shapes(cfg)) {
    Tensor t{shape, {}};
    t.data.assign(t.size(), 0.0f);
    w.tensors.emplace(name, std::move(t));
  }
  return w;
}

}  // namespace opcast
