#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "opcast/config.hpp"
#include "opcast/grid.hpp"

namespace opcast {

struct ModelConfig {
  int nf = 0;
  int days = 0;
  int hidden = 16;
  int kernel = 3;
  int classes = 2;
  std::vector<double> thresholds{0.2, 0.4, 0.6, 0.8};

  /// Throws ShapeMismatch (bad sizes, even kernel, classes != 2) or BadThresholds.
  void validate() const;
};

/// Throws BadThresholds unless strictly ascending inside (0, 1).
void validate_thresholds(const std::vector<double>& thresholds);

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;

  std::size_t size() const;
};

/// Named tensors of a single-layer ConvLSTM plus a per-pixel 2-class head:
///
///   W_x{i,f,o,g}  (hidden, nf, k, k)
///   W_h{i,f,o,g}  (hidden, hidden, k, k)
///   b_{i,f,o,g}   (hidden)
///   head_W        (2, hidden)   rows ordered [no_fire, fire]
///   head_b        (2)
struct ConvLstmWeights {
  std::map<std::string, Tensor> tensors;

  /// Throws MissingTensor.
  const Tensor& at(const std::string& name) const;
};

/// Every tensor name and its expected shape under `cfg`.
std::map<std::string, std::vector<std::size_t>> expected_shapes(const ModelConfig& cfg);

/// Throws MissingTensor, ShapeMismatch or NonFiniteWeight.
void validate_weights(const ModelConfig& cfg, const ConvLstmWeights& w);

struct LoadedModel {
  ModelConfig config;
  ConvLstmWeights weights;
};

// OPFW weight file:
//   "OPFW" | version u8 | manifest length u32 LE | JSON manifest | float32 LE payloads
// manifest = {"config": {"nf", "days", "hidden", "kernel"},
//             "tensors": {name: {"shape": [...], "dtype": "float32", "offset": n}}}
// where offset counts bytes from the start of the payload section.
inline constexpr std::uint8_t kOpfwVersion = 1;

std::vector<std::uint8_t> encode_weights(const ModelConfig& cfg, const ConvLstmWeights& w);
/// Throws BadMagic, TruncatedPayload, ShapeMismatch, MissingTensor, NonFiniteWeight.
LoadedModel decode_weights(std::span<const std::uint8_t> bytes);
LoadedModel load_weights(const std::filesystem::path& path);
void write_weights(const std::filesystem::path& path, const ModelConfig& cfg, const ConvLstmWeights& w);

/// Weights drawn uniformly from [-scale, scale] with a fixed seed.
ConvLstmWeights random_weights(const ModelConfig& cfg, std::uint64_t seed, float scale = 0.5f);
ConvLstmWeights zero_weights(const ModelConfig& cfg);

/// Hidden and cell state, each (hidden, h, w).
struct CellState {
  std::vector<float> h;
  std::vector<float> c;
};

CellState zero_state(const ModelConfig& cfg, std::size_t height, std::size_t width);

/// One ConvLSTM step on `x` laid out (nf, height, width), same padding with
/// zero borders. Work is split over hidden channels across `threads`
/// without changing the result. Throws ShapeMismatch.
CellState convlstm_cell_step(std::span<const float> x, std::size_t height, std::size_t width,
                             const CellState& state, const ModelConfig& cfg, const ConvLstmWeights& w,
                             int threads = 1);

struct ProvenanceRecord {
  std::string variable;
  Date requested;
  Date served;
  Contingency fallback = Contingency::none;
};

/// "t2m:2024-07-09<-2024-07-08(latest-date);..." for fallbacks only, "none" otherwise.
std::string format_provenance(const std::vector<ProvenanceRecord>& records);

struct DangerMap {
  Grid p_fire;
  Grid p_nofire;
  /// Integer categories >= 1 stored as floats on the p_fire grid.
  Grid category;
  Date forecast_date{};
  std::string pilot;
  std::vector<double> thresholds;
  std::vector<ProvenanceRecord> provenance;
};

struct InferOptions {
  InferenceMode mode = InferenceMode::dense;
  /// Odd window size for patch mode.
  int patch = 15;
  int threads = 1;
};

/// Runs the cell over the days axis from zero state, then the head and a
/// 2-way softmax per pixel. Patch mode evaluates each pixel on the
/// patch x patch window centred on it and keeps the centre output.
/// Throws ShapeMismatch.
DangerMap infer_region(const SampleTensor& sample, const ModelConfig& cfg, const ConvLstmWeights& w,
                       const InferOptions& opts = {});

/// category = 1 + number of thresholds t with t <= p, so a probability
/// equal to a threshold falls in the upper class.
/// Throws BadThresholds or BadProbability.
Grid classify_danger(const Grid& p_fire, const std::vector<double>& thresholds);
int danger_category(double p, const std::vector<double>& thresholds);

}  // namespace opcast
