#include <algorithm>
#include <cmath>
#include <thread>

#include "opcast/error.hpp"
#include "opcast/inference.hpp"

namespace opcast {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// acc[i, j] += sum_{c, u, v} kernel[c, u, v] * in[c, i + u - r, j + v - r], zero outside.
void conv_accumulate(std::vector<double>& acc, const float* in, std::size_t channels, const float* kernel,
                     std::size_t k, std::size_t height, std::size_t width) {
  const auto r = static_cast<std::ptrdiff_t>(k / 2);
  const auto H = static_cast<std::ptrdiff_t>(height), W = static_cast<std::ptrdiff_t>(width);
  for (std::size_t c = 0; c < channels; ++c) {
    const float* plane = in + c * height * width;
    for (std::ptrdiff_t u = 0; u < static_cast<std::ptrdiff_t>(k); ++u) {
      for (std::ptrdiff_t v = 0; v < static_cast<std::ptrdiff_t>(k); ++v) {
        const double wt = kernel[(c * k + u) * k + v];
        if (wt == 0.0) continue;
        const std::ptrdiff_t di = u - r, dj = v - r;
        const std::ptrdiff_t i0 = std::max<std::ptrdiff_t>(0, -di), i1 = std::min(H, H - di);
        const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, -dj), j1 = std::min(W, W - dj);
        for (std::ptrdiff_t i = i0; i < i1; ++i) {
          double* out = acc.data() + i * W;
          const float* src = plane + (i + di) * W + dj;
          for (std::ptrdiff_t j = j0; j < j1; ++j) out[j] += wt * src[j];
        }
      }
    }
  }
}

std::size_t checked_plane(const ModelConfig& cfg, std::span<const float> x, std::size_t height, std::size_t width,
                          const CellState& state) {
  cfg.validate();
  const std::size_t plane = height * width;
  if (plane == 0) throw Error(Errc::ShapeMismatch, "x", "empty spatial extent");
  if (x.size() != static_cast<std::size_t>(cfg.nf) * plane) {
    throw Error(Errc::ShapeMismatch, "x", "input does not match (nf, h, w)");
  }
  const std::size_t hidden = static_cast<std::size_t>(cfg.hidden) * plane;
  if (state.h.size() != hidden || state.c.size() != hidden) {
    throw Error(Errc::ShapeMismatch, "state", "state does not match (hidden, h, w)");
  }
  return plane;
}

struct Logits {
  double no_fire;
  double fire;
};

void softmax2(Logits z, float& p_fire, float& p_nofire) {
  const double m = std::max(z.no_fire, z.fire);
  const double e0 = std::exp(z.no_fire - m), e1 = std::exp(z.fire - m);
  p_fire = static_cast<float>(e1 / (e0 + e1));
  p_nofire = static_cast<float>(e0 / (e0 + e1));
}

Logits head(const ConvLstmWeights& w, const std::vector<float>& h, std::size_t hidden, std::size_t plane,
            std::size_t pixel) {
  const auto& hw = w.at("head_W").data;
  const auto& hb = w.at("head_b").data;
  double z[2] = {hb[0], hb[1]};
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t c = 0; c < hidden; ++c) z[k] += static_cast<double>(hw[k * hidden + c]) * h[c * plane + pixel];
  }
  return {z[0], z[1]};
}

// Runs the days axis on a height x width window whose origin sits at
// (oi, oj) in the sample; cells outside the sample read as zero.
CellState run_days(const SampleTensor& s, const ModelConfig& cfg, const ConvLstmWeights& w, std::size_t height,
                   std::size_t width, std::ptrdiff_t oi, std::ptrdiff_t oj, int threads) {
  CellState state = zero_state(cfg, height, width);
  std::vector<float> x(s.nf * height * width);
  for (std::size_t d = 0; d < s.days; ++d) {
    std::fill(x.begin(), x.end(), 0.0f);
    for (std::size_t f = 0; f < s.nf; ++f) {
      for (std::size_t i = 0; i < height; ++i) {
        const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(i) + oi;
        if (si < 0 || si >= static_cast<std::ptrdiff_t>(s.h)) continue;
        for (std::size_t j = 0; j < width; ++j) {
          const std::ptrdiff_t sj = static_cast<std::ptrdiff_t>(j) + oj;
          if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(s.w)) continue;
          x[(f * height + i) * width + j] = s.at(f, d, static_cast<std::size_t>(si), static_cast<std::size_t>(sj));
        }
      }
    }
    state = convlstm_cell_step(x, height, width, state, cfg, w, threads);
  }
  return state;
}

}  // namespace

CellState zero_state(const ModelConfig& cfg, std::size_t height, std::size_t width) {
  const std::size_t n = static_cast<std::size_t>(cfg.hidden) * height * width;
  return {std::vector<float>(n, 0.0f), std::vector<float>(n, 0.0f)};
}

CellState convlstm_cell_step(std::span<const float> x, std::size_t height, std::size_t width,
                             const CellState& state, const ModelConfig& cfg, const ConvLstmWeights& w,
                             int threads) {
  const std::size_t plane = checked_plane(cfg, x, height, width, state);
  const auto hidden = static_cast<std::size_t>(cfg.hidden);
  const auto nf = static_cast<std::size_t>(cfg.nf);
  const auto k = static_cast<std::size_t>(cfg.kernel);
  const char* gates[4] = {"i", "f", "o", "g"};
  const Tensor* wx[4];
  const Tensor* wh[4];
  const Tensor* b[4];
  for (int g = 0; g < 4; ++g) {
    wx[g] = &w.at(std::string("W_x") + gates[g]);
    wh[g] = &w.at(std::string("W_h") + gates[g]);
    b[g] = &w.at(std::string("b_") + gates[g]);
    if (wx[g]->shape != std::vector<std::size_t>{hidden, nf, k, k} ||
        wh[g]->shape != std::vector<std::size_t>{hidden, hidden, k, k} ||
        b[g]->shape != std::vector<std::size_t>{hidden}) {
      throw Error(Errc::ShapeMismatch, std::string("gate ") + gates[g], "weights do not match the model config");
    }
  }

  CellState next{std::vector<float>(hidden * plane), std::vector<float>(hidden * plane)};
  auto channels = [&](std::size_t begin, std::size_t end) {
    std::vector<double> z[4];
    for (auto& p : z) p.resize(plane);
    for (std::size_t o = begin; o < end; ++o) {
      for (int g = 0; g < 4; ++g) {
        std::fill(z[g].begin(), z[g].end(), static_cast<double>(b[g]->data[o]));
        conv_accumulate(z[g], x.data(), nf, wx[g]->data.data() + o * nf * k * k, k, height, width);
        conv_accumulate(z[g], state.h.data(), hidden, wh[g]->data.data() + o * hidden * k * k, k, height, width);
      }
      for (std::size_t p = 0; p < plane; ++p) {
        const double ig = sigmoid(z[0][p]);
        const double fg = sigmoid(z[1][p]);
        const double og = sigmoid(z[2][p]);
        const double gg = std::tanh(z[3][p]);
        const double c = fg * state.c[o * plane + p] + ig * gg;
        next.c[o * plane + p] = static_cast<float>(c);
        next.h[o * plane + p] = static_cast<float>(og * std::tanh(c));
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, hidden);
  if (workers == 1) {
    channels(0, hidden);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (hidden + workers - 1) / workers;
    for (std::size_t start = 0; start < hidden; start += chunk) {
      pool.emplace_back(channels, start, std::min(hidden, start + chunk));
    }
  }
  return next;
}

std::string format_provenance(const std::vector<ProvenanceRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    if (r.fallback == Contingency::none) continue;
    if (!out.empty()) out += ';';
    out += r.variable + ":" + format_date(r.requested) + "<-" + format_date(r.served) + "(" +
           std::string(to_string(r.fallback)) + ")";
  }
  return out.empty() ? "none" : out;
}

DangerMap infer_region(const SampleTensor& sample, const ModelConfig& cfg, const ConvLstmWeights& w,
                       const InferOptions& opts) {
  cfg.validate();
  if (sample.nf != static_cast<std::size_t>(cfg.nf) || sample.days != static_cast<std::size_t>(cfg.days)) {
    throw Error(Errc::ShapeMismatch, "sample",
                "sample is (" + std::to_string(sample.nf) + ", " + std::to_string(sample.days) +
                    ", h, w) but the model expects (" + std::to_string(cfg.nf) + ", " + std::to_string(cfg.days) +
                    ", h, w)");
  }
  if (sample.h == 0 || sample.w == 0 || sample.values.size() != sample.nf * sample.days * sample.h * sample.w ||
      sample.lat.size() != sample.h || sample.lon.size() != sample.w) {
    throw Error(Errc::ShapeMismatch, "sample", "inconsistent sample tensor");
  }

  const std::size_t plane = sample.h * sample.w;
  const auto hidden = static_cast<std::size_t>(cfg.hidden);
  std::vector<float> p_fire(plane), p_nofire(plane);

  if (opts.mode == InferenceMode::dense) {
    const CellState state = run_days(sample, cfg, w, sample.h, sample.w, 0, 0, opts.threads);
    for (std::size_t p = 0; p < plane; ++p) softmax2(head(w, state.h, hidden, plane, p), p_fire[p], p_nofire[p]);
  } else {
    if (opts.patch <= 0 || opts.patch % 2 == 0) throw Error(Errc::ShapeMismatch, "patch", "patch size must be odd");
    const auto size = static_cast<std::size_t>(opts.patch);
    const auto r = static_cast<std::ptrdiff_t>(size / 2);
    const std::size_t centre = static_cast<std::size_t>(r) * size + static_cast<std::size_t>(r);
    for (std::size_t i = 0; i < sample.h; ++i) {
      for (std::size_t j = 0; j < sample.w; ++j) {
        const CellState state =
            run_days(sample, cfg, w, size, size, static_cast<std::ptrdiff_t>(i) - r,
                     static_cast<std::ptrdiff_t>(j) - r, opts.threads);
        softmax2(head(w, state.h, hidden, size * size, centre), p_fire[i * sample.w + j], p_nofire[i * sample.w + j]);
      }
    }
  }

  DangerMap out;
  out.p_fire = Grid::make_static("p_fire", "1", sample.lat, sample.lon, std::move(p_fire));
  out.p_nofire = Grid::make_static("p_nofire", "1", sample.lat, sample.lon, std::move(p_nofire));
  out.category = classify_danger(out.p_fire, cfg.thresholds);
  out.thresholds = cfg.thresholds;
  if (!sample.dates.empty()) out.forecast_date = sample.dates.back();
  return out;
}

int danger_category(double p, const std::vector<double>& thresholds) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::BadProbability, std::to_string(p), "probability outside [0, 1]");
  int category = 1;
  for (double t : thresholds) {
    if (t <= p) ++category;
  }
  return category;
}

Grid classify_danger(const Grid& p_fire, const std::vector<double>& thresholds) {
  validate_thresholds(thresholds);
  std::vector<float> out(p_fire.values().size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = static_cast<float>(danger_category(p_fire.values()[k], thresholds));
  }
  return Grid::like(p_fire, "category", "1", std::move(out));
}

}  // namespace opcast
