#pragma once

// Independent reference implementations. Each one is written as plainly
// as possible (direct loops, no shared helpers with the library) so the
// library can be compared against it.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "opcast/grid.hpp"
#include "opcast/inference.hpp"

namespace opcast::testing {

inline double sigmoid_ref(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// One scalar LSTM step: every weight is the (o, c, 0, 0) entry of a 1x1
/// kernel, the grid is a single cell.
inline CellState scalar_lstm_step(const std::vector<float>& x, const CellState& s, const ModelConfig& cfg,
                                  const ConvLstmWeights& w) {
  const int H = cfg.hidden, F = cfg.nf;
  CellState out{std::vector<float>(H), std::vector<float>(H)};
  auto pre = [&](const char* gate, int o) {
    const auto& wx = w.at(std::string("W_x") + gate).data;
    const auto& wh = w.at(std::string("W_h") + gate).data;
    double z = w.at(std::string("b_") + gate).data[o];
    for (int c = 0; c < F; ++c) z += double{wx[o * F + c]} * x[c];
    for (int c = 0; c < H; ++c) z += double{wh[o * H + c]} * s.h[c];
    return z;
  };
  for (int o = 0; o < H; ++o) {
    const double i = sigmoid_ref(pre("i", o));
    const double f = sigmoid_ref(pre("f", o));
    const double g = std::tanh(pre("g", o));
    const double og = sigmoid_ref(pre("o", o));
    const double c = f * s.c[o] + i * g;
    out.c[o] = static_cast<float>(c);
    out.h[o] = static_cast<float>(og * std::tanh(c));
  }
  return out;
}

/// Direct-convolution ConvLSTM step: for every output cell, every input
/// channel and every kernel tap, with an explicit bounds check for the
/// zero padding.
inline CellState naive_conv_step(const std::vector<float>& x, std::size_t height, std::size_t width,
                                 const CellState& s, const ModelConfig& cfg, const ConvLstmWeights& w) {
  const int H = cfg.hidden, F = cfg.nf, K = cfg.kernel, R = K / 2;
  const int h = static_cast<int>(height), wd = static_cast<int>(width);
  CellState out{std::vector<float>(H * h * wd), std::vector<float>(H * h * wd)};
  auto in_x = [&](int c, int i, int j) -> double {
    if (i < 0 || j < 0 || i >= h || j >= wd) return 0.0;
    return x[(c * h + i) * wd + j];
  };
  auto in_h = [&](int c, int i, int j) -> double {
    if (i < 0 || j < 0 || i >= h || j >= wd) return 0.0;
    return s.h[(c * h + i) * wd + j];
  };
  auto gate = [&](const char* name, int o, int i, int j) {
    const auto& wx = w.at(std::string("W_x") + name).data;
    const auto& wh = w.at(std::string("W_h") + name).data;
    double z = w.at(std::string("b_") + name).data[o];
    for (int c = 0; c < F; ++c) {
      for (int u = 0; u < K; ++u) {
        for (int v = 0; v < K; ++v) z += double{wx[((o * F + c) * K + u) * K + v]} * in_x(c, i + u - R, j + v - R);
      }
    }
    for (int c = 0; c < H; ++c) {
      for (int u = 0; u < K; ++u) {
        for (int v = 0; v < K; ++v) z += double{wh[((o * H + c) * K + u) * K + v]} * in_h(c, i + u - R, j + v - R);
      }
    }
    return z;
  };
  for (int o = 0; o < H; ++o) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < wd; ++j) {
        const std::size_t idx = (static_cast<std::size_t>(o) * h + i) * wd + j;
        const double ig = sigmoid_ref(gate("i", o, i, j));
        const double fg = sigmoid_ref(gate("f", o, i, j));
        const double og = sigmoid_ref(gate("o", o, i, j));
        const double gg = std::tanh(gate("g", o, i, j));
        const double c = fg * s.c[idx] + ig * gg;
        out.c[idx] = static_cast<float>(c);
        out.h[idx] = static_cast<float>(og * std::tanh(c));
      }
    }
  }
  return out;
}

/// Head and softmax for one pixel of a final hidden state.
inline double head_p_fire(const ConvLstmWeights& w, const std::vector<float>& h, int hidden, std::size_t plane,
                          std::size_t pixel) {
  const auto& hw = w.at("head_W").data;
  const auto& hb = w.at("head_b").data;
  double z0 = hb[0], z1 = hb[1];
  for (int c = 0; c < hidden; ++c) {
    z0 += double{hw[c]} * h[c * plane + pixel];
    z1 += double{hw[hidden + c]} * h[c * plane + pixel];
  }
  return 1.0 / (1.0 + std::exp(z0 - z1));
}

/// Per calendar day extreme of each cell, scanning every time step and
/// skipping NaN.
inline std::map<Date, std::vector<float>> naive_daily(const Grid& g, bool max) {
  std::map<Date, std::vector<float>> out;
  std::map<Date, std::vector<int>> seen;
  const std::size_t n = g.ny() * g.nx();
  for (std::size_t t = 0; t < g.time().size(); ++t) {
    const Date d = floor_day(g.time()[t]);
    auto& acc = out[d];
    auto& cnt = seen[d];
    if (acc.empty()) {
      acc.assign(n, kNaN);
      cnt.assign(n, 0);
    }
    for (std::size_t i = 0; i < g.ny(); ++i) {
      for (std::size_t j = 0; j < g.nx(); ++j) {
        const float v = g.at(t, i, j);
        const std::size_t k = i * g.nx() + j;
        if (std::isnan(v)) continue;
        if (cnt[k]++ == 0 || (max ? v > acc[k] : v < acc[k])) acc[k] = v;
      }
    }
  }
  return out;
}

/// Value of the latest observation at or before each date, by linear scan.
/// Returns false when a date has no prior observation.
inline bool naive_forward_fill(const Grid& g, const std::vector<Date>& dates, std::vector<float>& out) {
  out.clear();
  for (Date d : dates) {
    int best = -1;
    for (std::size_t t = 0; t < g.time().size(); ++t) {
      if (g.time()[t] <= to_timepoint(d)) best = static_cast<int>(t);
    }
    if (best < 0) return false;
    for (std::size_t i = 0; i < g.ny(); ++i) {
      for (std::size_t j = 0; j < g.nx(); ++j) out.push_back(g.at(static_cast<std::size_t>(best), i, j));
    }
  }
  return true;
}

inline Date latest_before_oracle(const std::vector<Date>& available, Date requested, bool& found) {
  found = false;
  Date best{};
  for (Date d : available) {
    if (d < requested && (!found || d > best)) {
      best = d;
      found = true;
    }
  }
  return best;
}

}  // namespace opcast::testing
