#include "posekit/decode.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace posekit {

namespace {

void check_logits(std::span<const double> logits, std::size_t min_size, const char* op) {
  if (logits.size() < min_size) {
    throw std::invalid_argument(std::string(op) + ": need at least " +
                                std::to_string(min_size) + " logits");
  }
  for (double v : logits) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(op) + ": non-finite logit");
    }
  }
}

void check_beta(Temperature t, const char* op) {
  if (!(t.beta > 0.0) || !std::isfinite(t.beta)) {
    throw std::invalid_argument(std::string(op) + ": temperature beta must be positive");
  }
}

// softmax(beta * logits) with max-subtraction so a constant shift of the
// logits cancels exactly and no overflow occurs for large beta.
std::vector<double> softmax(std::span<const double> logits, double beta) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(beta * (logits[i] - m));
    sum += p[i];
  }
  for (double& v : p) {
    v /= sum;
  }
  return p;
}

}  // namespace

double sigmoid(double v) {
  if (v >= 0.0) {
    return 1.0 / (1.0 + std::exp(-v));
  }
  const double e = std::exp(v);
  return e / (1.0 + e);
}

SoftArgmax1D softargmax_1d(std::span<const double> logits, Temperature t) {
  check_logits(logits, 2, "softargmax_1d");
  check_beta(t, "softargmax_1d");
  const std::size_t k = logits.size();
  const double step = 1.0 / static_cast<double>(k - 1);
  const std::vector<double> p = softmax(logits, t.beta);

  SoftArgmax1D out;
  for (std::size_t i = 0; i < k; ++i) {
    out.value += p[i] * (static_cast<double>(i) * step);
  }
  out.grad.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.grad[i] = t.beta * p[i] * (static_cast<double>(i) * step - out.value);
  }
  return out;
}

double softargmax_1d_circular(std::span<const double> logits, Temperature t) {
  check_logits(logits, 2, "softargmax_1d_circular");
  check_beta(t, "softargmax_1d_circular");
  const std::size_t k = logits.size();
  const double step = 1.0 / static_cast<double>(k - 1);
  const std::vector<double> p = softmax(logits, t.beta);

  constexpr double tau = 2.0 * std::numbers::pi;
  double s = 0.0;
  double c = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double ang = tau * static_cast<double>(i) * step;
    s += p[i] * std::sin(ang);
    c += p[i] * std::cos(ang);
  }
  double v = std::atan2(s, c) / tau;
  if (v < 0.0) {
    v += 1.0;
  }
  return v >= 1.0 ? 0.0 : v;
}

SoftArgmax2D softargmax_2d(const Heatmap2D& map, Temperature t) {
  if (map.height < 2 || map.width < 2) {
    throw std::invalid_argument("softargmax_2d: grid must be at least 2x2");
  }
  if (map.values.size() !=
      static_cast<std::size_t>(map.height) * static_cast<std::size_t>(map.width)) {
    throw std::invalid_argument("softargmax_2d: value count does not match H*W");
  }
  check_logits(map.values, 4, "softargmax_2d");
  check_beta(t, "softargmax_2d");

  const std::vector<double> p = softmax(map.values, t.beta);
  const double col_step = 1.0 / static_cast<double>(map.width - 1);
  const double row_step = 1.0 / static_cast<double>(map.height - 1);

  SoftArgmax2D out;
  std::size_t idx = 0;
  for (int r = 0; r < map.height; ++r) {
    for (int c = 0; c < map.width; ++c, ++idx) {
      out.x += p[idx] * (c * col_step);
      out.y += p[idx] * (r * row_step);
    }
  }
  out.dx.resize(p.size());
  out.dy.resize(p.size());
  idx = 0;
  for (int r = 0; r < map.height; ++r) {
    for (int c = 0; c < map.width; ++c, ++idx) {
      out.dx[idx] = t.beta * p[idx] * (c * col_step - out.x);
      out.dy[idx] = t.beta * p[idx] * (r * row_step - out.y);
    }
  }
  return out;
}

DepthSample decode_depth(const Heatmap2D& sigmoid_logits, double x, double y) {
  if (sigmoid_logits.height < 2 || sigmoid_logits.width < 2) {
    throw std::invalid_argument("decode_depth: grid must be at least 2x2");
  }
  if (!std::isfinite(x) || !std::isfinite(y) || x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) {
    throw std::invalid_argument("decode_depth: sample coordinates must be in [0, 1]^2");
  }

  const int w = sigmoid_logits.width;
  const int h = sigmoid_logits.height;
  const double gx = x * (w - 1);
  const double gy = y * (h - 1);
  const int c0 = std::min(static_cast<int>(gx), w - 2);
  const int r0 = std::min(static_cast<int>(gy), h - 2);
  const double fx = gx - c0;
  const double fy = gy - r0;

  const double s00 = sigmoid(sigmoid_logits.at(r0, c0));
  const double s01 = sigmoid(sigmoid_logits.at(r0, c0 + 1));
  const double s10 = sigmoid(sigmoid_logits.at(r0 + 1, c0));
  const double s11 = sigmoid(sigmoid_logits.at(r0 + 1, c0 + 1));

  DepthSample out;
  const std::array<double, 4> weights = {(1.0 - fy) * (1.0 - fx), (1.0 - fy) * fx,
                                         fy * (1.0 - fx), fy * fx};
  const std::array<double, 4> corners = {s00, s01, s10, s11};
  out.corner_index = {static_cast<std::size_t>(r0) * w + c0,
                      static_cast<std::size_t>(r0) * w + c0 + 1,
                      static_cast<std::size_t>(r0 + 1) * w + c0,
                      static_cast<std::size_t>(r0 + 1) * w + c0 + 1};
  for (int i = 0; i < 4; ++i) {
    out.value += weights[i] * corners[i];
    out.d_logit[i] = weights[i] * corners[i] * (1.0 - corners[i]);
  }
  out.d_x = ((1.0 - fy) * (s01 - s00) + fy * (s11 - s10)) * (w - 1);
  out.d_y = ((1.0 - fx) * (s10 - s00) + fx * (s11 - s01)) * (h - 1);
  return out;
}

}  // namespace posekit
