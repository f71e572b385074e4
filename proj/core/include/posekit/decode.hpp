#pragma once

#include <array>
#include <span>
#include <vector>

namespace posekit {

/// Softmax sharpness multiplier applied to raw logits before the softargmax
/// expectation. beta must be positive; default 1 (raw logits).
struct Temperature {
  double beta = 1.0;
};

/// H x W grid of real logits, row-major.
struct Heatmap2D {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Heatmap2D() = default;
  Heatmap2D(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * static_cast<std::size_t>(w),
                                    fill) {}

  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
};

/// Differentiable 1D peak decoding: expectation of bin centers i/(K-1)
/// under softmax(beta * logits). Value is in [0, 1]; grad[k] is the
/// analytic d value / d logits[k].
struct SoftArgmax1D {
  double value = 0.0;
  std::vector<double> grad;
};

SoftArgmax1D softargmax_1d(std::span<const double> logits, Temperature t = {});

/// Circular-mean alternative for azimuth heads: atan2 of the expected sine
/// and cosine of the bin angles, mapped back to [0, 1). Avoids the linear
/// expectation's bias near the 0/1 wrap; off by default in all decoders.
double softargmax_1d_circular(std::span<const double> logits, Temperature t = {});

/// Joint softmax over all H*W cells; x is the expectation of col/(W-1),
/// y of row/(H-1). dx/dy hold d x / d logit and d y / d logit per cell,
/// in the heatmap's row-major layout.
struct SoftArgmax2D {
  double x = 0.0;
  double y = 0.0;
  std::vector<double> dx;
  std::vector<double> dy;
};

SoftArgmax2D softargmax_2d(const Heatmap2D& map, Temperature t = {});

/// Bilinear sample of sigmoid(map) at unit coordinates (x, y) in [0, 1]^2.
/// Result in (0, 1). Gradients: d_logit[i] w.r.t. the four corner logits
/// (indices in corner_index, row-major), d_x / d_y w.r.t. the sample
/// location.
struct DepthSample {
  double value = 0.0;
  std::array<std::size_t, 4> corner_index{};
  std::array<double, 4> d_logit{};
  double d_x = 0.0;
  double d_y = 0.0;
};

DepthSample decode_depth(const Heatmap2D& sigmoid_logits, double x, double y);

double sigmoid(double v);

}  // namespace posekit
