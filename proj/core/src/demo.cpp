#include "posekit/demo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "posekit/decode.hpp"
#include "posekit/losses.hpp"
#include "posekit/metrics.hpp"
#include "posekit/optim.hpp"
#include "posekit/skeleton.hpp"

namespace posekit {

using nlohmann::json;

void DemoConfig::validate() const {
  if (hidden_sizes.empty()) {
    throw std::invalid_argument("DemoConfig: need at least one hidden layer");
  }
  for (int h : hidden_sizes) {
    if (h < 1) throw std::invalid_argument("DemoConfig: hidden sizes must be positive");
  }
  if (feature_dim < 1 || joints < 1 || coord_bins < 2 || orient_bins < 2 ||
      depth_map_size < 2 || batch_size < 1 || eval_samples < 1 || steps < 1) {
    throw std::invalid_argument("DemoConfig: sizes must be positive (bins and maps >= 2)");
  }
  if (noise_level < 0.0 || missing_label_fraction < 0.0 || missing_label_fraction >= 1.0) {
    throw std::invalid_argument("DemoConfig: invalid noise or missing-label fraction");
  }
  if (!enable_p2d && !enable_p3d && !enable_orient && !enable_conf) {
    throw std::invalid_argument("DemoConfig: every task is disabled");
  }
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic per-stream, per-index seeding: sample i can be generated
// independently of generation order.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed ^ (stream * 0xd1342543de82ef95ull)) + index));
}

constexpr std::uint64_t kStreamEmbedding = 1;
constexpr std::uint64_t kStreamInit = 2;
constexpr std::uint64_t kStreamTrain = 3;
constexpr std::uint64_t kStreamEval = 4;

// Output vector layout of the regressor, one block per head.
struct HeadLayout {
  int joints;
  int coord_bins;
  int orient_bins;
  int depth_map_size;
  std::size_t p2d_offset;
  std::size_t p3d_offset;
  std::size_t depth_offset;
  std::size_t orient_offset;
  std::size_t vis_offset;
  std::size_t out_dim;

  explicit HeadLayout(const DemoConfig& cfg)
      : joints(cfg.joints),
        coord_bins(cfg.coord_bins),
        orient_bins(cfg.orient_bins),
        depth_map_size(cfg.depth_map_size) {
    const auto j = static_cast<std::size_t>(joints);
    const auto kc = static_cast<std::size_t>(coord_bins);
    const auto ko = static_cast<std::size_t>(orient_bins);
    const auto s = static_cast<std::size_t>(depth_map_size);
    p2d_offset = 0;
    p3d_offset = p2d_offset + j * 2 * kc;
    depth_offset = p3d_offset + j * 2 * kc;
    orient_offset = depth_offset + j * s * s;
    vis_offset = orient_offset + 4 * ko;
    out_dim = vis_offset + j;
  }

  std::size_t p2d_logits(int joint, int coord) const {
    return p2d_offset + (static_cast<std::size_t>(joint) * 2 + static_cast<std::size_t>(coord)) *
                            static_cast<std::size_t>(coord_bins);
  }
  std::size_t p3d_logits(int joint, int coord) const {
    return p3d_offset + (static_cast<std::size_t>(joint) * 2 + static_cast<std::size_t>(coord)) *
                            static_cast<std::size_t>(coord_bins);
  }
  std::size_t depth_logits(int joint) const {
    return depth_offset + static_cast<std::size_t>(joint) *
                              static_cast<std::size_t>(depth_map_size) *
                              static_cast<std::size_t>(depth_map_size);
  }
  std::size_t orient_logits(int head) const {
    return orient_offset + static_cast<std::size_t>(head) * static_cast<std::size_t>(orient_bins);
  }
};

struct DemoSample {
  std::vector<double> pose2d;  // 2J, (x, y) per joint in [0, 1]
  std::vector<double> pose3d;  // 3J, (x, y, z) per joint in [0, 1], root centered
  double body_phi = 0.0;       // unit angles
  double body_theta = 0.0;
  double head_phi = 0.0;
  double head_theta = 0.0;
  std::vector<std::uint8_t> visible;  // J
  LabelMask mask;
  std::vector<double> features;
};

// Fixed random linear embedding of the label vector plus Gaussian feature
// noise. The embedding has more rows than label dimensions so a noiseless
// sample is exactly recoverable.
class DemoWorld {
 public:
  explicit DemoWorld(const DemoConfig& cfg) : cfg_(cfg), layout_(cfg) {
    label_dim_ = static_cast<std::size_t>(cfg.joints) * 5 + 6;
    auto rng = stream_rng(cfg.seed, kStreamEmbedding, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(label_dim_));
    embedding_.resize(static_cast<std::size_t>(cfg.feature_dim) * label_dim_);
    for (double& v : embedding_) {
      v = normal(rng) * scale;
    }
    // occlusion-style visibility rule: a joint is visible while its depth
    // stays under a per-joint threshold, so the visibility head has to read
    // it off the (noisy) 3D estimate instead of a separable bit
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    vis_threshold_.resize(static_cast<std::size_t>(cfg.joints));
    for (double& t : vis_threshold_) {
      t = 0.4 + 0.2 * unit(rng);
    }
  }

  const HeadLayout& layout() const { return layout_; }

  DemoSample make_sample(std::uint64_t stream, std::uint64_t index) const {
    auto rng = stream_rng(cfg_.seed, stream, index);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto j = static_cast<std::size_t>(cfg_.joints);

    DemoSample s;
    s.pose2d.resize(2 * j);
    for (double& v : s.pose2d) {
      v = 0.1 + 0.8 * unit(rng);
    }
    s.pose3d.resize(3 * j);
    for (double& v : s.pose3d) {
      v = 0.2 + 0.6 * unit(rng);
    }
    // root joint sits on the hip-centered origin
    s.pose3d[0] = s.pose3d[1] = s.pose3d[2] = 0.5;
    s.body_phi = unit(rng);
    s.body_theta = unit(rng);
    s.head_phi = unit(rng);
    s.head_theta = unit(rng);
    s.visible.resize(j);
    for (std::size_t ji = 0; ji < j; ++ji) {
      s.visible[ji] = s.pose3d[ji * 3 + 2] < vis_threshold_[ji] ? 1 : 0;
    }

    s.mask.has_pose2d = s.mask.has_pose3d = true;
    s.mask.has_body_phi = s.mask.has_body_theta = true;
    s.mask.has_head_phi = s.mask.has_head_theta = true;
    s.mask.has_visibility = true;
    if (cfg_.missing_label_fraction > 0.0) {
      auto drop = [&] { return unit(rng) < cfg_.missing_label_fraction; };
      if (drop()) s.mask.has_pose2d = false;
      if (drop()) s.mask.has_pose3d = false;
      if (drop()) {
        s.mask.has_body_phi = s.mask.has_body_theta = false;
        s.mask.has_head_phi = s.mask.has_head_theta = false;
      }
      if (drop()) s.mask.has_visibility = false;
    }

    // label vector: pose2d, pose3d, per-target (sin phi, cos phi, theta),
    // visibility bits; circular angles enter through sin/cos so the
    // embedding has no seam at the 0/360 wrap
    std::vector<double> label;
    label.reserve(label_dim_);
    label.insert(label.end(), s.pose2d.begin(), s.pose2d.end());
    label.insert(label.end(), s.pose3d.begin(), s.pose3d.end());
    constexpr double tau = 2.0 * std::numbers::pi;
    for (double phi : {s.body_phi, s.head_phi}) {
      label.push_back(std::sin(tau * phi));
      label.push_back(std::cos(tau * phi));
    }
    label.push_back(s.body_theta);
    label.push_back(s.head_theta);

    s.features.assign(static_cast<std::size_t>(cfg_.feature_dim), 0.0);
    for (std::size_t r = 0; r < s.features.size(); ++r) {
      double acc = 0.0;
      const double* row = embedding_.data() + r * label_dim_;
      for (std::size_t c = 0; c < label_dim_; ++c) {
        acc += row[c] * label[c];
      }
      s.features[r] = acc + cfg_.noise_level * normal(rng);
    }
    return s;
  }

 private:
  DemoConfig cfg_;
  HeadLayout layout_;
  std::size_t label_dim_ = 0;
  std::vector<double> embedding_;
  std::vector<double> vis_threshold_;
};

// Plain fully connected net with ReLU hidden layers and a linear output,
// parameters and gradients in one flat vector.
struct Mlp {
  std::vector<int> dims;
  std::vector<std::size_t> w_off;
  std::vector<std::size_t> b_off;
  std::size_t param_count = 0;

  explicit Mlp(std::vector<int> d) : dims(std::move(d)) {
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      w_off.push_back(param_count);
      param_count += static_cast<std::size_t>(dims[l + 1]) * static_cast<std::size_t>(dims[l]);
      b_off.push_back(param_count);
      param_count += static_cast<std::size_t>(dims[l + 1]);
    }
  }

  void init(std::span<double> params, std::mt19937_64& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t layers = dims.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
      const double gain = (l + 1 == layers) ? 0.1 : 1.0;
      const double std_w = gain * std::sqrt(2.0 / static_cast<double>(dims[l]));
      double* w = params.data() + w_off[l];
      const std::size_t n =
          static_cast<std::size_t>(dims[l + 1]) * static_cast<std::size_t>(dims[l]);
      for (std::size_t i = 0; i < n; ++i) {
        w[i] = normal(rng) * std_w;
      }
      double* b = params.data() + b_off[l];
      std::fill(b, b + dims[l + 1], 0.0);
    }
  }

  void forward(std::span<const double> params, std::span<const double> x,
               std::vector<std::vector<double>>& acts) const {
    const std::size_t layers = dims.size() - 1;
    acts.resize(layers + 1);
    acts[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers; ++l) {
      const int nin = dims[l];
      const int nout = dims[l + 1];
      acts[l + 1].assign(static_cast<std::size_t>(nout), 0.0);
      const double* w = params.data() + w_off[l];
      const double* b = params.data() + b_off[l];
      const bool last = l + 1 == layers;
      for (int o = 0; o < nout; ++o) {
        double acc = b[o];
        const double* row = w + static_cast<std::size_t>(o) * nin;
        const double* in = acts[l].data();
        for (int i = 0; i < nin; ++i) {
          acc += row[i] * in[i];
        }
        acts[l + 1][static_cast<std::size_t>(o)] = last ? acc : std::max(0.0, acc);
      }
    }
  }

  void backward(std::span<const double> params, const std::vector<std::vector<double>>& acts,
                std::span<const double> d_out, std::span<double> grad) const {
    const std::size_t layers = dims.size() - 1;
    std::vector<double> delta(d_out.begin(), d_out.end());
    for (std::size_t l = layers; l-- > 0;) {
      const int nin = dims[l];
      const int nout = dims[l + 1];
      const double* w = params.data() + w_off[l];
      double* gw = grad.data() + w_off[l];
      double* gb = grad.data() + b_off[l];
      std::vector<double> prev(static_cast<std::size_t>(nin), 0.0);
      for (int o = 0; o < nout; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        if (d == 0.0) {
          continue;
        }
        gb[o] += d;
        const double* row = w + static_cast<std::size_t>(o) * nin;
        double* grow = gw + static_cast<std::size_t>(o) * nin;
        const double* in = acts[l].data();
        for (int i = 0; i < nin; ++i) {
          grow[i] += d * in[i];
          prev[static_cast<std::size_t>(i)] += d * row[i];
        }
      }
      if (l > 0) {
        for (int i = 0; i < nin; ++i) {
          if (acts[l][static_cast<std::size_t>(i)] <= 0.0) {
            prev[static_cast<std::size_t>(i)] = 0.0;
          }
        }
        delta = std::move(prev);
      }
    }
  }
};

// All differentiable head decodes of one sample's raw output vector.
struct DecodedHeads {
  std::vector<SoftArgmax1D> p2d;     // 2J
  std::vector<SoftArgmax1D> p3d_xy;  // 2J
  std::vector<DepthSample> depth;    // J
  std::vector<SoftArgmax1D> orient;  // body phi, body theta, head phi, head theta
  std::vector<double> vis_prob;      // J
};

DecodedHeads decode_heads(const HeadLayout& lay, std::span<const double> out) {
  DecodedHeads d;
  const auto kc = static_cast<std::size_t>(lay.coord_bins);
  const auto ko = static_cast<std::size_t>(lay.orient_bins);
  d.p2d.reserve(static_cast<std::size_t>(lay.joints) * 2);
  d.p3d_xy.reserve(static_cast<std::size_t>(lay.joints) * 2);
  for (int j = 0; j < lay.joints; ++j) {
    for (int c = 0; c < 2; ++c) {
      d.p2d.push_back(softargmax_1d(out.subspan(lay.p2d_logits(j, c), kc)));
      d.p3d_xy.push_back(softargmax_1d(out.subspan(lay.p3d_logits(j, c), kc)));
    }
  }
  d.depth.reserve(static_cast<std::size_t>(lay.joints));
  for (int j = 0; j < lay.joints; ++j) {
    Heatmap2D map(lay.depth_map_size, lay.depth_map_size);
    const auto span = out.subspan(lay.depth_logits(j),
                                  static_cast<std::size_t>(lay.depth_map_size) *
                                      static_cast<std::size_t>(lay.depth_map_size));
    map.values.assign(span.begin(), span.end());
    const double x = d.p3d_xy[static_cast<std::size_t>(j) * 2].value;
    const double y = d.p3d_xy[static_cast<std::size_t>(j) * 2 + 1].value;
    d.depth.push_back(decode_depth(map, x, y));
  }
  d.orient.reserve(4);
  for (int h = 0; h < 4; ++h) {
    d.orient.push_back(softargmax_1d(out.subspan(lay.orient_logits(h), ko)));
  }
  d.vis_prob.reserve(static_cast<std::size_t>(lay.joints));
  for (int j = 0; j < lay.joints; ++j) {
    d.vis_prob.push_back(sigmoid(out[lay.vis_offset + static_cast<std::size_t>(j)]));
  }
  return d;
}

// Shared state of one training run; also drives the LR range test.
class DemoTrainer {
 public:
  explicit DemoTrainer(const DemoConfig& cfg)
      : cfg_(cfg), world_(cfg), lay_(cfg), mlp_(make_dims(cfg)) {
    params_.assign(mlp_.param_count + 4, 0.0);  // trailing 4 are the sigma u's
    auto rng = stream_rng(cfg.seed, kStreamInit, 0);
    mlp_.init(std::span<double>(params_.data(), mlp_.param_count), rng);
    opt_.emplace(params_.size(), AdamWConfig{.lr = cfg.max_lr / cfg.div_factor,
                                             .weight_decay = cfg.weight_decay});
  }

  struct StepResult {
    TotalLoss total;
    std::optional<double> p2d, p3d, orient, conf;
  };

  // One optimization step over the next deterministic batch.
  StepResult train_step(double lr) {
    std::vector<DemoSample> batch;
    batch.reserve(static_cast<std::size_t>(cfg_.batch_size));
    for (int b = 0; b < cfg_.batch_size; ++b) {
      batch.push_back(world_.make_sample(
          kStreamTrain, next_index_ + static_cast<std::uint64_t>(b)));
    }
    next_index_ += static_cast<std::uint64_t>(cfg_.batch_size);

    const std::size_t n = batch.size();
    std::vector<std::vector<std::vector<double>>> acts(n);
    std::vector<DecodedHeads> heads(n);
    std::vector<LabelMask> masks(n);
    for (std::size_t s = 0; s < n; ++s) {
      mlp_.forward(mlp_params(), batch[s].features, acts[s]);
      heads[s] = decode_heads(lay_, acts[s].back());
      masks[s] = batch[s].mask;
    }

    // ---- task losses over the selected samples --------------------------
    LossBundle bundle;
    std::optional<LossTerm> l_p2d, l_p3d, l_conf, l_phi, l_theta;
    std::vector<std::size_t> sel_p2d, sel_p3d, sel_conf, sel_phi_s, sel_theta_s;
    std::vector<int> sel_phi_head, sel_theta_head;  // 0..3 head index per entry

    if (cfg_.enable_p2d) {
      sel_p2d = select_samples(masks, LabelKind::Pose2D);
      std::vector<double> pred, target;
      for (std::size_t s : sel_p2d) {
        for (std::size_t e = 0; e < batch[s].pose2d.size(); ++e) {
          pred.push_back(heads[s].p2d[e].value);
          target.push_back(batch[s].pose2d[e]);
        }
      }
      l_p2d = masked_l1(pred, target);
      if (l_p2d) {
        bundle.l_p2d = l_p2d->value;
        bundle.n_p2d = sel_p2d.size();
      }
    }

    if (cfg_.enable_p3d) {
      sel_p3d = select_samples(masks, LabelKind::Pose3D);
      std::vector<double> pred, target;
      for (std::size_t s : sel_p3d) {
        for (int j = 0; j < lay_.joints; ++j) {
          const auto ji = static_cast<std::size_t>(j);
          pred.push_back(heads[s].p3d_xy[ji * 2].value);
          pred.push_back(heads[s].p3d_xy[ji * 2 + 1].value);
          pred.push_back(heads[s].depth[ji].value);
          target.push_back(batch[s].pose3d[ji * 3]);
          target.push_back(batch[s].pose3d[ji * 3 + 1]);
          target.push_back(batch[s].pose3d[ji * 3 + 2]);
        }
      }
      l_p3d = masked_l1(pred, target);
      if (l_p3d) {
        bundle.l_p3d = l_p3d->value;
        bundle.n_p3d = sel_p3d.size();
      }
    }

    std::optional<double> lo_value;
    if (cfg_.enable_orient) {
      std::vector<double> phi_pred, phi_target, theta_pred, theta_target;
      for (std::size_t s = 0; s < n; ++s) {
        const auto add_phi = [&](bool has, int head, double target) {
          if (!has) return;
          phi_pred.push_back(heads[s].orient[static_cast<std::size_t>(head)].value);
          phi_target.push_back(target);
          sel_phi_s.push_back(s);
          sel_phi_head.push_back(head);
        };
        const auto add_theta = [&](bool has, int head, double target) {
          if (!has) return;
          theta_pred.push_back(heads[s].orient[static_cast<std::size_t>(head)].value);
          theta_target.push_back(target);
          sel_theta_s.push_back(s);
          sel_theta_head.push_back(head);
        };
        add_phi(masks[s].has_body_phi, 0, batch[s].body_phi);
        add_theta(masks[s].has_body_theta, 1, batch[s].body_theta);
        add_phi(masks[s].has_head_phi, 2, batch[s].head_phi);
        add_theta(masks[s].has_head_theta, 3, batch[s].head_theta);
      }
      l_phi = loss_phi(phi_pred, phi_target);
      l_theta = loss_theta(theta_pred, theta_target);
      lo_value = loss_orientation(l_phi ? std::optional(l_phi->value) : std::nullopt,
                                  l_theta ? std::optional(l_theta->value) : std::nullopt);
      if (lo_value) {
        bundle.l_o = *lo_value;
        std::vector<std::size_t> contributing = sel_phi_s;
        contributing.insert(contributing.end(), sel_theta_s.begin(), sel_theta_s.end());
        std::sort(contributing.begin(), contributing.end());
        contributing.erase(std::unique(contributing.begin(), contributing.end()),
                           contributing.end());
        bundle.n_o = contributing.size();
      }
    }

    if (cfg_.enable_conf) {
      sel_conf = select_samples(masks, LabelKind::Visibility);
      std::vector<double> prob;
      std::vector<std::uint8_t> target;
      for (std::size_t s : sel_conf) {
        for (int j = 0; j < lay_.joints; ++j) {
          prob.push_back(heads[s].vis_prob[static_cast<std::size_t>(j)]);
          target.push_back(batch[s].visible[static_cast<std::size_t>(j)]);
        }
      }
      l_conf = bce_visibility(prob, target);
      if (l_conf) {
        bundle.l_conf = l_conf->value;
        bundle.n_conf = sel_conf.size();
      }
    }

    SigmaParams sigmas;
    sigmas.u = {params_[mlp_.param_count], params_[mlp_.param_count + 1],
                params_[mlp_.param_count + 2], params_[mlp_.param_count + 3]};
    const TotalLoss total = uncertainty_total(bundle, sigmas);

    StepResult result;
    result.total = total;
    if (bundle.n_p2d) result.p2d = bundle.l_p2d;
    if (bundle.n_p3d) result.p3d = bundle.l_p3d;
    if (bundle.n_o) result.orient = bundle.l_o;
    if (bundle.n_conf) result.conf = bundle.l_conf;
    if (!std::isfinite(total.value)) {
      return result;  // caller decides; no parameter update on a broken step
    }

    // ---- backward: head-value grads -> output-layer grads ---------------
    std::vector<double> grad(params_.size(), 0.0);
    std::vector<std::vector<double>> d_out(n);
    for (std::size_t s = 0; s < n; ++s) {
      d_out[s].assign(lay_.out_dim, 0.0);
    }

    auto spread_softargmax = [&](std::size_t s, std::size_t logits_offset,
                                 const SoftArgmax1D& dec, double d_value) {
      double* dst = d_out[s].data() + logits_offset;
      for (std::size_t k = 0; k < dec.grad.size(); ++k) {
        dst[k] += d_value * dec.grad[k];
      }
    };

    if (l_p2d) {
      const double w = total.d_loss[0];
      std::size_t entry = 0;
      for (std::size_t s : sel_p2d) {
        for (int j = 0; j < lay_.joints; ++j) {
          for (int c = 0; c < 2; ++c, ++entry) {
            const auto e = static_cast<std::size_t>(j) * 2 + static_cast<std::size_t>(c);
            spread_softargmax(s, lay_.p2d_logits(j, c), heads[s].p2d[e],
                              w * l_p2d->grad[entry]);
          }
        }
      }
    }

    if (l_p3d) {
      const double w = total.d_loss[1];
      std::size_t entry = 0;
      for (std::size_t s : sel_p3d) {
        for (int j = 0; j < lay_.joints; ++j) {
          const auto ji = static_cast<std::size_t>(j);
          const double dx_loss = w * l_p3d->grad[entry++];
          const double dy_loss = w * l_p3d->grad[entry++];
          const double dz_loss = w * l_p3d->grad[entry++];
          const DepthSample& dep = heads[s].depth[ji];
          // depth gradient flows into the map logits and, through the
          // bilinear sample location, back into the x/y heads
          double* dst = d_out[s].data() + lay_.depth_logits(j);
          for (int corner = 0; corner < 4; ++corner) {
            const auto ci = static_cast<std::size_t>(corner);
            dst[dep.corner_index[ci]] += dz_loss * dep.d_logit[ci];
          }
          const double dx_total = dx_loss + dz_loss * dep.d_x;
          const double dy_total = dy_loss + dz_loss * dep.d_y;
          spread_softargmax(s, lay_.p3d_logits(j, 0), heads[s].p3d_xy[ji * 2], dx_total);
          spread_softargmax(s, lay_.p3d_logits(j, 1), heads[s].p3d_xy[ji * 2 + 1], dy_total);
        }
      }
    }

    if (lo_value) {
      const double w = total.d_loss[2];
      const double branch = (l_phi && l_theta) ? 0.5 : 1.0;
      if (l_phi) {
        for (std::size_t e = 0; e < sel_phi_s.size(); ++e) {
          const int head = sel_phi_head[e];
          spread_softargmax(sel_phi_s[e], lay_.orient_logits(head),
                            heads[sel_phi_s[e]].orient[static_cast<std::size_t>(head)],
                            w * branch * l_phi->grad[e]);
        }
      }
      if (l_theta) {
        for (std::size_t e = 0; e < sel_theta_s.size(); ++e) {
          const int head = sel_theta_head[e];
          spread_softargmax(sel_theta_s[e], lay_.orient_logits(head),
                            heads[sel_theta_s[e]].orient[static_cast<std::size_t>(head)],
                            w * branch * l_theta->grad[e]);
        }
      }
    }

    if (l_conf) {
      const double w = total.d_loss[3];
      std::size_t entry = 0;
      for (std::size_t s : sel_conf) {
        for (int j = 0; j < lay_.joints; ++j, ++entry) {
          const double p = heads[s].vis_prob[static_cast<std::size_t>(j)];
          d_out[s][lay_.vis_offset + static_cast<std::size_t>(j)] +=
              w * l_conf->grad[entry] * p * (1.0 - p);
        }
      }
    }

    for (std::size_t s = 0; s < n; ++s) {
      mlp_.backward(mlp_params(), acts[s], d_out[s],
                    std::span<double>(grad.data(), mlp_.param_count));
    }
    for (int i = 0; i < 4; ++i) {
      grad[mlp_.param_count + static_cast<std::size_t>(i)] =
          total.d_u[static_cast<std::size_t>(i)];
    }

    opt_->set_learning_rate(lr);
    opt_->step(params_, grad);
    return result;
  }

  DemoMetrics evaluate() {
    const auto n = static_cast<std::size_t>(cfg_.eval_samples);
    std::vector<double> phi_pred_deg, phi_gt_deg, theta_pred_deg, theta_gt_deg;
    std::vector<Pose3D> pred3d, gt3d;
    double p2d_abs = 0.0;
    std::size_t p2d_count = 0;
    std::size_t vis_hits = 0;
    std::size_t vis_count = 0;
    std::vector<std::vector<double>> acts;

    for (std::size_t i = 0; i < n; ++i) {
      const DemoSample s = world_.make_sample(kStreamEval, i);
      mlp_.forward(mlp_params(), s.features, acts);
      const DecodedHeads heads = decode_heads(lay_, acts.back());

      phi_pred_deg.push_back(heads.orient[0].value * 360.0);
      phi_gt_deg.push_back(s.body_phi * 360.0);
      phi_pred_deg.push_back(heads.orient[2].value * 360.0);
      phi_gt_deg.push_back(s.head_phi * 360.0);
      theta_pred_deg.push_back(heads.orient[1].value * 180.0);
      theta_gt_deg.push_back(s.body_theta * 180.0);
      theta_pred_deg.push_back(heads.orient[3].value * 180.0);
      theta_gt_deg.push_back(s.head_theta * 180.0);

      std::vector<Vec3> pc, gc;
      for (int j = 0; j < lay_.joints; ++j) {
        const auto ji = static_cast<std::size_t>(j);
        pc.push_back({heads.p3d_xy[ji * 2].value, heads.p3d_xy[ji * 2 + 1].value,
                      heads.depth[ji].value});
        gc.push_back({s.pose3d[ji * 3], s.pose3d[ji * 3 + 1], s.pose3d[ji * 3 + 2]});
      }
      pred3d.push_back(make_pose3d(std::move(pc)));
      gt3d.push_back(make_pose3d(std::move(gc)));

      for (std::size_t e = 0; e < s.pose2d.size(); ++e) {
        p2d_abs += std::abs(heads.p2d[e].value - s.pose2d[e]);
        ++p2d_count;
      }
      for (int j = 0; j < lay_.joints; ++j) {
        const auto ji = static_cast<std::size_t>(j);
        const bool predicted = heads.vis_prob[ji] > 0.5;
        vis_hits += predicted == (s.visible[ji] != 0) ? 1u : 0u;
        ++vis_count;
      }
    }

    if (std::getenv("POSEKIT_DEMO_DEBUG_PHI")) {
      for (std::size_t i = 0; i < phi_pred_deg.size(); ++i) {
        std::fprintf(stderr, "PHI %.4f %.4f %.4f\n", phi_gt_deg[i], phi_pred_deg[i],
                     circular_distance_deg(phi_pred_deg[i], phi_gt_deg[i]));
      }
    }
    DemoMetrics m;
    m.mae_phi_deg = orientation_mae(phi_pred_deg, phi_gt_deg, AngleKind::Azimuthal);
    m.mae_theta_deg = orientation_mae(theta_pred_deg, theta_gt_deg, AngleKind::Polar);
    // half range 0.5 makes the "millimeter" output equal normalized units
    m.mpjpe_norm = mpjpe(pred3d, gt3d, 0.5);
    m.pose2d_mae = p2d_abs / static_cast<double>(p2d_count);
    m.visibility_accuracy =
        static_cast<double>(vis_hits) / static_cast<double>(vis_count);
    return m;
  }

  std::array<double, 4> sigma_values() const {
    std::array<double, 4> s{};
    for (int i = 0; i < 4; ++i) {
      s[static_cast<std::size_t>(i)] =
          std::exp(params_[mlp_.param_count + static_cast<std::size_t>(i)]);
    }
    return s;
  }

 private:
  static std::vector<int> make_dims(const DemoConfig& cfg) {
    std::vector<int> dims;
    dims.push_back(cfg.feature_dim);
    dims.insert(dims.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
    dims.push_back(static_cast<int>(HeadLayout(cfg).out_dim));
    return dims;
  }

  std::span<const double> mlp_params() const {
    return std::span<const double>(params_.data(), mlp_.param_count);
  }

  DemoConfig cfg_;
  DemoWorld world_;
  HeadLayout lay_;
  Mlp mlp_;
  std::vector<double> params_;
  std::optional<AdamW> opt_;
  std::uint64_t next_index_ = 0;
};

}  // namespace

DemoReport train_demo(const DemoConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  DemoTrainer trainer(cfg);
  OneCycleSchedule schedule{.total_steps = static_cast<std::size_t>(cfg.steps),
                            .max_lr = cfg.max_lr,
                            .div_factor = cfg.div_factor,
                            .final_div_factor = cfg.final_div_factor,
                            .pct_start = cfg.pct_start};
  schedule.validate();

  DemoReport report;
  report.config = cfg;
  report.curve.reserve(static_cast<std::size_t>(cfg.steps));

  double ema = 0.0;
  constexpr double kEmaFactor = 0.98;
  for (int step = 0; step < cfg.steps; ++step) {
    const double lr = schedule.lr_at(static_cast<std::size_t>(step));
    const auto result = trainer.train_step(lr);
    if (!std::isfinite(result.total.value)) {
      report.diverged = true;
      break;
    }
    ema = kEmaFactor * ema + (1.0 - kEmaFactor) * result.total.value;
    const double smoothed = ema / (1.0 - std::pow(kEmaFactor, static_cast<double>(step + 1)));
    if (step == 0) {
      report.initial_smoothed_loss = smoothed;
    }
    report.final_smoothed_loss = smoothed;
    report.curve.push_back({static_cast<std::size_t>(step), lr, result.total.value, result.p2d,
                            result.p3d, result.orient, result.conf});
  }

  if (!report.diverged) {
    report.holdout = trainer.evaluate();
  }
  report.sigma = trainer.sigma_values();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

LrRangeResult demo_lr_range_test(const DemoConfig& cfg, double lr_lo, double lr_hi,
                                 std::size_t steps) {
  cfg.validate();
  DemoTrainer trainer(cfg);
  return lr_range_test(
      [&trainer](double lr) { return trainer.train_step(lr).total.value; }, lr_lo, lr_hi, steps);
}

void write_loss_curve_csv(const std::filesystem::path& path, std::span<const CurvePoint> curve) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open loss curve file for writing: " + path.string());
  }
  out << "step,lr,loss_total,loss_p2d,loss_p3d,loss_o,loss_conf\n";
  out.precision(17);
  auto cell = [&](const std::optional<double>& v) {
    out << ',';
    if (v) {
      out << *v;
    }
  };
  for (const CurvePoint& p : curve) {
    out << p.step << ',' << p.lr << ',' << p.total;
    cell(p.p2d);
    cell(p.p3d);
    cell(p.orient);
    cell(p.conf);
    out << '\n';
  }
}

namespace {

json config_to_json(const DemoConfig& cfg) {
  return json{{"hidden_sizes", cfg.hidden_sizes},
              {"feature_dim", cfg.feature_dim},
              {"joints", cfg.joints},
              {"coord_bins", cfg.coord_bins},
              {"orient_bins", cfg.orient_bins},
              {"depth_map_size", cfg.depth_map_size},
              {"noise_level", cfg.noise_level},
              {"missing_label_fraction", cfg.missing_label_fraction},
              {"batch_size", cfg.batch_size},
              {"eval_samples", cfg.eval_samples},
              {"steps", cfg.steps},
              {"seed", cfg.seed},
              {"max_lr", cfg.max_lr},
              {"div_factor", cfg.div_factor},
              {"final_div_factor", cfg.final_div_factor},
              {"pct_start", cfg.pct_start},
              {"weight_decay", cfg.weight_decay},
              {"enable_p2d", cfg.enable_p2d},
              {"enable_p3d", cfg.enable_p3d},
              {"enable_orient", cfg.enable_orient},
              {"enable_conf", cfg.enable_conf}};
}

}  // namespace

DemoConfig demo_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("demo config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw std::runtime_error("demo config: expected a JSON object");
  }
  DemoConfig cfg;
  auto get = [&](const char* key, auto& target) {
    if (j.contains(key)) {
      try {
        target = j.at(key).get<std::decay_t<decltype(target)>>();
      } catch (const json::exception&) {
        throw std::runtime_error(std::string("demo config: bad value for '") + key + "'");
      }
    }
  };
  get("hidden_sizes", cfg.hidden_sizes);
  get("feature_dim", cfg.feature_dim);
  get("joints", cfg.joints);
  get("coord_bins", cfg.coord_bins);
  get("orient_bins", cfg.orient_bins);
  get("depth_map_size", cfg.depth_map_size);
  get("noise_level", cfg.noise_level);
  get("missing_label_fraction", cfg.missing_label_fraction);
  get("batch_size", cfg.batch_size);
  get("eval_samples", cfg.eval_samples);
  get("steps", cfg.steps);
  get("seed", cfg.seed);
  get("max_lr", cfg.max_lr);
  get("div_factor", cfg.div_factor);
  get("final_div_factor", cfg.final_div_factor);
  get("pct_start", cfg.pct_start);
  get("weight_decay", cfg.weight_decay);
  get("enable_p2d", cfg.enable_p2d);
  get("enable_p3d", cfg.enable_p3d);
  get("enable_orient", cfg.enable_orient);
  get("enable_conf", cfg.enable_conf);
  for (auto& [key, value] : j.items()) {
    (void)value;
    static const char* known[] = {
        "hidden_sizes", "feature_dim", "joints", "coord_bins", "orient_bins",
        "depth_map_size", "noise_level", "missing_label_fraction", "batch_size",
        "eval_samples", "steps", "seed", "max_lr", "div_factor", "final_div_factor",
        "pct_start", "weight_decay", "enable_p2d", "enable_p3d", "enable_orient",
        "enable_conf"};
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return key == k; }) == std::end(known)) {
      throw std::runtime_error("demo config: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

std::string demo_config_to_json_text(const DemoConfig& cfg) {
  return config_to_json(cfg).dump(2);
}

void write_run_report_json(const std::filesystem::path& path, const DemoReport& report,
                           const std::string& loss_curve_ref) {
  json j;
  j["config"] = config_to_json(report.config);
  j["seed"] = report.config.seed;
  j["loss_curve"] = loss_curve_ref;
  j["wall_seconds"] = report.wall_seconds;
  j["diverged"] = report.diverged;
  j["initial_smoothed_loss"] = report.initial_smoothed_loss;
  j["final_smoothed_loss"] = report.final_smoothed_loss;
  j["sigma"] = report.sigma;
  j["metrics"] = {{"mae_phi_deg", report.holdout.mae_phi_deg},
                  {"mae_theta_deg", report.holdout.mae_theta_deg},
                  {"mpjpe_norm", report.holdout.mpjpe_norm},
                  {"pose2d_mae", report.holdout.pose2d_mae},
                  {"visibility_accuracy", report.holdout.visibility_accuracy}};
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open run report for writing: " + path.string());
  }
  out << j.dump(2) << '\n';
}

}  // namespace posekit
