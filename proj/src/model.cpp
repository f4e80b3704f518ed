#include "stpp/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <thread>

#include "byte_io.hpp"
#include "stpp/augment.hpp"
#include "stpp/error.hpp"

namespace stpp::model {

namespace {

constexpr int kMaxRadius = 3;
static_assert(kWindowRadii[0] <= kMaxRadius && kWindowRadii[1] <= kMaxRadius);

// Summed-area table of a plane padded by kMaxRadius with edge replication,
// so every window is a plain rectangle lookup.
class PaddedIntegral {
 public:
  PaddedIntegral(int h, int w) : h_(h), w_(w), stride_(w + 2 * kMaxRadius + 1) {
    table_.assign(static_cast<std::size_t>(h + 2 * kMaxRadius + 1) * stride_, 0.0);
  }

  template <class Value>
  void build(Value value) {
    const int ph = h_ + 2 * kMaxRadius, pw = w_ + 2 * kMaxRadius;
    for (int y = 0; y < ph; ++y) {
      const int sy = std::clamp(y - kMaxRadius, 0, h_ - 1);
      double row = 0;
      double* dst = &table_[static_cast<std::size_t>(y + 1) * stride_ + 1];
      const double* above = dst - stride_;
      for (int x = 0; x < pw; ++x) {
        row += value(sy, std::clamp(x - kMaxRadius, 0, w_ - 1));
        dst[x] = above[x] + row;
      }
    }
  }

  // Sum over the (2r+1)^2 window centred on (y, x).
  double window(int y, int x, int r) const {
    const int y0 = y + kMaxRadius - r, y1 = y + kMaxRadius + r + 1;
    const int x0 = x + kMaxRadius - r, x1 = x + kMaxRadius + r + 1;
    return at(y1, x1) - at(y0, x1) - at(y1, x0) + at(y0, x0);
  }

 private:
  double at(int y, int x) const { return table_[static_cast<std::size_t>(y) * stride_ + x]; }

  int h_, w_, stride_;
  std::vector<double> table_;
};

}  // namespace

FeatureMap compute_features(const Image& img) {
  const int h = img.height, w = img.width, nc = img.channels;
  const std::size_t n = img.pixels();
  FeatureMap fm;
  fm.height = h;
  fm.width = w;
  fm.num_features = feature_count(nc);
  fm.values.assign(n * fm.num_features, 0.0);
  const int nf = fm.num_features;

  PaddedIntegral sum(h, w), sum_sq(h, w);
  for (int ch = 0; ch < nc; ++ch) {
    auto px = [&](int y, int x) { return static_cast<double>(img.at(y, x, ch)); };
    sum.build(px);
    sum_sq.build([&](int y, int x) { return px(y, x) * px(y, x); });
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double* phi = &fm.values[(static_cast<std::size_t>(y) * w + x) * nf];
        phi[ch] = px(y, x);
        int slot = nc;
        for (int r : kWindowRadii) {
          const double area = static_cast<double>((2 * r + 1) * (2 * r + 1));
          const double mean = sum.window(y, x, r) / area;
          const double var = std::max(0.0, sum_sq.window(y, x, r) / area - mean * mean);
          phi[slot + ch] = mean;
          phi[slot + nc + ch] = std::sqrt(var);
          slot += 2 * nc;
        }
      }
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      fm.values[p * nf + nf - 2] = (y + 0.5) / h;
      fm.values[p * nf + nf - 1] = (x + 0.5) / w;
    }
  return fm;
}

// ---------------------------------------------------------------------------

ModelParams ModelParams::zeros(int num_classes, int num_features) {
  require(num_classes >= 1 && num_features >= 1, ErrorKind::kConfig, "model extents must be positive");
  ModelParams p;
  p.num_classes = num_classes;
  p.num_features = num_features;
  p.weights.assign(static_cast<std::size_t>(num_classes) * num_features, 0.0);
  p.bias.assign(static_cast<std::size_t>(num_classes), 0.0);
  return p;
}

ModelParams ModelParams::init(int num_classes, std::uint64_t seed, int num_features) {
  ModelParams p = zeros(num_classes, num_features);
  p.seed = seed;
  aug::RngStream rng(seed, 0, 0, 0x1417);
  for (auto& v : p.weights) v = rng.normal(0.0, 0.01);
  return p;
}

void ModelParams::check_finite() const {
  for (double v : weights) require(std::isfinite(v), ErrorKind::kNumeric, "non-finite model weight");
  for (double v : bias) require(std::isfinite(v), ErrorKind::kNumeric, "non-finite model bias");
}

void TrainConfig::validate() const {
  require(base_lr > 0, ErrorKind::kConfig, "train.base_lr must be positive");
  require(momentum >= 0 && momentum < 1, ErrorKind::kConfig, "train.momentum must be in [0,1)");
  require(weight_decay >= 0, ErrorKind::kConfig, "train.weight_decay must be non-negative");
  require(batch_size >= 1, ErrorKind::kConfig, "train.batch_size must be >= 1");
  require(epochs >= 1, ErrorKind::kConfig, "train.epochs must be >= 1");
  require(poly_power >= 0, ErrorKind::kConfig, "train.poly_power must be non-negative");
  require(unlabeled_loss_weight >= 0, ErrorKind::kConfig, "train.unlabeled_loss_weight must be non-negative");
  require(head_lr_multiplier > 0, ErrorKind::kConfig, "train.head_lr_multiplier must be positive");
  require(grad_threads >= 1, ErrorKind::kConfig, "train.grad_threads must be >= 1");
}

PixelScores forward(const ModelParams& params, const FeatureMap& features) {
  params.check_finite();
  require(features.num_features == params.num_features, ErrorKind::kDimension, "feature count mismatch");
  const int nc = params.num_classes, nf = params.num_features;
  PixelScores out(features.height, features.width, nc);
  const std::size_t n = out.pixels();
  for (std::size_t p = 0; p < n; ++p) {
    const double* phi = features.pixel(p);
    double* z = out.pixel(p);
    for (int c = 0; c < nc; ++c) {
      const double* wr = params.weights.data() + static_cast<std::size_t>(c) * nf;
      double acc = params.bias[static_cast<std::size_t>(c)];
      for (int f = 0; f < nf; ++f) acc += wr[f] * phi[f];
      z[c] = acc;
    }
  }
  return out;
}

PixelScores forward(const ModelParams& params, const Image& img) { return forward(params, compute_features(img)); }

namespace {
void softmax_row(const double* z, double* out, int nc) {
  double mx = z[0];
  for (int c = 1; c < nc; ++c) mx = std::max(mx, z[c]);
  double s = 0;
  for (int c = 0; c < nc; ++c) {
    out[c] = std::exp(z[c] - mx);
    s += out[c];
  }
  for (int c = 0; c < nc; ++c) out[c] /= s;
}
}  // namespace

PixelScores softmax(const PixelScores& logits) {
  PixelScores out(logits.height, logits.width, logits.classes);
  for (std::size_t p = 0; p < logits.pixels(); ++p) softmax_row(logits.pixel(p), out.pixel(p), logits.classes);
  return out;
}

SegMask argmax(const PixelScores& scores) {
  SegMask out(scores.height, scores.width);
  for (std::size_t p = 0; p < scores.pixels(); ++p) {
    const double* s = scores.pixel(p);
    int best = 0;
    for (int c = 1; c < scores.classes; ++c)
      if (s[c] > s[best]) best = c;
    out.labels[p] = static_cast<ClassId>(best);
  }
  return out;
}

LossResult cross_entropy_ignore(const PixelScores& logits, const SegMask& target) {
  require(logits.height == target.height && logits.width == target.width, ErrorKind::kDimension,
          "cross_entropy: logits and target shapes differ");
  const int nc = logits.classes;
  LossResult res;
  res.grad = PixelScores(logits.height, logits.width, nc);
  std::vector<double> prob(static_cast<std::size_t>(nc));
  double sum = 0;
  for (std::size_t p = 0; p < logits.pixels(); ++p) {
    const ClassId t = target.labels[p];
    if (t == kIgnore) continue;
    if (t >= nc) fail(ErrorKind::kLabel, "target label " + std::to_string(t) + " >= C");
    softmax_row(logits.pixel(p), prob.data(), nc);
    sum -= std::log(std::max(prob[t], 1e-300));
    double* g = res.grad.pixel(p);
    for (int c = 0; c < nc; ++c) g[c] = prob[static_cast<std::size_t>(c)];
    g[t] -= 1.0;
    ++res.valid_pixels;
  }
  if (res.valid_pixels == 0) return res;
  const double inv = 1.0 / static_cast<double>(res.valid_pixels);
  res.loss = sum * inv;
  for (auto& g : res.grad.values) g *= inv;
  return res;
}

double poly_lr(double base_lr, std::uint64_t iter, std::uint64_t total_iter, double power) {
  require(total_iter >= 1, ErrorKind::kRange, "poly_lr: total_iter must be >= 1");
  require(iter <= total_iter, ErrorKind::kRange, "poly_lr: iter > total_iter");
  return base_lr * std::pow(1.0 - static_cast<double>(iter) / static_cast<double>(total_iter), power);
}

// ---------------------------------------------------------------------------

namespace {

struct Partial {
  double ce_sum = 0;  // weighted
  std::vector<double> gw;
  std::vector<double> gb;
  std::size_t valid = 0;
};

// NC/NF fixed at compile time for the common shape; 0 means read from params.
template <int NC, int NF>
void accumulate_pixels(const ModelParams& params, const FeatureMap& fm, const SegMask& target, double weight,
                       Partial& part) {
  const int nc = NC ? NC : params.num_classes, nf = NF ? NF : params.num_features;
  std::array<double, 256> z{}, prob{};
  const double* weights = params.weights.data();
  for (std::size_t p = 0; p < target.labels.size(); ++p) {
    const ClassId t = target.labels[p];
    if (t == kIgnore) continue;
    const double* phi = fm.pixel(p);
    for (int c = 0; c < nc; ++c) {
      const double* wr = weights + static_cast<std::size_t>(c) * nf;
      double acc = params.bias[static_cast<std::size_t>(c)];
      for (int f = 0; f < nf; ++f) acc += wr[f] * phi[f];
      z[static_cast<std::size_t>(c)] = acc;
    }
    softmax_row(z.data(), prob.data(), nc);
    part.ce_sum -= weight * std::log(std::max(prob[t], 1e-300));
    prob[t] -= 1.0;
    for (int c = 0; c < nc; ++c) {
      const double g = weight * prob[static_cast<std::size_t>(c)];
      double* gr = part.gw.data() + static_cast<std::size_t>(c) * nf;
      for (int f = 0; f < nf; ++f) gr[f] += g * phi[f];
      part.gb[static_cast<std::size_t>(c)] += g;
    }
    ++part.valid;
  }
}

Partial sample_partial(const ModelParams& params, const BatchItem& item) {
  require(item.image && item.target, ErrorKind::kConfig, "batch item without data");
  require(item.image->height == item.target->height && item.image->width == item.target->width,
          ErrorKind::kDimension, "batch image and target shapes differ");
  const int nc = params.num_classes, nf = params.num_features;
  Partial part;
  part.gw.assign(params.weights.size(), 0.0);
  part.gb.assign(params.bias.size(), 0.0);
  bool any = false;
  for (ClassId t : item.target->labels) {
    if (t >= nc && t != kIgnore) fail(ErrorKind::kLabel, "target label " + std::to_string(t) + " >= C");
    any = any || t != kIgnore;
  }
  if (!any) return part;

  const FeatureMap fm = compute_features(*item.image);
  require(fm.num_features == nf, ErrorKind::kDimension, "feature count mismatch");
  if (nc == 4 && nf == kNumFeatures)
    accumulate_pixels<4, kNumFeatures>(params, fm, *item.target, item.weight, part);
  else
    accumulate_pixels<0, 0>(params, fm, *item.target, item.weight, part);
  return part;
}

}  // namespace

ParamGrad loss_and_grad(const ModelParams& params, std::span<const BatchItem> batch, double weight_decay,
                        int threads) {
  params.check_finite();
  std::vector<Partial> parts(batch.size());
  const int workers = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(batch.size(), 1)));
  if (workers == 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) parts[i] = sample_partial(params, batch[i]);
  } else {
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = static_cast<std::size_t>(t); i < batch.size(); i += static_cast<std::size_t>(workers))
            parts[i] = sample_partial(params, batch[i]);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    pool.clear();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // Reduction always runs in sample order, so threaded and serial results agree.
  ParamGrad out;
  out.weights.assign(params.weights.size(), 0.0);
  out.bias.assign(params.bias.size(), 0.0);
  double ce = 0;
  for (const auto& part : parts) {
    ce += part.ce_sum;
    out.valid_pixels += part.valid;
    if (part.valid == 0) continue;
    for (std::size_t k = 0; k < out.weights.size(); ++k) out.weights[k] += part.gw[k];
    for (std::size_t k = 0; k < out.bias.size(); ++k) out.bias[k] += part.gb[k];
  }
  if (out.valid_pixels > 0) {
    const double inv = 1.0 / static_cast<double>(out.valid_pixels);
    ce *= inv;
    for (auto& g : out.weights) g *= inv;
    for (auto& g : out.bias) g *= inv;
  }
  double norm = 0;
  for (std::size_t k = 0; k < out.weights.size(); ++k) {
    norm += params.weights[k] * params.weights[k];
    out.weights[k] += weight_decay * params.weights[k];
  }
  for (std::size_t k = 0; k < out.bias.size(); ++k) {
    norm += params.bias[k] * params.bias[k];
    out.bias[k] += weight_decay * params.bias[k];
  }
  out.loss = ce + 0.5 * weight_decay * norm;
  return out;
}

TrainState::TrainState(ModelParams p)
    : params(std::move(p)), velocity_w(params.weights.size(), 0.0), velocity_b(params.bias.size(), 0.0) {}

StepResult train_step(TrainState& state, std::span<const BatchItem> batch, const TrainConfig& cfg,
                      std::uint64_t iter, std::uint64_t total_iter) {
  require(!batch.empty(), ErrorKind::kConfig, "train_step: empty batch");
  const auto grad = loss_and_grad(state.params, batch, cfg.weight_decay, cfg.grad_threads);
  if (!std::isfinite(grad.loss))
    fail(ErrorKind::kNumeric, "training aborted: non-finite loss at step " + std::to_string(state.params.step));
  StepResult res;
  res.loss = grad.loss;
  res.lr = poly_lr(cfg.base_lr, iter, total_iter, cfg.poly_power);
  auto& p = state.params;
  for (std::size_t k = 0; k < p.weights.size(); ++k) {
    state.velocity_w[k] = cfg.momentum * state.velocity_w[k] + grad.weights[k];
    p.weights[k] -= res.lr * state.velocity_w[k];
  }
  const double head_lr = res.lr * cfg.head_lr_multiplier;
  for (std::size_t k = 0; k < p.bias.size(); ++k) {
    state.velocity_b[k] = cfg.momentum * state.velocity_b[k] + grad.bias[k];
    p.bias[k] -= head_lr * state.velocity_b[k];
  }
  ++p.step;
  for (double v : p.weights)
    if (!std::isfinite(v)) fail(ErrorKind::kNumeric, "training aborted: parameter overflow at step " + std::to_string(p.step));
  for (double v : p.bias)
    if (!std::isfinite(v)) fail(ErrorKind::kNumeric, "training aborted: parameter overflow at step " + std::to_string(p.step));
  return res;
}

// ---------------------------------------------------------------------------

namespace {
constexpr char kCheckpointMagic[5] = "SGCK";
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

std::vector<std::uint8_t> save_checkpoint(const ModelParams& params, CheckpointTag tag, std::uint64_t config_hash) {
  require(params.weights.size() == static_cast<std::size_t>(params.num_classes) * params.num_features &&
              params.bias.size() == static_cast<std::size_t>(params.num_classes),
          ErrorKind::kDimension, "checkpoint: inconsistent parameter shapes");
  detail::ByteWriter w;
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.num_classes));
  w.u32(static_cast<std::uint32_t>(params.num_features));
  w.u64(params.step);
  for (double v : params.weights) w.f64(v);
  for (double v : params.bias) w.f64(v);
  w.u64(params.seed);
  w.u32(tag.numerator);
  w.u32(tag.denominator);
  w.u64(config_hash);
  return w.take();
}

Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  r.expect_magic(kCheckpointMagic);
  const auto version = r.u32();
  require(version == kCheckpointVersion, ErrorKind::kFormat,
          "checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  const auto nc = r.u32();
  const auto nf = r.u32();
  require(nc >= 1 && nc < 256 && nf >= 1 && nf < 4096, ErrorKind::kFormat, "checkpoint: bad extents");
  ck.params = ModelParams::zeros(static_cast<int>(nc), static_cast<int>(nf));
  ck.params.step = r.u64();
  for (auto& v : ck.params.weights) v = r.f64();
  for (auto& v : ck.params.bias) v = r.f64();
  ck.params.seed = r.u64();
  ck.tag.numerator = r.u32();
  ck.tag.denominator = r.u32();
  ck.config_hash = r.u64();
  r.expect_end();
  require(ck.tag.denominator >= 1 && ck.tag.numerator <= ck.tag.denominator, ErrorKind::kFormat,
          "checkpoint: bad tag");
  return ck;
}

}  // namespace stpp::model
