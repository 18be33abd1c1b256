#include "isvae/nn.hpp"

#include <cmath>

namespace isvae::nn {

Mat apply_activation(const Mat& x, Activation a) {
  switch (a) {
    case Activation::none: return x;
    case Activation::relu: return x.cwiseMax(0.0);
    case Activation::sigmoid: return ((-x.array()).exp() + 1.0).inverse().matrix();
  }
  return x;
}

Mat activation_grad_from_output(const Mat& out, const Mat& gout, Activation a) {
  switch (a) {
    case Activation::none: return gout;
    case Activation::relu: return (out.array() > 0.0).cast<double>().matrix().cwiseProduct(gout);
    case Activation::sigmoid: return (out.array() * (1.0 - out.array())).matrix().cwiseProduct(gout);
  }
  return gout;
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

Dense::Dense(int in, int out)
    : w(Mat::Zero(out, in)), gw(Mat::Zero(out, in)), b(Vec::Zero(out)), gb(Vec::Zero(out)) {}

void Dense::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (int r = 0; r < w.rows(); ++r)
    for (int c = 0; c < w.cols(); ++c) w(r, c) = u(rng);
  for (int r = 0; r < b.size(); ++r) b[r] = u(rng);
}

Mat Dense::forward(const Mat& x) {
  x_cache = x;
  return (x * w.transpose()).rowwise() + b.transpose();
}

Mat Dense::backward(const Mat& gout) {
  gw.noalias() += gout.transpose() * x_cache;
  gb.noalias() += gout.colwise().sum().transpose();
  return gout * w;
}

void Dense::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w", w.data(), gw.data(), static_cast<int>(w.size())});
  out.push_back({prefix + ".b", b.data(), gb.data(), static_cast<int>(b.size())});
}

void Dense::zero_grad() {
  gw.setZero();
  gb.setZero();
}

// ---------------------------------------------------------------------------
// Conv1d
// ---------------------------------------------------------------------------

Conv1d::Conv1d(int channels_, int kernel_, int width_)
    : channels(channels_), kernel(kernel_), width(width_),
      w(Mat::Zero(channels_, kernel_)), gw(Mat::Zero(channels_, kernel_)),
      b(Vec::Zero(channels_)), gb(Vec::Zero(channels_)) {
  if (kernel % 2 == 0) throw ValidationError("Conv1d: kernel must be odd");
}

void Conv1d::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(kernel));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (int c = 0; c < channels; ++c)
    for (int k = 0; k < kernel; ++k) w(c, k) = u(rng);
  for (int c = 0; c < channels; ++c) b[c] = u(rng);
}

Mat Conv1d::forward(const Mat& x) {
  if (x.cols() != width) throw ValidationError("Conv1d: input width mismatch");
  x_cache = x;
  const int batch = static_cast<int>(x.rows());
  const int pad = kernel / 2;
  Mat out(batch, channels * width);
  for (int c = 0; c < channels; ++c) {
    auto block = out.middleCols(c * width, width);
    block.setConstant(b[c]);
    for (int u = 0; u < kernel; ++u) {
      // output position t reads input position s = t + u - pad
      const int t0 = std::max(0, pad - u);
      const int t1 = std::min(width, width + pad - u);
      if (t1 <= t0) continue;
      block.middleCols(t0, t1 - t0).noalias() += w(c, u) * x.middleCols(t0 + u - pad, t1 - t0);
    }
  }
  return out;
}

Mat Conv1d::backward(const Mat& gout) {
  const int batch = static_cast<int>(gout.rows());
  const int pad = kernel / 2;
  Mat gx = Mat::Zero(batch, width);
  for (int c = 0; c < channels; ++c) {
    auto gblock = gout.middleCols(c * width, width);
    gb[c] += gblock.sum();
    for (int u = 0; u < kernel; ++u) {
      const int t0 = std::max(0, pad - u);
      const int t1 = std::min(width, width + pad - u);
      if (t1 <= t0) continue;
      gw(c, u) += gblock.middleCols(t0, t1 - t0)
                      .cwiseProduct(x_cache.middleCols(t0 + u - pad, t1 - t0))
                      .sum();
      gx.middleCols(t0 + u - pad, t1 - t0).noalias() += w(c, u) * gblock.middleCols(t0, t1 - t0);
    }
  }
  return gx;
}

void Conv1d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w", w.data(), gw.data(), static_cast<int>(w.size())});
  out.push_back({prefix + ".b", b.data(), gb.data(), static_cast<int>(b.size())});
}

void Conv1d::zero_grad() {
  gw.setZero();
  gb.setZero();
}

// ---------------------------------------------------------------------------
// MaxPool1d
// ---------------------------------------------------------------------------

MaxPool1d::MaxPool1d(int channels_, int width_, int kernel_, int stride_)
    : channels(channels_), width(width_), kernel(kernel_), stride(stride_) {
  if (pooled_width() < 1) throw ValidationError("MaxPool1d: window larger than input");
}

Mat MaxPool1d::forward(const Mat& x) {
  if (x.cols() != static_cast<long>(channels) * width)
    throw ValidationError("MaxPool1d: input width mismatch");
  const int batch = static_cast<int>(x.rows());
  const int p = pooled_width();
  Mat out(batch, channels * p);
  argmax_cache.resize(batch, channels * p);
  for (int c = 0; c < channels; ++c) {
    for (int j = 0; j < p; ++j) {
      const int base = c * width + j * stride;
      const int col = c * p + j;
      for (int r = 0; r < batch; ++r) {
        double best = x(r, base);
        int best_idx = base;
        for (int k = 1; k < kernel; ++k) {
          if (x(r, base + k) > best) {
            best = x(r, base + k);
            best_idx = base + k;
          }
        }
        out(r, col) = best;
        argmax_cache(r, col) = best_idx;
      }
    }
  }
  return out;
}

Mat MaxPool1d::backward(const Mat& gout) {
  const int batch = static_cast<int>(gout.rows());
  Mat gx = Mat::Zero(batch, static_cast<long>(channels) * width);
  for (int col = 0; col < gout.cols(); ++col)
    for (int r = 0; r < batch; ++r) gx(r, argmax_cache(r, col)) += gout(r, col);
  return gx;
}

// ---------------------------------------------------------------------------
// Mlp
// ---------------------------------------------------------------------------

Mlp::Mlp(const std::vector<int>& sizes, Activation hidden, Activation final_act) {
  if (sizes.size() < 2) throw ValidationError("Mlp: need at least input and output sizes");
  for (size_t i = 0; i + 1 < sizes.size(); ++i) {
    layers.emplace_back(sizes[i], sizes[i + 1]);
    acts.push_back(i + 2 < sizes.size() ? hidden : final_act);
  }
  out_cache.resize(layers.size());
}

void Mlp::init(Rng& rng) {
  for (auto& l : layers) l.init(rng);
}

Mat Mlp::forward(const Mat& x) {
  Mat h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    h = apply_activation(layers[i].forward(h), acts[i]);
    out_cache[i] = h;
  }
  return h;
}

Mat Mlp::backward(const Mat& gout) {
  Mat g = gout;
  for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
    g = activation_grad_from_output(out_cache[i], g, acts[i]);
    g = layers[i].backward(g);
  }
  return g;
}

void Mlp::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  for (size_t i = 0; i < layers.size(); ++i)
    layers[i].collect(prefix + "." + std::to_string(i), out);
}

void Mlp::zero_grad() {
  for (auto& l : layers) l.zero_grad();
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void Adam::step(const std::vector<ParamRef>& params) {
  int total = 0;
  for (const auto& p : params) total += p.size;
  if (m.size() != total) {
    m = Vec::Zero(total);
    v = Vec::Zero(total);
    t = 0;
  }
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  int offset = 0;
  for (const auto& p : params) {
    for (int i = 0; i < p.size; ++i) {
      const double g = p.grad[i];
      double& mi = m[offset + i];
      double& vi = v[offset + i];
      mi = beta1 * mi + (1.0 - beta1) * g;
      vi = beta2 * vi + (1.0 - beta2) * g * g;
      p.value[i] -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps);
    }
    offset += p.size;
  }
}

}  // namespace isvae::nn
