#pragma once

#include "isvae/common.hpp"

#include <string>
#include <vector>

namespace isvae::nn {

enum class Activation { none, relu, sigmoid };

// Named view into a layer's parameter/gradient storage. Pointers stay valid
// for the lifetime of the owning layer; `size` is the flat element count.
struct ParamRef {
  std::string name;
  double* value = nullptr;
  double* grad = nullptr;
  int size = 0;
};

// Fully connected layer, batch rows. y = x * w^T + b.
struct Dense {
  Mat w, gw;  // out x in
  Vec b, gb;
  Mat x_cache;

  Dense(int in, int out);
  void init(Rng& rng);  // U(-1/sqrt(in), 1/sqrt(in)) for weights and biases
  Mat forward(const Mat& x);
  Mat backward(const Mat& gout);  // accumulates gw/gb, returns d input
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
  void zero_grad();
  int in_features() const { return static_cast<int>(w.cols()); }
  int out_features() const { return static_cast<int>(w.rows()); }
};

// 1-D convolution over single-channel rows with same padding. Output rows are
// channel-major blocks: col index = c*width + t.
struct Conv1d {
  int channels, kernel, width;
  Mat w, gw;  // channels x kernel
  Vec b, gb;
  Mat x_cache;

  Conv1d(int channels, int kernel, int width);
  void init(Rng& rng);
  Mat forward(const Mat& x);          // batch x width -> batch x (channels*width)
  Mat backward(const Mat& gout);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
  void zero_grad();
};

// Per-channel max pooling, no padding. Input layout matches Conv1d output.
struct MaxPool1d {
  int channels, width, kernel, stride;
  Eigen::MatrixXi argmax_cache;  // absolute input column per output cell

  MaxPool1d(int channels, int width, int kernel = 3, int stride = 2);
  int pooled_width() const { return (width - kernel) / stride + 1; }
  int out_features() const { return channels * pooled_width(); }
  Mat forward(const Mat& x);
  Mat backward(const Mat& gout);
};

// Dense stack with one activation per layer; caches activations for backward.
struct Mlp {
  std::vector<Dense> layers;
  std::vector<Activation> acts;
  std::vector<Mat> out_cache;  // post-activation output per layer

  // sizes = {in, h1, ..., out}; `hidden` after every layer but the last,
  // `final_act` after the last.
  Mlp(const std::vector<int>& sizes, Activation hidden, Activation final_act);
  void init(Rng& rng);
  Mat forward(const Mat& x);
  Mat backward(const Mat& gout);
  void collect(const std::string& prefix, std::vector<ParamRef>& out);
  void zero_grad();
};

// Adam with bias correction. State is laid out by walking the ParamRef list,
// so callers must pass the same ordered list every step.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Vec m, v;
  long t = 0;

  explicit Adam(double lr_ = 1e-3) : lr(lr_) {}
  void step(const std::vector<ParamRef>& params);
};

Mat apply_activation(const Mat& x, Activation a);
// d(act)/d(pre) expressed through the cached post-activation value.
Mat activation_grad_from_output(const Mat& out, const Mat& gout, Activation a);

}  // namespace isvae::nn
