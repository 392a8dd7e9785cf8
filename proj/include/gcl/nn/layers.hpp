#pragma once

// Layer kernels. Activations are batch-major: [N, C, H, W] for spatial
// layers and [N, F] for dense ones. Convolutions lower to GEMM through
// im2col; Eigen supplies the matrix products.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gcl/core/error.hpp"
#include "gcl/core/rng.hpp"
#include "gcl/core/tensor.hpp"

namespace gcl::nn {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

/// Named view of one trainable tensor and its gradient accumulator.
template <class T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

enum class Activation { None, Relu };

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;

  const std::string& name() const { return name_; }
  /// Output shape for one example (without the batch axis).
  virtual Shape output_shape(const Shape& input) const = 0;
  /// Computes out from in, caching whatever backward needs.
  virtual void forward(const Tensor<T>& in, Tensor<T>& out) = 0;
  /// Accumulates parameter gradients and, when grad_in is non-null, writes
  /// the gradient with respect to the cached input.
  virtual void backward(const Tensor<T>& grad_out, Tensor<T>* grad_in) = 0;
  virtual std::vector<ParamRef<T>> params() { return {}; }
  virtual void init(Engine&) {}
  /// Drops cached activations (frees memory after evaluation).
  virtual void release() {}

 protected:
  explicit Layer(std::string name) : name_(std::move(name)) {}

 private:
  std::string name_;
};

namespace detail {

template <class T>
void init_uniform(Tensor<T>& t, Engine& eng, double limit) {
  for (auto& v : t.values()) v = static_cast<T>(uniform(eng, -limit, limit));
}

inline Shape with_batch(std::size_t n, const Shape& s) {
  Shape out{n};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

template <class T>
void ensure_shape(Tensor<T>& t, const Shape& s) {
  if (t.shape() != s) t = Tensor<T>(s);
}

}  // namespace detail

/// 3x3 (odd k) convolution, stride 1, zero "same" padding, optional fused ReLU.
template <class T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel = 3,
         Activation act = Activation::Relu)
      : Layer<T>(std::move(name)),
        cin_(in_channels),
        cout_(out_channels),
        k_(kernel),
        act_(act),
        weight_({out_channels, in_channels * kernel * kernel}),
        bias_({out_channels}),
        dweight_({out_channels, in_channels * kernel * kernel}),
        dbias_({out_channels}) {
    if (kernel % 2 == 0) throw Error(this->name() + ": kernel size must be odd");
  }

  Shape output_shape(const Shape& in) const override {
    check_input(in);
    return {cout_, in[1], in[2]};
  }

  void forward(const Tensor<T>& in, Tensor<T>& out) override {
    const Shape ex{in.dim(1), in.dim(2), in.dim(3)};
    check_input(ex);
    const std::size_t n = in.dim(0), h = in.dim(2), w = in.dim(3), p = h * w;
    const std::size_t kk = cin_ * k_ * k_;
    detail::ensure_shape(out, {n, cout_, h, w});
    detail::ensure_shape(cols_, {n, kk, p});
    input_shape_ = in.shape();
    ConstMatrixMap<T> wm(weight_.data(), cout_, kk);
    for (std::size_t b = 0; b < n; ++b) {
      T* cols = cols_.data() + b * kk * p;
      im2col(in.data() + b * cin_ * p, h, w, cols);
      MatrixMap<T> om(out.data() + b * cout_ * p, cout_, p);
      om.noalias() = wm * ConstMatrixMap<T>(cols, kk, p);
      for (std::size_t c = 0; c < cout_; ++c) {
        T* row = om.data() + c * p;
        const T bc = bias_[c];
        if (act_ == Activation::Relu)
          for (std::size_t i = 0; i < p; ++i) row[i] = std::max(row[i] + bc, T(0));
        else
          for (std::size_t i = 0; i < p; ++i) row[i] += bc;
      }
    }
    if (act_ == Activation::Relu) out_ = &out;
  }

  void backward(const Tensor<T>& grad_out, Tensor<T>* grad_in) override {
    const std::size_t n = input_shape_[0], h = input_shape_[2], w = input_shape_[3], p = h * w;
    const std::size_t kk = cin_ * k_ * k_;
    if (grad_in) detail::ensure_shape(*grad_in, input_shape_);
    MatrixMap<T> dw(dweight_.data(), cout_, kk);
    ConstMatrixMap<T> wm(weight_.data(), cout_, kk);
    RowMatrix<T> g(cout_, p);
    RowMatrix<T> dcols;
    for (std::size_t b = 0; b < n; ++b) {
      const T* go = grad_out.data() + b * cout_ * p;
      if (act_ == Activation::Relu) {
        const T* o = out_->data() + b * cout_ * p;
        for (std::size_t i = 0; i < cout_ * p; ++i) g.data()[i] = o[i] > T(0) ? go[i] : T(0);
      } else {
        std::copy(go, go + cout_ * p, g.data());
      }
      ConstMatrixMap<T> cols(cols_.data() + b * kk * p, kk, p);
      dw.noalias() += g * cols.transpose();
      for (std::size_t c = 0; c < cout_; ++c) dbias_[c] += g.row(c).sum();
      if (grad_in) {
        dcols.noalias() = wm.transpose() * g;
        col2im(dcols.data(), h, w, grad_in->data() + b * cin_ * p);
      }
    }
  }

  std::vector<ParamRef<T>> params() override {
    return {{this->name() + "/kernel", &weight_, &dweight_},
            {this->name() + "/bias", &bias_, &dbias_}};
  }

  void init(Engine& eng) override {
    detail::init_uniform(weight_, eng, std::sqrt(6.0 / static_cast<double>(cin_ * k_ * k_)));
    bias_.fill(T(0));
  }

  void release() override {
    cols_ = Tensor<T>();
    out_ = nullptr;
  }

  std::size_t in_channels() const { return cin_; }
  std::size_t out_channels() const { return cout_; }

 private:
  void check_input(const Shape& in) const {
    if (in.size() != 3 || in[0] != cin_)
      throw Error(this->name() + ": expected [" + std::to_string(cin_) + ",H,W] input, got " +
                  shape_string(in));
  }

  void im2col(const T* src, std::size_t h, std::size_t w, T* cols) const {
    const long pad = static_cast<long>(k_ / 2);
    const std::size_t p = h * w;
    for (std::size_t c = 0; c < cin_; ++c)
      for (std::size_t ky = 0; ky < k_; ++ky)
        for (std::size_t kx = 0; kx < k_; ++kx) {
          T* dst = cols + ((c * k_ + ky) * k_ + kx) * p;
          const long dy = static_cast<long>(ky) - pad, dx = static_cast<long>(kx) - pad;
          for (std::size_t y = 0; y < h; ++y) {
            T* drow = dst + y * w;
            const long sy = static_cast<long>(y) + dy;
            if (sy < 0 || sy >= static_cast<long>(h)) {
              std::fill(drow, drow + w, T(0));
              continue;
            }
            const T* srow = src + (c * h + static_cast<std::size_t>(sy)) * w;
            const long x0 = std::max(0L, -dx);
            const long x1 = std::min(static_cast<long>(w), static_cast<long>(w) - dx);
            std::fill(drow, drow + x0, T(0));
            std::copy(srow + x0 + dx, srow + x1 + dx, drow + x0);
            std::fill(drow + x1, drow + w, T(0));
          }
        }
  }

  void col2im(const T* cols, std::size_t h, std::size_t w, T* dst) const {
    const long pad = static_cast<long>(k_ / 2);
    const std::size_t p = h * w;
    std::fill(dst, dst + cin_ * p, T(0));
    for (std::size_t c = 0; c < cin_; ++c)
      for (std::size_t ky = 0; ky < k_; ++ky)
        for (std::size_t kx = 0; kx < k_; ++kx) {
          const T* src = cols + ((c * k_ + ky) * k_ + kx) * p;
          const long dy = static_cast<long>(ky) - pad, dx = static_cast<long>(kx) - pad;
          for (std::size_t y = 0; y < h; ++y) {
            const long sy = static_cast<long>(y) + dy;
            if (sy < 0 || sy >= static_cast<long>(h)) continue;
            T* drow = dst + (c * h + static_cast<std::size_t>(sy)) * w;
            const T* srow = src + y * w;
            const long x0 = std::max(0L, -dx);
            const long x1 = std::min(static_cast<long>(w), static_cast<long>(w) - dx);
            for (long x = x0; x < x1; ++x) drow[x + dx] += srow[x];
          }
        }
  }

  std::size_t cin_, cout_, k_;
  Activation act_;
  Tensor<T> weight_, bias_, dweight_, dbias_;
  Tensor<T> cols_;
  Shape input_shape_;
  const Tensor<T>* out_ = nullptr;
};

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
template <class T>
class MaxPool2d final : public Layer<T> {
 public:
  explicit MaxPool2d(std::string name) : Layer<T>(std::move(name)) {}

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 3 || in[1] < 2 || in[2] < 2)
      throw Error(this->name() + ": cannot pool " + shape_string(in));
    return {in[0], in[1] / 2, in[2] / 2};
  }

  void forward(const Tensor<T>& in, Tensor<T>& out) override {
    const Shape os = output_shape({in.dim(1), in.dim(2), in.dim(3)});
    const std::size_t n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
    const std::size_t oh = os[1], ow = os[2];
    detail::ensure_shape(out, detail::with_batch(n, os));
    input_shape_ = in.shape();
    argmax_.resize(out.size());
    std::size_t o = 0;
    for (std::size_t plane = 0; plane < n * c; ++plane) {
      const std::size_t base = plane * h * w;
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x, ++o) {
          std::size_t best = base + (2 * y) * w + 2 * x;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = base + (2 * y + dy) * w + 2 * x + dx;
              if (in[idx] > in[best]) best = idx;
            }
          argmax_[o] = best;
          out[o] = in[best];
        }
    }
  }

  void backward(const Tensor<T>& grad_out, Tensor<T>* grad_in) override {
    if (!grad_in) return;
    detail::ensure_shape(*grad_in, input_shape_);
    grad_in->fill(T(0));
    for (std::size_t o = 0; o < grad_out.size(); ++o) (*grad_in)[argmax_[o]] += grad_out[o];
  }

  void release() override { argmax_ = {}; }

 private:
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

/// Reshapes [N, ...] to [N, prod(...)].
template <class T>
class Flatten final : public Layer<T> {
 public:
  explicit Flatten(std::string name) : Layer<T>(std::move(name)) {}

  Shape output_shape(const Shape& in) const override { return {shape_volume(in)}; }

  void forward(const Tensor<T>& in, Tensor<T>& out) override {
    input_shape_ = in.shape();
    out = in;
    out.reshape({in.dim(0), in.size() / in.dim(0)});
  }

  void backward(const Tensor<T>& grad_out, Tensor<T>* grad_in) override {
    if (!grad_in) return;
    *grad_in = grad_out;
    grad_in->reshape(input_shape_);
  }

 private:
  Shape input_shape_;
};

/// Fully connected layer y = x W^T + b with optional fused ReLU.
template <class T>
class Dense final : public Layer<T> {
 public:
  Dense(std::string name, std::size_t in_features, std::size_t out_features,
        Activation act = Activation::Relu)
      : Layer<T>(std::move(name)),
        in_(in_features),
        out_features_(out_features),
        act_(act),
        weight_({out_features, in_features}),
        bias_({out_features}),
        dweight_({out_features, in_features}),
        dbias_({out_features}) {}

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 1 || in[0] != in_)
      throw Error(this->name() + ": expected [" + std::to_string(in_) + "] input, got " +
                  shape_string(in));
    return {out_features_};
  }

  void forward(const Tensor<T>& in, Tensor<T>& out) override {
    output_shape({in.size() / in.dim(0)});
    const std::size_t n = in.dim(0);
    detail::ensure_shape(out, {n, out_features_});
    in_ptr_ = &in;
    ConstMatrixMap<T> x(in.data(), n, in_);
    ConstMatrixMap<T> wm(weight_.data(), out_features_, in_);
    MatrixMap<T> y(out.data(), n, out_features_);
    y.noalias() = x * wm.transpose();
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t j = 0; j < out_features_; ++j) {
        T& v = y(b, j);
        v += bias_[j];
        if (act_ == Activation::Relu) v = std::max(v, T(0));
      }
    out_ptr_ = &out;
  }

  void backward(const Tensor<T>& grad_out, Tensor<T>* grad_in) override {
    const std::size_t n = grad_out.dim(0);
    RowMatrix<T> g(n, out_features_);
    for (std::size_t i = 0; i < static_cast<std::size_t>(g.size()); ++i)
      g.data()[i] = (act_ == Activation::Relu && (*out_ptr_)[i] <= T(0)) ? T(0) : grad_out[i];
    ConstMatrixMap<T> x(in_ptr_->data(), n, in_);
    MatrixMap<T> dw(dweight_.data(), out_features_, in_);
    dw.noalias() += g.transpose() * x;
    for (std::size_t j = 0; j < out_features_; ++j) dbias_[j] += g.col(j).sum();
    if (grad_in) {
      detail::ensure_shape(*grad_in, {n, in_});
      MatrixMap<T> dx(grad_in->data(), n, in_);
      dx.noalias() = g * ConstMatrixMap<T>(weight_.data(), out_features_, in_);
    }
  }

  std::vector<ParamRef<T>> params() override {
    return {{this->name() + "/kernel", &weight_, &dweight_},
            {this->name() + "/bias", &bias_, &dbias_}};
  }

  void init(Engine& eng) override {
    detail::init_uniform(weight_, eng, std::sqrt(6.0 / static_cast<double>(in_)));
    bias_.fill(T(0));
  }

  void release() override {
    in_ptr_ = nullptr;
    out_ptr_ = nullptr;
  }

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_features_; }

 private:
  std::size_t in_, out_features_;
  Activation act_;
  Tensor<T> weight_, bias_, dweight_, dbias_;
  const Tensor<T>* in_ptr_ = nullptr;
  const Tensor<T>* out_ptr_ = nullptr;
};

}  // namespace gcl::nn
