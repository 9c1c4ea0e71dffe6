#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <string>

#include "stfcn/random.hpp"
#include "stfcn/tensor.hpp"

namespace stfcn {

enum class Activation : std::uint8_t { relu = 0, linear = 1 };

/// Spatial kernel extent of every convolution-shaped layer.
inline constexpr Index kKernel = 3;

/// Weights [3, 3, depth, in, out], bias [out]. Spatial padding is one zero
/// cell on each side, the time axis is not padded.
template <typename Scalar>
struct Conv3DLayer {
  Index kernel_depth = 1;
  Index in_channels = 1;
  Index out_channels = 1;
  Activation activation = Activation::relu;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;

  Conv3DLayer() = default;
  Conv3DLayer(Index depth, Index in, Index out, Activation act = Activation::relu)
      : kernel_depth(depth), in_channels(in), out_channels(out), activation(act),
        weights({kKernel, kKernel, depth, in, out}), bias({out}) {}

  Index fan_in() const { return kKernel * kKernel * kernel_depth * in_channels; }
  Index output_depth(Index input_depth) const { return input_depth - kernel_depth + 1; }
};

/// Weights [3, 3, in, out], bias [out].
template <typename Scalar>
struct Conv2DLayer {
  Index in_channels = 1;
  Index out_channels = 1;
  Activation activation = Activation::relu;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;

  Conv2DLayer() = default;
  Conv2DLayer(Index in, Index out, Activation act = Activation::relu)
      : in_channels(in), out_channels(out), activation(act), weights({kKernel, kKernel, in, out}), bias({out}) {}

  Index fan_in() const { return kKernel * kKernel * in_channels; }
};

/// Locally connected layer: one filter bank per output cell.
/// Weights [rows, cols, 3, 3, in, out], bias [rows, cols, out].
template <typename Scalar>
struct LC2DLayer {
  Index rows = 1;
  Index cols = 1;
  Index in_channels = 1;
  Index out_channels = 1;
  Activation activation = Activation::relu;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;

  LC2DLayer() = default;
  LC2DLayer(Index r, Index c, Index in, Index out, Activation act = Activation::relu)
      : rows(r), cols(c), in_channels(in), out_channels(out), activation(act),
        weights({r, c, kKernel, kKernel, in, out}), bias({r, c, out}) {}

  Index fan_in() const { return kKernel * kKernel * in_channels; }
  Index parameter_count() const { return weights.size() + bias.size(); }
};

/// Weights [in, out], bias [out]. Reads its input flat, so any shape whose
/// size is `in` is accepted; the output has shape [out].
template <typename Scalar>
struct DenseLayer {
  Index in_features = 1;
  Index out_features = 1;
  Activation activation = Activation::relu;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;

  DenseLayer() = default;
  DenseLayer(Index in, Index out, Activation act = Activation::relu)
      : in_features(in), out_features(out), activation(act), weights({in, out}), bias({out}) {}

  Index fan_in() const { return in_features; }
};

/// What backward needs from forward: the layer input and the
/// pre-activation output.
template <typename Scalar>
struct LayerCache {
  Tensor<Scalar> input;
  Tensor<Scalar> pre_activation;

  bool valid() const { return !input.empty() && !pre_activation.empty(); }
};

template <typename Scalar>
struct LayerGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;
};

/// Uniform in [-s, s], s = sqrt(6 / fan_in). Biases are set to zero.
template <typename Layer>
void initialize(Layer& layer, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(layer.fan_in()));
  for (Index k = 0; k < layer.weights.size(); ++k) layer.weights[k] = rng.uniform(-s, s);
  layer.bias.set_zero();
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  return Tensor<Scalar>(x.shape(), x.data().cwiseMax(Scalar(0)));
}

namespace detail {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using StridedConstMap = Eigen::Map<const RowMatrix<Scalar>, 0, Eigen::OuterStride<>>;

template <typename Scalar>
Tensor<Scalar> activate(Tensor<Scalar> pre, Activation act) {
  if (act == Activation::relu) pre.data() = pre.data().cwiseMax(Scalar(0));
  return pre;
}

/// grad_out gated by the activation derivative (zero where pre <= 0 for ReLU).
template <typename Scalar>
Tensor<Scalar> gate(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& pre, Activation act) {
  require_same_shape(grad_out.shape(), pre.shape(), "backward");
  if (act == Activation::linear) return grad_out;
  return Tensor<Scalar>(grad_out.shape(),
                        (pre.data().array() > Scalar(0)).select(grad_out.data(), Scalar(0)).matrix());
}

template <typename Scalar>
void require_cache(const LayerCache<Scalar>& cache, const char* who) {
  if (!cache.valid()) throw StateError(std::string(who) + ": no forward cache; run forward with a cache first");
}

/**
 * Shared kernel of the 3D and 2D convolutions on a [rows, cols, depth, in]
 * volume. For a fixed output cell and spatial tap the input window over
 * (time, channel) is a row-strided view: output time step t reads the
 * contiguous run starting at t * in of length depth * in. That turns each tap
 * into one small matrix product.
 */
template <typename Scalar>
void conv_forward(const Scalar* x, Index rows, Index cols, Index t_in, Index c_in, const Scalar* w, Index depth,
                  Index c_out, const Scalar* b, Scalar* pre) {
  const Index t_out = t_in - depth + 1;
  Eigen::Map<const RowVector<Scalar>> bias(b, c_out);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      Eigen::Map<RowMatrix<Scalar>> out(pre + (i * cols + j) * t_out * c_out, t_out, c_out);
      out.rowwise() = bias;
      for (Index di = 0; di < kKernel; ++di) {
        const Index ii = i + di - 1;
        if (ii < 0 || ii >= rows) continue;
        for (Index dj = 0; dj < kKernel; ++dj) {
          const Index jj = j + dj - 1;
          if (jj < 0 || jj >= cols) continue;
          StridedConstMap<Scalar> window(x + (ii * cols + jj) * t_in * c_in, t_out, depth * c_in,
                                         Eigen::OuterStride<>(c_in));
          Eigen::Map<const RowMatrix<Scalar>> tap(w + (di * kKernel + dj) * depth * c_in * c_out, depth * c_in,
                                                  c_out);
          out.noalias() += window * tap;
        }
      }
    }
  }
}

template <typename Scalar>
void conv_backward(const Scalar* x, Index rows, Index cols, Index t_in, Index c_in, const Scalar* w, Index depth,
                   Index c_out, const Scalar* g, Scalar* gx, Scalar* gw, Scalar* gb) {
  const Index t_out = t_in - depth + 1;
  Eigen::Map<RowVector<Scalar>> grad_bias(gb, c_out);
  RowMatrix<Scalar> back(t_out, depth * c_in);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      Eigen::Map<const RowMatrix<Scalar>> gout(g + (i * cols + j) * t_out * c_out, t_out, c_out);
      for (Index t = 0; t < t_out; ++t) grad_bias += gout.row(t);
      for (Index di = 0; di < kKernel; ++di) {
        const Index ii = i + di - 1;
        if (ii < 0 || ii >= rows) continue;
        for (Index dj = 0; dj < kKernel; ++dj) {
          const Index jj = j + dj - 1;
          if (jj < 0 || jj >= cols) continue;
          const Index in_off = (ii * cols + jj) * t_in * c_in;
          const Index tap_off = (di * kKernel + dj) * depth * c_in * c_out;
          StridedConstMap<Scalar> window(x + in_off, t_out, depth * c_in, Eigen::OuterStride<>(c_in));
          Eigen::Map<const RowMatrix<Scalar>> tap(w + tap_off, depth * c_in, c_out);
          Eigen::Map<RowMatrix<Scalar>> grad_tap(gw + tap_off, depth * c_in, c_out);
          grad_tap.noalias() += window.transpose() * gout;
          back.noalias() = gout * tap.transpose();
          for (Index t = 0; t < t_out; ++t)
            Eigen::Map<RowVector<Scalar>>(gx + in_off + t * c_in, depth * c_in) += back.row(t);
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 3D convolution: x [rows, cols, depth_in, in] -> [rows, cols, depth_in - k_d + 1, out]

template <typename Scalar>
Tensor<Scalar> conv3d_forward(const Tensor<Scalar>& x, const Conv3DLayer<Scalar>& layer,
                              LayerCache<Scalar>* cache = nullptr) {
  if (x.rank() != 4) throw ShapeError("conv3d: expected input [rows, cols, depth, channels], got " + to_string(x.shape()));
  if (x.dim(3) != layer.in_channels)
    throw ShapeError("conv3d: input has " + std::to_string(x.dim(3)) + " channels, layer expects " +
                     std::to_string(layer.in_channels));
  if (layer.kernel_depth < 1 || layer.kernel_depth > x.dim(2))
    throw DepthError("conv3d: kernel depth " + std::to_string(layer.kernel_depth) + " exceeds input depth " +
                     std::to_string(x.dim(2)));
  const Index rows = x.dim(0), cols = x.dim(1);
  Tensor<Scalar> pre({rows, cols, layer.output_depth(x.dim(2)), layer.out_channels});
  detail::conv_forward(x.ptr(), rows, cols, x.dim(2), layer.in_channels, layer.weights.ptr(), layer.kernel_depth,
                       layer.out_channels, layer.bias.ptr(), pre.ptr());
  if (cache) {
    cache->input = x;
    cache->pre_activation = pre;
  }
  return detail::activate(std::move(pre), layer.activation);
}

template <typename Scalar>
LayerGrads<Scalar> conv3d_backward(const Conv3DLayer<Scalar>& layer, const LayerCache<Scalar>& cache,
                                   const Tensor<Scalar>& grad_out) {
  detail::require_cache(cache, "conv3d_backward");
  const Tensor<Scalar> g = detail::gate(grad_out, cache.pre_activation, layer.activation);
  const Tensor<Scalar>& x = cache.input;
  LayerGrads<Scalar> grads{Tensor<Scalar>(x.shape()), Tensor<Scalar>(layer.weights.shape()),
                           Tensor<Scalar>(layer.bias.shape())};
  detail::conv_backward(x.ptr(), x.dim(0), x.dim(1), x.dim(2), layer.in_channels, layer.weights.ptr(),
                        layer.kernel_depth, layer.out_channels, g.ptr(), grads.input.ptr(), grads.weights.ptr(),
                        grads.bias.ptr());
  return grads;
}

// ---------------------------------------------------------------------------
// 2D convolution: x [rows, cols, in] -> [rows, cols, out]

template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& x, const Conv2DLayer<Scalar>& layer,
                              LayerCache<Scalar>* cache = nullptr) {
  if (x.rank() != 3) throw ShapeError("conv2d: expected input [rows, cols, channels], got " + to_string(x.shape()));
  if (x.dim(2) != layer.in_channels)
    throw ShapeError("conv2d: input has " + std::to_string(x.dim(2)) + " channels, layer expects " +
                     std::to_string(layer.in_channels));
  const Index rows = x.dim(0), cols = x.dim(1);
  Tensor<Scalar> pre({rows, cols, layer.out_channels});
  detail::conv_forward(x.ptr(), rows, cols, Index{1}, layer.in_channels, layer.weights.ptr(), Index{1},
                       layer.out_channels, layer.bias.ptr(), pre.ptr());
  if (cache) {
    cache->input = x;
    cache->pre_activation = pre;
  }
  return detail::activate(std::move(pre), layer.activation);
}

template <typename Scalar>
LayerGrads<Scalar> conv2d_backward(const Conv2DLayer<Scalar>& layer, const LayerCache<Scalar>& cache,
                                   const Tensor<Scalar>& grad_out) {
  detail::require_cache(cache, "conv2d_backward");
  const Tensor<Scalar> g = detail::gate(grad_out, cache.pre_activation, layer.activation);
  const Tensor<Scalar>& x = cache.input;
  LayerGrads<Scalar> grads{Tensor<Scalar>(x.shape()), Tensor<Scalar>(layer.weights.shape()),
                           Tensor<Scalar>(layer.bias.shape())};
  detail::conv_backward(x.ptr(), x.dim(0), x.dim(1), Index{1}, layer.in_channels, layer.weights.ptr(), Index{1},
                        layer.out_channels, g.ptr(), grads.input.ptr(), grads.weights.ptr(), grads.bias.ptr());
  return grads;
}

// ---------------------------------------------------------------------------
// Locally connected 2D: x [rows, cols, in] -> [rows, cols, out]

template <typename Scalar>
Tensor<Scalar> lc2d_forward(const Tensor<Scalar>& x, const LC2DLayer<Scalar>& layer,
                            LayerCache<Scalar>* cache = nullptr) {
  using detail::RowMatrix;
  using detail::RowVector;
  if (x.rank() != 3 || x.dim(0) != layer.rows || x.dim(1) != layer.cols || x.dim(2) != layer.in_channels)
    throw ShapeError("lc2d: input " + to_string(x.shape()) + " does not match layer [" + std::to_string(layer.rows) +
                     "," + std::to_string(layer.cols) + "," + std::to_string(layer.in_channels) + "]");
  const Index rows = layer.rows, cols = layer.cols, c_in = layer.in_channels, c_out = layer.out_channels;
  Tensor<Scalar> pre({rows, cols, c_out});
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      Eigen::Map<RowVector<Scalar>> out(pre.ptr() + (i * cols + j) * c_out, c_out);
      out = Eigen::Map<const RowVector<Scalar>>(layer.bias.ptr() + (i * cols + j) * c_out, c_out);
      for (Index di = 0; di < kKernel; ++di) {
        const Index ii = i + di - 1;
        if (ii < 0 || ii >= rows) continue;
        for (Index dj = 0; dj < kKernel; ++dj) {
          const Index jj = j + dj - 1;
          if (jj < 0 || jj >= cols) continue;
          Eigen::Map<const RowVector<Scalar>> xin(x.ptr() + (ii * cols + jj) * c_in, c_in);
          Eigen::Map<const RowMatrix<Scalar>> w(layer.weights.ptr() + layer.weights.offset(i, j, di, dj, 0, 0), c_in,
                                                c_out);
          out.noalias() += xin * w;
        }
      }
    }
  }
  if (cache) {
    cache->input = x;
    cache->pre_activation = pre;
  }
  return detail::activate(std::move(pre), layer.activation);
}

template <typename Scalar>
LayerGrads<Scalar> lc2d_backward(const LC2DLayer<Scalar>& layer, const LayerCache<Scalar>& cache,
                                 const Tensor<Scalar>& grad_out) {
  using detail::RowMatrix;
  using detail::RowVector;
  detail::require_cache(cache, "lc2d_backward");
  const Tensor<Scalar> g = detail::gate(grad_out, cache.pre_activation, layer.activation);
  const Tensor<Scalar>& x = cache.input;
  const Index rows = layer.rows, cols = layer.cols, c_in = layer.in_channels, c_out = layer.out_channels;
  LayerGrads<Scalar> grads{Tensor<Scalar>(x.shape()), Tensor<Scalar>(layer.weights.shape()), g};
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      Eigen::Map<const RowVector<Scalar>> gout(g.ptr() + (i * cols + j) * c_out, c_out);
      for (Index di = 0; di < kKernel; ++di) {
        const Index ii = i + di - 1;
        if (ii < 0 || ii >= rows) continue;
        for (Index dj = 0; dj < kKernel; ++dj) {
          const Index jj = j + dj - 1;
          if (jj < 0 || jj >= cols) continue;
          const Index w_off = layer.weights.offset(i, j, di, dj, 0, 0);
          Eigen::Map<const RowVector<Scalar>> xin(x.ptr() + (ii * cols + jj) * c_in, c_in);
          Eigen::Map<const RowMatrix<Scalar>> w(layer.weights.ptr() + w_off, c_in, c_out);
          Eigen::Map<RowMatrix<Scalar>>(grads.weights.ptr() + w_off, c_in, c_out).noalias() += xin.transpose() * gout;
          Eigen::Map<RowVector<Scalar>>(grads.input.ptr() + (ii * cols + jj) * c_in, c_in).noalias() +=
              gout * w.transpose();
        }
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Dense: flat x [fan_in] -> [out_features]

template <typename Scalar>
Tensor<Scalar> dense_forward(const Tensor<Scalar>& x, const DenseLayer<Scalar>& layer,
                             LayerCache<Scalar>* cache = nullptr) {
  if (x.empty() || x.size() != layer.fan_in())
    throw ShapeError("dense: input size " + std::to_string(x.size()) + " does not match fan-in " +
                     std::to_string(layer.fan_in()));
  Eigen::Map<const detail::RowMatrix<Scalar>> w(layer.weights.ptr(), layer.fan_in(), layer.out_features);
  Tensor<Scalar> pre({layer.out_features}, (w.transpose() * x.data() + layer.bias.data()).eval());
  if (cache) {
    cache->input = x;
    cache->pre_activation = pre;
  }
  return detail::activate(std::move(pre), layer.activation);
}

template <typename Scalar>
LayerGrads<Scalar> dense_backward(const DenseLayer<Scalar>& layer, const LayerCache<Scalar>& cache,
                                  const Tensor<Scalar>& grad_out) {
  detail::require_cache(cache, "dense_backward");
  const Tensor<Scalar> g = detail::gate(grad_out, cache.pre_activation, layer.activation);
  Eigen::Map<const detail::RowMatrix<Scalar>> w(layer.weights.ptr(), layer.fan_in(), layer.out_features);
  LayerGrads<Scalar> grads;
  grads.input = Tensor<Scalar>(cache.input.shape(), (w * g.data()).eval());
  grads.weights = Tensor<Scalar>(layer.weights.shape());
  Eigen::Map<detail::RowMatrix<Scalar>>(grads.weights.ptr(), layer.fan_in(), layer.out_features).noalias() =
      cache.input.data() * g.data().transpose();
  grads.bias = g;
  return grads;
}

}  // namespace stfcn
