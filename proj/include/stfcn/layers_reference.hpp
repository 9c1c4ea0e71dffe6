#pragma once

// Direct-loop versions of the layer passes, written to mirror the layer
// definitions one index at a time. The matrix-product kernels in layers.hpp
// are tested against these.

#include "stfcn/layers.hpp"

namespace stfcn::reference {

template <typename Scalar>
Scalar apply(Scalar v, Activation act) {
  return act == Activation::relu && v < 0 ? Scalar(0) : v;
}

template <typename Scalar>
Scalar derivative(Scalar pre, Activation act) {
  return act == Activation::relu ? (pre > 0 ? Scalar(1) : Scalar(0)) : Scalar(1);
}

template <typename Scalar>
Tensor<Scalar> conv3d_pre(const Tensor<Scalar>& x, const Conv3DLayer<Scalar>& layer) {
  const Index rows = x.dim(0), cols = x.dim(1), depth = x.dim(2);
  const Index t_out = depth - layer.kernel_depth + 1;
  Tensor<Scalar> pre({rows, cols, t_out, layer.out_channels});
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      for (Index t = 0; t < t_out; ++t)
        for (Index o = 0; o < layer.out_channels; ++o) {
          Scalar acc = layer.bias(o);
          for (Index di = 0; di < kKernel; ++di)
            for (Index dj = 0; dj < kKernel; ++dj) {
              const Index ii = i + di - 1, jj = j + dj - 1;
              if (ii < 0 || ii >= rows || jj < 0 || jj >= cols) continue;
              for (Index dt = 0; dt < layer.kernel_depth; ++dt)
                for (Index c = 0; c < layer.in_channels; ++c)
                  acc += layer.weights(di, dj, dt, c, o) * x(ii, jj, t + dt, c);
            }
          pre(i, j, t, o) = acc;
        }
  return pre;
}

template <typename Scalar>
Tensor<Scalar> conv3d_forward(const Tensor<Scalar>& x, const Conv3DLayer<Scalar>& layer) {
  Tensor<Scalar> out = conv3d_pre(x, layer);
  for (Index k = 0; k < out.size(); ++k) out[k] = apply(out[k], layer.activation);
  return out;
}

template <typename Scalar>
LayerGrads<Scalar> conv3d_backward(const Tensor<Scalar>& x, const Conv3DLayer<Scalar>& layer,
                                   const Tensor<Scalar>& grad_out) {
  const Tensor<Scalar> pre = conv3d_pre(x, layer);
  const Index rows = x.dim(0), cols = x.dim(1);
  LayerGrads<Scalar> g{Tensor<Scalar>(x.shape()), Tensor<Scalar>(layer.weights.shape()),
                       Tensor<Scalar>(layer.bias.shape())};
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      for (Index t = 0; t < pre.dim(2); ++t)
        for (Index o = 0; o < layer.out_channels; ++o) {
          const Scalar d = grad_out(i, j, t, o) * derivative(pre(i, j, t, o), layer.activation);
          g.bias(o) += d;
          for (Index di = 0; di < kKernel; ++di)
            for (Index dj = 0; dj < kKernel; ++dj) {
              const Index ii = i + di - 1, jj = j + dj - 1;
              if (ii < 0 || ii >= rows || jj < 0 || jj >= cols) continue;
              for (Index dt = 0; dt < layer.kernel_depth; ++dt)
                for (Index c = 0; c < layer.in_channels; ++c) {
                  g.weights(di, dj, dt, c, o) += d * x(ii, jj, t + dt, c);
                  g.input(ii, jj, t + dt, c) += d * layer.weights(di, dj, dt, c, o);
                }
            }
        }
  return g;
}

template <typename Scalar>
Tensor<Scalar> lc2d_pre(const Tensor<Scalar>& x, const LC2DLayer<Scalar>& layer) {
  const Index rows = layer.rows, cols = layer.cols;
  Tensor<Scalar> pre({rows, cols, layer.out_channels});
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      for (Index o = 0; o < layer.out_channels; ++o) {
        Scalar acc = layer.bias(i, j, o);
        for (Index di = 0; di < kKernel; ++di)
          for (Index dj = 0; dj < kKernel; ++dj) {
            const Index ii = i + di - 1, jj = j + dj - 1;
            if (ii < 0 || ii >= rows || jj < 0 || jj >= cols) continue;
            for (Index c = 0; c < layer.in_channels; ++c) acc += layer.weights(i, j, di, dj, c, o) * x(ii, jj, c);
          }
        pre(i, j, o) = acc;
      }
  return pre;
}

template <typename Scalar>
Tensor<Scalar> lc2d_forward(const Tensor<Scalar>& x, const LC2DLayer<Scalar>& layer) {
  Tensor<Scalar> out = lc2d_pre(x, layer);
  for (Index k = 0; k < out.size(); ++k) out[k] = apply(out[k], layer.activation);
  return out;
}

template <typename Scalar>
LayerGrads<Scalar> lc2d_backward(const Tensor<Scalar>& x, const LC2DLayer<Scalar>& layer,
                                 const Tensor<Scalar>& grad_out) {
  const Tensor<Scalar> pre = lc2d_pre(x, layer);
  const Index rows = layer.rows, cols = layer.cols;
  LayerGrads<Scalar> g{Tensor<Scalar>(x.shape()), Tensor<Scalar>(layer.weights.shape()),
                       Tensor<Scalar>(layer.bias.shape())};
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      for (Index o = 0; o < layer.out_channels; ++o) {
        const Scalar d = grad_out(i, j, o) * derivative(pre(i, j, o), layer.activation);
        g.bias(i, j, o) += d;
        for (Index di = 0; di < kKernel; ++di)
          for (Index dj = 0; dj < kKernel; ++dj) {
            const Index ii = i + di - 1, jj = j + dj - 1;
            if (ii < 0 || ii >= rows || jj < 0 || jj >= cols) continue;
            for (Index c = 0; c < layer.in_channels; ++c) {
              g.weights(i, j, di, dj, c, o) += d * x(ii, jj, c);
              g.input(ii, jj, c) += d * layer.weights(i, j, di, dj, c, o);
            }
          }
      }
  return g;
}

}  // namespace stfcn::reference
