#pragma once

// Layer kernels: same-padding convolution, leaky ReLU, 2x2 max pooling with
// switches, global average pooling and softmax, each with the backward pass
// used for training and back-projection.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cleartrade/tensor.hpp"

namespace cleartrade {

namespace detail {

// Unfolds a same-padded input into a (in*kr*kc) x (rows*cols) patch matrix.
template <typename Scalar>
RowMatrix<Scalar> im2col(const Tensor3<Scalar>& x, Index kr, Index kc) {
  const Index rows = x.rows(), cols = x.cols();
  const Index pr = kr / 2, pc = kc / 2;
  RowMatrix<Scalar> patches = RowMatrix<Scalar>::Zero(x.channels() * kr * kc, rows * cols);
  for (Index c = 0; c < x.channels(); ++c) {
    for (Index u = 0; u < kr; ++u) {
      for (Index v = 0; v < kc; ++v) {
        const Index line = (c * kr + u) * kc + v;
        for (Index r = 0; r < rows; ++r) {
          const Index sr = r + u - pr;
          if (sr < 0 || sr >= rows) continue;
          for (Index k = 0; k < cols; ++k) {
            const Index sk = k + v - pc;
            if (sk < 0 || sk >= cols) continue;
            patches(line, r * cols + k) = x(c, sr, sk);
          }
        }
      }
    }
  }
  return patches;
}

// Adjoint of im2col: scatters patch columns back onto the input grid.
template <typename Scalar>
Tensor3<Scalar> col2im(const RowMatrix<Scalar>& patches, Index channels, Index rows, Index cols, Index kr,
                       Index kc) {
  const Index pr = kr / 2, pc = kc / 2;
  Tensor3<Scalar> x(channels, rows, cols);
  for (Index c = 0; c < channels; ++c) {
    for (Index u = 0; u < kr; ++u) {
      for (Index v = 0; v < kc; ++v) {
        const Index line = (c * kr + u) * kc + v;
        for (Index r = 0; r < rows; ++r) {
          const Index sr = r + u - pr;
          if (sr < 0 || sr >= rows) continue;
          for (Index k = 0; k < cols; ++k) {
            const Index sk = k + v - pc;
            if (sk < 0 || sk >= cols) continue;
            x(c, sr, sk) += patches(line, r * cols + k);
          }
        }
      }
    }
  }
  return x;
}

inline Index pooled_extent(Index n) { return (n + 1) / 2; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution

/// Stride-1, same-padded 2D cross-correlation plus per-output-channel bias.
template <typename Scalar>
Tensor3<Scalar> conv2d_forward(const Tensor3<Scalar>& input, const KernelBank<Scalar>& kernels) {
  if (input.channels() != kernels.in_channels) {
    throw ConfigError("conv2d: input has " + std::to_string(input.channels()) + " channels, kernels expect " +
                      std::to_string(kernels.in_channels));
  }
  const RowMatrix<Scalar> patches = detail::im2col(input, kernels.kernel_rows, kernels.kernel_cols);
  RowMatrix<Scalar> out = kernels.weights * patches;
  out.colwise() += kernels.biases;
  return Tensor3<Scalar>::FromFlat(input.rows(), input.cols(), out);
}

/// Adjoint of the bias-free part of conv2d_forward: maps an output-shaped
/// tensor back onto the input grid. This is the operator used both for the
/// input gradient and for back-projecting responses.
template <typename Scalar>
Tensor3<Scalar> conv2d_input_backward(const Tensor3<Scalar>& upstream, const KernelBank<Scalar>& kernels) {
  if (upstream.channels() != kernels.out_channels) {
    throw UsageError("conv2d_input_backward: upstream has " + std::to_string(upstream.channels()) +
                     " channels, kernels produce " + std::to_string(kernels.out_channels));
  }
  const RowMatrix<Scalar> patches = kernels.weights.transpose() * upstream.flat();
  return detail::col2im(patches, kernels.in_channels, upstream.rows(), upstream.cols(), kernels.kernel_rows,
                        kernels.kernel_cols);
}

/// Parameter gradients of a convolution given its forward input.
template <typename Scalar>
KernelBank<Scalar> conv2d_param_backward(const Tensor3<Scalar>& input, const Tensor3<Scalar>& upstream,
                                         const KernelBank<Scalar>& kernels) {
  if (input.channels() != kernels.in_channels || upstream.channels() != kernels.out_channels ||
      input.rows() != upstream.rows() || input.cols() != upstream.cols()) {
    throw UsageError("conv2d_param_backward: input/upstream shapes do not match the kernel bank");
  }
  KernelBank<Scalar> grad(kernels.out_channels, kernels.in_channels, kernels.kernel_rows, kernels.kernel_cols);
  const RowMatrix<Scalar> patches = detail::im2col(input, kernels.kernel_rows, kernels.kernel_cols);
  grad.weights.noalias() = upstream.flat() * patches.transpose();
  grad.biases = upstream.flat().rowwise().sum();
  return grad;
}

// ---------------------------------------------------------------------------
// Leaky ReLU

template <typename Scalar>
Tensor3<Scalar> leaky_relu_forward(const Tensor3<Scalar>& input, Scalar slope) {
  Tensor3<Scalar> out = input;
  out.flat() = input.flat().unaryExpr([slope](Scalar x) { return x >= Scalar(0) ? x : slope * x; });
  return out;
}

/// Derivative taken as 1 at x == 0.
template <typename Scalar>
Tensor3<Scalar> leaky_relu_backward(const Tensor3<Scalar>& input, const Tensor3<Scalar>& upstream, Scalar slope) {
  if (!input.same_shape(upstream)) throw UsageError("leaky_relu_backward: shape mismatch");
  Tensor3<Scalar> grad = upstream;
  grad.flat() = upstream.flat().binaryExpr(
      input.flat(), [slope](Scalar g, Scalar x) { return x >= Scalar(0) ? g : slope * g; });
  return grad;
}

// ---------------------------------------------------------------------------
// Max pooling

template <typename Scalar>
struct PoolResult {
  Tensor3<Scalar> pooled;
  PoolSwitches switches;
};

/// 2x2 max pooling with stride 2. An odd trailing row/column is padded with
/// (channel minimum - 1), which can never win; scanning only the real cells
/// of a clipped region is equivalent and is what this does. Ties go to the
/// lowest flat index inside the region.
template <typename Scalar>
PoolResult<Scalar> max_pool_forward(const Tensor3<Scalar>& input) {
  const Index pr = detail::pooled_extent(input.rows());
  const Index pc = detail::pooled_extent(input.cols());
  PoolResult<Scalar> result{Tensor3<Scalar>(input.channels(), pr, pc), PoolSwitches{}};
  PoolSwitches& sw = result.switches;
  sw.channels = input.channels();
  sw.input_rows = input.rows();
  sw.input_cols = input.cols();
  sw.pooled_rows = pr;
  sw.pooled_cols = pc;
  sw.argmax.assign(static_cast<std::size_t>(input.channels() * pr * pc), 0);

  std::size_t slot = 0;
  for (Index c = 0; c < input.channels(); ++c) {
    for (Index r = 0; r < pr; ++r) {
      for (Index k = 0; k < pc; ++k, ++slot) {
        Scalar best = -std::numeric_limits<Scalar>::infinity();
        std::uint8_t best_local = 0;
        bool found = false;
        for (std::uint8_t local = 0; local < 4; ++local) {
          const Index sr = 2 * r + local / 2;
          const Index sk = 2 * k + local % 2;
          if (sr >= input.rows() || sk >= input.cols()) continue;
          const Scalar value = input(c, sr, sk);
          if (!found || value > best) {
            best = value;
            best_local = local;
            found = true;
          }
        }
        result.pooled(c, r, k) = best;
        sw.argmax[slot] = best_local;
      }
    }
  }
  return result;
}

/// Places every pooled value at its recorded switch position; every other
/// cell of the (unpadded) input grid is zero.
template <typename Scalar>
Tensor3<Scalar> unpool(const Tensor3<Scalar>& pooled, const PoolSwitches& switches) {
  if (pooled.channels() != switches.channels || pooled.rows() != switches.pooled_rows ||
      pooled.cols() != switches.pooled_cols ||
      switches.argmax.size() != static_cast<std::size_t>(pooled.size())) {
    throw UsageError("unpool: pooled tensor does not match the recorded switches");
  }
  Tensor3<Scalar> out(switches.channels, switches.input_rows, switches.input_cols);
  std::size_t slot = 0;
  for (Index c = 0; c < pooled.channels(); ++c) {
    for (Index r = 0; r < pooled.rows(); ++r) {
      for (Index k = 0; k < pooled.cols(); ++k, ++slot) {
        const std::uint8_t local = switches.argmax[slot];
        if (local > 3) throw UsageError("unpool: switch index outside its 2x2 region");
        const Index sr = 2 * r + local / 2;
        const Index sk = 2 * k + local % 2;
        if (sr >= out.rows() || sk >= out.cols()) throw UsageError("unpool: switch points at a padding cell");
        out(c, sr, sk) = pooled(c, r, k);
      }
    }
  }
  return out;
}

template <typename Scalar>
Tensor3<Scalar> max_pool_backward(const Tensor3<Scalar>& upstream, const PoolSwitches& switches) {
  return unpool(upstream, switches);
}

// ---------------------------------------------------------------------------
// Global average pooling and softmax

template <typename Scalar>
Vector<Scalar> global_average_pool(const Tensor3<Scalar>& input) {
  return input.flat().rowwise().mean();
}

template <typename Scalar>
Tensor3<Scalar> gap_backward(const Vector<Scalar>& upstream, Index rows, Index cols) {
  Tensor3<Scalar> grad(upstream.size(), rows, cols);
  grad.flat().colwise() = upstream / static_cast<Scalar>(rows * cols);
  return grad;
}

template <typename Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& logits) {
  using std::exp;
  const Scalar top = logits.maxCoeff();
  Vector<Scalar> e = (logits.array() - top).unaryExpr([](Scalar v) { return exp(v); }).matrix();
  return e / e.sum();
}

/// Gradient of -log(softmax(logits)[label]) with respect to the logits.
template <typename Scalar>
Vector<Scalar> softmax_cross_entropy_backward(const Vector<Scalar>& probabilities, Index label) {
  if (label < 0 || label >= probabilities.size()) {
    throw UsageError("softmax_cross_entropy_backward: label " + std::to_string(label) + " outside [0, " +
                     std::to_string(probabilities.size()) + ")");
  }
  Vector<Scalar> grad = probabilities;
  grad(label) -= Scalar(1);
  return grad;
}

}  // namespace cleartrade
