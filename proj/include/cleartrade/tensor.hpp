#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "cleartrade/errors.hpp"

namespace cleartrade {

using Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense channels x rows x cols tensor. Rows are the time axis (days), cols
/// the feature axis. Storage is one row-major matrix of shape
/// channels x (rows*cols), so every channel is a contiguous row-major plane
/// and a whole tensor can be fed straight into a GEMM.
template <typename Scalar>
class Tensor3 {
 public:
  using Plane = Eigen::Map<RowMatrix<Scalar>>;
  using ConstPlane = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor3() = default;
  Tensor3(Index channels, Index rows, Index cols)
      : rows_(rows), cols_(cols), data_(RowMatrix<Scalar>::Zero(channels, rows * cols)) {}

  static Tensor3 Zero(Index channels, Index rows, Index cols) { return Tensor3(channels, rows, cols); }

  template <typename Derived>
  static Tensor3 FromFlat(Index rows, Index cols, const Eigen::MatrixBase<Derived>& flat) {
    if (flat.cols() != rows * cols) throw UsageError("Tensor3::FromFlat: column count does not match rows*cols");
    Tensor3 t(flat.rows(), rows, cols);
    t.data_ = flat;
    return t;
  }

  Index channels() const { return data_.rows(); }
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index size() const { return data_.size(); }

  bool same_shape(const Tensor3& other) const {
    return channels() == other.channels() && rows_ == other.rows_ && cols_ == other.cols_;
  }

  Scalar& operator()(Index c, Index r, Index k) { return data_(c, r * cols_ + k); }
  Scalar operator()(Index c, Index r, Index k) const { return data_(c, r * cols_ + k); }

  Plane channel(Index c) { return Plane(data_.row(c).data(), rows_, cols_); }
  ConstPlane channel(Index c) const { return ConstPlane(data_.row(c).data(), rows_, cols_); }

  /// channels x (rows*cols) view.
  RowMatrix<Scalar>& flat() { return data_; }
  const RowMatrix<Scalar>& flat() const { return data_; }

  bool all_finite() const { return data_.allFinite(); }

  template <typename NewScalar>
  Tensor3<NewScalar> cast() const {
    return Tensor3<NewScalar>::FromFlat(rows_, cols_, data_.template cast<NewScalar>());
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  RowMatrix<Scalar> data_;
};

/// Bank of 2D kernels for one convolution layer. Weights are stored as an
/// out_channels x (in_channels*kernel_rows*kernel_cols) matrix with column
/// index (in*kernel_rows + u)*kernel_cols + v.
template <typename Scalar>
struct KernelBank {
  Index out_channels = 0;
  Index in_channels = 0;
  Index kernel_rows = 0;
  Index kernel_cols = 0;
  RowMatrix<Scalar> weights;
  Vector<Scalar> biases;

  KernelBank() = default;
  KernelBank(Index out, Index in, Index kr, Index kc)
      : out_channels(out),
        in_channels(in),
        kernel_rows(kr),
        kernel_cols(kc),
        weights(RowMatrix<Scalar>::Zero(out, in * kr * kc)),
        biases(Vector<Scalar>::Zero(out)) {
    if (kr % 2 == 0 || kc % 2 == 0) throw ConfigError("kernel dimensions must be odd for same padding");
    if (out < 1 || in < 1) throw ConfigError("kernel bank needs at least one input and one output channel");
  }

  Scalar& w(Index out, Index in, Index u, Index v) { return weights(out, (in * kernel_rows + u) * kernel_cols + v); }
  Scalar w(Index out, Index in, Index u, Index v) const {
    return weights(out, (in * kernel_rows + u) * kernel_cols + v);
  }

  Index parameter_count() const { return weights.size() + biases.size(); }
};

/// Argmax positions recorded by 2x2/stride-2 max pooling. `argmax` holds,
/// per (channel, pooled cell), the winner's flat index inside its 2x2 region
/// (0 = top-left, 1 = top-right, 2 = bottom-left, 3 = bottom-right).
struct PoolSwitches {
  Index channels = 0;
  Index input_rows = 0;
  Index input_cols = 0;
  Index pooled_rows = 0;
  Index pooled_cols = 0;
  std::vector<std::uint8_t> argmax;

  std::uint8_t at(Index c, Index r, Index k) const {
    return argmax[static_cast<std::size_t>((c * pooled_rows + r) * pooled_cols + k)];
  }
};

}  // namespace cleartrade
