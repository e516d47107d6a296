#pragma once

// Shared helpers for the test binaries: seeded generators, brute-force
// reference operators and a scratch directory.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cleartrade/clear.hpp"
#include "cleartrade/layers.hpp"
#include "cleartrade/network.hpp"

namespace testing {

using cleartrade::Index;
using cleartrade::KernelBankd;
using cleartrade::RowMatrix;
using cleartrade::Tensor3d;

struct Gen {
  std::mt19937_64 eng;
  explicit Gen(std::uint64_t seed) : eng(seed) {}

  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(eng); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
  Index integer(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(eng); }
  bool coin() { return std::bernoulli_distribution(0.5)(eng); }
};

inline Tensor3d random_tensor(Gen& g, Index c, Index r, Index k) {
  Tensor3d t(c, r, k);
  for (Index i = 0; i < t.size(); ++i) t.flat().data()[i] = g.normal();
  return t;
}

inline KernelBankd random_bank(Gen& g, Index out, Index in, Index kr = 3, Index kc = 3) {
  KernelBankd b(out, in, kr, kc);
  for (Index i = 0; i < b.weights.size(); ++i) b.weights.data()[i] = g.normal(0.5);
  for (Index i = 0; i < b.biases.size(); ++i) b.biases(i) = g.normal(0.1);
  return b;
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
template <typename A, typename B>
double rel_diff(const A& a, const B& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

/// Direct same-padded cross-correlation, one output cell at a time.
inline Tensor3d conv_reference(const Tensor3d& x, const KernelBankd& k) {
  const Index pr = k.kernel_rows / 2, pc = k.kernel_cols / 2;
  Tensor3d y(k.out_channels, x.rows(), x.cols());
  for (Index o = 0; o < k.out_channels; ++o)
    for (Index r = 0; r < x.rows(); ++r)
      for (Index c = 0; c < x.cols(); ++c) {
        double acc = k.biases(o);
        for (Index i = 0; i < k.in_channels; ++i)
          for (Index u = 0; u < k.kernel_rows; ++u)
            for (Index v = 0; v < k.kernel_cols; ++v) {
              const Index rr = r + u - pr, cc = c + v - pc;
              if (rr >= 0 && rr < x.rows() && cc >= 0 && cc < x.cols()) acc += k.w(o, i, u, v) * x(i, rr, cc);
            }
        y(o, r, c) = acc;
      }
  return y;
}

/// The bias-free conv as an explicit (out*R*C) x (in*R*C) matrix.
inline Eigen::MatrixXd conv_matrix(const KernelBankd& k, Index rows, Index cols) {
  const Index cells = rows * cols;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k.out_channels * cells, k.in_channels * cells);
  const Index pr = k.kernel_rows / 2, pc = k.kernel_cols / 2;
  for (Index o = 0; o < k.out_channels; ++o)
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c)
        for (Index i = 0; i < k.in_channels; ++i)
          for (Index u = 0; u < k.kernel_rows; ++u)
            for (Index v = 0; v < k.kernel_cols; ++v) {
              const Index rr = r + u - pr, cc = c + v - pc;
              if (rr >= 0 && rr < rows && cc >= 0 && cc < cols) {
                m(o * cells + r * cols + c, i * cells + rr * cols + cc) += k.w(o, i, u, v);
              }
            }
  return m;
}

/// Un-pooling as a 0/1 matrix mapping pooled cells to their recorded winners.
inline Eigen::MatrixXd unpool_matrix(const cleartrade::PoolSwitches& s) {
  const Index in_cells = s.input_rows * s.input_cols, out_cells = s.pooled_rows * s.pooled_cols;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(s.channels * in_cells, s.channels * out_cells);
  for (Index c = 0; c < s.channels; ++c)
    for (Index r = 0; r < s.pooled_rows; ++r)
      for (Index k = 0; k < s.pooled_cols; ++k) {
        const int a = s.at(c, r, k);
        const Index rr = 2 * r + a / 2, cc = 2 * k + a % 2;
        m(c * in_cells + rr * s.input_cols + cc, c * out_cells + r * s.pooled_cols + k) = 1.0;
      }
  return m;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("cleartrade-" + tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};


/// Response of `state` computed by composing every back-projection step as
/// an explicit dense matrix, then applying the product to the recorded final
/// conv activations.
inline RowMatrix<double> dense_backprojection(const cleartrade::Network& net, const cleartrade::ForwardTrace& trace,
                                              Index state) {
  using cleartrade::LayerKind;
  const std::size_t last = net.last_conv_index();
  const Tensor3d& z = trace.outputs[last];
  KernelBankd isolated = net.layer(last).kernels;
  for (Index o = 0; o < isolated.out_channels; ++o) {
    if (o != state) isolated.weights.row(o).setZero();
  }
  Eigen::MatrixXd chain = conv_matrix(isolated, z.rows(), z.cols()).transpose();
  Index rows = z.rows(), cols = z.cols();
  for (std::size_t i = last; i-- > 0;) {
    const auto& layer = net.layer(i);
    if (layer.spec.kind == LayerKind::conv) {
      chain = conv_matrix(layer.kernels, rows, cols).transpose() * chain;
    } else if (layer.spec.kind == LayerKind::max_pool) {
      const auto& sw = *trace.switches[i];
      chain = unpool_matrix(sw) * chain;
      rows = sw.input_rows;
      cols = sw.input_cols;
    }
  }
  const Eigen::VectorXd zflat = Eigen::Map<const Eigen::VectorXd>(z.flat().data(), z.size());
  const Eigen::VectorXd full = chain * zflat;
  const Index cells = rows * cols, channels = full.size() / cells;
  RowMatrix<double> grid = RowMatrix<double>::Zero(rows, cols);
  for (Index c = 0; c < channels; ++c)
    for (Index r = 0; r < rows; ++r)
      for (Index k = 0; k < cols; ++k) grid(r, k) += full(c * cells + r * cols + k);
  return grid;
}

/// Per-cell scan over states keeping the first strict maximum.
inline void dominant_scan(const std::vector<cleartrade::ResponseMap>& stack, cleartrade::StateGrid& states,
                          RowMatrix<double>& values) {
  const Index rows = stack.front().values.rows(), cols = stack.front().values.cols();
  states.resize(rows, cols);
  values.resize(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      Index best = 0;
      for (Index s = 1; s < static_cast<Index>(stack.size()); ++s) {
        if (stack[static_cast<std::size_t>(s)].values(r, c) > stack[static_cast<std::size_t>(best)].values(r, c)) best = s;
      }
      states(r, c) = best;
      values(r, c) = stack[static_cast<std::size_t>(best)].values(r, c);
    }
}

/// Random response stack; `ties` forces some cells to share their maximum.
inline std::vector<cleartrade::ResponseMap> random_stack(Gen& g, Index k, Index rows, Index cols, bool ties) {
  std::vector<cleartrade::ResponseMap> stack;
  for (Index s = 0; s < k; ++s) {
    RowMatrix<double> v(rows, cols);
    for (Index i = 0; i < v.size(); ++i) v.data()[i] = ties ? static_cast<double>(g.integer(-2, 2)) : g.normal();
    stack.push_back({s, v});
  }
  if (ties) {
    // Every k-th cell: all states equal.
    for (Index i = 0; i < rows * cols; i += 3) {
      for (auto& m : stack) m.values.data()[i] = 1.5;
    }
  }
  return stack;
}

}  // namespace testing
