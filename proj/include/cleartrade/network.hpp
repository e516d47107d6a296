#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cleartrade/layers.hpp"
#include "cleartrade/tensor.hpp"

namespace cleartrade {

using Tensor3d = Tensor3<double>;
using KernelBankd = KernelBank<double>;
using VectorXd = Eigen::VectorXd;

enum class LayerKind : std::uint8_t { conv = 1, leaky_relu = 2, max_pool = 3, gap = 4, softmax = 5 };

std::string_view to_string(LayerKind kind);

/// One entry of an architecture description. `out_channels == 0` on a conv
/// layer means "number of states" and is only legal on the final conv.
struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  Index out_channels = 0;
  Index kernel_rows = 3;
  Index kernel_cols = 3;
  double leaky_slope = 0.01;

  static LayerSpec conv(Index out_channels, Index kernel_rows = 3, Index kernel_cols = 3) {
    return {LayerKind::conv, out_channels, kernel_rows, kernel_cols, 0.0};
  }
  static LayerSpec leaky_relu(double slope = 0.01) { return {LayerKind::leaky_relu, 0, 0, 0, slope}; }
  static LayerSpec max_pool() { return {LayerKind::max_pool, 0, 0, 0, 0.0}; }
  static LayerSpec gap() { return {LayerKind::gap, 0, 0, 0, 0.0}; }
  static LayerSpec softmax() { return {LayerKind::softmax, 0, 0, 0, 0.0}; }

  bool operator==(const LayerSpec&) const = default;
};

/// conv3x3:16 -> lrelu(0.01) -> pool -> conv3x3:32 -> lrelu(0.01) -> pool -> conv3x3:K -> gap -> softmax
std::vector<LayerSpec> default_architecture(double leaky_slope = 0.01);

/// Parses a comma-separated architecture such as
/// "conv3x3:16,lrelu:0.01,pool,conv3x3:K,gap,softmax". Throws ConfigError.
std::vector<LayerSpec> parse_architecture(std::string_view text);
std::string format_architecture(const std::vector<LayerSpec>& arch);

struct Layer {
  LayerSpec spec;
  KernelBankd kernels;  // populated for conv layers only
};

class Network {
 public:
  Network() = default;

  /// Validates the architecture, resolves the final conv width to
  /// `num_states` and He-initializes conv weights from `seed` (biases zero).
  static Network build(const std::vector<LayerSpec>& arch, Index input_channels, Index num_states,
                       std::uint64_t seed);

  /// Assembles a network from explicit layers (checkpoint loading, tests).
  static Network from_layers(std::vector<Layer> layers, Index input_channels);

  Index input_channels() const { return input_channels_; }
  Index num_states() const { return num_states_; }
  Index parameter_count() const;

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  Layer& layer(std::size_t i) { return layers_.at(i); }

  /// Index of the conv layer feeding global average pooling.
  std::size_t last_conv_index() const;

  std::vector<LayerSpec> architecture() const;

 private:
  void validate() const;

  std::vector<Layer> layers_;
  Index input_channels_ = 1;
  Index num_states_ = 0;
};

/// Everything recorded by one forward pass: per-layer inputs/outputs, the
/// switches of every pooling layer, and the final logits/probabilities.
/// GAP and softmax outputs are stored as K x 1 x 1 tensors.
struct ForwardTrace {
  std::vector<Tensor3d> inputs;
  std::vector<Tensor3d> outputs;
  std::vector<std::optional<PoolSwitches>> switches;
  VectorXd logits;
  VectorXd probabilities;

  std::size_t layer_count() const { return outputs.size(); }
  Index predicted_state() const;
};

ForwardTrace network_forward(const Network& net, const Tensor3d& x);

/// Parameter gradients, one KernelBank per layer (empty for parameter-free layers).
struct Gradients {
  std::vector<KernelBankd> layers;
  Tensor3d input;

  static Gradients zeros_like(const Network& net);
  void add(const Gradients& other);
  void scale(double factor);
};

/// Backpropagates an upstream gradient on the logits through a recorded trace.
Gradients network_backward(const Network& net, const ForwardTrace& trace, const VectorXd& logit_gradient);

/// Gradients of the cross-entropy loss for one labelled sample.
Gradients loss_gradients(const Network& net, const ForwardTrace& trace, Index label);

}  // namespace cleartrade
