#include "cleartrade/network.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

namespace cleartrade {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv:
      return "conv";
    case LayerKind::leaky_relu:
      return "leaky_relu";
    case LayerKind::max_pool:
      return "max_pool";
    case LayerKind::gap:
      return "gap";
    case LayerKind::softmax:
      return "softmax";
  }
  return "unknown";
}

std::vector<LayerSpec> default_architecture(double leaky_slope) {
  return {LayerSpec::conv(16),     LayerSpec::leaky_relu(leaky_slope), LayerSpec::max_pool(),
          LayerSpec::conv(32),     LayerSpec::leaky_relu(leaky_slope), LayerSpec::max_pool(),
          LayerSpec::conv(0),      LayerSpec::gap(),                   LayerSpec::softmax()};
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

Index parse_count(std::string_view text, std::string_view context) {
  Index value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || value < 1) {
    throw ConfigError("architecture: bad count '" + std::string(text) + "' in '" + std::string(context) + "'");
  }
  return value;
}

double parse_real(std::string_view text, std::string_view context) {
  double value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("architecture: bad number '" + std::string(text) + "' in '" + std::string(context) + "'");
  }
  return value;
}

}  // namespace

std::vector<LayerSpec> parse_architecture(std::string_view text) {
  std::vector<LayerSpec> arch;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string token = trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
    start = comma == std::string_view::npos ? text.size() + 1 : comma + 1;
    if (token.empty()) throw ConfigError("architecture: empty layer entry in '" + std::string(text) + "'");

    const auto colon = token.find(':');
    const std::string head = token.substr(0, colon);
    const std::string arg = colon == std::string::npos ? std::string{} : token.substr(colon + 1);

    if (head.rfind("conv", 0) == 0) {
      // conv<R>x<C>:<channels|K>
      const std::string dims = head.substr(4);
      const auto x = dims.find('x');
      if (x == std::string::npos || arg.empty()) {
        throw ConfigError("architecture: conv layer must look like conv3x3:16, got '" + token + "'");
      }
      LayerSpec spec = LayerSpec::conv(0, parse_count(dims.substr(0, x), token), parse_count(dims.substr(x + 1), token));
      spec.out_channels = (arg == "K" || arg == "k") ? 0 : parse_count(arg, token);
      arch.push_back(spec);
    } else if (head == "lrelu" || head == "leaky_relu") {
      arch.push_back(LayerSpec::leaky_relu(arg.empty() ? 0.01 : parse_real(arg, token)));
    } else if (head == "pool" || head == "maxpool") {
      arch.push_back(LayerSpec::max_pool());
    } else if (head == "gap") {
      arch.push_back(LayerSpec::gap());
    } else if (head == "softmax") {
      arch.push_back(LayerSpec::softmax());
    } else {
      throw ConfigError("architecture: unknown layer '" + token + "'");
    }
  }
  return arch;
}

std::string format_architecture(const std::vector<LayerSpec>& arch) {
  std::ostringstream out;
  for (std::size_t i = 0; i < arch.size(); ++i) {
    if (i) out << ',';
    const LayerSpec& s = arch[i];
    switch (s.kind) {
      case LayerKind::conv:
        out << "conv" << s.kernel_rows << 'x' << s.kernel_cols << ':';
        if (s.out_channels == 0)
          out << 'K';
        else
          out << s.out_channels;
        break;
      case LayerKind::leaky_relu:
        out << "lrelu:" << s.leaky_slope;
        break;
      case LayerKind::max_pool:
        out << "pool";
        break;
      case LayerKind::gap:
        out << "gap";
        break;
      case LayerKind::softmax:
        out << "softmax";
        break;
    }
  }
  return out.str();
}

Network Network::build(const std::vector<LayerSpec>& arch, Index input_channels, Index num_states,
                       std::uint64_t seed) {
  if (num_states < 1) throw ConfigError("network needs at least one state");
  if (input_channels < 1) throw ConfigError("network needs at least one input channel");

  std::size_t last_conv = arch.size();
  for (std::size_t i = 0; i < arch.size(); ++i) {
    if (arch[i].kind == LayerKind::conv) last_conv = i;
  }
  if (last_conv == arch.size()) throw ConfigError("architecture has no convolution layer");

  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  layers.reserve(arch.size());
  Index channels = input_channels;
  for (std::size_t i = 0; i < arch.size(); ++i) {
    Layer layer{arch[i], {}};
    if (layer.spec.kind == LayerKind::conv) {
      if (i == last_conv) {
        if (layer.spec.out_channels != 0 && layer.spec.out_channels != num_states) {
          throw ConfigError("layer " + std::to_string(i) + ": final conv has " +
                            std::to_string(layer.spec.out_channels) + " kernels but there are " +
                            std::to_string(num_states) + " states");
        }
        layer.spec.out_channels = num_states;
      } else if (layer.spec.out_channels < 1) {
        throw ConfigError("layer " + std::to_string(i) + ": only the final conv may use K channels");
      }
      layer.kernels = KernelBankd(layer.spec.out_channels, channels, layer.spec.kernel_rows, layer.spec.kernel_cols);
      const double fan_in = static_cast<double>(channels * layer.spec.kernel_rows * layer.spec.kernel_cols);
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
      for (Index r = 0; r < layer.kernels.weights.rows(); ++r) {
        for (Index c = 0; c < layer.kernels.weights.cols(); ++c) layer.kernels.weights(r, c) = normal(rng);
      }
      channels = layer.spec.out_channels;
    }
    layers.push_back(std::move(layer));
  }
  return from_layers(std::move(layers), input_channels);
}

Network Network::from_layers(std::vector<Layer> layers, Index input_channels) {
  Network net;
  net.layers_ = std::move(layers);
  net.input_channels_ = input_channels;
  net.validate();
  net.num_states_ = net.layers_[net.last_conv_index()].kernels.out_channels;
  return net;
}

void Network::validate() const {
  const std::size_t n = layers_.size();
  if (n < 3) throw ConfigError("architecture needs at least conv, gap and softmax layers");
  if (layers_[n - 1].spec.kind != LayerKind::softmax || layers_[n - 2].spec.kind != LayerKind::gap) {
    throw ConfigError("architecture must end with gap followed by softmax");
  }
  if (layers_[n - 3].spec.kind != LayerKind::conv) {
    throw ConfigError("layer " + std::to_string(n - 3) + ": gap must directly follow the final conv layer");
  }
  Index channels = input_channels_;
  for (std::size_t i = 0; i < n; ++i) {
    const Layer& layer = layers_[i];
    const auto where = "layer " + std::to_string(i) + ": ";
    switch (layer.spec.kind) {
      case LayerKind::conv: {
        const KernelBankd& k = layer.kernels;
        if (k.in_channels != channels) {
          throw ConfigError(where + "conv expects " + std::to_string(k.in_channels) + " input channels, gets " +
                            std::to_string(channels));
        }
        if (k.weights.rows() != k.out_channels || k.weights.cols() != k.in_channels * k.kernel_rows * k.kernel_cols ||
            k.biases.size() != k.out_channels) {
          throw ConfigError(where + "kernel bank storage does not match its declared shape");
        }
        if (k.kernel_rows % 2 == 0 || k.kernel_cols % 2 == 0) throw ConfigError(where + "kernel sizes must be odd");
        channels = k.out_channels;
        break;
      }
      case LayerKind::leaky_relu:
        if (!(layer.spec.leaky_slope > 0.0 && layer.spec.leaky_slope < 1.0)) {
          throw ConfigError(where + "leaky slope must lie in (0, 1)");
        }
        break;
      case LayerKind::max_pool:
        break;
      case LayerKind::gap:
      case LayerKind::softmax:
        if (i + 2 < n) throw ConfigError(where + "gap/softmax may only appear at the end");
        break;
    }
  }
}

std::size_t Network::last_conv_index() const { return layers_.size() - 3; }

Index Network::parameter_count() const {
  Index total = 0;
  for (const Layer& layer : layers_) {
    if (layer.spec.kind == LayerKind::conv) total += layer.kernels.parameter_count();
  }
  return total;
}

std::vector<LayerSpec> Network::architecture() const {
  std::vector<LayerSpec> arch;
  for (const Layer& layer : layers_) arch.push_back(layer.spec);
  return arch;
}

Index ForwardTrace::predicted_state() const {
  Index best = 0;
  probabilities.maxCoeff(&best);  // first maximum wins ties
  return best;
}

namespace {

Tensor3d vector_as_tensor(const VectorXd& v) { return Tensor3d::FromFlat(1, 1, v); }

}  // namespace

ForwardTrace network_forward(const Network& net, const Tensor3d& x) {
  if (x.channels() != net.input_channels()) {
    throw ConfigError("layer 0: input has " + std::to_string(x.channels()) + " channels, network expects " +
                      std::to_string(net.input_channels()));
  }
  if (x.rows() < 1 || x.cols() < 1) throw ConfigError("layer 0: empty input window");

  ForwardTrace trace;
  const std::size_t n = net.layers().size();
  trace.inputs.reserve(n);
  trace.outputs.reserve(n);
  trace.switches.resize(n);

  Tensor3d current = x;
  for (std::size_t i = 0; i < n; ++i) {
    const Layer& layer = net.layer(i);
    trace.inputs.push_back(current);
    switch (layer.spec.kind) {
      case LayerKind::conv:
        if (current.channels() != layer.kernels.in_channels) {
          throw ConfigError("layer " + std::to_string(i) + ": shape mismatch, " + std::to_string(current.channels()) +
                            " channels into a conv expecting " + std::to_string(layer.kernels.in_channels));
        }
        current = conv2d_forward(current, layer.kernels);
        break;
      case LayerKind::leaky_relu:
        current = leaky_relu_forward(current, layer.spec.leaky_slope);
        break;
      case LayerKind::max_pool: {
        auto pooled = max_pool_forward(current);
        current = std::move(pooled.pooled);
        trace.switches[i] = std::move(pooled.switches);
        break;
      }
      case LayerKind::gap:
        trace.logits = global_average_pool(current);
        current = vector_as_tensor(trace.logits);
        break;
      case LayerKind::softmax:
        trace.probabilities = softmax<double>(current.flat().col(0));
        current = vector_as_tensor(trace.probabilities);
        break;
    }
    trace.outputs.push_back(current);
  }
  return trace;
}

Gradients Gradients::zeros_like(const Network& net) {
  Gradients g;
  for (const Layer& layer : net.layers()) {
    if (layer.spec.kind == LayerKind::conv) {
      g.layers.emplace_back(layer.kernels.out_channels, layer.kernels.in_channels, layer.kernels.kernel_rows,
                            layer.kernels.kernel_cols);
    } else {
      g.layers.emplace_back();
    }
  }
  return g;
}

void Gradients::add(const Gradients& other) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weights.size() == 0) continue;
    layers[i].weights += other.layers[i].weights;
    layers[i].biases += other.layers[i].biases;
  }
}

void Gradients::scale(double factor) {
  for (KernelBankd& bank : layers) {
    bank.weights *= factor;
    bank.biases *= factor;
  }
}

Gradients network_backward(const Network& net, const ForwardTrace& trace, const VectorXd& logit_gradient) {
  const std::size_t n = net.layers().size();
  if (trace.layer_count() != n || trace.inputs.size() != n || trace.switches.size() != n) {
    throw UsageError("network_backward: trace does not belong to this network (missing or partial trace)");
  }
  if (logit_gradient.size() != net.num_states()) throw UsageError("network_backward: logit gradient has wrong size");

  Gradients grads = Gradients::zeros_like(net);
  // gap and softmax sit at the end; the logit gradient enters at gap.
  const Tensor3d& gap_input = trace.inputs[n - 2];
  Tensor3d upstream = gap_backward(logit_gradient, gap_input.rows(), gap_input.cols());

  for (std::size_t i = n - 2; i-- > 0;) {
    const Layer& layer = net.layer(i);
    const Tensor3d& input = trace.inputs[i];
    switch (layer.spec.kind) {
      case LayerKind::conv:
        grads.layers[i] = conv2d_param_backward(input, upstream, layer.kernels);
        upstream = conv2d_input_backward(upstream, layer.kernels);
        break;
      case LayerKind::leaky_relu:
        upstream = leaky_relu_backward(input, upstream, layer.spec.leaky_slope);
        break;
      case LayerKind::max_pool:
        if (!trace.switches[i]) throw UsageError("network_backward: trace lacks switches for pooling layer " +
                                                 std::to_string(i));
        upstream = max_pool_backward(upstream, *trace.switches[i]);
        break;
      case LayerKind::gap:
      case LayerKind::softmax:
        throw UsageError("network_backward: gap/softmax in the middle of the network");
    }
  }
  grads.input = std::move(upstream);
  return grads;
}

Gradients loss_gradients(const Network& net, const ForwardTrace& trace, Index label) {
  return network_backward(net, trace, softmax_cross_entropy_backward(trace.probabilities, label));
}

}  // namespace cleartrade
