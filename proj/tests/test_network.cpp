#include <doctest.h>

#include "cleartrade/network.hpp"
#include "cleartrade/trainer.hpp"
#include "support.hpp"

using namespace cleartrade;
using testing::Gen;

namespace {

Network toy_network(std::uint64_t seed) {
  // 20 + 38 = 58 parameters.
  const auto arch = parse_architecture("conv3x3:2,lrelu:0.1,pool,conv3x3:K,gap,softmax");
  Network net = Network::build(arch, 1, 2, seed);
  Gen g(seed + 100);
  for (auto& layer : net.layers()) {
    if (layer.spec.kind != LayerKind::conv) continue;
    for (Index i = 0; i < layer.kernels.biases.size(); ++i) layer.kernels.biases(i) = g.normal(0.2);
  }
  return net;
}

double loss_at(const Network& net, const Tensor3d& x, Index label) {
  return cross_entropy_loss(network_forward(net, x).probabilities, label);
}

bool close_rel(double analytic, double numeric, double tol) {
  // Entries whose magnitude is at the finite-difference noise floor are
  // compared absolutely.
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) <= tol * scale;
}

}  // namespace

TEST_CASE("backprop gradients agree with central differences") {
  constexpr double h = 1e-4;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Network net = toy_network(seed);
    CHECK(net.parameter_count() <= 200);
    Gen g(seed);
    const auto x = testing::random_tensor(g, 1, 6, 5);
    const Index label = static_cast<Index>(seed % 2);
    const Gradients grads = loss_gradients(net, network_forward(net, x), label);

    for (std::size_t li = 0; li < net.layers().size(); ++li) {
      if (net.layer(li).spec.kind != LayerKind::conv) continue;
      auto& bank = net.layer(li).kernels;
      auto check_entry = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + h;
        const double up = loss_at(net, x, label);
        param = saved - h;
        const double down = loss_at(net, x, label);
        param = saved;
        const double numeric = (up - down) / (2 * h);
        CHECK_MESSAGE(close_rel(analytic, numeric, 1e-4), "layer " << li << ": " << analytic << " vs " << numeric);
      };
      for (Index i = 0; i < bank.weights.size(); ++i) check_entry(bank.weights.data()[i], grads.layers[li].weights.data()[i]);
      for (Index i = 0; i < bank.biases.size(); ++i) check_entry(bank.biases(i), grads.layers[li].biases(i));
    }

    Tensor3d xp = x;
    for (Index i = 0; i < x.size(); ++i) {
      double& v = xp.flat().data()[i];
      const double saved = v;
      v = saved + h;
      const double up = loss_at(net, xp, label);
      v = saved - h;
      const double down = loss_at(net, xp, label);
      v = saved;
      CHECK(close_rel(grads.input.flat().data()[i], (up - down) / (2 * h), 1e-4));
    }
  }
}

TEST_CASE("logits are the per-channel means of the last conv output") {
  Gen g(5);
  const Network net = Network::build(default_architecture(), 1, 2, 9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto trace = network_forward(net, testing::random_tensor(g, 1, 30, 5));
    const Tensor3d& z = trace.outputs[net.last_conv_index()];
    for (Index s = 0; s < 2; ++s) {
      long double acc = 0;
      for (Index r = 0; r < z.rows(); ++r)
        for (Index c = 0; c < z.cols(); ++c) acc += z(s, r, c);
      const double mean = static_cast<double>(acc / (z.rows() * z.cols()));
      CHECK(std::abs(trace.logits(s) - mean) <= 1e-12 * std::max(1.0, std::abs(mean)));
    }
    CHECK(std::abs(trace.probabilities.sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("architecture strings round trip") {
  const auto arch = default_architecture(0.05);
  const std::string text = format_architecture(arch);
  CHECK(text == "conv3x3:16,lrelu:0.05,pool,conv3x3:32,lrelu:0.05,pool,conv3x3:K,gap,softmax");
  CHECK(format_architecture(parse_architecture(text)) == text);
  CHECK_THROWS_AS(parse_architecture("conv3x3:16,banana,gap,softmax"), ConfigError);
}

TEST_CASE("invalid architectures are configuration errors") {
  CHECK_THROWS_AS(Network::build(parse_architecture("conv3x3:4,gap"), 1, 2, 1), ConfigError);
  CHECK_THROWS_AS(Network::build(parse_architecture("conv3x3:4,lrelu,gap,softmax"), 1, 2, 1), ConfigError);
  CHECK_THROWS_AS(Network::build(parse_architecture("conv2x2:4,conv3x3:K,gap,softmax"), 1, 2, 1), ConfigError);
}

TEST_CASE("final conv width is tied to the number of states") {
  const Network net = Network::build(parse_architecture("conv3x3:4,lrelu,conv3x3:K,gap,softmax"), 1, 3, 1);
  CHECK(net.num_states() == 3);
  CHECK(net.layer(net.last_conv_index()).kernels.out_channels == 3);
  CHECK(Network::build(parse_architecture("conv3x3:4,lrelu,conv3x3:3,gap,softmax"), 1, 3, 1).num_states() == 3);
  CHECK_THROWS_WITH_AS(Network::build(parse_architecture("conv3x3:4,lrelu,conv3x3:9,gap,softmax"), 1, 3, 1),
                       doctest::Contains("9 kernels but there are 3 states"), ConfigError);
}

TEST_CASE("build is deterministic in the seed") {
  const Network a = Network::build(default_architecture(), 1, 2, 42);
  const Network b = Network::build(default_architecture(), 1, 2, 42);
  const Network c = Network::build(default_architecture(), 1, 2, 43);
  CHECK(a.layer(0).kernels.weights == b.layer(0).kernels.weights);
  CHECK(a.layer(0).kernels.weights != c.layer(0).kernels.weights);
  CHECK(a.layer(0).kernels.biases.isZero());
}

TEST_CASE("forward rejects wrong channel counts and backward rejects foreign traces") {
  const Network net = Network::build(default_architecture(), 1, 2, 1);
  CHECK_THROWS_AS(network_forward(net, Tensor3d(2, 30, 5)), ConfigError);
  const Network other = Network::build(parse_architecture("conv3x3:K,gap,softmax"), 1, 2, 1);
  const auto trace = network_forward(other, Tensor3d(1, 30, 5));
  CHECK_THROWS_AS(network_backward(net, trace, VectorXd::Zero(2)), UsageError);
}

TEST_CASE("forward works for windows that do not divide by four") {
  Gen g(6);
  const Network net = Network::build(default_architecture(), 1, 2, 3);
  for (Index rows : {1, 2, 3, 7, 29, 31}) {
    const auto trace = network_forward(net, testing::random_tensor(g, 1, rows, 5));
    CHECK(trace.probabilities.allFinite());
  }
}
