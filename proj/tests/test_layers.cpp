#include <doctest.h>

#include <limits>

#include "cleartrade/layers.hpp"
#include "support.hpp"

using namespace cleartrade;
using testing::Gen;

TEST_CASE("conv forward matches the direct loop") {
  Gen g(11);
  for (int trial = 0; trial < 25; ++trial) {
    const Index in = g.integer(1, 3), out = g.integer(1, 4);
    const Index kr = 2 * g.integer(0, 2) + 1, kc = 2 * g.integer(0, 2) + 1;
    const auto x = testing::random_tensor(g, in, g.integer(1, 9), g.integer(1, 7));
    const auto k = testing::random_bank(g, out, in, kr, kc);
    const auto y = conv2d_forward(x, k);
    const auto ref = testing::conv_reference(x, k);
    REQUIRE(y.same_shape(ref));
    CHECK(testing::rel_diff(y.flat(), ref.flat()) < 1e-12);
  }
}

TEST_CASE("conv input backward is the adjoint of the forward map") {
  Gen g(12);
  for (int trial = 0; trial < 30; ++trial) {
    const Index in = g.integer(1, 3), out = g.integer(1, 3);
    const auto x = testing::random_tensor(g, in, g.integer(1, 10), g.integer(1, 6));
    auto k = testing::random_bank(g, out, in, 2 * g.integer(0, 1) + 1, 2 * g.integer(0, 2) + 1);
    k.biases.setZero();
    const auto y = testing::random_tensor(g, out, x.rows(), x.cols());
    const double lhs = conv2d_forward(x, k).flat().cwiseProduct(y.flat()).sum();
    const double rhs = x.flat().cwiseProduct(conv2d_input_backward(y, k).flat()).sum();
    CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(std::abs(lhs), std::abs(rhs)));
  }
}

TEST_CASE("conv input backward equals the transposed dense matrix") {
  Gen g(13);
  const auto k = testing::random_bank(g, 2, 3);
  const auto dy = testing::random_tensor(g, 2, 5, 4);
  const Eigen::MatrixXd m = testing::conv_matrix(k, 5, 4);
  Eigen::VectorXd flat_dy = Eigen::Map<const Eigen::VectorXd>(dy.flat().data(), dy.size());
  const Eigen::VectorXd expected = m.transpose() * flat_dy;
  const auto dx = conv2d_input_backward(dy, k);
  CHECK(testing::rel_diff(Eigen::Map<const Eigen::VectorXd>(dx.flat().data(), dx.size()), expected) < 1e-12);
}

TEST_CASE("conv rejects mismatched channels and even kernels") {
  Gen g(14);
  const auto x = testing::random_tensor(g, 2, 4, 4);
  CHECK_THROWS_AS(conv2d_forward(x, KernelBankd(1, 3, 3, 3)), ConfigError);
  CHECK_THROWS_AS(KernelBankd(1, 1, 2, 3), ConfigError);
}

TEST_CASE("leaky relu forward and derivative") {
  Tensor3d x(1, 1, 4);
  x(0, 0, 0) = -2.0;
  x(0, 0, 1) = 0.0;
  x(0, 0, 2) = 3.0;
  x(0, 0, 3) = -0.5;
  const auto y = leaky_relu_forward(x, 0.1);
  CHECK(y(0, 0, 0) == doctest::Approx(-0.2));
  CHECK(y(0, 0, 1) == 0.0);
  CHECK(y(0, 0, 2) == 3.0);
  Tensor3d ones(1, 1, 4);
  ones.flat().setOnes();
  const auto d = leaky_relu_backward(x, ones, 0.1);
  CHECK(d(0, 0, 0) == doctest::Approx(0.1));
  CHECK(d(0, 0, 1) == 1.0);  // derivative taken as 1 at zero
  CHECK(d(0, 0, 2) == 1.0);
}

namespace {

// Region scan in flat order (0 tl, 1 tr, 2 bl, 3 br) over real cells only.
void pool_reference(const Tensor3d& x, Tensor3d& pooled, std::vector<int>& argmax) {
  const Index pr = (x.rows() + 1) / 2, pc = (x.cols() + 1) / 2;
  pooled = Tensor3d(x.channels(), pr, pc);
  argmax.assign(static_cast<std::size_t>(x.channels() * pr * pc), -1);
  for (Index c = 0; c < x.channels(); ++c)
    for (Index r = 0; r < pr; ++r)
      for (Index k = 0; k < pc; ++k) {
        double best = -std::numeric_limits<double>::infinity();
        int best_a = -1;
        for (int a = 0; a < 4; ++a) {
          const Index rr = 2 * r + a / 2, cc = 2 * k + a % 2;
          if (rr >= x.rows() || cc >= x.cols()) continue;
          if (x(c, rr, cc) > best) {
            best = x(c, rr, cc);
            best_a = a;
          }
        }
        pooled(c, r, k) = best;
        argmax[static_cast<std::size_t>((c * pr + r) * pc + k)] = best_a;
      }
}

}  // namespace

TEST_CASE("max pool matches a region scan, including ties and odd sizes") {
  Gen g(15);
  for (int trial = 0; trial < 40; ++trial) {
    auto x = testing::random_tensor(g, g.integer(1, 3), g.integer(1, 9), g.integer(1, 7));
    if (trial % 2 == 0) {
      // Coarse integer grid so regions contain ties.
      for (Index i = 0; i < x.size(); ++i) x.flat().data()[i] = std::round(x.flat().data()[i]);
    }
    Tensor3d ref;
    std::vector<int> ref_arg;
    pool_reference(x, ref, ref_arg);
    const auto res = max_pool_forward(x);
    REQUIRE(res.pooled.same_shape(ref));
    CHECK(res.pooled.flat() == ref.flat());
    for (std::size_t i = 0; i < ref_arg.size(); ++i) CHECK(static_cast<int>(res.switches.argmax[i]) == ref_arg[i]);
  }
}

TEST_CASE("odd padding with (min - 1) gives the same result as clipping") {
  Gen g(16);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = testing::random_tensor(g, 2, 2 * g.integer(1, 4) + 1, 2 * g.integer(1, 3) + 1);
    Tensor3d padded(2, x.rows() + 1, x.cols() + 1);
    for (Index c = 0; c < 2; ++c) {
      padded.channel(c).setConstant(x.channel(c).minCoeff() - 1.0);
      padded.channel(c).topLeftCorner(x.rows(), x.cols()) = x.channel(c);
    }
    const auto a = max_pool_forward(x), b = max_pool_forward(padded);
    CHECK(a.pooled.flat() == b.pooled.flat());
    CHECK(a.switches.argmax == b.switches.argmax);
  }
}

TEST_CASE("pool/unpool round trip is exact") {
  Gen g(17);
  for (int trial = 0; trial < 30; ++trial) {
    const auto x = testing::random_tensor(g, g.integer(1, 3), g.integer(1, 10), g.integer(1, 6));
    const auto res = max_pool_forward(x);

    // Every pooled value lands on its switch; everything else is zero.
    const auto up = unpool(res.pooled, res.switches);
    REQUIRE(up.same_shape(x));
    Index nonzero = 0;
    for (Index c = 0; c < x.channels(); ++c)
      for (Index r = 0; r < x.rows(); ++r)
        for (Index k = 0; k < x.cols(); ++k) {
          if (up(c, r, k) != 0.0) {
            ++nonzero;
            CHECK(up(c, r, k) == x(c, r, k));
          }
        }
    CHECK(nonzero <= res.pooled.size());

    // pool(unpool(y)) == y for nonnegative y on the same switches.
    Tensor3d y = testing::random_tensor(g, res.pooled.channels(), res.pooled.rows(), res.pooled.cols());
    y.flat() = y.flat().cwiseAbs().array() + 0.5;
    const auto again = max_pool_forward(unpool(y, res.switches));
    CHECK(again.pooled.flat() == y.flat());
    CHECK(again.switches.argmax == res.switches.argmax);
  }
}

TEST_CASE("unpool rejects mismatched switches") {
  Gen g(18);
  const auto res = max_pool_forward(testing::random_tensor(g, 1, 4, 4));
  CHECK_THROWS_AS(unpool(testing::random_tensor(g, 1, 3, 2), res.switches), UsageError);
  auto bad = res.switches;
  bad.input_rows = 3;
  bad.argmax[2] = 3;  // points below the last real row
  CHECK_THROWS_AS(unpool(res.pooled, bad), UsageError);
}

TEST_CASE("global average pool and its backward") {
  Gen g(19);
  const auto x = testing::random_tensor(g, 3, 5, 4);
  const auto m = global_average_pool(x);
  for (Index c = 0; c < 3; ++c) {
    long double acc = 0;
    for (Index r = 0; r < 5; ++r)
      for (Index k = 0; k < 4; ++k) acc += x(c, r, k);
    CHECK(std::abs(m(c) - static_cast<double>(acc / 20)) <= 1e-12 * std::max(1.0, std::abs(m(c))));
  }
  const VectorXd up = VectorXd::Constant(3, 2.0);
  const auto back = gap_backward(up, 5, 4);
  CHECK((back.flat().array() == 0.1).all());
}

TEST_CASE("softmax matches a long double oracle and survives large logits") {
  Gen g(20);
  for (int trial = 0; trial < 50; ++trial) {
    const Index k = g.integer(2, 6);
    VectorXd z(k);
    for (Index i = 0; i < k; ++i) z(i) = g.normal(trial < 40 ? 3.0 : 300.0);
    const VectorXd p = softmax(z);
    long double top = z.maxCoeff(), sum = 0;
    for (Index i = 0; i < k; ++i) sum += std::exp(static_cast<long double>(z(i)) - top);
    for (Index i = 0; i < k; ++i) {
      const long double ref = std::exp(static_cast<long double>(z(i)) - top) / sum;
      CHECK(std::abs(p(i) - static_cast<double>(ref)) <= 1e-14);
    }
    CHECK(p.allFinite());
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax cross entropy gradient is probs minus one-hot") {
  VectorXd p(3);
  p << 0.2, 0.5, 0.3;
  const VectorXd d = softmax_cross_entropy_backward(p, 1);
  CHECK(d(0) == doctest::Approx(0.2));
  CHECK(d(1) == doctest::Approx(-0.5));
  CHECK(d(2) == doctest::Approx(0.3));
  CHECK_THROWS_AS(softmax_cross_entropy_backward(p, 3), UsageError);
}
