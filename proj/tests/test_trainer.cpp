#include <doctest.h>

#include <sstream>

#include "cleartrade/checkpoint.hpp"
#include "cleartrade/trainer.hpp"
#include "support.hpp"

using namespace cleartrade;
using testing::Gen;

namespace {

DatasetSplit planted_split(Index n, std::uint64_t seed) {
  return split_chronological(generate_synthetic(PlantedSignal{}, n, seed), 0.75);
}

// A fixed-output network: zero kernels, final bias favouring `state`.
Network constant_network(Index state) {
  Network net = Network::build(parse_architecture("conv3x3:K,gap,softmax"), 1, 2, 1);
  auto& k = net.layer(0).kernels;
  k.weights.setZero();
  k.biases.setZero();
  k.biases(state) = 1.0;
  return net;
}

}  // namespace

TEST_CASE("training is deterministic for a fixed seed") {
  const auto split = planted_split(120, 1);
  TrainConfig cfg;
  cfg.epochs = 2;
  const auto a = train(split, cfg), b = train(split, cfg);
  CHECK(encode_checkpoint(a.network) == encode_checkpoint(b.network));
  CHECK(a.curve[1].train_loss == b.curve[1].train_loss);
  cfg.seed = 8;
  CHECK(encode_checkpoint(train(split, cfg).network) != encode_checkpoint(a.network));
}

TEST_CASE("four samples are memorized within 200 epochs") {
  auto split = planted_split(40, 2);
  split.train.resize(4);
  split.eval = split.train;
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 4;
  const auto result = train(split, cfg);
  bool reached = false;
  for (const auto& e : result.curve) reached = reached || e.eval_accuracy == 1.0;
  CHECK(reached);
  CHECK(evaluate(result.network, split.train).accuracy == 1.0);
}

TEST_CASE("loss on a tiny memorization set does not rise over the first epochs") {
  auto split = planted_split(60, 3);
  split.train.resize(8);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 8;
  const auto curve = train(split, cfg).curve;
  for (std::size_t e = 1; e < curve.size(); ++e) CHECK(curve[e].train_loss <= 1.05 * curve[e - 1].train_loss);
}

TEST_CASE("non-binary final layer is rejected before training") {
  const auto split = planted_split(40, 4);
  TrainConfig cfg;
  const Network three = initial_network(cfg, 3);
  CHECK_THROWS_AS(train(three, split, cfg), ConfigError);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.learning_rate = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("constant predictor scores the majority fraction") {
  const auto windows = generate_synthetic(PlantedSignal{}, 101, 5);
  Index ones = 0;
  for (const auto& w : windows) ones += *w.label;
  for (Index state : {0, 1}) {
    const auto report = evaluate(constant_network(state), windows);
    const double expected = static_cast<double>(state ? ones : 101 - ones) / 101.0;
    CHECK(report.accuracy == expected);
    CHECK(report.confusion.sum() == 101);
    CHECK(report.confusion.col(1 - state).sum() == 0);
    CHECK(report.recall(state) == 1.0);
    CHECK(report.precision(1 - state) == 0.0);
  }
}

TEST_CASE("evaluate guards") {
  CHECK_THROWS_AS(evaluate(constant_network(0), {}), DataError);
  auto w = generate_synthetic(PlantedSignal{}, 2, 6);
  w[1].label.reset();
  CHECK_THROWS_AS(evaluate(constant_network(0), w), UsageError);
}

TEST_CASE("cross entropy floors tiny probabilities") {
  VectorXd p(2);
  p << 1.0, 0.0;
  CHECK(cross_entropy_loss(p, 1) == doctest::Approx(-std::log(kProbabilityFloor)));
  CHECK(cross_entropy_loss(p, 0) == 0.0);
  CHECK_THROWS_AS(cross_entropy_loss(p, 2), UsageError);
}

TEST_CASE("report CSVs") {
  std::ostringstream curve;
  write_loss_curve_csv({{1, 0.5, 0.75}, {2, 0.25, 1.0}}, curve);
  CHECK(curve.str() == "epoch,train_loss,eval_accuracy\n1,0.5,0.75\n2,0.25,1\n");

  const auto report = evaluate(constant_network(1), generate_synthetic(PlantedSignal{}, 10, 7));
  std::ostringstream csv;
  write_eval_report_csv(report, csv);
  CHECK(csv.str().rfind("metric,state,value\nn_samples,,10\n", 0) == 0);
  CHECK(csv.str().find("confusion_predicted1,0,") != std::string::npos);
}
