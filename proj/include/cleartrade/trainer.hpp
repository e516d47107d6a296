#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "cleartrade/data.hpp"
#include "cleartrade/network.hpp"

namespace cleartrade {

struct TrainConfig {
  Index epochs = 30;
  Index batch_size = 16;
  double learning_rate = 0.01;
  double momentum = 0.9;  // 0 gives plain SGD
  double weight_decay = 0.03;  // L2 penalty on conv weights (not biases)
  std::uint64_t seed = 7;
  double leaky_slope = 0.01;
  std::vector<LayerSpec> architecture = default_architecture();

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

struct EpochStats {
  Index epoch = 0;
  double train_loss = 0;
  double eval_accuracy = 0;
};

struct TrainResult {
  Network network;
  std::vector<EpochStats> curve;
};

/// Confusion rows are actual states, columns predicted states.
struct EvalReport {
  Index n_samples = 0;
  double accuracy = 0;
  Eigen::MatrixXi confusion;
  Eigen::VectorXd precision;
  Eigen::VectorXd recall;

  Index num_states() const { return confusion.rows(); }
  /// Number of samples whose actual state is `s`.
  Index class_count(Index s) const { return confusion.row(s).sum(); }
};

inline constexpr double kProbabilityFloor = 1e-12;

/// -log(max(probs[label], 1e-12)).
double cross_entropy_loss(const VectorXd& probabilities, Index label);

/// Fresh network for `cfg.architecture` seeded from `cfg.seed`.
Network initial_network(const TrainConfig& cfg, Index num_states = kBinaryStates);

/// Mini-batch SGD with optional momentum over `split.train`, reporting
/// eval accuracy after every epoch. Deterministic for a fixed config.
TrainResult train(Network net, const DatasetSplit& split, const TrainConfig& cfg);
TrainResult train(const DatasetSplit& split, const TrainConfig& cfg);

/// Argmax-of-probabilities predictions over labelled windows.
EvalReport evaluate(const Network& net, const std::vector<InputWindow>& windows);

void write_loss_curve_csv(const std::vector<EpochStats>& curve, std::ostream& out);
void write_eval_report_csv(const EvalReport& report, std::ostream& out);
void print_eval_report(const EvalReport& report, std::ostream& out);

}  // namespace cleartrade
