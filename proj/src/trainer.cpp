#include "cleartrade/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "cleartrade/format.hpp"

namespace cleartrade {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be >= 0");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must lie in (0, 1)");
  if (architecture.empty()) throw ConfigError("architecture is empty");
}

double cross_entropy_loss(const VectorXd& probabilities, Index label) {
  if (label < 0 || label >= probabilities.size()) {
    throw UsageError("cross_entropy_loss: label " + std::to_string(label) + " outside [0, " +
                     std::to_string(probabilities.size()) + ")");
  }
  return -std::log(std::max(probabilities(label), kProbabilityFloor));
}

Network initial_network(const TrainConfig& cfg, Index num_states) {
  cfg.validate();
  std::vector<LayerSpec> arch = cfg.architecture;
  for (LayerSpec& spec : arch) {
    if (spec.kind == LayerKind::leaky_relu) spec.leaky_slope = cfg.leaky_slope;
  }
  return Network::build(arch, 1, num_states, cfg.seed);
}

namespace {

void check_labels(const std::vector<InputWindow>& windows, Index num_states, const char* which) {
  for (const auto& w : windows) {
    if (!w.label) throw UsageError(std::string(which) + " split contains an unlabelled window");
    if (*w.label < 0 || *w.label >= num_states) {
      throw ConfigError(std::string(which) + " split has label " + std::to_string(*w.label) + " but the network has " +
                        std::to_string(num_states) + " states");
    }
  }
}

}  // namespace

TrainResult train(Network net, const DatasetSplit& split, const TrainConfig& cfg) {
  cfg.validate();
  if (net.num_states() != kBinaryStates) {
    throw ConfigError("final conv layer has " + std::to_string(net.num_states()) + " kernels; rise/fall data needs " +
                      std::to_string(kBinaryStates));
  }
  if (split.train.empty()) throw DataError("training split is empty");
  check_labels(split.train, net.num_states(), "training");
  check_labels(split.eval, net.num_states(), "evaluation");

  std::vector<Tensor3d> inputs;
  inputs.reserve(split.train.size());
  for (const auto& w : split.train) inputs.push_back(w.as_tensor());

  // Shuffling draws from its own stream so the schedule does not depend on
  // how many values weight initialisation consumed.
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  Gradients velocity = Gradients::zeros_like(net);
  TrainResult result;
  for (Index epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      Gradients batch = Gradients::zeros_like(net);
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t idx = order[i];
        const Index label = *split.train[idx].label;
        const ForwardTrace trace = network_forward(net, inputs[idx]);
        loss_sum += cross_entropy_loss(trace.probabilities, label);
        batch.add(loss_gradients(net, trace, label));
      }
      batch.scale(1.0 / static_cast<double>(end - begin));
      for (std::size_t l = 0; l < net.layers().size(); ++l) {
        KernelBankd& v = velocity.layers[l];
        if (v.weights.size() == 0) continue;
        KernelBankd& k = net.layer(l).kernels;
        v.weights = cfg.momentum * v.weights -
                    cfg.learning_rate * (batch.layers[l].weights + cfg.weight_decay * k.weights);
        v.biases = cfg.momentum * v.biases - cfg.learning_rate * batch.layers[l].biases;
        k.weights += v.weights;
        k.biases += v.biases;
      }
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.eval_accuracy = split.eval.empty() ? 0.0 : evaluate(net, split.eval).accuracy;
    result.curve.push_back(stats);
  }
  result.network = std::move(net);
  return result;
}

TrainResult train(const DatasetSplit& split, const TrainConfig& cfg) {
  return train(initial_network(cfg, kBinaryStates), split, cfg);
}

EvalReport evaluate(const Network& net, const std::vector<InputWindow>& windows) {
  if (windows.empty()) throw DataError("cannot evaluate on an empty window list");
  const Index k = net.num_states();
  EvalReport report;
  report.confusion = Eigen::MatrixXi::Zero(k, k);
  for (const auto& w : windows) {
    if (!w.label) throw UsageError("evaluate: window starting " + format_date(w.start_date) + " has no label");
    if (*w.label < 0 || *w.label >= k) throw UsageError("evaluate: label outside the network's states");
    const ForwardTrace trace = network_forward(net, w.as_tensor());
    ++report.confusion(*w.label, trace.predicted_state());
  }
  report.n_samples = static_cast<Index>(windows.size());
  report.accuracy = static_cast<double>(report.confusion.trace()) / static_cast<double>(report.n_samples);
  report.precision.resize(k);
  report.recall.resize(k);
  for (Index s = 0; s < k; ++s) {
    const int tp = report.confusion(s, s);
    const int predicted = report.confusion.col(s).sum();
    const int actual = report.confusion.row(s).sum();
    report.precision(s) = predicted ? static_cast<double>(tp) / predicted : 0.0;
    report.recall(s) = actual ? static_cast<double>(tp) / actual : 0.0;
  }
  return report;
}

void write_loss_curve_csv(const std::vector<EpochStats>& curve, std::ostream& out) {
  out << "epoch,train_loss,eval_accuracy\n";
  for (const auto& e : curve) {
    out << e.epoch << ',' << format_real(e.train_loss) << ',' << format_real(e.eval_accuracy) << '\n';
  }
}

void write_eval_report_csv(const EvalReport& report, std::ostream& out) {
  out << "metric,state,value\n";
  out << "n_samples,," << report.n_samples << '\n';
  out << "accuracy,," << format_real(report.accuracy) << '\n';
  for (Index s = 0; s < report.num_states(); ++s) {
    out << "support," << s << ',' << report.class_count(s) << '\n';
    out << "precision," << s << ',' << format_real(report.precision(s)) << '\n';
    out << "recall," << s << ',' << format_real(report.recall(s)) << '\n';
  }
  for (Index a = 0; a < report.num_states(); ++a) {
    for (Index p = 0; p < report.num_states(); ++p) {
      out << "confusion_predicted" << p << ',' << a << ',' << report.confusion(a, p) << '\n';
    }
  }
}

void print_eval_report(const EvalReport& report, std::ostream& out) {
  out << "samples: " << report.n_samples << "\naccuracy: " << format_fixed(report.accuracy, 4) << '\n';
  for (Index s = 0; s < report.num_states(); ++s) {
    out << "state " << s << ": support " << report.class_count(s) << ", precision "
        << format_fixed(report.precision(s), 4) << ", recall " << format_fixed(report.recall(s), 4) << '\n';
  }
  out << "confusion (rows actual, cols predicted):\n";
  for (Index a = 0; a < report.num_states(); ++a) {
    out << ' ';
    for (Index p = 0; p < report.num_states(); ++p) out << ' ' << report.confusion(a, p);
    out << '\n';
  }
}

}  // namespace cleartrade
