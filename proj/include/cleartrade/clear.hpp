#pragma once

// Class-enhanced attentive response maps.
//
// A state's response map is obtained by taking the recorded activations of
// the final conv layer, keeping only the kernel for that state, and running
// the adjoints of every convolution (bias-free) and the switch-driven
// un-pooling back down to the input grid. Leaky ReLUs are not re-applied on
// the way down: they act only through the recorded activations and
// switches. The per-cell argmax over states gives the dominant state map;
// the response at that state gives the dominance map.

#include <iosfwd>
#include <string>
#include <vector>

#include "cleartrade/data.hpp"
#include "cleartrade/network.hpp"

namespace cleartrade {

using StateGrid = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ResponseMap {
  Index state = 0;
  RowMatrix<double> values;  // window_days x n_features
};

struct StateMap {
  StateGrid states;
};

struct DominanceMap {
  RowMatrix<double> values;
};

struct ExplainOptions {
  /// Zero negative responses before taking the argmax. Off by default: the
  /// dominant state is chosen on raw signed responses.
  bool rectify = false;
};

/// Back-projects the final conv activations through a replacement for the
/// final kernel bank. Passing the network's own bank gives the un-isolated
/// projection; state_isolated_backproject passes a bank with every kernel
/// but one zeroed.
RowMatrix<double> backproject(const ForwardTrace& trace, const Network& net, const KernelBankd& last_layer);

/// The final kernel bank with every output kernel except `state` zeroed.
KernelBankd isolate_state(const KernelBankd& last_layer, Index state);

ResponseMap state_isolated_backproject(const ForwardTrace& trace, const Network& net, Index state);
std::vector<ResponseMap> all_state_responses(const ForwardTrace& trace, const Network& net);

/// Per-cell argmax over states; ties go to the lowest state index.
StateMap dominant_state_map(const std::vector<ResponseMap>& responses);
DominanceMap dominant_response_map(const std::vector<ResponseMap>& responses, const StateMap& state_map);

/// Everything needed to render or export one explanation.
struct Explanation {
  ForwardTrace trace;
  std::vector<ResponseMap> responses;
  StateMap state_map;
  DominanceMap dominance;

  Index predicted_state() const { return trace.predicted_state(); }
  const VectorXd& probabilities() const { return trace.probabilities; }
};

Explanation explain(const Network& net, const InputWindow& window, const ExplainOptions& options = {});

// ---------------------------------------------------------------------------
// Per-day aggregation and localization

/// Sum over features of the positive part of the dominance map, per day row.
Eigen::VectorXd day_saliency(const DominanceMap& dominance);

/// Per day row, the state whose response summed over features is largest
/// (lowest index on ties).
std::vector<Index> day_states(const std::vector<ResponseMap>& responses);

/// Share of the positive dominance mass lying in rows [row_begin, row_end).
/// Zero when the map has no positive mass.
double positive_mass_fraction(const DominanceMap& dominance, Index row_begin, Index row_end);

/// Day rows ordered by descending saliency (earlier row first on ties).
std::vector<Index> most_attentive_days(const DominanceMap& dominance, std::size_t count);

// ---------------------------------------------------------------------------
// Explanation CSV:
// day_index,feature_name,dominant_state,response_value,prob_state_0,...,prob_state_{K-1}

void write_explanation_csv(const Explanation& explanation, std::ostream& out);

struct ExplanationRecord {
  Index day_index = 0;
  std::string feature_name;
  Index dominant_state = 0;
  double response_value = 0;
  std::vector<double> probabilities;
};

std::vector<ExplanationRecord> read_explanation_csv(std::istream& in);

}  // namespace cleartrade
