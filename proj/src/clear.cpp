#include "cleartrade/clear.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <numeric>
#include <ostream>

#include "cleartrade/format.hpp"

namespace cleartrade {

KernelBankd isolate_state(const KernelBankd& last_layer, Index state) {
  if (state < 0 || state >= last_layer.out_channels) {
    throw UsageError("isolate_state: state " + std::to_string(state) + " outside [0, " +
                     std::to_string(last_layer.out_channels) + ")");
  }
  KernelBankd isolated = last_layer;
  for (Index k = 0; k < isolated.out_channels; ++k) {
    if (k != state) isolated.weights.row(k).setZero();
  }
  isolated.biases.setZero();
  return isolated;
}

RowMatrix<double> backproject(const ForwardTrace& trace, const Network& net, const KernelBankd& last_layer) {
  const std::size_t n = net.layers().size();
  if (trace.layer_count() != n || trace.inputs.size() != n || trace.switches.size() != n) {
    throw UsageError("backproject: trace was not produced by this network");
  }
  const std::size_t last = net.last_conv_index();
  const KernelBankd& own = net.layer(last).kernels;
  if (last_layer.out_channels != own.out_channels || last_layer.in_channels != own.in_channels ||
      last_layer.kernel_rows != own.kernel_rows || last_layer.kernel_cols != own.kernel_cols) {
    throw UsageError("backproject: replacement kernel bank does not match the final conv layer");
  }

  const Tensor3d& z_last = trace.outputs[last];
  Tensor3d response = conv2d_input_backward(z_last, last_layer);
  for (std::size_t i = last; i-- > 0;) {
    const Layer& layer = net.layer(i);
    switch (layer.spec.kind) {
      case LayerKind::conv:
        response = conv2d_input_backward(response, layer.kernels);
        break;
      case LayerKind::leaky_relu:
        break;
      case LayerKind::max_pool:
        if (!trace.switches[i]) {
          throw UsageError("backproject: trace has no pooling switches for layer " + std::to_string(i));
        }
        response = unpool(response, *trace.switches[i]);
        break;
      case LayerKind::gap:
      case LayerKind::softmax:
        throw UsageError("backproject: unexpected gap/softmax below the final conv layer");
    }
  }

  RowMatrix<double> grid = RowMatrix<double>::Zero(response.rows(), response.cols());
  for (Index c = 0; c < response.channels(); ++c) grid += response.channel(c);
  return grid;
}

ResponseMap state_isolated_backproject(const ForwardTrace& trace, const Network& net, Index state) {
  if (state < 0 || state >= net.num_states()) {
    throw UsageError("state_isolated_backproject: state " + std::to_string(state) + " outside [0, " +
                     std::to_string(net.num_states()) + ")");
  }
  const KernelBankd isolated = isolate_state(net.layer(net.last_conv_index()).kernels, state);
  return ResponseMap{state, backproject(trace, net, isolated)};
}

std::vector<ResponseMap> all_state_responses(const ForwardTrace& trace, const Network& net) {
  std::vector<ResponseMap> maps;
  maps.reserve(static_cast<std::size_t>(net.num_states()));
  for (Index s = 0; s < net.num_states(); ++s) maps.push_back(state_isolated_backproject(trace, net, s));
  return maps;
}

namespace {

void check_stack(const std::vector<ResponseMap>& responses, const char* who) {
  if (responses.empty()) throw UsageError(std::string(who) + ": empty response list");
  const auto& first = responses.front().values;
  for (const auto& r : responses) {
    if (r.values.rows() != first.rows() || r.values.cols() != first.cols()) {
      throw UsageError(std::string(who) + ": response maps differ in shape");
    }
  }
}

}  // namespace

StateMap dominant_state_map(const std::vector<ResponseMap>& responses) {
  check_stack(responses, "dominant_state_map");
  const auto& first = responses.front().values;
  StateMap map{StateGrid::Zero(first.rows(), first.cols())};
  RowMatrix<double> best = first;
  for (std::size_t s = 1; s < responses.size(); ++s) {
    const auto& values = responses[s].values;
    for (Index r = 0; r < values.rows(); ++r) {
      for (Index c = 0; c < values.cols(); ++c) {
        if (values(r, c) > best(r, c)) {
          best(r, c) = values(r, c);
          map.states(r, c) = static_cast<Index>(s);
        }
      }
    }
  }
  return map;
}

DominanceMap dominant_response_map(const std::vector<ResponseMap>& responses, const StateMap& state_map) {
  check_stack(responses, "dominant_response_map");
  const auto& first = responses.front().values;
  if (state_map.states.rows() != first.rows() || state_map.states.cols() != first.cols()) {
    throw UsageError("dominant_response_map: state map shape differs from the responses");
  }
  DominanceMap map{RowMatrix<double>(first.rows(), first.cols())};
  for (Index r = 0; r < first.rows(); ++r) {
    for (Index c = 0; c < first.cols(); ++c) {
      const Index s = state_map.states(r, c);
      if (s < 0 || s >= static_cast<Index>(responses.size())) {
        throw UsageError("dominant_response_map: state map refers to a missing state");
      }
      map.values(r, c) = responses[static_cast<std::size_t>(s)].values(r, c);
    }
  }
  return map;
}

Explanation explain(const Network& net, const InputWindow& window, const ExplainOptions& options) {
  Explanation e;
  e.trace = network_forward(net, window.as_tensor());
  e.responses = all_state_responses(e.trace, net);
  if (options.rectify) {
    for (auto& r : e.responses) r.values = r.values.cwiseMax(0.0);
  }
  e.state_map = dominant_state_map(e.responses);
  e.dominance = dominant_response_map(e.responses, e.state_map);
  return e;
}

Eigen::VectorXd day_saliency(const DominanceMap& dominance) {
  return dominance.values.cwiseMax(0.0).rowwise().sum();
}

std::vector<Index> day_states(const std::vector<ResponseMap>& responses) {
  check_stack(responses, "day_states");
  const Index days = responses.front().values.rows();
  std::vector<Index> states(static_cast<std::size_t>(days), 0);
  for (Index d = 0; d < days; ++d) {
    double best = responses.front().values.row(d).sum();
    for (std::size_t s = 1; s < responses.size(); ++s) {
      const double total = responses[s].values.row(d).sum();
      if (total > best) {
        best = total;
        states[static_cast<std::size_t>(d)] = static_cast<Index>(s);
      }
    }
  }
  return states;
}

double positive_mass_fraction(const DominanceMap& dominance, Index row_begin, Index row_end) {
  if (row_begin < 0 || row_end > dominance.values.rows() || row_begin > row_end) {
    throw UsageError("positive_mass_fraction: row range outside the map");
  }
  const RowMatrix<double> positive = dominance.values.cwiseMax(0.0);
  const double total = positive.sum();
  if (!(total > 0.0)) return 0.0;
  return positive.middleRows(row_begin, row_end - row_begin).sum() / total;
}

std::vector<Index> most_attentive_days(const DominanceMap& dominance, std::size_t count) {
  const Eigen::VectorXd saliency = day_saliency(dominance);
  std::vector<Index> days(static_cast<std::size_t>(saliency.size()));
  std::iota(days.begin(), days.end(), Index{0});
  std::stable_sort(days.begin(), days.end(), [&](Index a, Index b) { return saliency(a) > saliency(b); });
  days.resize(std::min(count, days.size()));
  return days;
}

// ---------------------------------------------------------------------------
// CSV

void write_explanation_csv(const Explanation& explanation, std::ostream& out) {
  const auto& dominance = explanation.dominance.values;
  const auto& probs = explanation.probabilities();
  if (dominance.cols() > kFeatureCount) throw UsageError("write_explanation_csv: more feature columns than names");
  out << "day_index,feature_name,dominant_state,response_value";
  for (Index s = 0; s < probs.size(); ++s) out << ",prob_state_" << s;
  out << '\n';

  std::string prob_suffix;
  for (Index s = 0; s < probs.size(); ++s) prob_suffix += ',' + format_real(probs(s));
  for (Index d = 0; d < dominance.rows(); ++d) {
    for (Index f = 0; f < dominance.cols(); ++f) {
      out << d << ',' << kFeatureNames[static_cast<std::size_t>(f)] << ',' << explanation.state_map.states(d, f) << ','
          << format_real(dominance(d, f)) << prob_suffix << '\n';
    }
  }
}

namespace {

template <typename T>
T parse_field(std::string_view text, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError("explanation CSV line " + std::to_string(line_no) + ": bad value '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::vector<ExplanationRecord> read_explanation_csv(std::istream& in) {
  std::vector<ExplanationRecord> records;
  std::string line;
  std::size_t line_no = 0;
  std::size_t states = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (line_no == 1) {
      if (fields.size() < 5 || fields[0] != "day_index") throw DataError("explanation CSV: unexpected header");
      states = fields.size() - 4;
      continue;
    }
    if (fields.size() != states + 4) {
      throw DataError("explanation CSV line " + std::to_string(line_no) + ": wrong number of columns");
    }
    ExplanationRecord rec;
    rec.day_index = parse_field<Index>(fields[0], line_no);
    rec.feature_name = std::string(fields[1]);
    rec.dominant_state = parse_field<Index>(fields[2], line_no);
    rec.response_value = parse_field<double>(fields[3], line_no);
    for (std::size_t s = 0; s < states; ++s) rec.probabilities.push_back(parse_field<double>(fields[4 + s], line_no));
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace cleartrade
