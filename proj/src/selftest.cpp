// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "zkml/selftest.hpp"

#include <algorithm>

#include "json.hpp"
#include "zkml/checker.hpp"
#include "zkml/interpreter.hpp"

namespace zkml {

const std::vector<std::string>& bundled_models() {
  static const std::vector<std::string> models = {
      R"({"version": 1, "input_shape": [1, 4, 4, 2], "input_quant": {"zero_point": 128, "scale": {"a": 1, "b": 1}},
 "layers": [
  {"kind": "conv2d", "weights": {"shape": [2, 3, 3, 2], "data_b64": "gabL8BU6X4Wqz/QZPmOJrtP4HUJnjbLX/CFGa5G22wAlSm+V"},
   "bias": [100, -50], "stride": 1, "padding": "same",
   "out_quant": {"zero_point": 120, "scale": {"a": 3, "b": 1024}}, "activation": "clip_relu"},
  {"kind": "average_pool", "stride": 0, "padding": "valid"},
  {"kind": "fully_connected", "weights": {"shape": [3, 2], "data_b64": "Bfl/gABA"},
   "out_quant": {"zero_point": 128, "scale": {"a": 1, "b": 256}}, "activation": "none"},
  {"kind": "output"}]})",
      R"({"version": 1, "input_shape": [1, 3, 3, 2], "input_quant": {"zero_point": 100, "scale": {"a": 1, "b": 1}},
 "layers": [
  {"kind": "depthwise_conv2d", "weights": {"shape": [1, 3, 3, 2], "data_b64": "8fwH8/4J9QAL9wIN+QQP+wby"},
   "stride": 1, "padding": "same", "out_quant": {"zero_point": 100, "scale": {"a": 1, "b": 1}}, "activation": "none"},
  {"kind": "residual_add", "inputs": [0, -1], "out_quant": {"zero_point": 90, "scale": {"a": 1, "b": 2}},
   "activation": "clip_relu"},
  {"kind": "conv2d", "weights": {"shape": [2, 1, 1, 2], "data_b64": "A/z+CQ=="}, "stride": 2, "padding": "valid",
   "out_quant": {"zero_point": 128, "scale": {"a": 1, "b": 16}}, "activation": "clip_relu"},
  {"kind": "output"}]})",
  };
  return models;
}

std::string equivalence_failure(const CompiledCircuit& circuit, const ModelGraph& graph, const QuantTensor& input,
                                const Assignment& witness, unsigned threads) {
  const CheckResult result = check_parallel(circuit.layout, witness, std::max(1u, threads));
  if (!result.ok()) {
    return std::to_string(result.total) + " violations, first: " + std::string(to_string(result.violations[0].kind)) +
           " " + std::to_string(result.violations[0].id) + " row " + std::to_string(result.violations[0].row) + " " +
           result.violations[0].detail;
  }
  const InferenceTrace trace = run_inference(graph, input);
  const Field& f = *circuit.layout.field;
  for (size_t l = 0; l < circuit.layer_cells.size(); ++l) {
    const auto& cells = circuit.layer_cells[l];
    const auto& expect = trace.layers[l].act;
    if (cells.act.size() != expect.size()) return "layer " + std::to_string(l) + ": activation count differs";
    for (size_t i = 0; i < expect.size(); ++i) {
      const U256& v = cell_value(circuit.layout, witness, cells.act[i]);
      if (!(v == U256(expect[i]))) {
        return "layer " + std::to_string(l) + " activation " + std::to_string(i) + ": circuit " + v.to_decimal() +
               " != interpreter " + std::to_string(expect[i]);
      }
    }
  }
  const auto& out_cells = circuit.layer_cells.back().acc;
  if (out_cells.size() != trace.logits.size()) return "logit count differs";
  for (size_t i = 0; i < out_cells.size(); ++i) {
    const U256& v = cell_value(circuit.layout, witness, out_cells[i]);
    if (!f.fits_i64(v) || f.to_i64(v) != trace.logits[i]) {
      return "logit " + std::to_string(i) + ": circuit " + v.to_decimal() + " != interpreter " +
             std::to_string(trace.logits[i]);
    }
  }
  return {};
}

TamperSampler::TamperSampler(const Assignment& witness) {
  for (size_t c = 0; c < witness.advice.size(); ++c) {
    std::vector<uint32_t> rows;
    const auto& col = witness.advice[c];
    for (uint32_t r = 0; r < col.assigned.size(); ++r) {
      if (col.assigned[r]) rows.push_back(r);
    }
    if (rows.empty()) continue;
    total_ += rows.size();
    prefix_.push_back(total_);
    rows_.emplace_back(static_cast<ColumnId>(c), std::move(rows));
  }
}

Cell TamperSampler::pick(gen::Rng& rng) const {
  if (total_ == 0) throw CircuitError("witness has no assigned advice cells");
  const auto k = static_cast<uint64_t>(gen::uniform(rng, 0, static_cast<int64_t>(total_) - 1));
  const size_t i = static_cast<size_t>(std::upper_bound(prefix_.begin(), prefix_.end(), k) - prefix_.begin());
  const uint64_t base = i == 0 ? 0 : prefix_[i - 1];
  return Cell{rows_[i].first, rows_[i].second[static_cast<size_t>(k - base)]};
}

void tamper(const CircuitLayout& layout, Assignment& witness, Cell cell) {
  const U256 v = cell_value(layout, witness, cell);
  witness.set(cell, layout.field->add(v, U256(1)));
}

std::string SelftestReport::to_json() const {
  return nlohmann::json{{"ok", ok()},
                        {"models", models},
                        {"equivalence_failures", equivalence_failures},
                        {"tamper_trials", tamper_trials},
                        {"tampers_detected", tampers_detected},
                        {"failures", failures}}
      .dump(2);
}

SelftestReport run_selftest(const SelftestOptions& options) {
  SelftestReport report;
  gen::Rng rng(options.seed);
  auto run_one = [&](const std::string& label, const ModelGraph& graph) {
    ++report.models;
    try {
      const QuantTensor input = gen::random_input(rng, graph);
      const CompiledCircuit circuit = compile(graph, options.config);
      Assignment witness = assign_witness(circuit, graph, input);
      if (auto why = equivalence_failure(circuit, graph, input, witness, options.threads); !why.empty()) {
        ++report.equivalence_failures;
        report.failures.push_back(label + ": " + why);
        return;
      }
      const TamperSampler sampler(witness);
      for (int t = 0; t < options.tampers_per_model; ++t) {
        const Cell cell = sampler.pick(rng);
        Assignment bad = witness;
        tamper(circuit.layout, bad, cell);
        ++report.tamper_trials;
        if (!check_parallel(circuit.layout, bad, std::max(1u, options.threads)).ok()) {
          ++report.tampers_detected;
        } else {
          report.failures.push_back(label + ": tamper of " + circuit.layout.columns[cell.column].name + "[" +
                                    std::to_string(cell.row) + "] went undetected");
        }
      }
    } catch (const Error& e) {
      ++report.equivalence_failures;
      report.failures.push_back(label + ": " + e.what());
    }
  };
  for (size_t i = 0; i < bundled_models().size(); ++i) {
    run_one("bundled model " + std::to_string(i), load_model(bundled_models()[i]));
  }
  for (int i = 0; i < options.models; ++i) {
    run_one("random model " + std::to_string(i), gen::random_model(rng, options.model));
  }
  return report;
}

}  // namespace zkml
