// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

// zkml: command-line front end. Each subcommand parses its arguments, calls
// the library and serializes the result.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "zkml/arithmetizer.hpp"
#include "zkml/checker.hpp"
#include "zkml/commitment.hpp"
#include "zkml/interpreter.hpp"
#include "zkml/protocol.hpp"
#include "zkml/selftest.hpp"
#include "zkml/serialize.hpp"

using nlohmann::json;
using namespace zkml;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& path, const std::string& contents) {
  if (path == "-") {
    std::cout << contents;
    if (!contents.empty() && contents.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << contents;
  if (!out) throw FormatError("write failed for " + path);
}

std::string pretty(const std::string& compact_json) { return json::parse(compact_json).dump(2) + "\n"; }

struct Options {
  std::string config;

  CompileConfig compile_config() const { return config.empty() ? CompileConfig{} : load_config_file(config); }
};

int error_exit(const char* kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
  return code;
}

// ---------------------------------------------------------------------------

int cmd_infer(const std::string& model_path, const std::string& input_path, const std::string& out) {
  const ModelGraph graph = load_model_file(model_path);
  const QuantTensor input = load_tensor_file(input_path, graph.input_quant);
  emit(out, pretty(trace_json(graph, run_inference(graph, input))));
  return 0;
}

int cmd_compile(const Options& opt, const std::string& model_path, const std::string& stats, const std::string& layout,
                const std::string& dump) {
  const ModelGraph graph = load_model_file(model_path);
  const CompiledCircuit circuit = compile(graph, opt.compile_config());
  if (!layout.empty()) emit(layout, serialize_layout(circuit.layout));
  if (!dump.empty()) emit(dump, pretty(debug_dump(circuit.layout)));
  if (!stats.empty() || (layout.empty() && dump.empty())) emit(stats.empty() ? "-" : stats, pretty(circuit.stats.to_json()));
  return 0;
}

int cmd_witness(const Options& opt, const std::string& model_path, const std::string& input_path,
                const std::string& out, const std::string& layout_path) {
  const ModelGraph graph = load_model_file(model_path);
  const QuantTensor input = load_tensor_file(input_path, graph.input_quant);
  const CompiledCircuit circuit = compile(graph, opt.compile_config());
  if (!layout_path.empty() && slurp(layout_path) != serialize_layout(circuit.layout)) {
    throw FormatError(layout_path + " was not compiled from this model and configuration");
  }
  const Assignment witness = assign_witness(circuit, graph, input);
  emit(out, serialize_witness(circuit.layout, witness));
  return 0;
}

int cmd_check(const std::string& layout_path, const std::string& witness_path, const std::string& report,
              unsigned threads, size_t cap) {
  const CircuitLayout layout = deserialize_layout(slurp(layout_path));
  const Assignment witness = deserialize_witness(slurp(witness_path), layout);
  CheckOptions copt;
  copt.cap = cap;
  const CheckResult result = check_parallel(layout, witness, std::max(1u, threads), copt);
  emit(report, pretty(result.to_json(layout)));
  return result.ok() ? 0 : 1;
}

int cmd_commit(const Options& opt, const std::string& model_path, const std::string& input_path,
               const std::string& visibility, const std::string& out) {
  const ModelGraph graph = load_model_file(model_path);
  const QuantTensor input = load_tensor_file(input_path, graph.input_quant);
  CompileConfig cfg = opt.compile_config();
  if (!visibility.empty()) cfg.visibility = parse_visibility(visibility);
  const Sponge sponge(cfg.field, cfg.sponge);
  const Commitment c = commit_model_io(sponge, graph, input, cfg.visibility);
  json doc{{"visibility", to_string(cfg.visibility)}, {"modulus", cfg.field->modulus().to_decimal()}};
  doc["input_digest"] = c.input_digest ? json(c.input_digest->to_decimal()) : json(nullptr);
  doc["weight_digest"] = c.weight_digest ? json(c.weight_digest->to_decimal()) : json(nullptr);
  json inst = json::array();
  for (const auto& v : c.instance) inst.push_back(v.to_decimal());
  doc["instance"] = inst;
  emit(out, doc.dump(2) + "\n");
  return 0;
}

int cmd_protocol_run(const std::string& setup_path, const std::string& log_path, const std::string& out) {
  using namespace zkml::protocol;
  json setup;
  try {
    setup = json::parse(slurp(setup_path));
  } catch (const json::exception& e) {
    throw FormatError(setup_path + ": " + e.what());
  }
  if (!setup.is_object() || !setup.contains("kind")) throw FormatError(setup_path + ": expected {\"kind\", \"params\", \"funds\"}");
  for (const auto& [key, v] : setup.items()) {
    if (key != "kind" && key != "params" && key != "funds") throw FormatError(setup_path + ": unknown key '" + key + "'");
  }
  const Kind kind = parse_kind(setup["kind"].get<std::string>());
  const EconParams params = setup.contains("params") ? EconParams::from_json(setup["params"]) : EconParams{};
  std::map<Party, Money> funds = default_funds(params);
  if (setup.contains("funds")) {
    for (const auto& [party, amount] : setup["funds"].items()) funds[parse_party(party)] = money_from_json(amount);
  }

  std::vector<Transition> log;
  {
    std::istringstream in(slurp(log_path));
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        log.push_back(Transition::from_json(json::parse(line)));
      } catch (const json::exception& e) {
        throw FormatError(log_path + ":" + std::to_string(n) + ": " + e.what());
      } catch (const ProtocolError& e) {
        throw FormatError(log_path + ":" + std::to_string(n) + ": " + e.what());
      }
    }
  }

  ProtocolState state = start(kind, params, funds);
  const Money total = state.ledger.total();
  json doc{{"params", params.to_json()}, {"initial", state.to_json()}, {"trace", json::array()}};
  int code = 0;
  for (size_t i = 0; i < log.size(); ++i) {
    try {
      state = step(state, log[i]);
    } catch (const ProtocolError& e) {
      doc["error"] = {{"step", i}, {"message", e.what()}};
      code = 1;
      break;
    }
    doc["trace"].push_back({{"step", i}, {"transition", log[i].to_json()}, {"state", state.to_json()}});
  }
  doc["final"] = state.to_json();
  doc["conserved"] = state.ledger.total() == total;
  emit(out, doc.dump(2) + "\n");
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zkml: quantized-model circuit compiler, constraint checker and protocol simulator"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config, "Configuration file (JSON)")->check(CLI::ExistingFile);

  std::string model, input, out = "-", stats, layout, dump, witness, report = "-", visibility, setup, tlog;
  unsigned threads = 1;
  size_t cap = 1000;

  auto* infer = app.add_subcommand("infer", "Run the reference interpreter");
  infer->add_option("model", model, "Model file")->required();
  infer->add_option("input", input, "Input tensor file")->required();
  infer->add_option("-o,--out", out, "Trace output ('-' for stdout)");

  auto* comp = app.add_subcommand("compile", "Lower a model to a circuit layout");
  comp->add_option("model", model, "Model file")->required();
  comp->add_option("--stats", stats, "Write stats JSON ('-' for stdout)");
  comp->add_option("--layout", layout, "Write the binary layout");
  comp->add_option("--dump", dump, "Write the debug dump JSON ('-' for stdout)");

  auto* wit = app.add_subcommand("witness", "Assign the witness for one input");
  wit->add_option("model", model, "Model file")->required();
  wit->add_option("input", input, "Input tensor file")->required();
  wit->add_option("-o,--out", witness, "Witness output file")->required();
  wit->add_option("--layout", layout, "Verify against this compiled layout");

  auto* chk = app.add_subcommand("check", "Check a witness against a layout");
  chk->add_option("layout", layout, "Layout file")->required();
  chk->add_option("witness", witness, "Witness file")->required();
  chk->add_option("--report", report, "Report output ('-' for stdout)");
  chk->add_option("--threads", threads, "Checker shards");
  chk->add_option("--cap", cap, "Violations listed in the report");

  auto* com = app.add_subcommand("commit", "Print the input and weight digests");
  com->add_option("model", model, "Model file")->required();
  com->add_option("input", input, "Input tensor file")->required();
  com->add_option("--visibility", visibility, "Override the configured visibility mode");
  com->add_option("-o,--out", out, "Output ('-' for stdout)");

  auto* proto = app.add_subcommand("protocol", "Protocol simulator and calculators");
  proto->require_subcommand(1);
  auto* run = proto->add_subcommand("run", "Replay a transition log (JSON lines)");
  run->add_option("setup", setup, "Setup file: {kind, params, funds}")->required();
  run->add_option("log", tlog, "Transition log")->required();
  run->add_option("-o,--out", out, "Output ('-' for stdout)");
  auto* ss = proto->add_subcommand("sample-size", "Audit and test-set sample sizes");
  std::string method;
  double p_or_eps = 0, delta = 0.05;
  ss->add_option("method", method, "retrieval | hoeffding")->required()->check(CLI::IsMember({"retrieval", "hoeffding"}));
  ss->add_option("--p,--epsilon", p_or_eps, "Tamper fraction (retrieval) or accuracy slack (hoeffding)")->required();
  ss->add_option("--delta", delta, "Confidence parameter");
  auto* cost = proto->add_subcommand("cost", "N times the per-example cost, in cents");
  int64_t n_examples = 0;
  std::string per_example = "0.16655";
  cost->add_option("--n", n_examples, "Sample size")->required();
  cost->add_option("--c", per_example, "Per-example prove and verify cost");
  auto* grief = proto->add_subcommand("thresholds", "Griefing thresholds and MP expected gain");
  std::string params_path, alpha;
  grief->add_option("params", params_path, "Economic parameters (JSON)")->required();
  grief->add_option("--alpha", alpha, "Evaluate MP's expected gain at this alpha");

  auto* st = app.add_subcommand("selftest", "Oracle-equivalence and tamper suites on tiny models");
  uint64_t seed = 1;
  int models = 20, tampers = 10;
  st->add_option("--seed", seed, "Generator seed");
  st->add_option("--models", models, "Random models after the bundled ones");
  st->add_option("--tampers", tampers, "Tampered witnesses per model");
  st->add_option("--threads", threads, "Checker shards");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*infer) return cmd_infer(model, input, out);
    if (*comp) return cmd_compile(opt, model, stats, layout, dump);
    if (*wit) return cmd_witness(opt, model, input, witness, layout);
    if (*chk) return cmd_check(layout, witness, report, threads, cap);
    if (*com) return cmd_commit(opt, model, input, visibility, out);
    if (*run) return cmd_protocol_run(setup, tlog, out);
    if (*ss) {
      const int64_t n = method == "retrieval" ? protocol::retrieval_sample_size(p_or_eps, delta)
                                              : protocol::hoeffding_sample_size(p_or_eps, delta);
      std::cout << json{{"method", method}, {"parameter", p_or_eps}, {"delta", delta}, {"n", n}}.dump() << "\n";
      return 0;
    }
    if (*cost) {
      const protocol::Money c = protocol::parse_money(per_example);
      const protocol::Money total = protocol::cost_estimate(n_examples, c);
      std::cout << json{{"n", n_examples}, {"c", protocol::money_str(c)}, {"cost", protocol::money_decimal(total, 2)}}.dump()
                << "\n";
      return 0;
    }
    if (*grief) {
      const auto params = protocol::EconParams::from_json(json::parse(slurp(params_path)));
      json doc = protocol::grief_thresholds(params).to_json();
      if (!alpha.empty()) {
        const auto gain = protocol::expected_gain_mp(params, protocol::parse_money(alpha));
        doc["expected_gain_mp"] = {{"alpha", alpha}, {"value", protocol::money_str(gain)},
                                   {"decimal", protocol::money_decimal(gain, 6)}};
      }
      std::cout << doc.dump(2) << "\n";
      return 0;
    }
    if (*st) {
      SelftestOptions so;
      so.seed = seed;
      so.models = models;
      so.tampers_per_model = tampers;
      so.threads = threads;
      so.config = opt.compile_config();
      const SelftestReport r = run_selftest(so);
      std::cout << r.to_json() << "\n";
      return r.ok() ? 0 : 1;
    }
  } catch (const FormatError& e) {
    return error_exit("format", e.what(), 2);
  } catch (const ModelError& e) {
    return error_exit("model", e.what(), 2);
  } catch (const CompileError& e) {
    return error_exit("compile", e.what(), 2);
  } catch (const ProtocolError& e) {
    return error_exit("protocol", e.what(), 2);
  } catch (const Error& e) {
    return error_exit("error", e.what(), 2);
  } catch (const json::exception& e) {
    return error_exit("format", e.what(), 2);
  }
  return 2;
}
