// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "zkml/arithmetizer.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <unordered_map>

#include "json.hpp"
#include "util/codec.hpp"

namespace zkml {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration and stats

void CompileConfig::validate() const {
  if (!field) throw CompileError("compile config has no field");
  if (gate_width < 2 || gate_width > 64) throw CompileError("gate width must be in [2, 64]");
  if (max_rows < 4) throw CompileError("max_rows must be at least 4");
  if (lookup_cap < 1 || lookup_cap > (uint64_t{1} << 26)) throw CompileError("lookup cap must be in [1, 2^26]");
  sponge.validate();
}

CompileConfig CompileConfig::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed config: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("config must be a JSON object");
  CompileConfig cfg;
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "modulus") {
        cfg.field = v.is_string() ? Field::from_decimal(v.get<std::string>()) : throw FormatError("modulus must be a decimal string");
      } else if (key == "gate_width") {
        cfg.gate_width = v.get<int>();
      } else if (key == "max_rows") {
        cfg.max_rows = v.get<uint32_t>();
      } else if (key == "lookup_cap") {
        cfg.lookup_cap = v.get<uint64_t>();
      } else if (key == "renormalize_divisors") {
        cfg.renormalize_divisors = v.get<bool>();
      } else if (key == "visibility") {
        cfg.visibility = parse_visibility(v.get<std::string>());
      } else if (key == "sponge_params") {
        cfg.sponge = SpongeParams::from_json(v.dump());
      } else {
        throw FormatError("config: unknown field '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string CompileConfig::to_json() const {
  json doc{{"modulus", field->modulus().to_decimal()},
           {"gate_width", gate_width},
           {"max_rows", max_rows},
           {"lookup_cap", lookup_cap},
           {"renormalize_divisors", renormalize_divisors},
           {"visibility", to_string(visibility)},
           {"sponge_params", json::parse(sponge.to_json())}};
  return doc.dump();
}

std::string CircuitStats::to_json() const {
  json doc{{"n_rows", n_rows},
           {"n_rows_logical", n_rows_logical},
           {"n_columns", n_columns},
           {"n_advice_columns", n_advice_columns},
           {"n_fixed_columns", n_fixed_columns},
           {"n_instance", n_instance},
           {"n_gates", n_gates},
           {"n_lookup_tables", n_lookup_tables},
           {"n_clip_tables", n_clip_tables},
           {"n_lookup_args", n_lookup_args},
           {"n_copy_constraints", n_copy_constraints},
           {"max_degree", max_degree},
           {"n_groups", n_groups},
           {"dot_rows", dot_rows},
           {"add_rows", add_rows},
           {"div_rows", div_rows},
           {"sponge_rows", sponge_rows},
           {"divisor", divisor}};
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Clip tables

namespace {

std::vector<U256> clip_rows(const Field& f, int64_t d_min, int64_t d_max, int32_t z_out) {
  std::vector<U256> values;
  values.reserve(static_cast<size_t>(2 * (d_max - d_min + 1)));
  for (int64_t d = d_min; d <= d_max; ++d) {
    values.push_back(f.from_i64(d - d_min));
    values.push_back(U256(static_cast<uint64_t>(std::clamp<int64_t>(d + z_out, 0, 255))));
  }
  return values;
}

}  // namespace

ClipTable build_clip_table(const Field& field, Bounds bounds, const ScaleFactor& s, int32_t z_out, uint64_t cap) {
  if (bounds.min > bounds.max) throw CompileError("empty accumulator bounds");
  ClipTable out;
  out.d_min = scale_floor(bounds.min, s);
  out.d_max = scale_floor(bounds.max, s);
  const auto size = static_cast<uint64_t>(out.d_max - out.d_min + 1);
  if (size > cap) {
    throw CompileError("bounds exceed lookup cap: table needs " + std::to_string(size) + " rows, cap is " +
                       std::to_string(cap));
  }
  out.offset = -out.d_min;
  out.table.name = "clip";
  out.table.arity = 2;
  out.table.values = clip_rows(field, out.d_min, out.d_max, z_out);
  return out;
}

// ---------------------------------------------------------------------------
// Planning: global divisor, table sharing, field-size checks

namespace {

constexpr ColumnId kNoColumn = ~ColumnId{0};

struct TableSlot {
  int64_t a_prime = 0;
  int32_t z_out = 0;
  int64_t d_min = 0;
  int64_t d_max = 0;
};

struct Plan {
  int64_t divisor = 1;
  bool any_div = false;
  std::vector<int> slot_of_layer;
  std::vector<int64_t> a_prime;
  std::vector<TableSlot> slots;
};

bool has_div(const Layer& layer) { return layer.kind != LayerKind::output; }

// Largest |partial sum| any DOT/ADD cell of the layer can hold.
int64_t magnitude_bound(const ModelGraph& graph, size_t i) {
  const Layer& layer = graph.layers[i];
  if (layer.kind == LayerKind::output) return 0;
  const int64_t z = graph.quant_of(layer.inputs[0]).zero_point;
  const int64_t span = std::max<int64_t>(z, 255 - z);
  switch (layer.kind) {
    case LayerKind::residual_add: return 2 * span;
    case LayerKind::average_pool: return layer.out_quant.scale.b * span;
    default: break;
  }
  const auto& w = *layer.weights;
  int64_t best = 0;
  if (layer.kind == LayerKind::depthwise_conv2d) {
    const int64_t c = w.dims[3];
    for (int64_t ch = 0; ch < c; ++ch) {
      int64_t s = layer.bias ? std::abs(int64_t{(*layer.bias)[static_cast<size_t>(ch)]}) : 0;
      for (size_t t = static_cast<size_t>(ch); t < w.data.size(); t += static_cast<size_t>(c)) s += span * std::abs(int64_t{w.data[t]});
      best = std::max(best, s);
    }
  } else {
    const int64_t units = w.dims.front();
    const int64_t taps = w.elements() / units;
    for (int64_t u = 0; u < units; ++u) {
      int64_t s = layer.bias ? std::abs(int64_t{(*layer.bias)[static_cast<size_t>(u)]}) : 0;
      for (int64_t t = 0; t < taps; ++t) s += span * std::abs(int64_t{w.data[static_cast<size_t>(u * taps + t)]});
      best = std::max(best, s);
    }
  }
  return best;
}

Plan make_plan(const ModelGraph& graph, const CompileConfig& cfg) {
  const Field& f = *cfg.field;
  Plan plan;
  plan.slot_of_layer.assign(graph.layers.size(), -1);
  plan.a_prime.assign(graph.layers.size(), 0);

  std::vector<int64_t> divisors;
  for (const Layer& layer : graph.layers) {
    if (has_div(layer)) divisors.push_back(layer.out_quant.scale.b);
  }
  plan.any_div = !divisors.empty();
  if (plan.any_div) {
    if (cfg.renormalize_divisors) {
      int64_t b = 1;
      for (int64_t d : divisors) {
        b = std::lcm(b, d);
        if (static_cast<uint64_t>(b) > cfg.lookup_cap) {
          throw CompileError("common divisor " + std::to_string(b) + " exceeds the lookup cap");
        }
      }
      plan.divisor = b;
    } else {
      for (int64_t d : divisors) {
        if (d != divisors.front()) {
          throw CompileError("mixed divisors b=" + std::to_string(divisors.front()) + " and b=" + std::to_string(d) +
                             " (enable renormalize_divisors)");
        }
      }
      plan.divisor = divisors.front();
      if (static_cast<uint64_t>(plan.divisor) > cfg.lookup_cap) {
        throw CompileError("divisor " + std::to_string(plan.divisor) + " exceeds the lookup cap");
      }
    }
  }

  // Every value stored in a cell must embed without wrap-around: require
  // |x| < p/4 for the largest partial sum times the DIV-row multipliers.
  U256 quarter = f.half().shr1();
  const std::vector<Bounds> bounds = accumulator_bounds(graph);
  for (size_t i = 0; i < graph.layers.size(); ++i) {
    const Layer& layer = graph.layers[i];
    if (!has_div(layer)) continue;
    const ScaleFactor& s = layer.out_quant.scale;
    const int64_t a_prime = s.a * (plan.divisor / s.b);
    plan.a_prime[i] = a_prime;
    const __int128 mag = static_cast<__int128>(magnitude_bound(graph, i) + 1) * (a_prime + plan.divisor);
    const auto umag = static_cast<unsigned __int128>(mag);
    if (U256(static_cast<uint64_t>(umag), static_cast<uint64_t>(umag >> 64), 0, 0) >= quarter) {
      throw CompileError("modulus too small for layer " + std::to_string(i) + " (values reach " +
                         std::to_string(static_cast<double>(mag)) + ")");
    }

    const int64_t d_min = scale_floor(bounds[i].min, s);
    const int64_t d_max = scale_floor(bounds[i].max, s);
    if (static_cast<uint64_t>(d_max - d_min + 1) > cfg.lookup_cap) {
      throw CompileError("bounds exceed lookup cap in layer " + std::to_string(i) + ": table needs " +
                         std::to_string(d_max - d_min + 1) + " rows, cap is " + std::to_string(cfg.lookup_cap));
    }
    int found = -1;
    for (size_t k = 0; k < plan.slots.size(); ++k) {
      const TableSlot& t = plan.slots[k];
      if (t.a_prime != a_prime || t.z_out != layer.out_quant.zero_point) continue;
      const int64_t lo = std::min(t.d_min, d_min), hi = std::max(t.d_max, d_max);
      if (static_cast<uint64_t>(hi - lo + 1) <= cfg.lookup_cap) {
        found = static_cast<int>(k);
        break;
      }
    }
    if (found < 0) {
      plan.slots.push_back({a_prime, layer.out_quant.zero_point, d_min, d_max});
      found = static_cast<int>(plan.slots.size() - 1);
    } else {
      TableSlot& t = plan.slots[static_cast<size_t>(found)];
      t.d_min = std::min(t.d_min, d_min);
      t.d_max = std::max(t.d_max, d_max);
    }
    plan.slot_of_layer[i] = found;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Synthesis. The same code runs for the layout pass (record constraints and
// fixed values) and the witness pass (fill advice cells); cell allocation is
// independent of the data so both passes agree on every coordinate.

struct Wire {
  Cell cell;
  int64_t value = 0;
};

struct MainGroup {
  MainColumns cols;
  std::vector<ColumnId> clip_selector;
  uint32_t used = 0;
};

struct SpongeGroup {
  std::vector<ColumnId> in, out, m, rc;
  ColumnId q_full = 0, q_partial = 0, q_absorb = 0;
  uint32_t used = 0;
};

struct Pool {
  std::vector<ColumnId> cols;
  uint32_t used = 0;
};

class Synth {
 public:
  Synth(const ModelGraph& graph, const CompileConfig& cfg, const Plan& plan, CircuitLayout& layout, Assignment* witness,
        const InferenceTrace& trace, const QuantTensor& input, const Sponge* sponge, uint32_t range_table,
        const std::vector<uint32_t>& clip_tables)
      : graph_(graph),
        cfg_(cfg),
        plan_(plan),
        L_(layout),
        A_(witness),
        trace_(trace),
        input_(input),
        sponge_(sponge),
        f_(*cfg.field),
        N_(static_cast<size_t>(cfg.gate_width)),
        record_(witness == nullptr),
        range_table_(range_table),
        clip_tables_(clip_tables) {}

  void run();

  CircuitStats stats;
  std::vector<LayerCells> layer_cells;
  std::vector<Cell> input_cells;
  std::vector<Cell> instance_cells;
  uint32_t logical_rows = 0;

 private:
  // --- primitive helpers
  void assign(Cell c, const U256& v) {
    if (A_) A_->set(c, v);
  }
  void assign_i(Cell c, int64_t v) {
    if (A_) A_->set(c, f_.from_i64(v));
  }
  void copy(Cell a, Cell b) {
    if (record_) L_.copy(a, b);
  }
  void fix(ColumnId col, uint32_t row, const U256& v) {
    if (record_) L_.set_fixed(col, row, v);
  }
  ColumnId column(const std::string& name, ColumnKind kind) {
    const ColumnId id = L_.add_column(name, kind);
    if (A_ && A_->advice.size() < L_.columns.size()) A_->advice.resize(L_.columns.size());
    return id;
  }

  Cell constant(const U256& v);
  Cell constant_i(int64_t v) { return constant(f_.from_i64(v)); }
  Cell io_cell();

  std::pair<MainGroup*, uint32_t> main_row();
  void open_main_group();
  ColumnId clip_selector(MainGroup& g, int slot);
  std::pair<SpongeGroup*, uint32_t> sponge_row();
  void open_sponge_group();

  Wire dot(const std::vector<Wire>& xs, const std::vector<Wire>& ws, int32_t z, const std::optional<Wire>& bias);
  Wire add_tree(std::vector<Wire> items);
  Wire div(const Wire& acc, size_t layer);
  std::pair<std::vector<Cell>, Cell> hash_rows(size_t n, const std::vector<U256>* values);

  void linear_layer(size_t i, const std::vector<Wire>& src, size_t weight_base, LayerCells& out);
  void finish_layer(size_t i, std::vector<Wire>& accs, LayerCells& out, std::vector<Wire>& acts);

  const ModelGraph& graph_;
  const CompileConfig& cfg_;
  const Plan& plan_;
  CircuitLayout& L_;
  Assignment* A_;
  const InferenceTrace& trace_;
  const QuantTensor& input_;
  const Sponge* sponge_;
  const Field& f_;
  const size_t N_;
  const bool record_;
  const uint32_t range_table_;
  const std::vector<uint32_t>& clip_tables_;

  std::unordered_map<U256, Cell, U256Hash> const_map_;
  Pool const_pool_, io_pool_;
  std::vector<MainGroup> main_groups_;
  std::vector<SpongeGroup> sponge_groups_;
  std::vector<Cell> weight_cells_;
  std::optional<Cell> input_digest_, weight_digest_;
  std::vector<Cell> public_inputs_;
};

Cell Synth::constant(const U256& v) {
  if (auto it = const_map_.find(v); it != const_map_.end()) return it->second;
  if (const_pool_.cols.empty() || const_pool_.used == cfg_.max_rows) {
    const_pool_.cols.push_back(column("const_" + std::to_string(const_pool_.cols.size()), ColumnKind::fixed));
    const_pool_.used = 0;
  }
  Cell c{const_pool_.cols.back(), const_pool_.used++};
  fix(c.column, c.row, v);
  const_map_.emplace(v, c);
  return c;
}

Cell Synth::io_cell() {
  if (io_pool_.cols.empty() || io_pool_.used == cfg_.max_rows) {
    io_pool_.cols.push_back(column("io_" + std::to_string(io_pool_.cols.size()), ColumnKind::advice));
    io_pool_.used = 0;
  }
  return {io_pool_.cols.back(), io_pool_.used++};
}

void Synth::open_main_group() {
  const std::string p = "g" + std::to_string(main_groups_.size()) + ".";
  MainGroup g;
  for (size_t j = 0; j < 2 * N_ + 1; ++j) g.cols.adv.push_back(column(p + "adv_" + std::to_string(j), ColumnKind::advice));
  g.cols.q_dot = column(p + "q_dot", ColumnKind::fixed);
  g.cols.q_add = column(p + "q_add", ColumnKind::fixed);
  g.cols.q_div = column(p + "q_div", ColumnKind::fixed);
  g.cols.z = column(p + "z", ColumnKind::fixed);
  g.cols.a = column(p + "a", ColumnKind::fixed);
  g.cols.off = column(p + "off", ColumnKind::fixed);
  g.clip_selector.assign(plan_.slots.size(), kNoColumn);
  if (record_) {
    for (GateDef& gate : builtin_gates(cfg_.gate_width, g.cols, f_.from_i64(plan_.divisor))) {
      L_.add_gate(p + gate.name, gate.selector, std::move(gate.poly));
    }
    L_.add_lookup(p + "range", range_table_, {g.cols.adv[2]}, g.cols.q_div);
  }
  main_groups_.push_back(std::move(g));
  ++stats.n_groups;
}

ColumnId Synth::clip_selector(MainGroup& g, int slot) {
  ColumnId& sel = g.clip_selector[static_cast<size_t>(slot)];
  if (sel == kNoColumn) {
    const std::string p = "g" + std::to_string(&g - main_groups_.data()) + ".";
    sel = column(p + "q_clip_" + std::to_string(slot), ColumnKind::fixed);
    if (record_) {
      L_.add_lookup(p + "clip_" + std::to_string(slot), clip_tables_[static_cast<size_t>(slot)],
                    {g.cols.adv[1], g.cols.adv[3]}, sel);
    }
  }
  return sel;
}

std::pair<MainGroup*, uint32_t> Synth::main_row() {
  if (main_groups_.empty() || main_groups_.back().used == cfg_.max_rows) open_main_group();
  MainGroup& g = main_groups_.back();
  return {&g, g.used++};
}

void Synth::open_sponge_group() {
  const std::string p = "s" + std::to_string(sponge_groups_.size()) + ".";
  const auto t = static_cast<size_t>(cfg_.sponge.t);
  SpongeGroup g;
  for (size_t j = 0; j < t; ++j) g.in.push_back(column(p + "in_" + std::to_string(j), ColumnKind::advice));
  for (size_t j = 0; j < t; ++j) g.out.push_back(column(p + "out_" + std::to_string(j), ColumnKind::advice));
  for (size_t j = 0; j + 1 < t; ++j) g.m.push_back(column(p + "m_" + std::to_string(j), ColumnKind::advice));
  g.q_full = column(p + "q_full", ColumnKind::fixed);
  g.q_partial = column(p + "q_partial", ColumnKind::fixed);
  g.q_absorb = column(p + "q_absorb", ColumnKind::fixed);
  for (size_t j = 0; j < t; ++j) g.rc.push_back(column(p + "rc_" + std::to_string(j), ColumnKind::fixed));
  if (record_) {
    const auto& M = sponge_->mds();
    auto lane = [&](size_t j) { return Expr::cell(g.in[j]) + Expr::cell(g.rc[j]); };
    for (size_t i = 0; i < t; ++i) {
      Expr sum = Expr::constant(M[i][0]) * lane(0).pow(5);
      for (size_t j = 1; j < t; ++j) sum = sum + Expr::constant(M[i][j]) * lane(j).pow(5);
      L_.add_gate(p + "full_" + std::to_string(i), g.q_full, Expr::cell(g.out[i]) - sum);
    }
    for (size_t i = 0; i < t; ++i) {
      Expr sum = Expr::constant(M[i][0]) * lane(0).pow(5);
      for (size_t j = 1; j < t; ++j) sum = sum + Expr::constant(M[i][j]) * lane(j);
      L_.add_gate(p + "partial_" + std::to_string(i), g.q_partial, Expr::cell(g.out[i]) - sum);
    }
    L_.add_gate(p + "absorb_0", g.q_absorb, Expr::cell(g.out[0]) - Expr::cell(g.in[0]));
    for (size_t i = 1; i < t; ++i) {
      L_.add_gate(p + "absorb_" + std::to_string(i), g.q_absorb,
                  Expr::cell(g.out[i]) - Expr::cell(g.in[i]) - Expr::cell(g.m[i - 1]));
    }
  }
  sponge_groups_.push_back(std::move(g));
  ++stats.n_groups;
}

std::pair<SpongeGroup*, uint32_t> Synth::sponge_row() {
  if (sponge_groups_.empty() || sponge_groups_.back().used == cfg_.max_rows) open_sponge_group();
  SpongeGroup& g = sponge_groups_.back();
  ++stats.sponge_rows;
  return {&g, g.used++};
}

std::pair<std::vector<Cell>, Cell> Synth::hash_rows(size_t n, const std::vector<U256>* values) {
  const auto t = static_cast<size_t>(cfg_.sponge.t);
  const size_t rate = t - 1;
  const U256 one(1);
  std::vector<Cell> msg;
  msg.reserve(n);

  std::vector<Cell> state_cells(t);
  std::vector<U256> state(t);
  state[0] = f_.reduce(U256(n));
  for (size_t j = 0; j < t; ++j) state_cells[j] = constant(state[j]);

  for (size_t off = 0; off < n; off += rate) {
    {
      auto [g, row] = sponge_row();
      fix(g->q_absorb, row, one);
      for (size_t j = 0; j < t; ++j) {
        const Cell in{g->in[j], row};
        copy(state_cells[j], in);
        if (A_) assign(in, state[j]);
      }
      for (size_t k = 0; k < rate; ++k) {
        const Cell m{g->m[k], row};
        if (off + k < n) {
          msg.push_back(m);
          if (A_) {
            assign(m, (*values)[off + k]);
            state[1 + k] = f_.add(state[1 + k], (*values)[off + k]);
          }
        } else {
          copy(constant(U256()), m);
          if (A_) assign(m, U256());
        }
      }
      for (size_t j = 0; j < t; ++j) {
        state_cells[j] = {g->out[j], row};
        if (A_) assign(state_cells[j], state[j]);
      }
    }
    for (int r = 0; r < cfg_.sponge.rounds(); ++r) {
      auto [g, row] = sponge_row();
      fix(cfg_.sponge.is_full_round(r) ? g->q_full : g->q_partial, row, one);
      const auto& rc = sponge_->round_constants()[static_cast<size_t>(r)];
      for (size_t j = 0; j < t; ++j) {
        fix(g->rc[j], row, rc[j]);
        const Cell in{g->in[j], row};
        copy(state_cells[j], in);
        if (A_) assign(in, state[j]);
      }
      if (A_) sponge_->round(state, r);
      for (size_t j = 0; j < t; ++j) {
        state_cells[j] = {g->out[j], row};
        if (A_) assign(state_cells[j], state[j]);
      }
    }
  }
  return {std::move(msg), state_cells[1]};
}

Wire Synth::dot(const std::vector<Wire>& xs, const std::vector<Wire>& ws, int32_t z, const std::optional<Wire>& bias) {
  const Cell zero = constant(U256());
  const U256 one(1);
  const U256 zf = f_.from_i64(z);
  std::vector<Wire> partials;
  const size_t chunks = std::max<size_t>(1, (xs.size() + N_ - 1) / N_);
  for (size_t c = 0; c < chunks; ++c) {
    auto [g, row] = main_row();
    ++stats.dot_rows;
    fix(g->cols.q_dot, row, one);
    fix(g->cols.z, row, zf);
    int64_t sum = 0;
    for (size_t j = 0; j < N_; ++j) {
      const size_t idx = c * N_ + j;
      const Cell xc{g->cols.adv[j], row};
      const Cell wc{g->cols.adv[N_ + j], row};
      if (idx < xs.size()) {
        copy(xs[idx].cell, xc);
        copy(ws[idx].cell, wc);
        if (A_) {
          assign_i(xc, xs[idx].value);
          assign_i(wc, ws[idx].value);
        }
        sum += (xs[idx].value - z) * ws[idx].value;
      } else {
        copy(zero, xc);
        copy(zero, wc);
        if (A_) {
          assign(xc, U256());
          assign(wc, U256());
        }
      }
    }
    const Cell out{g->cols.adv[2 * N_], row};
    assign_i(out, sum);
    partials.push_back({out, sum});
  }
  if (bias) partials.push_back(*bias);
  return add_tree(std::move(partials));
}

Wire Synth::add_tree(std::vector<Wire> items) {
  const Cell zero = constant(U256());
  const U256 one(1);
  while (items.size() > 1) {
    std::vector<Wire> next;
    for (size_t start = 0; start < items.size(); start += N_) {
      const size_t end = std::min(items.size(), start + N_);
      if (end - start == 1) {
        next.push_back(items[start]);
        continue;
      }
      auto [g, row] = main_row();
      ++stats.add_rows;
      fix(g->cols.q_add, row, one);
      int64_t sum = 0;
      for (size_t j = 0; j < N_; ++j) {
        const Cell in{g->cols.adv[j], row};
        if (start + j < end) {
          copy(items[start + j].cell, in);
          assign_i(in, items[start + j].value);
          sum += items[start + j].value;
        } else {
          copy(zero, in);
          if (A_) assign(in, U256());
        }
      }
      const Cell out{g->cols.adv[2 * N_], row};
      assign_i(out, sum);
      next.push_back({out, sum});
    }
    items = std::move(next);
  }
  return items.front();
}

Wire Synth::div(const Wire& acc, size_t layer) {
  const int slot = plan_.slot_of_layer[layer];
  const TableSlot& ts = plan_.slots[static_cast<size_t>(slot)];
  const int64_t a_prime = plan_.a_prime[layer];
  const int64_t b = plan_.divisor;
  auto [g, row] = main_row();
  ++stats.div_rows;
  fix(g->cols.q_div, row, U256(1));
  fix(g->cols.a, row, f_.from_i64(a_prime));
  fix(g->cols.off, row, f_.from_i64(-ts.d_min));
  fix(clip_selector(*g, slot), row, U256(1));

  const Cell c{g->cols.adv[0], row};
  copy(acc.cell, c);
  const __int128 num = static_cast<__int128>(acc.value) * a_prime;
  __int128 d = num / b;
  if (num % b != 0 && num < 0) --d;
  const auto r = static_cast<int64_t>(num - d * b);
  const auto act = static_cast<int64_t>(std::clamp<__int128>(d + ts.z_out, 0, 255));
  if (A_) {
    assign_i(c, acc.value);
    assign_i({g->cols.adv[1], row}, static_cast<int64_t>(d) - ts.d_min);
    assign_i({g->cols.adv[2], row}, r);
    assign_i({g->cols.adv[3], row}, act);
  }
  return {{g->cols.adv[3], row}, act};
}

void Synth::finish_layer(size_t i, std::vector<Wire>& accs, LayerCells& out, std::vector<Wire>& acts) {
  const LayerTrace& lt = trace_.layers[i];
  acts.clear();
  acts.reserve(accs.size());
  out.acc.reserve(accs.size());
  out.act.reserve(accs.size());
  for (size_t e = 0; e < accs.size(); ++e) {
    if (A_ && accs[e].value != lt.acc[e]) throw CompileError("internal: circuit accumulator disagrees with interpreter");
    Wire act = div(accs[e], i);
    if (A_ && act.value != lt.act[e]) throw CompileError("internal: circuit activation disagrees with interpreter");
    out.acc.push_back(accs[e].cell);
    out.act.push_back(act.cell);
    acts.push_back(act);
  }
}

void Synth::run() {
  const Field& f = f_;
  // Graph input.
  std::vector<Wire> input_wires(input_.data.size());
  if (input_hidden(cfg_.visibility)) {
    std::vector<U256> values;
    if (A_) values = input_elements(f, input_);
    auto [msg, digest] = hash_rows(input_.data.size(), A_ ? &values : nullptr);
    for (size_t e = 0; e < msg.size(); ++e) input_wires[e] = {msg[e], input_.data[e]};
    input_digest_ = digest;
  } else {
    for (size_t e = 0; e < input_wires.size(); ++e) {
      const Cell c = io_cell();
      assign_i(c, input_.data[e]);
      input_wires[e] = {c, input_.data[e]};
      public_inputs_.push_back(c);
    }
  }
  for (const Wire& w : input_wires) input_cells.push_back(w.cell);

  // Hidden weights are absorbed once; every use copies from the message cell.
  size_t n_weights = 0;
  for (const Layer& layer : graph_.layers) {
    if (layer.is_linear()) n_weights += layer.weights->data.size() + (layer.bias ? layer.bias->size() : 0);
  }
  const bool hide_weights = weights_hidden(cfg_.visibility) && n_weights > 0;
  if (hide_weights) {
    std::vector<U256> values;
    if (A_) values = weight_elements(f, graph_);
    auto [msg, digest] = hash_rows(n_weights, A_ ? &values : nullptr);
    weight_cells_ = std::move(msg);
    weight_digest_ = digest;
  }
  auto weight_wire = [&](size_t index, int64_t value) -> Wire {
    return {hide_weights ? weight_cells_[index] : constant_i(value), value};
  };

  std::vector<std::vector<Wire>> acts(graph_.layers.size());
  layer_cells.assign(graph_.layers.size(), {});
  auto source = [&](int ref) -> const std::vector<Wire>& {
    return ref == kGraphInput ? input_wires : acts[static_cast<size_t>(ref)];
  };
  std::vector<std::vector<Wire>> acc_wires(graph_.layers.size());
  const Wire one_wire{constant(U256(1)), 1};

  size_t weight_base = 0;
  std::vector<Wire> xs, ws;
  for (size_t i = 0; i < graph_.layers.size(); ++i) {
    const Layer& layer = graph_.layers[i];
    const int src_ref = layer.inputs.at(0);
    const std::vector<Wire>& src = source(src_ref);
    const Shape& in = graph_.shape_of(src_ref);
    const Shape& out = graph_.shapes[i];
    const int32_t z = graph_.quant_of(src_ref).zero_point;
    std::vector<Wire>& accs = acc_wires[i];
    accs.reserve(static_cast<size_t>(out.elements()));

    switch (layer.kind) {
      case LayerKind::conv2d:
      case LayerKind::depthwise_conv2d: {
        const auto& w = layer.weights->data;
        const size_t bias_base = weight_base + w.size();
        const WindowGeometry g = window_geometry(graph_, static_cast<int>(i));
        const bool depthwise = layer.kind == LayerKind::depthwise_conv2d;
        for (int64_t n = 0; n < out.n; ++n) {
          for (int64_t oy = 0; oy < out.h; ++oy) {
            for (int64_t ox = 0; ox < out.w; ++ox) {
              for (int64_t k = 0; k < out.c; ++k) {
                xs.clear();
                ws.clear();
                for (int64_t ky = 0; ky < g.kh; ++ky) {
                  const int64_t iy = oy * g.stride + ky - g.pad_top;
                  if (iy < 0 || iy >= in.h) continue;
                  for (int64_t kx = 0; kx < g.kw; ++kx) {
                    const int64_t ix = ox * g.stride + kx - g.pad_left;
                    if (ix < 0 || ix >= in.w) continue;
                    const int64_t xbase = ((n * in.h + iy) * in.w + ix) * in.c;
                    if (depthwise) {
                      const auto wi = static_cast<size_t>((ky * g.kw + kx) * in.c + k);
                      xs.push_back(src[static_cast<size_t>(xbase + k)]);
                      ws.push_back(weight_wire(weight_base + wi, w[wi]));
                    } else {
                      for (int64_t ci = 0; ci < in.c; ++ci) {
                        const auto wi = static_cast<size_t>(((k * g.kh + ky) * g.kw + kx) * in.c + ci);
                        xs.push_back(src[static_cast<size_t>(xbase + ci)]);
                        ws.push_back(weight_wire(weight_base + wi, w[wi]));
                      }
                    }
                  }
                }
                std::optional<Wire> bias;
                if (layer.bias) bias = weight_wire(bias_base + static_cast<size_t>(k), (*layer.bias)[static_cast<size_t>(k)]);
                accs.push_back(dot(xs, ws, z, bias));
              }
            }
          }
        }
        break;
      }
      case LayerKind::fully_connected: {
        const auto& w = layer.weights->data;
        const size_t bias_base = weight_base + w.size();
        const int64_t k = in.per_sample();
        for (int64_t n = 0; n < in.n; ++n) {
          for (int64_t u = 0; u < out.c; ++u) {
            xs.clear();
            ws.clear();
            for (int64_t j = 0; j < k; ++j) {
              const auto wi = static_cast<size_t>(u * k + j);
              xs.push_back(src[static_cast<size_t>(n * k + j)]);
              ws.push_back(weight_wire(weight_base + wi, w[wi]));
            }
            std::optional<Wire> bias;
            if (layer.bias) bias = weight_wire(bias_base + static_cast<size_t>(u), (*layer.bias)[static_cast<size_t>(u)]);
            accs.push_back(dot(xs, ws, z, bias));
          }
        }
        break;
      }
      case LayerKind::residual_add: {
        const std::vector<Wire>& src2 = source(layer.inputs.at(1));
        for (size_t e = 0; e < src.size(); ++e) {
          xs = {src[e], src2[e]};
          ws = {one_wire, one_wire};
          accs.push_back(dot(xs, ws, z, std::nullopt));
        }
        break;
      }
      case LayerKind::average_pool: {
        const WindowGeometry g = window_geometry(graph_, static_cast<int>(i));
        for (int64_t n = 0; n < out.n; ++n) {
          for (int64_t oy = 0; oy < out.h; ++oy) {
            for (int64_t ox = 0; ox < out.w; ++ox) {
              for (int64_t c = 0; c < out.c; ++c) {
                xs.clear();
                ws.clear();
                for (int64_t ky = 0; ky < g.kh; ++ky) {
                  for (int64_t kx = 0; kx < g.kw; ++kx) {
                    const int64_t iy = oy * g.stride + ky, ix = ox * g.stride + kx;
                    xs.push_back(src[static_cast<size_t>(((n * in.h + iy) * in.w + ix) * in.c + c)]);
                    ws.push_back(one_wire);
                  }
                }
                accs.push_back(dot(xs, ws, z, std::nullopt));
              }
            }
          }
        }
        break;
      }
      case LayerKind::output: {
        const std::vector<Wire>& logits = src_ref == kGraphInput ? input_wires : acc_wires[static_cast<size_t>(src_ref)];
        for (const Wire& w : logits) {
          layer_cells[i].acc.push_back(w.cell);
          instance_cells.push_back(w.cell);
        }
        break;
      }
    }
    if (layer.is_linear()) weight_base += layer.weights->data.size() + (layer.bias ? layer.bias->size() : 0);
    if (layer.kind != LayerKind::output) finish_layer(i, accs, layer_cells[i], acts[i]);
  }

  if (input_digest_) instance_cells.push_back(*input_digest_);
  if (weight_digest_) instance_cells.push_back(*weight_digest_);
  instance_cells.insert(instance_cells.end(), public_inputs_.begin(), public_inputs_.end());
  if (!instance_cells.empty()) column("instance", ColumnKind::instance);

  uint32_t rows = std::max(const_pool_.used, io_pool_.used);
  for (const MainGroup& g : main_groups_) rows = std::max(rows, g.used);
  for (const SpongeGroup& g : sponge_groups_) rows = std::max(rows, g.used);
  if (const_pool_.cols.size() > 1 || io_pool_.cols.size() > 1) rows = cfg_.max_rows;
  logical_rows = rows;
}

uint64_t next_pow2(uint64_t v) {
  if (v == 0) return 0;
  uint64_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

QuantTensor zero_input(const ModelGraph& graph) {
  QuantTensor t;
  t.shape = graph.input_shape;
  t.quant = graph.input_quant;
  t.data.assign(static_cast<size_t>(graph.input_shape.elements()), 0);
  return t;
}

std::string model_digest(const ModelGraph& graph) { return util::sha256_hex(save_model(graph)); }

}  // namespace

// ---------------------------------------------------------------------------

CompiledCircuit compile(const ModelGraph& graph, const CompileConfig& cfg) {
  cfg.validate();
  const Plan plan = make_plan(graph, cfg);

  CompiledCircuit out;
  out.config = cfg;
  out.model_digest = model_digest(graph);
  CircuitLayout& L = out.layout;
  L.field = cfg.field;

  std::optional<Sponge> sponge;
  if (input_hidden(cfg.visibility) || weights_hidden(cfg.visibility)) sponge.emplace(cfg.field, cfg.sponge);

  uint32_t range_table = 0;
  std::vector<uint32_t> clip_tables;
  if (plan.any_div) {
    std::vector<U256> range;
    range.reserve(static_cast<size_t>(plan.divisor));
    for (int64_t r = 0; r < plan.divisor; ++r) range.push_back(U256(static_cast<uint64_t>(r)));
    range_table = L.add_table("range_" + std::to_string(plan.divisor), 1, std::move(range));
    for (size_t s = 0; s < plan.slots.size(); ++s) {
      const TableSlot& t = plan.slots[s];
      clip_tables.push_back(L.add_table("clip_" + std::to_string(s) + "_a" + std::to_string(t.a_prime) + "_z" +
                                            std::to_string(t.z_out),
                                        2, clip_rows(*cfg.field, t.d_min, t.d_max, t.z_out)));
    }
  }

  const QuantTensor input = zero_input(graph);
  const InferenceTrace trace = run_inference(graph, input);
  Synth synth(graph, cfg, plan, L, nullptr, trace, input, sponge ? &*sponge : nullptr, range_table, clip_tables);
  synth.run();

  L.instance_cells = synth.instance_cells;
  L.n_rows = next_pow2(synth.logical_rows);
  L.metadata = json{{"config", json::parse(cfg.to_json())}, {"model_sha256", out.model_digest}}.dump();
  L.validate();

  out.layer_cells = std::move(synth.layer_cells);
  out.input_cells = std::move(synth.input_cells);
  CircuitStats& st = out.stats;
  st = synth.stats;
  st.n_rows = L.n_rows;
  st.n_rows_logical = synth.logical_rows;
  st.n_columns = L.columns.size();
  st.n_advice_columns = L.count(ColumnKind::advice);
  st.n_fixed_columns = L.count(ColumnKind::fixed);
  st.n_instance = L.instance_cells.size();
  st.n_gates = L.gates.size();
  st.n_lookup_tables = L.tables.size();
  st.n_clip_tables = plan.slots.size();
  st.n_lookup_args = L.lookups.size();
  st.n_copy_constraints = L.copies.size();
  st.max_degree = L.max_degree();
  st.divisor = plan.any_div ? static_cast<uint64_t>(plan.divisor) : 0;
  return out;
}

Assignment assign_witness(const CompiledCircuit& circuit, const ModelGraph& graph, const QuantTensor& input) {
  const CompileConfig& cfg = circuit.config;
  if (!circuit.model_digest.empty() && circuit.model_digest != model_digest(graph)) {
    throw CompileError("layout was compiled from a different model");
  }
  const InferenceTrace trace = run_inference(graph, input);
  const Plan plan = make_plan(graph, cfg);
  std::optional<Sponge> sponge;
  if (input_hidden(cfg.visibility) || weights_hidden(cfg.visibility)) sponge.emplace(cfg.field, cfg.sponge);

  CircuitLayout scratch;
  scratch.field = cfg.field;
  Assignment witness;
  const std::vector<uint32_t> no_tables(plan.slots.size(), 0);
  Synth synth(graph, cfg, plan, scratch, &witness, trace, input, sponge ? &*sponge : nullptr, 0, no_tables);
  synth.run();

  if (scratch.columns.size() != circuit.layout.columns.size() || synth.logical_rows != circuit.stats.n_rows_logical ||
      synth.instance_cells.size() != circuit.layout.instance_cells.size()) {
    throw CompileError("layout does not match the model and configuration");
  }
  witness.advice.resize(circuit.layout.columns.size());
  witness.instance.reserve(synth.instance_cells.size());
  for (const Cell& c : synth.instance_cells) witness.instance.push_back(witness.advice[c.column].get(c.row));
  return witness;
}

std::vector<std::vector<uint8_t>> extract_activations(const CompiledCircuit& circuit, const Assignment& witness) {
  std::vector<std::vector<uint8_t>> out;
  out.reserve(circuit.layer_cells.size());
  for (const LayerCells& lc : circuit.layer_cells) {
    std::vector<uint8_t> acts;
    acts.reserve(lc.act.size());
    for (const Cell& c : lc.act) {
      const U256& v = cell_value(circuit.layout, witness, c);
      acts.push_back(static_cast<uint8_t>(v.limb[0]));
    }
    out.push_back(std::move(acts));
  }
  return out;
}

}  // namespace zkml
