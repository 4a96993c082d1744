// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "zkml/circuit.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

namespace zkml {

namespace {
const U256 kZero{};
}  // namespace

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::advice: return "advice";
    case ColumnKind::fixed: return "fixed";
    case ColumnKind::instance: return "instance";
  }
  return "?";
}

Expr Expr::cell(ColumnId column) {
  Expr e;
  e.nodes_.push_back({Op::cell, column, {}});
  return e;
}

Expr Expr::constant(const U256& value) {
  Expr e;
  e.nodes_.push_back({Op::constant, 0, value});
  return e;
}

Expr Expr::from_nodes(std::vector<Node> nodes) {
  Expr e;
  e.nodes_ = std::move(nodes);
  // Validate postfix well-formedness.
  long depth = 0;
  for (const Node& n : e.nodes_) {
    switch (n.op) {
      case Op::cell:
      case Op::constant: ++depth; break;
      case Op::add:
      case Op::sub:
      case Op::mul: depth -= 1; break;
      case Op::neg:
      case Op::pow: break;
    }
    if (depth < 1) throw CircuitError("malformed expression");
  }
  if (!e.nodes_.empty() && depth != 1) throw CircuitError("malformed expression");
  return e;
}

Expr Expr::binary(const Expr& a, const Expr& b, Op op) {
  if (a.empty() || b.empty()) throw CircuitError("empty operand in expression");
  Expr e;
  e.nodes_.reserve(a.nodes_.size() + b.nodes_.size() + 1);
  e.nodes_ = a.nodes_;
  e.nodes_.insert(e.nodes_.end(), b.nodes_.begin(), b.nodes_.end());
  e.nodes_.push_back({op, 0, {}});
  return e;
}

Expr Expr::operator-() const {
  Expr e = *this;
  e.nodes_.push_back({Op::neg, 0, {}});
  return e;
}

Expr Expr::pow(uint32_t exponent) const {
  if (exponent == 0) throw CircuitError("zero exponent");
  Expr e = *this;
  e.nodes_.push_back({Op::pow, exponent, {}});
  return e;
}

unsigned Expr::degree() const {
  std::vector<unsigned> st;
  for (const Node& n : nodes_) {
    switch (n.op) {
      case Op::cell: st.push_back(1); break;
      case Op::constant: st.push_back(0); break;
      case Op::add:
      case Op::sub: {
        unsigned b = st.back();
        st.pop_back();
        st.back() = std::max(st.back(), b);
        break;
      }
      case Op::mul: {
        unsigned b = st.back();
        st.pop_back();
        st.back() += b;
        break;
      }
      case Op::neg: break;
      case Op::pow: st.back() *= n.arg; break;
    }
  }
  return st.empty() ? 0 : st.back();
}

size_t Expr::stack_depth() const {
  size_t depth = 0, best = 0;
  for (const Node& n : nodes_) {
    if (n.op == Op::cell || n.op == Op::constant) {
      best = std::max(best, ++depth);
    } else if (n.op == Op::add || n.op == Op::sub || n.op == Op::mul) {
      --depth;
    }
  }
  return best;
}

std::vector<ColumnId> Expr::columns() const {
  std::set<ColumnId> ids;
  for (const Node& n : nodes_) {
    if (n.op == Op::cell) ids.insert(n.arg);
  }
  return {ids.begin(), ids.end()};
}

std::string Expr::to_sexpr(const std::vector<Column>& columns) const {
  std::vector<std::string> st;
  for (const Node& n : nodes_) {
    switch (n.op) {
      case Op::cell:
        st.push_back(n.arg < columns.size() ? columns[n.arg].name : "col" + std::to_string(n.arg));
        break;
      case Op::constant: st.push_back(n.value.to_decimal()); break;
      case Op::add:
      case Op::sub:
      case Op::mul: {
        std::string b = std::move(st.back());
        st.pop_back();
        const char* sym = n.op == Op::add ? "+" : n.op == Op::sub ? "-" : "*";
        st.back() = "(" + std::string(sym) + " " + st.back() + " " + b + ")";
        break;
      }
      case Op::neg: st.back() = "(neg " + st.back() + ")"; break;
      case Op::pow: st.back() = "(^ " + st.back() + " " + std::to_string(n.arg) + ")"; break;
    }
  }
  return st.empty() ? "0" : st.back();
}

// ---------------------------------------------------------------------------

void ColumnValues::set(uint32_t row, const U256& v, bool mark) {
  if (row >= values.size()) {
    values.resize(row + 1);
    assigned.resize(row + 1, 0);
  }
  values[row] = v;
  if (mark) assigned[row] = 1;
}

const U256& ColumnValues::get(uint32_t row) const { return row < values.size() ? values[row] : kZero; }

ColumnId CircuitLayout::add_column(std::string name, ColumnKind kind) {
  columns.push_back({std::move(name), kind});
  fixed.emplace_back();
  return static_cast<ColumnId>(columns.size() - 1);
}

uint32_t CircuitLayout::add_gate(std::string name, ColumnId selector, Expr poly) {
  const auto id = static_cast<uint32_t>(gates.size());
  gates.push_back({id, std::move(name), selector, std::move(poly)});
  return id;
}

uint32_t CircuitLayout::add_table(std::string name, uint32_t arity, std::vector<U256> values) {
  const auto id = static_cast<uint32_t>(tables.size());
  tables.push_back({id, std::move(name), arity, std::move(values)});
  return id;
}

uint32_t CircuitLayout::add_lookup(std::string name, uint32_t table, std::vector<ColumnId> inputs, ColumnId selector) {
  const auto id = static_cast<uint32_t>(lookups.size());
  lookups.push_back({id, std::move(name), table, std::move(inputs), selector});
  return id;
}

void CircuitLayout::set_fixed(ColumnId column, uint32_t row, const U256& value) {
  if (column >= columns.size() || columns[column].kind != ColumnKind::fixed) {
    throw CircuitError("set_fixed on a non-fixed column");
  }
  fixed[column].set(row, value, false);
}

void CircuitLayout::validate() const {
  auto check_col = [&](ColumnId c, const std::string& where) {
    if (c >= columns.size()) throw CircuitError(where + " refers to undeclared column " + std::to_string(c));
  };
  auto check_cell = [&](Cell c, const std::string& where) {
    check_col(c.column, where);
    if (c.row >= n_rows) throw CircuitError(where + " refers to row " + std::to_string(c.row) + " outside the grid");
  };
  if (fixed.size() != columns.size()) throw CircuitError("fixed value table does not match the column list");
  for (const GateDef& g : gates) {
    check_col(g.selector, "gate " + g.name);
    if (columns[g.selector].kind != ColumnKind::fixed) throw CircuitError("gate " + g.name + ": selector must be fixed");
    for (ColumnId c : g.poly.columns()) check_col(c, "gate " + g.name);
  }
  for (const LookupArg& l : lookups) {
    if (l.table >= tables.size()) throw CircuitError("lookup " + l.name + " refers to an undeclared table");
    if (l.inputs.size() != tables[l.table].arity) throw CircuitError("lookup " + l.name + ": arity mismatch");
    check_col(l.selector, "lookup " + l.name);
    for (ColumnId c : l.inputs) check_col(c, "lookup " + l.name);
  }
  for (const LookupTable& t : tables) {
    if (t.arity == 0 || t.values.size() % t.arity != 0) throw CircuitError("table " + t.name + ": bad arity");
  }
  for (const CopyConstraint& c : copies) {
    check_cell(c.a, "copy constraint");
    check_cell(c.b, "copy constraint");
  }
  for (const Cell& c : instance_cells) check_cell(c, "instance binding");
  for (size_t i = 0; i < columns.size(); ++i) {
    if (fixed[i].values.size() > n_rows) throw CircuitError("column " + columns[i].name + " longer than the grid");
  }
}

unsigned CircuitLayout::max_degree() const {
  unsigned d = 0;
  for (const GateDef& g : gates) d = std::max(d, g.degree());
  return d;
}

size_t CircuitLayout::count(ColumnKind kind) const {
  return static_cast<size_t>(std::count_if(columns.begin(), columns.end(), [&](const Column& c) { return c.kind == kind; }));
}

// ---------------------------------------------------------------------------

const U256& cell_value(const CircuitLayout& layout, const Assignment& assignment, Cell cell) {
  const Column& col = layout.columns.at(cell.column);
  switch (col.kind) {
    case ColumnKind::fixed:
      return layout.fixed[cell.column].get(cell.row);
    case ColumnKind::instance:
      if (cell.row < assignment.instance.size()) return assignment.instance[cell.row];
      return kZero;
    case ColumnKind::advice: {
      const ColumnValues& cv = assignment.advice.at(cell.column);
      if (!cv.is_assigned(cell.row)) {
        throw CircuitError("unassigned cell " + col.name + "[" + std::to_string(cell.row) + "]");
      }
      return cv.values[cell.row];
    }
  }
  return kZero;
}

U256 eval_expr(const Expr& expr, const CircuitLayout& layout, const Assignment& assignment, uint32_t row) {
  const Field& f = *layout.field;
  std::vector<U256> st;
  st.reserve(expr.stack_depth());
  for (const Expr::Node& n : expr.nodes()) {
    switch (n.op) {
      case Expr::Op::cell: st.push_back(cell_value(layout, assignment, {n.arg, row})); break;
      case Expr::Op::constant: st.push_back(n.value); break;
      case Expr::Op::add: {
        U256 b = st.back();
        st.pop_back();
        st.back() = f.add(st.back(), b);
        break;
      }
      case Expr::Op::sub: {
        U256 b = st.back();
        st.pop_back();
        st.back() = f.sub(st.back(), b);
        break;
      }
      case Expr::Op::mul: {
        U256 b = st.back();
        st.pop_back();
        st.back() = f.mul(st.back(), b);
        break;
      }
      case Expr::Op::neg: st.back() = f.neg(st.back()); break;
      case Expr::Op::pow: st.back() = f.pow(st.back(), U256(n.arg)); break;
    }
  }
  return st.empty() ? U256() : st.back();
}

U256 eval_gate(const GateDef& gate, const CircuitLayout& layout, const Assignment& assignment, uint32_t row) {
  if (row >= layout.n_rows) throw CircuitError("row " + std::to_string(row) + " outside the grid");
  const U256& s = cell_value(layout, assignment, {gate.selector, row});
  if (s.is_zero()) return U256();
  return layout.field->mul(s, eval_expr(gate.poly, layout, assignment, row));
}

std::vector<GateDef> builtin_gates(int n, const MainColumns& cols, const U256& divisor) {
  if (n < 2) throw CircuitError("gate width must be at least 2");
  if (cols.adv.size() != static_cast<size_t>(2 * n + 1)) throw CircuitError("gate width does not match advice columns");
  const auto N = static_cast<size_t>(n);
  auto adv = [&](size_t i) { return Expr::cell(cols.adv[i]); };

  Expr dot = (adv(0) - Expr::cell(cols.z)) * adv(N);
  for (size_t j = 1; j < N; ++j) dot = dot + (adv(j) - Expr::cell(cols.z)) * adv(N + j);
  dot = dot - adv(2 * N);

  Expr add = adv(0);
  for (size_t j = 1; j < N; ++j) add = add + adv(j);
  add = add - adv(2 * N);

  Expr div = adv(0) * Expr::cell(cols.a) - (adv(1) - Expr::cell(cols.off)) * Expr::constant(divisor) - adv(2);

  return {
      GateDef{0, "dot_" + std::to_string(n), cols.q_dot, std::move(dot)},
      GateDef{0, "add_" + std::to_string(n), cols.q_add, std::move(add)},
      GateDef{0, "div", cols.q_div, std::move(div)},
  };
}

std::string debug_dump(const CircuitLayout& layout) {
  using nlohmann::json;
  json cols = json::array();
  for (size_t i = 0; i < layout.columns.size(); ++i) {
    cols.push_back(json{{"id", i}, {"name", layout.columns[i].name}, {"kind", to_string(layout.columns[i].kind)}});
  }
  json gates = json::array();
  for (const GateDef& g : layout.gates) {
    gates.push_back(json{{"id", g.id},
                         {"name", g.name},
                         {"selector", layout.columns[g.selector].name},
                         {"degree", g.degree()},
                         {"poly", g.poly.to_sexpr(layout.columns)}});
  }
  json tables = json::array();
  for (const LookupTable& t : layout.tables) {
    tables.push_back(json{{"id", t.id}, {"name", t.name}, {"arity", t.arity}, {"rows", t.size()}});
  }
  json lookups = json::array();
  for (const LookupArg& l : layout.lookups) {
    json inputs = json::array();
    for (ColumnId c : l.inputs) inputs.push_back(layout.columns[c].name);
    lookups.push_back(json{{"id", l.id},
                           {"name", l.name},
                           {"table", l.table},
                           {"inputs", inputs},
                           {"selector", layout.columns[l.selector].name}});
  }
  json doc{{"modulus", layout.field ? layout.field->modulus().to_decimal() : ""},
           {"n_rows", layout.n_rows},
           {"columns", cols},
           {"gates", gates},
           {"tables", tables},
           {"lookups", lookups},
           {"n_copy_constraints", layout.copies.size()},
           {"n_instance", layout.instance_cells.size()}};
  return doc.dump(2) + "\n";
}

}  // namespace zkml
