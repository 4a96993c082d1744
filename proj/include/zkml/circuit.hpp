// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "zkml/field.hpp"

namespace zkml {

enum class ColumnKind : uint8_t { advice, fixed, instance };
std::string_view to_string(ColumnKind kind);

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::advice;
};

using ColumnId = uint32_t;

struct Cell {
  ColumnId column = 0;
  uint32_t row = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Polynomial over same-row cells, stored in postfix order.
class Expr {
 public:
  enum class Op : uint8_t { cell, constant, add, sub, mul, neg, pow };
  struct Node {
    Op op;
    uint32_t arg = 0;  // column id for cell, exponent for pow
    U256 value;        // constant
  };

  Expr() = default;
  static Expr cell(ColumnId column);
  static Expr constant(const U256& value);

  friend Expr operator+(const Expr& a, const Expr& b) { return binary(a, b, Op::add); }
  friend Expr operator-(const Expr& a, const Expr& b) { return binary(a, b, Op::sub); }
  friend Expr operator*(const Expr& a, const Expr& b) { return binary(a, b, Op::mul); }
  Expr operator-() const;
  Expr pow(uint32_t exponent) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  bool empty() const { return nodes_.empty(); }
  /// Total degree in the cell variables.
  unsigned degree() const;
  /// Maximum evaluation stack depth.
  size_t stack_depth() const;
  std::vector<ColumnId> columns() const;
  /// s-expression with column names, e.g. "(- (* adv_0 adv_1) adv_2)".
  std::string to_sexpr(const std::vector<Column>& columns) const;

  static Expr from_nodes(std::vector<Node> nodes);

 private:
  static Expr binary(const Expr& a, const Expr& b, Op op);
  std::vector<Node> nodes_;
};

struct GateDef {
  uint32_t id = 0;
  std::string name;
  ColumnId selector = 0;
  Expr poly;

  /// Degree of selector * poly.
  unsigned degree() const { return poly.degree() + 1; }
};

struct LookupTable {
  uint32_t id = 0;
  std::string name;
  uint32_t arity = 1;
  /// Row-major tuples.
  std::vector<U256> values;

  size_t size() const { return arity == 0 ? 0 : values.size() / arity; }
};

struct LookupArg {
  uint32_t id = 0;
  std::string name;
  uint32_t table = 0;
  std::vector<ColumnId> inputs;
  ColumnId selector = 0;
};

struct CopyConstraint {
  Cell a;
  Cell b;
};

/// Column storage with an implicit zero tail: rows past the stored length
/// read as zero and, for advice columns, as unassigned.
struct ColumnValues {
  std::vector<U256> values;
  std::vector<uint8_t> assigned;

  void set(uint32_t row, const U256& v, bool mark = true);
  bool is_assigned(uint32_t row) const { return row < assigned.size() && assigned[row] != 0; }
  const U256& get(uint32_t row) const;
};

struct CircuitLayout {
  std::shared_ptr<const Field> field;
  std::vector<Column> columns;
  uint64_t n_rows = 0;
  std::vector<GateDef> gates;
  std::vector<LookupTable> tables;
  std::vector<LookupArg> lookups;
  std::vector<CopyConstraint> copies;
  /// Values of fixed columns, indexed by column id (empty for others).
  std::vector<ColumnValues> fixed;
  /// instance[i] must equal the value of instance_cells[i].
  std::vector<Cell> instance_cells;
  /// Free-form JSON describing how the layout was produced.
  std::string metadata;

  ColumnId add_column(std::string name, ColumnKind kind);
  uint32_t add_gate(std::string name, ColumnId selector, Expr poly);
  uint32_t add_table(std::string name, uint32_t arity, std::vector<U256> values);
  uint32_t add_lookup(std::string name, uint32_t table, std::vector<ColumnId> inputs, ColumnId selector);
  void set_fixed(ColumnId column, uint32_t row, const U256& value);
  void copy(Cell a, Cell b) { copies.push_back({a, b}); }

  /// Throws CircuitError when a constraint refers to an undeclared column or
  /// a row outside the grid.
  void validate() const;
  unsigned max_degree() const;
  size_t count(ColumnKind kind) const;
};

struct Assignment {
  /// Indexed by column id; only advice columns carry data.
  std::vector<ColumnValues> advice;
  std::vector<U256> instance;

  void resize(const CircuitLayout& layout) { advice.resize(layout.columns.size()); }
  void set(Cell cell, const U256& v) { advice.at(cell.column).set(cell.row, v); }
};

/// Reads a cell; throws CircuitError("unassigned cell ...") for advice cells
/// that were never set.
const U256& cell_value(const CircuitLayout& layout, const Assignment& assignment, Cell cell);

/// Evaluates an expression on one row.
U256 eval_expr(const Expr& expr, const CircuitLayout& layout, const Assignment& assignment, uint32_t row);

/// selector(row) * poly(row). Rows with a zero selector return zero without
/// touching the polynomial cells.
U256 eval_gate(const GateDef& gate, const CircuitLayout& layout, const Assignment& assignment, uint32_t row);

/// Columns used by the three arithmetic gate families of one column group.
struct MainColumns {
  std::vector<ColumnId> adv;  // 2N + 1 advice columns
  ColumnId q_dot = 0, q_add = 0, q_div = 0;
  ColumnId z = 0;    // activation zero point per DOT row
  ColumnId a = 0;    // scale numerator per DIV row
  ColumnId off = 0;  // lookup key offset per DIV row
};

/// DOT_N: sum_j (x_j - z) w_j - out, x = adv[0..N), w = adv[N..2N), out = adv[2N]
/// ADD_N: sum_j adv[j] - adv[2N]
/// DIV:   adv0 * a - (adv1 - off) * b - adv2   (c, shifted quotient, remainder)
std::vector<GateDef> builtin_gates(int n, const MainColumns& cols, const U256& divisor);

/// Human-readable JSON dump: columns, gate s-expressions, table sizes, rows.
std::string debug_dump(const CircuitLayout& layout);

}  // namespace zkml
