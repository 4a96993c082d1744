// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "zkml/checker.hpp"

#include <algorithm>
#include <thread>

#include "json.hpp"

namespace zkml {

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::gate: return "gate";
    case ViolationKind::lookup: return "lookup";
    case ViolationKind::copy: return "copy";
    case ViolationKind::instance: return "instance";
  }
  return "?";
}

std::string CheckResult::to_json(const CircuitLayout& layout) const {
  nlohmann::json list = nlohmann::json::array();
  for (const Violation& v : violations) {
    std::string name;
    if (v.kind == ViolationKind::gate && v.id < layout.gates.size()) name = layout.gates[v.id].name;
    if (v.kind == ViolationKind::lookup && v.id < layout.lookups.size()) name = layout.lookups[v.id].name;
    list.push_back({{"kind", to_string(v.kind)}, {"id", v.id}, {"name", name}, {"row", v.row}, {"detail", v.detail}});
  }
  nlohmann::json doc{{"accepted", ok()}, {"total_violations", total}, {"rows", rows_checked}, {"violations", list}};
  return doc.dump(2) + "\n";
}

namespace {

const U256 kZero{};

std::string show(const Field& f, const U256& v) {
  return f.fits_i64(v) ? std::to_string(f.to_i64(v)) : v.to_decimal();
}

// Read-only view of one column for the hot loops.
struct ColumnView {
  const U256* values = nullptr;
  const uint8_t* assigned = nullptr;  // null for fixed columns
  size_t len = 0;
  bool advice = false;
};

class Reader {
 public:
  Reader(const CircuitLayout& layout, const Assignment& a) : layout_(layout) {
    views_.resize(layout.columns.size());
    for (size_t c = 0; c < layout.columns.size(); ++c) {
      ColumnView& v = views_[c];
      switch (layout.columns[c].kind) {
        case ColumnKind::fixed:
          v.values = layout.fixed[c].values.data();
          v.len = layout.fixed[c].values.size();
          break;
        case ColumnKind::advice:
          v.values = a.advice[c].values.data();
          v.assigned = a.advice[c].assigned.data();
          v.len = a.advice[c].values.size();
          v.advice = true;
          break;
        case ColumnKind::instance:
          v.values = a.instance.data();
          v.len = a.instance.size();
          break;
      }
    }
  }

  // Returns null for an unassigned advice cell.
  const U256* get(ColumnId col, uint64_t row) const {
    const ColumnView& v = views_[col];
    if (row >= v.len) return v.advice ? nullptr : &kZero;
    if (v.advice && v.assigned[row] == 0) return nullptr;
    return &v.values[row];
  }

  bool selector_on(ColumnId col, uint64_t row) const {
    const U256* s = get(col, row);
    return s != nullptr && !s->is_zero();
  }

  std::string cell_name(ColumnId col, uint64_t row) const {
    return layout_.columns[col].name + "[" + std::to_string(row) + "]";
  }

 private:
  const CircuitLayout& layout_;
  std::vector<ColumnView> views_;
};

// Postfix evaluation; returns false and names the cell when an operand is unassigned.
bool evaluate(const Field& f, const Expr& e, const Reader& r, uint64_t row, std::vector<U256>& st, U256& out,
              ColumnId& missing) {
  st.clear();
  for (const Expr::Node& n : e.nodes()) {
    switch (n.op) {
      case Expr::Op::cell: {
        const U256* v = r.get(n.arg, row);
        if (v == nullptr) {
          missing = n.arg;
          return false;
        }
        st.push_back(*v);
        break;
      }
      case Expr::Op::constant: st.push_back(n.value); break;
      case Expr::Op::add: {
        const U256 b = st.back();
        st.pop_back();
        st.back() = f.add(st.back(), b);
        break;
      }
      case Expr::Op::sub: {
        const U256 b = st.back();
        st.pop_back();
        st.back() = f.sub(st.back(), b);
        break;
      }
      case Expr::Op::mul: {
        const U256 b = st.back();
        st.pop_back();
        st.back() = f.mul(st.back(), b);
        break;
      }
      case Expr::Op::neg: st.back() = f.neg(st.back()); break;
      case Expr::Op::pow:
        if (n.arg == 5) {
          const U256 x = st.back();
          const U256 sq = f.mul(x, x);
          st.back() = f.mul(f.mul(sq, sq), x);
        } else {
          st.back() = f.pow(st.back(), U256(n.arg));
        }
        break;
    }
  }
  out = st.empty() ? U256() : st.back();
  return true;
}

// Open-addressing index over the tuples of one lookup table.
class TableIndex {
 public:
  explicit TableIndex(const LookupTable& t) : table_(t) {
    const size_t n = t.size();
    size_t cap = 16;
    while (cap < 2 * n) cap <<= 1;
    mask_ = cap - 1;
    slots_.assign(cap, 0);
    for (size_t i = 0; i < n; ++i) {
      size_t h = hash(&t.values[i * t.arity]) & mask_;
      while (slots_[h] != 0) {
        if (equal(slots_[h] - 1, &t.values[i * t.arity])) break;
        h = (h + 1) & mask_;
      }
      if (slots_[h] == 0) slots_[h] = static_cast<uint32_t>(i + 1);
    }
  }

  bool contains(const U256* tuple) const {
    size_t h = hash(tuple) & mask_;
    while (slots_[h] != 0) {
      if (equal(slots_[h] - 1, tuple)) return true;
      h = (h + 1) & mask_;
    }
    return false;
  }

 private:
  size_t hash(const U256* tuple) const {
    size_t h = 0x51ED27F1u;
    for (uint32_t k = 0; k < table_.arity; ++k) h = h * 0x100000001B3ULL ^ U256Hash{}(tuple[k]);
    return h ^ (h >> 29);
  }
  bool equal(size_t row, const U256* tuple) const {
    for (uint32_t k = 0; k < table_.arity; ++k) {
      if (table_.values[row * table_.arity + k] != tuple[k]) return false;
    }
    return true;
  }

  const LookupTable& table_;
  size_t mask_ = 0;
  std::vector<uint32_t> slots_;
};

struct Shard {
  std::vector<Violation> found;
  uint64_t total = 0;
  size_t cap = 0;

  void add(Violation v) {
    ++total;
    found.push_back(std::move(v));
    if (found.size() > 4 * cap + 64) trim();
  }
  void trim() {
    std::sort(found.begin(), found.end());
    if (found.size() > cap) found.resize(cap);
  }
};

void validate_dimensions(const CircuitLayout& layout, const Assignment& a) {
  if (!layout.field) throw CircuitError("layout has no field");
  if (a.advice.size() != layout.columns.size()) {
    throw CircuitError("dimension mismatch: assignment has " + std::to_string(a.advice.size()) +
                       " columns, layout has " + std::to_string(layout.columns.size()));
  }
  if (a.instance.size() != layout.instance_cells.size()) {
    throw CircuitError("dimension mismatch: " + std::to_string(a.instance.size()) + " instance values, layout binds " +
                       std::to_string(layout.instance_cells.size()));
  }
  if (layout.fixed.size() != layout.columns.size()) throw CircuitError("layout fixed table does not match its columns");
  for (size_t c = 0; c < layout.columns.size(); ++c) {
    if (layout.columns[c].kind != ColumnKind::advice && !a.advice[c].values.empty()) {
      throw CircuitError("dimension mismatch: assignment fills non-advice column " + layout.columns[c].name);
    }
    if (a.advice[c].values.size() > layout.n_rows || a.advice[c].assigned.size() != a.advice[c].values.size()) {
      throw CircuitError("dimension mismatch: column " + layout.columns[c].name + " exceeds the grid");
    }
  }
}

void check_rows(const CircuitLayout& layout, const Reader& r, const std::vector<TableIndex>& tables, uint64_t lo,
                uint64_t hi, Shard& shard) {
  const Field& f = *layout.field;
  std::vector<U256> st;
  st.reserve(64);
  for (const GateDef& g : layout.gates) {
    for (uint64_t row = lo; row < hi; ++row) {
      if (!r.selector_on(g.selector, row)) continue;
      U256 v;
      ColumnId missing = 0;
      if (!evaluate(f, g.poly, r, row, st, v, missing)) {
        shard.add({ViolationKind::gate, g.id, row, "unassigned cell " + r.cell_name(missing, row)});
      } else if (!v.is_zero()) {
        shard.add({ViolationKind::gate, g.id, row, g.name + " evaluates to " + show(f, v)});
      }
    }
  }
  std::vector<U256> tuple;
  for (const LookupArg& l : layout.lookups) {
    const TableIndex& index = tables[l.table];
    tuple.resize(l.inputs.size());
    for (uint64_t row = lo; row < hi; ++row) {
      if (!r.selector_on(l.selector, row)) continue;
      bool complete = true;
      for (size_t k = 0; k < l.inputs.size(); ++k) {
        const U256* v = r.get(l.inputs[k], row);
        if (v == nullptr) {
          shard.add({ViolationKind::lookup, l.id, row, "unassigned cell " + r.cell_name(l.inputs[k], row)});
          complete = false;
          break;
        }
        tuple[k] = *v;
      }
      if (!complete || index.contains(tuple.data())) continue;
      std::string detail = "(";
      for (size_t k = 0; k < tuple.size(); ++k) detail += (k ? ", " : "") + show(f, tuple[k]);
      shard.add({ViolationKind::lookup, l.id, row, detail + ") not in table " + layout.tables[l.table].name});
    }
  }
}

void check_copies(const CircuitLayout& layout, const Reader& r, size_t lo, size_t hi, Shard& shard) {
  for (size_t i = lo; i < hi; ++i) {
    const CopyConstraint& c = layout.copies[i];
    const U256* a = r.get(c.a.column, c.a.row);
    const U256* b = r.get(c.b.column, c.b.row);
    if (a == nullptr || b == nullptr) {
      const Cell& bad = a == nullptr ? c.a : c.b;
      shard.add({ViolationKind::copy, static_cast<uint32_t>(i), c.a.row, "unassigned cell " + r.cell_name(bad.column, bad.row)});
    } else if (*a != *b) {
      shard.add({ViolationKind::copy, static_cast<uint32_t>(i), c.a.row,
                 r.cell_name(c.a.column, c.a.row) + " != " + r.cell_name(c.b.column, c.b.row)});
    }
  }
}

void check_instance(const CircuitLayout& layout, const Assignment& a, const Reader& r, Shard& shard) {
  const Field& f = *layout.field;
  for (size_t i = 0; i < layout.instance_cells.size(); ++i) {
    const Cell& c = layout.instance_cells[i];
    const U256* v = r.get(c.column, c.row);
    if (v == nullptr) {
      shard.add({ViolationKind::instance, static_cast<uint32_t>(i), i, "unassigned cell " + r.cell_name(c.column, c.row)});
    } else if (*v != a.instance[i]) {
      shard.add({ViolationKind::instance, static_cast<uint32_t>(i), i,
                 r.cell_name(c.column, c.row) + " = " + show(f, *v) + ", public value " + show(f, a.instance[i])});
    }
  }
}

}  // namespace

CheckResult check(const CircuitLayout& layout, const Assignment& assignment, const CheckOptions& options) {
  return check_parallel(layout, assignment, 1, options);
}

CheckResult check_parallel(const CircuitLayout& layout, const Assignment& assignment, unsigned shards,
                           const CheckOptions& options) {
  if (shards == 0) throw CircuitError("shard count must be positive");
  validate_dimensions(layout, assignment);
  layout.validate();

  const Reader reader(layout, assignment);
  std::vector<TableIndex> tables;
  tables.reserve(layout.tables.size());
  for (const LookupTable& t : layout.tables) tables.emplace_back(t);

  std::vector<Shard> parts(shards);
  for (Shard& s : parts) s.cap = options.cap;
  auto work = [&](unsigned k) {
    const uint64_t rows = layout.n_rows;
    check_rows(layout, reader, tables, rows * k / shards, rows * (k + 1) / shards, parts[k]);
    const size_t n = layout.copies.size();
    check_copies(layout, reader, n * k / shards, n * (k + 1) / shards, parts[k]);
    if (k == 0) check_instance(layout, assignment, reader, parts[k]);
    parts[k].trim();
  };
  if (shards == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(shards);
    for (unsigned k = 0; k < shards; ++k) threads.emplace_back(work, k);
    for (std::thread& t : threads) t.join();
  }

  CheckResult result;
  result.rows_checked = layout.n_rows;
  for (Shard& s : parts) {
    result.total += s.total;
    result.violations.insert(result.violations.end(), std::make_move_iterator(s.found.begin()),
                             std::make_move_iterator(s.found.end()));
  }
  std::sort(result.violations.begin(), result.violations.end());
  if (result.violations.size() > options.cap) result.violations.resize(options.cap);
  return result;
}

}  // namespace zkml
