// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include <set>
#include <tuple>

#include "doctest.h"
#include "zkml/arithmetizer.hpp"
#include "zkml/checker.hpp"
#include "zkml/gen.hpp"
#include "zkml/selftest.hpp"

using namespace zkml;

namespace {

using Key = std::tuple<int, uint32_t, uint64_t>;

// Straightforward checker: std::set for tables, eval_gate for gates.
std::set<Key> naive_check(const CircuitLayout& L, const Assignment& A) {
  std::set<Key> out;
  auto assigned = [&](Cell c) {
    if (L.columns[c.column].kind != ColumnKind::advice) return true;
    return A.advice[c.column].is_assigned(c.row);
  };
  auto value = [&](Cell c) { return cell_value(L, A, c); };
  for (const GateDef& g : L.gates) {
    for (uint32_t row = 0; row < L.n_rows; ++row) {
      const Cell sel{g.selector, row};
      if (value(sel).is_zero()) continue;
      bool ok = true;
      for (ColumnId c : g.poly.columns()) ok = ok && assigned({c, row});
      if (!ok || !eval_gate(g, L, A, row).is_zero()) out.insert({0, g.id, row});
    }
  }
  std::vector<std::set<std::vector<U256>>> tables;
  for (const LookupTable& t : L.tables) {
    std::set<std::vector<U256>> s;
    for (size_t i = 0; i < t.size(); ++i) s.insert({t.values.begin() + static_cast<long>(i * t.arity), t.values.begin() + static_cast<long>((i + 1) * t.arity)});
    tables.push_back(std::move(s));
  }
  for (const LookupArg& l : L.lookups) {
    for (uint32_t row = 0; row < L.n_rows; ++row) {
      if (value({l.selector, row}).is_zero()) continue;
      std::vector<U256> tuple;
      bool ok = true;
      for (ColumnId c : l.inputs) {
        if (!assigned({c, row})) {
          ok = false;
          break;
        }
        tuple.push_back(value({c, row}));
      }
      if (!ok || !tables[l.table].count(tuple)) out.insert({1, l.id, row});
    }
  }
  for (size_t i = 0; i < L.copies.size(); ++i) {
    const auto& c = L.copies[i];
    if (!assigned(c.a) || !assigned(c.b) || value(c.a) != value(c.b)) out.insert({2, static_cast<uint32_t>(i), c.a.row});
  }
  for (size_t i = 0; i < L.instance_cells.size(); ++i) {
    const Cell c = L.instance_cells[i];
    if (!assigned(c) || value(c) != A.instance[i]) out.insert({3, static_cast<uint32_t>(i), i});
  }
  return out;
}

std::set<Key> keys(const CheckResult& r) {
  std::set<Key> out;
  for (const Violation& v : r.violations) out.insert({static_cast<int>(v.kind), v.id, v.row});
  return out;
}

struct Fixture {
  ModelGraph graph;
  CompiledCircuit cc;
  Assignment witness;
};

Fixture make(uint64_t seed, gen::ModelOptions opts = {.max_layers = 3, .max_hw = 8, .max_channels = 4}) {
  gen::Rng rng(seed);
  Fixture f;
  f.graph = gen::random_model(rng, opts);
  CompileConfig cfg;
  cfg.gate_width = 2 + static_cast<int>(seed % 7);
  f.cc = compile(f.graph, cfg);
  f.witness = assign_witness(f.cc, f.graph, gen::random_input(rng, f.graph));
  return f;
}

// A small hand-built layout exercising each constraint kind.
struct Toy {
  CircuitLayout L;
  Assignment A;
  ColumnId x, y, q, s;
  Toy() {
    L.field = Field::from_decimal("65537");
    L.n_rows = 4;
    x = L.add_column("x", ColumnKind::advice);
    y = L.add_column("y", ColumnKind::advice);
    q = L.add_column("q", ColumnKind::fixed);
    s = L.add_column("s", ColumnKind::fixed);
    L.add_gate("double", q, Expr::cell(x) + Expr::cell(x) - Expr::cell(y));
    const uint32_t t = L.add_table("small", 1, {U256(0), U256(1), U256(2), U256(3)});
    L.add_lookup("x_small", t, {x}, s);
    for (uint32_t r = 0; r < 4; ++r) {
      L.set_fixed(q, r, U256(1));
      L.set_fixed(s, r, U256(r < 2 ? 1 : 0));
    }
    L.copy({x, 0}, {x, 1});
    L.instance_cells = {{y, 3}};
    A.resize(L);
    for (uint32_t r = 0; r < 4; ++r) {
      A.set({x, r}, U256(r == 0 ? 1 : r == 1 ? 1 : 40 + r));
      A.set({y, r}, L.field->add(A.advice[x].get(r), A.advice[x].get(r)));
    }
    A.instance = {A.advice[y].get(3)};
  }
};

}  // namespace

TEST_CASE("toy layout: honest, and each kind of violation") {
  Toy t;
  CHECK(check(t.L, t.A).ok());
  CHECK(naive_check(t.L, t.A).empty());

  SUBCASE("lookup exempt where the selector is zero") {
    // Rows 2 and 3 hold 42, 43: outside the table, but s = 0 there.
    CHECK(check(t.L, t.A).total == 0);
    t.L.set_fixed(t.s, 2, U256(1));
    const CheckResult r = check(t.L, t.A);
    REQUIRE(r.total == 1);
    CHECK(r.violations[0].kind == ViolationKind::lookup);
    CHECK(r.violations[0].row == 2);
    CHECK(r.violations[0].detail.find("not in table small") != std::string::npos);
  }
  SUBCASE("gate") {
    t.A.set({t.y, 2}, U256(7));
    const CheckResult r = check(t.L, t.A);
    REQUIRE(r.total == 1);
    CHECK(r.violations[0].kind == ViolationKind::gate);
    CHECK(r.violations[0].row == 2);
  }
  SUBCASE("copy") {
    t.A.set({t.x, 1}, U256(2));
    t.A.set({t.y, 1}, U256(4));
    const CheckResult r = check(t.L, t.A);
    REQUIRE(r.total == 1);
    CHECK(r.violations[0].kind == ViolationKind::copy);
    CHECK(r.violations[0].detail == "x[0] != x[1]");
  }
  SUBCASE("instance") {
    t.A.instance[0] = U256(5);
    const CheckResult r = check(t.L, t.A);
    REQUIRE(r.total == 1);
    CHECK(r.violations[0].kind == ViolationKind::instance);
  }
  SUBCASE("unassigned operand") {
    t.A.advice[t.y].assigned[0] = 0;
    const CheckResult r = check(t.L, t.A);
    REQUIRE(r.total == 1);
    CHECK(r.violations[0].detail.find("unassigned cell y[0]") != std::string::npos);
  }
  SUBCASE("dimension mismatch") {
    Assignment bad = t.A;
    bad.advice.pop_back();
    CHECK_THROWS_WITH_AS(check(t.L, bad), doctest::Contains("dimension mismatch"), CircuitError);
    Assignment extra = t.A;
    extra.instance.push_back(U256());
    CHECK_THROWS_AS(check(t.L, extra), CircuitError);
    Assignment tall = t.A;
    tall.set({t.x, 9}, U256());
    CHECK_THROWS_AS(check(t.L, tall), CircuitError);
  }
  SUBCASE("zero shards") { CHECK_THROWS_AS(check_parallel(t.L, t.A, 0), CircuitError); }
}

TEST_CASE("empty layout is accepted") {
  CircuitLayout L;
  L.field = Field::bn254();
  Assignment A;
  A.resize(L);
  const CheckResult r = check(L, A);
  CHECK(r.ok());
  CHECK(r.violations.empty());
}

TEST_CASE("property: honest witnesses are accepted and match the interpreter") {
  for (uint64_t seed = 1; seed <= 40; ++seed) {
    const Fixture f = make(seed);
    const CheckResult r = check(f.cc.layout, f.witness);
    INFO("seed " << seed);
    REQUIRE(r.ok());
    REQUIRE(naive_check(f.cc.layout, f.witness).empty());
  }
}

TEST_CASE("property: tampered witnesses agree with the naive checker") {
  gen::Rng rng(17);
  for (uint64_t seed = 100; seed < 115; ++seed) {
    const Fixture f = make(seed);
    const TamperSampler sampler(f.witness);
    for (int t = 0; t < 8; ++t) {
      Assignment w = f.witness;
      const int n = 1 + static_cast<int>(rng() % 3);
      for (int k = 0; k < n; ++k) tamper(f.cc.layout, w, sampler.pick(rng));
      const CheckResult r = check(f.cc.layout, w, {.cap = 1u << 20});
      REQUIRE(r.total >= 1);
      REQUIRE(r.total == r.violations.size());
      REQUIRE(keys(r) == naive_check(f.cc.layout, w));
    }
  }
}

TEST_CASE("property: shard count does not change the result") {
  gen::Rng rng(4);
  for (uint64_t seed = 200; seed < 210; ++seed) {
    const Fixture f = make(seed);
    Assignment w = f.witness;
    const TamperSampler sampler(w);
    for (int k = 0; k < 5; ++k) tamper(f.cc.layout, w, sampler.pick(rng));
    const CheckResult one = check(f.cc.layout, w, {.cap = 3});
    for (unsigned shards : {2u, 3u, 8u, 13u}) {
      const CheckResult many = check_parallel(f.cc.layout, w, shards, {.cap = 3});
      REQUIRE(many.total == one.total);
      REQUIRE(many.violations == one.violations);
      REQUIRE(many.to_json(f.cc.layout) == one.to_json(f.cc.layout));
    }
  }
}

TEST_CASE("cap truncates the list but not the total") {
  const Fixture f = make(7);
  Assignment w = f.witness;
  gen::Rng rng(1);
  const TamperSampler sampler(w);
  for (int k = 0; k < 30; ++k) tamper(f.cc.layout, w, sampler.pick(rng));
  const CheckResult full = check(f.cc.layout, w, {.cap = 1u << 20});
  const CheckResult capped = check(f.cc.layout, w, {.cap = 2});
  REQUIRE(full.total > 2);
  CHECK(capped.total == full.total);
  CHECK(capped.violations.size() == 2);
  CHECK(std::equal(capped.violations.begin(), capped.violations.end(), full.violations.begin()));
  CHECK(std::is_sorted(full.violations.begin(), full.violations.end()));
}

TEST_CASE("tampering one activation cell is detected") {
  gen::Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    const Fixture f = make(300 + static_cast<uint64_t>(t));
    for (size_t l = 0; l < f.cc.layer_cells.size(); ++l) {
      const auto& acts = f.cc.layer_cells[l].act;
      if (acts.empty()) continue;
      Assignment w = f.witness;
      tamper(f.cc.layout, w, acts[rng() % acts.size()]);
      REQUIRE_FALSE(check(f.cc.layout, w).ok());
    }
  }
}
