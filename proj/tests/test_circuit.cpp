// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "json.hpp"
#include "zkml/arithmetizer.hpp"
#include "zkml/checker.hpp"
#include "zkml/circuit.hpp"
#include "zkml/gen.hpp"
#include "zkml/serialize.hpp"

using namespace zkml;

namespace {

// A one-row grid holding the three builtin gates for width n.
struct Bench {
  CircuitLayout L;
  MainColumns cols;
  Assignment A;

  Bench(int n, int64_t divisor) {
    L.field = Field::bn254();
    L.n_rows = 1;
    for (int i = 0; i < 2 * n + 1; ++i) cols.adv.push_back(L.add_column("adv_" + std::to_string(i), ColumnKind::advice));
    cols.q_dot = L.add_column("q_dot", ColumnKind::fixed);
    cols.q_add = L.add_column("q_add", ColumnKind::fixed);
    cols.q_div = L.add_column("q_div", ColumnKind::fixed);
    cols.z = L.add_column("z", ColumnKind::fixed);
    cols.a = L.add_column("a", ColumnKind::fixed);
    cols.off = L.add_column("off", ColumnKind::fixed);
    for (GateDef& g : builtin_gates(n, cols, U256(static_cast<uint64_t>(divisor)))) L.add_gate(g.name, g.selector, g.poly);
    for (ColumnId c : {cols.q_dot, cols.q_add, cols.q_div, cols.z, cols.a, cols.off}) L.set_fixed(c, 0, U256());
    A.resize(L);
    for (ColumnId c : cols.adv) A.set({c, 0}, U256());
  }
  void fixed(ColumnId c, int64_t v) { L.set_fixed(c, 0, L.field->from_i64(v)); }
  void adv(size_t i, int64_t v) { A.set({cols.adv[i], 0}, L.field->from_i64(v)); }
  int64_t gate(size_t id) { return L.field->to_i64(eval_gate(L.gates[id], L, A, 0)); }
};

}  // namespace

TEST_CASE("multiplication gate examples") {
  CircuitLayout L;
  L.field = Field::bn254();
  L.n_rows = 2;
  const ColumnId a = L.add_column("a", ColumnKind::advice), b = L.add_column("b", ColumnKind::advice),
                 c = L.add_column("c", ColumnKind::advice), q = L.add_column("q", ColumnKind::fixed);
  L.add_gate("mul", q, Expr::cell(a) * Expr::cell(b) - Expr::cell(c));
  L.set_fixed(q, 0, U256(1));
  L.set_fixed(q, 1, U256(0));
  L.validate();
  Assignment A;
  A.resize(L);
  A.set({a, 0}, U256(3));
  A.set({b, 0}, U256(4));
  A.set({c, 0}, U256(12));
  A.set({a, 1}, U256(5));
  A.set({b, 1}, U256(5));
  A.set({c, 1}, U256(1));
  CHECK(eval_gate(L.gates[0], L, A, 0).is_zero());
  CHECK(eval_gate(L.gates[0], L, A, 1).is_zero());
  A.set({c, 0}, U256(11));
  CHECK(eval_gate(L.gates[0], L, A, 0) == U256(1));
  CHECK_THROWS_AS(eval_gate(L.gates[0], L, A, 2), CircuitError);

  Assignment partial;
  partial.resize(L);
  partial.set({a, 0}, U256(3));
  CHECK_THROWS_WITH_AS(eval_gate(L.gates[0], L, partial, 0), doctest::Contains("unassigned"), CircuitError);
}

TEST_CASE("property: selector zero disables a gate for any assignment") {
  std::mt19937_64 rng(3);
  Bench b(4, 7);
  for (int t = 0; t < 200; ++t) {
    for (size_t i = 0; i < b.cols.adv.size(); ++i) b.A.set({b.cols.adv[i], 0}, U256(rng(), rng(), rng(), rng() >> 8));
    b.fixed(b.cols.z, static_cast<int64_t>(rng() % 256));
    b.fixed(b.cols.a, static_cast<int64_t>(rng() % 100));
    for (size_t g = 0; g < 3; ++g) REQUIRE(b.gate(g) == 0);
  }
}

TEST_CASE("builtin gate examples") {
  Bench b(4, 4);
  CHECK(b.L.gates.size() == 3);
  CHECK(b.L.gates[0].name == "dot_4");
  CHECK(b.L.gates[1].name == "add_4");
  CHECK(b.L.gates[2].name == "div");

  SUBCASE("dot_4 with zero-padded weights") {
    b.fixed(b.cols.q_dot, 1);
    b.fixed(b.cols.z, 1);
    const int64_t x[4] = {2, 3, 0, 0}, w[4] = {4, 5, 0, 0};
    for (size_t j = 0; j < 4; ++j) {
      b.adv(j, x[j]);
      b.adv(4 + j, w[j]);
    }
    b.adv(8, 14);
    CHECK(b.gate(0) == 0);
    b.adv(8, 15);
    CHECK(b.gate(0) == -1);
  }
  SUBCASE("add_3 in a width-4 gate") {
    b.fixed(b.cols.q_add, 1);
    b.adv(0, 14);
    b.adv(1, 9);
    b.adv(2, 2);
    b.adv(8, 25);
    CHECK(b.gate(1) == 0);
    b.adv(8, 24);
    CHECK(b.gate(1) != 0);
  }
  SUBCASE("div: 7*3 = 5*4 + 1") {
    b.fixed(b.cols.q_div, 1);
    b.fixed(b.cols.a, 3);
    b.fixed(b.cols.off, 10);
    b.adv(0, 7);
    b.adv(1, 5 + 10);
    b.adv(2, 1);
    CHECK(b.gate(2) == 0);
    b.adv(2, 2);
    CHECK(b.gate(2) != 0);
  }
  CHECK_THROWS_AS(builtin_gates(1, MainColumns{}, U256(1)), CircuitError);
  CHECK_THROWS_AS(builtin_gates(3, b.cols, U256(1)), CircuitError);
}

TEST_CASE("div gate with the remainder range determines (d, r) uniquely") {
  // Brute force over integers for the candidates, then the gate itself
  // confirms the survivor and rejects its neighbours.
  for (int64_t a = 1; a <= 8; ++a) {
    for (int64_t bdiv = 1; bdiv <= 8; ++bdiv) {
      Bench b(2, bdiv);
      b.fixed(b.cols.q_div, 1);
      b.fixed(b.cols.a, a);
      for (int64_t c = -100; c <= 100; ++c) {
        int solutions = 0;
        int64_t sd = 0, sr = 0;
        for (int64_t d = -801; d <= 801; ++d) {
          for (int64_t r = 0; r < bdiv; ++r) {
            if (c * a == d * bdiv + r) {
              ++solutions;
              sd = d;
              sr = r;
            }
          }
        }
        REQUIRE(solutions == 1);
        // floor semantics
        REQUIRE(sd * bdiv <= c * a);
        REQUIRE((sd + 1) * bdiv > c * a);
        b.adv(0, c);
        b.adv(1, sd);
        b.adv(2, sr);
        REQUIRE(b.gate(2) == 0);
        // Any other d forces a remainder outside [0, b).
        for (int64_t dd : {sd - 1, sd + 1}) {
          b.adv(1, dd);
          b.adv(2, 0);
          const int64_t needed = b.gate(2);
          REQUIRE((needed < 0 || needed >= bdiv));
        }
      }
    }
  }
}

TEST_CASE("expressions") {
  std::vector<Column> cols{{"x", ColumnKind::advice}, {"y", ColumnKind::advice}, {"q", ColumnKind::fixed}};
  const Expr x = Expr::cell(0), y = Expr::cell(1);
  const Expr e = (x * y - Expr::constant(U256(3))).pow(2) + (-x);
  CHECK(e.degree() == 4);
  CHECK(e.to_sexpr(cols) == "(+ (^ (- (* x y) 3) 2) (neg x))");
  CHECK(e.columns() == std::vector<ColumnId>{0, 1});
  CHECK(Expr::constant(U256(5)).degree() == 0);
  CHECK_THROWS_AS(x.pow(0), CircuitError);
  CHECK_THROWS_AS(x + Expr(), CircuitError);
  CHECK(Expr::from_nodes(e.nodes()).to_sexpr(cols) == e.to_sexpr(cols));
  auto bad = e.nodes();
  bad.pop_back();
  CHECK_THROWS_WITH_AS(Expr::from_nodes(bad), doctest::Contains("malformed"), CircuitError);

  CircuitLayout L;
  L.field = Field::from_decimal("65537");
  L.n_rows = 1;
  for (const Column& c : cols) L.add_column(c.name, c.kind);
  L.set_fixed(2, 0, U256(1));
  Assignment A;
  A.resize(L);
  A.set({0, 0}, U256(4));
  A.set({1, 0}, U256(2));
  // ((8-3)^2) - 4 = 21
  CHECK(eval_expr(e, L, A, 0) == U256(21));
}

TEST_CASE("layout validation errors") {
  CircuitLayout L;
  L.field = Field::bn254();
  L.n_rows = 4;
  const ColumnId a = L.add_column("a", ColumnKind::advice);
  const ColumnId q = L.add_column("q", ColumnKind::fixed);
  L.validate();

  SUBCASE("undeclared column in a gate") {
    L.add_gate("g", q, Expr::cell(a) - Expr::cell(7));
    CHECK_THROWS_WITH_AS(L.validate(), doctest::Contains("undeclared column 7"), CircuitError);
  }
  SUBCASE("advice selector") {
    L.add_gate("g", a, Expr::cell(a));
    CHECK_THROWS_WITH_AS(L.validate(), doctest::Contains("selector must be fixed"), CircuitError);
  }
  SUBCASE("copy outside the grid") {
    L.copy({a, 0}, {a, 4});
    CHECK_THROWS_WITH_AS(L.validate(), doctest::Contains("outside the grid"), CircuitError);
  }
  SUBCASE("lookup arity") {
    const uint32_t t = L.add_table("t", 2, {U256(0), U256(0)});
    L.add_lookup("l", t, {a}, q);
    CHECK_THROWS_WITH_AS(L.validate(), doctest::Contains("arity mismatch"), CircuitError);
  }
  SUBCASE("set_fixed on advice") { CHECK_THROWS_AS(L.set_fixed(a, 0, U256(1)), CircuitError); }
}

TEST_CASE("debug dump lists columns, polynomials and table sizes") {
  gen::Rng rng(21);
  const ModelGraph g = gen::random_model(rng);
  CompileConfig cfg;
  cfg.gate_width = 4;
  const CompiledCircuit cc = compile(g, cfg);
  const auto doc = nlohmann::json::parse(debug_dump(cc.layout));
  CHECK(doc["n_rows"] == cc.layout.n_rows);
  CHECK(doc["columns"].size() == cc.layout.columns.size());
  CHECK(doc["tables"].size() == cc.layout.tables.size());
  bool saw_dot = false;
  for (const auto& gate : doc["gates"]) {
    const std::string name = gate["name"].get<std::string>();
    if (name.size() >= 5 && name.substr(name.size() - 5) == "dot_4") {
      saw_dot = true;
      CHECK(gate["degree"] == 3);
      CHECK(gate["poly"].get<std::string>().rfind("(-", 0) == 0);
    }
  }
  CHECK(saw_dot);
}

TEST_CASE("layout and witness files round-trip") {
  gen::Rng rng(99);
  for (int t = 0; t < 10; ++t) {
    const ModelGraph g = gen::random_model(rng, {.max_layers = 3, .max_hw = 8, .max_channels = 4});
    const CompiledCircuit cc = compile(g, CompileConfig{});
    const Assignment w = assign_witness(cc, g, gen::random_input(rng, g));
    const std::string lb = serialize_layout(cc.layout);
    const CircuitLayout back = deserialize_layout(lb);
    REQUIRE(serialize_layout(back) == lb);
    REQUIRE(back.n_rows == cc.layout.n_rows);
    REQUIRE(debug_dump(back) == debug_dump(cc.layout));
    const std::string wb = serialize_witness(cc.layout, w);
    const Assignment wback = deserialize_witness(wb, back);
    REQUIRE(serialize_witness(back, wback) == wb);
    REQUIRE(check(back, wback).ok());
  }
}

TEST_CASE("corrupt files are rejected") {
  gen::Rng rng(5);
  const ModelGraph g = gen::random_model(rng, {.max_layers = 2, .max_hw = 6, .max_channels = 3});
  const CompiledCircuit cc = compile(g, CompileConfig{});
  const Assignment w = assign_witness(cc, g, gen::random_input(rng, g));
  const std::string lb = serialize_layout(cc.layout);
  const std::string wb = serialize_witness(cc.layout, w);

  CHECK_THROWS_AS(deserialize_layout(""), FormatError);
  CHECK_THROWS_AS(deserialize_layout(lb.substr(0, lb.size() / 2)), FormatError);
  CHECK_THROWS_AS(deserialize_layout(lb + "x"), FormatError);
  std::string magic = lb;
  magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_layout(magic), FormatError);
  std::string version = lb;
  version[8] = 9;
  CHECK_THROWS_AS(deserialize_layout(version), FormatError);

  CHECK_THROWS_AS(deserialize_witness(wb.substr(0, wb.size() - 1), cc.layout), FormatError);
  CHECK_THROWS_AS(deserialize_witness(lb, cc.layout), FormatError);
  // A witness for another layout.
  const ModelGraph g2 = gen::random_model(rng, {.min_layers = 3, .max_layers = 4});
  const CompiledCircuit cc2 = compile(g2, CompileConfig{});
  if (cc2.layout.n_rows != cc.layout.n_rows || cc2.layout.columns.size() != cc.layout.columns.size()) {
    CHECK_THROWS_AS(deserialize_witness(wb, cc2.layout), FormatError);
  }
}
