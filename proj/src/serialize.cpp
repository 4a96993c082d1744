// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "zkml/serialize.hpp"

#include <cstring>
#include <filesystem>

#include "json.hpp"
#include "util/codec.hpp"

namespace zkml {

namespace {

constexpr char kLayoutMagic[8] = {'Z', 'K', 'M', 'L', 'L', 'A', 'Y', '\0'};
constexpr char kWitnessMagic[8] = {'Z', 'K', 'M', 'L', 'W', 'I', 'T', '\0'};
constexpr uint32_t kVersion = 1;

class Writer {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_integral_v<T>);
    for (size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff));
  }
  void elem(const U256& v) {
    uint8_t b[32];
    v.to_bytes_le(b);
    out_.append(reinterpret_cast<const char*>(b), 32);
  }
  void str(std::string_view s) {
    put<uint32_t>(static_cast<uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(const void* p, size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view in, const char* what) : in_(in), what_(what) {}

  template <class T>
  T get() {
    need(sizeof(T));
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= uint64_t{static_cast<uint8_t>(in_[pos_ + i])} << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  U256 elem(const U256& modulus) {
    need(32);
    const U256 v = U256::from_bytes_le(reinterpret_cast<const uint8_t*>(in_.data() + pos_));
    pos_ += 32;
    if (!(v < modulus)) fail("non-canonical field element");
    return v;
  }
  U256 raw_elem() {
    need(32);
    const U256 v = U256::from_bytes_le(reinterpret_cast<const uint8_t*>(in_.data() + pos_));
    pos_ += 32;
    return v;
  }
  std::string str() {
    const auto n = get<uint32_t>();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view bytes(size_t n) {
    need(n);
    auto v = in_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  /// Guards element counts against the remaining input before allocating.
  void need(uint64_t n) const {
    if (n > in_.size() - pos_) fail("truncated file");
  }
  bool done() const { return pos_ == in_.size(); }
  [[noreturn]] void fail(const std::string& msg) const { throw FormatError(std::string(what_) + ": " + msg); }

 private:
  std::string_view in_;
  size_t pos_ = 0;
  const char* what_;
};

}  // namespace

std::string serialize_layout(const CircuitLayout& layout) {
  Writer w;
  w.raw(kLayoutMagic, 8);
  w.put<uint32_t>(kVersion);
  w.elem(layout.field->modulus());
  w.put<uint64_t>(layout.n_rows);
  w.str(layout.metadata);
  w.put<uint32_t>(static_cast<uint32_t>(layout.columns.size()));
  for (const auto& c : layout.columns) {
    w.put<uint8_t>(static_cast<uint8_t>(c.kind));
    w.str(c.name);
  }
  w.put<uint32_t>(static_cast<uint32_t>(layout.gates.size()));
  for (const auto& g : layout.gates) {
    w.str(g.name);
    w.put<uint32_t>(g.selector);
    w.put<uint32_t>(static_cast<uint32_t>(g.poly.nodes().size()));
    for (const auto& n : g.poly.nodes()) {
      w.put<uint8_t>(static_cast<uint8_t>(n.op));
      w.put<uint32_t>(n.arg);
      if (n.op == Expr::Op::constant) w.elem(n.value);
    }
  }
  w.put<uint32_t>(static_cast<uint32_t>(layout.tables.size()));
  for (const auto& t : layout.tables) {
    w.str(t.name);
    w.put<uint32_t>(t.arity);
    w.put<uint64_t>(t.values.size());
    for (const auto& v : t.values) w.elem(v);
  }
  w.put<uint32_t>(static_cast<uint32_t>(layout.lookups.size()));
  for (const auto& l : layout.lookups) {
    w.str(l.name);
    w.put<uint32_t>(l.table);
    w.put<uint32_t>(l.selector);
    w.put<uint32_t>(static_cast<uint32_t>(l.inputs.size()));
    for (ColumnId c : l.inputs) w.put<uint32_t>(c);
  }
  w.put<uint64_t>(layout.copies.size());
  for (const auto& c : layout.copies) {
    w.put<uint32_t>(c.a.column);
    w.put<uint32_t>(c.a.row);
    w.put<uint32_t>(c.b.column);
    w.put<uint32_t>(c.b.row);
  }
  w.put<uint32_t>(static_cast<uint32_t>(layout.instance_cells.size()));
  for (const auto& c : layout.instance_cells) {
    w.put<uint32_t>(c.column);
    w.put<uint32_t>(c.row);
  }
  for (size_t c = 0; c < layout.columns.size(); ++c) {
    if (layout.columns[c].kind != ColumnKind::fixed) continue;
    const auto& vals = layout.fixed[c].values;
    w.put<uint32_t>(static_cast<uint32_t>(vals.size()));
    for (const auto& v : vals) w.elem(v);
  }
  return w.take();
}

CircuitLayout deserialize_layout(std::string_view bytes) {
  Reader r(bytes, "layout");
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kLayoutMagic, 8) != 0) r.fail("bad magic");
  r.bytes(8);
  if (r.get<uint32_t>() != kVersion) r.fail("unsupported version");
  CircuitLayout layout;
  try {
    layout.field = Field::create(r.raw_elem());
  } catch (const FieldError& e) {
    r.fail(e.what());
  }
  const U256 p = layout.field->modulus();
  layout.n_rows = r.get<uint64_t>();
  if (layout.n_rows > (uint64_t{1} << 32)) r.fail("row count out of range");
  layout.metadata = r.str();

  const auto n_cols = r.get<uint32_t>();
  r.need(uint64_t{n_cols} * 5);
  for (uint32_t i = 0; i < n_cols; ++i) {
    const auto kind = r.get<uint8_t>();
    if (kind > static_cast<uint8_t>(ColumnKind::instance)) r.fail("bad column kind");
    layout.add_column(r.str(), static_cast<ColumnKind>(kind));
  }
  const auto n_gates = r.get<uint32_t>();
  r.need(uint64_t{n_gates} * 12);
  for (uint32_t i = 0; i < n_gates; ++i) {
    std::string name = r.str();
    const auto sel = r.get<uint32_t>();
    const auto n_nodes = r.get<uint32_t>();
    r.need(uint64_t{n_nodes} * 5);
    std::vector<Expr::Node> nodes(n_nodes);
    for (auto& n : nodes) {
      const auto op = r.get<uint8_t>();
      if (op > static_cast<uint8_t>(Expr::Op::pow)) r.fail("bad expression op");
      n.op = static_cast<Expr::Op>(op);
      n.arg = r.get<uint32_t>();
      if (n.op == Expr::Op::constant) n.value = r.elem(p);
    }
    try {
      layout.add_gate(std::move(name), sel, Expr::from_nodes(std::move(nodes)));
    } catch (const CircuitError& e) {
      r.fail(e.what());
    }
  }
  const auto n_tables = r.get<uint32_t>();
  for (uint32_t i = 0; i < n_tables; ++i) {
    std::string name = r.str();
    const auto arity = r.get<uint32_t>();
    const auto n_values = r.get<uint64_t>();
    r.need(n_values * 32);
    if (arity == 0 || n_values % arity != 0) r.fail("table size is not a multiple of its arity");
    std::vector<U256> values(static_cast<size_t>(n_values));
    for (auto& v : values) v = r.elem(p);
    layout.add_table(std::move(name), arity, std::move(values));
  }
  const auto n_lookups = r.get<uint32_t>();
  for (uint32_t i = 0; i < n_lookups; ++i) {
    std::string name = r.str();
    const auto table = r.get<uint32_t>();
    const auto sel = r.get<uint32_t>();
    const auto n_inputs = r.get<uint32_t>();
    r.need(uint64_t{n_inputs} * 4);
    std::vector<ColumnId> inputs(n_inputs);
    for (auto& c : inputs) c = r.get<uint32_t>();
    if (table >= layout.tables.size()) r.fail("lookup refers to an unknown table");
    layout.add_lookup(std::move(name), table, std::move(inputs), sel);
  }
  const auto n_copies = r.get<uint64_t>();
  r.need(n_copies * 16);
  layout.copies.resize(static_cast<size_t>(n_copies));
  for (auto& c : layout.copies) {
    c.a = {r.get<uint32_t>(), r.get<uint32_t>()};
    c.b = {r.get<uint32_t>(), r.get<uint32_t>()};
  }
  const auto n_inst = r.get<uint32_t>();
  r.need(uint64_t{n_inst} * 8);
  layout.instance_cells.resize(n_inst);
  for (auto& c : layout.instance_cells) c = {r.get<uint32_t>(), r.get<uint32_t>()};
  for (size_t c = 0; c < layout.columns.size(); ++c) {
    if (layout.columns[c].kind != ColumnKind::fixed) continue;
    const auto len = r.get<uint32_t>();
    r.need(uint64_t{len} * 32);
    if (len > layout.n_rows) r.fail("fixed column longer than the grid");
    auto& col = layout.fixed[c];
    col.values.resize(len);
    col.assigned.assign(len, 0);
    for (auto& v : col.values) v = r.elem(p);
  }
  if (!r.done()) r.fail("trailing bytes");
  try {
    layout.validate();
  } catch (const CircuitError& e) {
    r.fail(e.what());
  }
  return layout;
}

std::string serialize_witness(const CircuitLayout& layout, const Assignment& witness) {
  Writer w;
  w.raw(kWitnessMagic, 8);
  w.put<uint32_t>(kVersion);
  w.elem(layout.field->modulus());
  w.put<uint64_t>(layout.n_rows);
  w.put<uint32_t>(static_cast<uint32_t>(layout.columns.size()));
  static const ColumnValues kEmpty;
  for (size_t c = 0; c < layout.columns.size(); ++c) {
    if (layout.columns[c].kind != ColumnKind::advice) continue;
    const ColumnValues& col = c < witness.advice.size() ? witness.advice[c] : kEmpty;
    const auto len = static_cast<uint32_t>(col.values.size());
    w.put<uint32_t>(len);
    std::string bitmap((len + 7) / 8, '\0');
    for (uint32_t i = 0; i < len; ++i) {
      if (col.is_assigned(i)) bitmap[i / 8] = static_cast<char>(bitmap[i / 8] | (1 << (i % 8)));
    }
    w.raw(bitmap.data(), bitmap.size());
    for (const auto& v : col.values) w.elem(v);
  }
  w.put<uint32_t>(static_cast<uint32_t>(witness.instance.size()));
  for (const auto& v : witness.instance) w.elem(v);
  return w.take();
}

Assignment deserialize_witness(std::string_view bytes, const CircuitLayout& layout) {
  Reader r(bytes, "witness");
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kWitnessMagic, 8) != 0) r.fail("bad magic");
  r.bytes(8);
  if (r.get<uint32_t>() != kVersion) r.fail("unsupported version");
  const U256 p = layout.field->modulus();
  if (!(r.raw_elem() == p)) r.fail("modulus does not match the layout");
  if (r.get<uint64_t>() != layout.n_rows) r.fail("row count does not match the layout");
  if (r.get<uint32_t>() != layout.columns.size()) r.fail("column count does not match the layout");
  Assignment a;
  a.resize(layout);
  for (size_t c = 0; c < layout.columns.size(); ++c) {
    if (layout.columns[c].kind != ColumnKind::advice) continue;
    const auto len = r.get<uint32_t>();
    if (len > layout.n_rows) r.fail("column longer than the grid");
    const std::string_view bitmap = r.bytes((len + 7) / 8);
    r.need(uint64_t{len} * 32);
    auto& col = a.advice[c];
    col.values.resize(len);
    col.assigned.resize(len);
    for (uint32_t i = 0; i < len; ++i) {
      col.values[i] = r.elem(p);
      col.assigned[i] = (static_cast<uint8_t>(bitmap[i / 8]) >> (i % 8)) & 1;
    }
  }
  const auto n_inst = r.get<uint32_t>();
  r.need(uint64_t{n_inst} * 32);
  a.instance.resize(n_inst);
  for (auto& v : a.instance) v = r.elem(p);
  if (!r.done()) r.fail("trailing bytes");
  return a;
}

CompileConfig load_config_file(const std::string& path) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(util::read_file(path));
  } catch (const json::exception& e) {
    throw FormatError("config " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw FormatError("config " + path + ": expected a JSON object");
  if (doc.contains("sponge_params") && doc["sponge_params"].is_string()) {
    std::filesystem::path ref = doc["sponge_params"].get<std::string>();
    if (ref.is_relative()) ref = std::filesystem::path(path).parent_path() / ref;
    if (!std::filesystem::exists(ref)) throw FormatError("config " + path + ": sponge params file " + ref.string() + " not found");
    try {
      doc["sponge_params"] = json::parse(util::read_file(ref.string()));
    } catch (const json::exception& e) {
      throw FormatError("sponge params " + ref.string() + ": " + e.what());
    }
  }
  return CompileConfig::from_json(doc.dump());
}

}  // namespace zkml
