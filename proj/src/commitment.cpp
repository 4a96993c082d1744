// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "zkml/commitment.hpp"

#include "json.hpp"
#include "util/codec.hpp"
#include "zkml/interpreter.hpp"

namespace zkml {

void SpongeParams::validate() const {
  if (t < 2 || t > 16) throw FieldError("sponge width t must be in [2, 16]");
  if (full_rounds < 2 || full_rounds % 2 != 0) throw FieldError("full round count must be even and at least 2");
  if (partial_rounds < 0 || partial_rounds > 1000) throw FieldError("partial round count out of range");
  if (seed.empty()) throw FieldError("sponge seed must be non-empty");
}

SpongeParams SpongeParams::from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed sponge params: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("sponge params must be a JSON object");
  SpongeParams p;
  for (const auto& [key, v] : doc.items()) {
    if (key == "seed" && v.is_string()) {
      p.seed = v.get<std::string>();
    } else if (key == "t" && v.is_number_integer()) {
      p.t = v.get<int>();
    } else if (key == "R_F" && v.is_number_integer()) {
      p.full_rounds = v.get<int>();
    } else if (key == "R_P" && v.is_number_integer()) {
      p.partial_rounds = v.get<int>();
    } else {
      throw FormatError("sponge params: unknown or mistyped field '" + key + "'");
    }
  }
  p.validate();
  return p;
}

std::string SpongeParams::to_json() const {
  return nlohmann::json{{"seed", seed}, {"t", t}, {"R_F", full_rounds}, {"R_P", partial_rounds}}.dump();
}

SeededStream::SeededStream(const Field& field, std::string_view seed, std::string_view label)
    : field_(field), prefix_(std::string(seed) + "/" + std::string(label) + "/") {}

U256 SeededStream::next() {
  const unsigned bits = field_.modulus().bit_length();
  for (;;) {
    std::string block = prefix_;
    for (int i = 7; i >= 0; --i) block.push_back(static_cast<char>(counter_ >> (8 * i)));
    ++counter_;
    auto digest = util::sha256(block.data(), block.size());
    U256 v = U256::from_bytes_le(digest.data());
    for (unsigned i = bits; i < 256; ++i) v.limb[i / 64] &= ~(uint64_t{1} << (i % 64));
    if (v < field_.modulus()) return v;
  }
}

Sponge::Sponge(std::shared_ptr<const Field> field, SpongeParams params)
    : field_(std::move(field)), params_(std::move(params)) {
  params_.validate();
  const Field& f = *field_;
  U256 p_minus_1 = f.modulus();
  U256::sub_from(p_minus_1, U256(1));
  if (p_minus_1.mod_small(5) == 0) throw FieldError("x^5 is not a permutation of this field (5 divides p - 1)");

  const auto t = static_cast<size_t>(params_.t);
  SeededStream rc_stream(f, params_.seed, "round-constants");
  rc_.assign(static_cast<size_t>(params_.rounds()), std::vector<U256>(t));
  for (auto& round : rc_) {
    for (auto& c : round) c = rc_stream.next();
  }

  // Cauchy matrix 1 / (x_i + y_j): invertible whenever the x_i are distinct,
  // the y_j are distinct and no x_i + y_j vanishes.
  SeededStream mds_stream(f, params_.seed, "mds");
  for (;;) {
    std::vector<U256> xs(t), ys(t);
    for (auto& x : xs) x = mds_stream.next();
    for (auto& y : ys) y = mds_stream.next();
    bool ok = true;
    for (size_t i = 0; i < t && ok; ++i) {
      for (size_t j = i + 1; j < t && ok; ++j) ok = xs[i] != xs[j] && ys[i] != ys[j];
      for (size_t j = 0; j < t && ok; ++j) ok = !f.add(xs[i], ys[j]).is_zero();
    }
    if (!ok) continue;
    mds_.assign(t, std::vector<U256>(t));
    for (size_t i = 0; i < t; ++i) {
      for (size_t j = 0; j < t; ++j) mds_[i][j] = f.inv(f.add(xs[i], ys[j]));
    }
    break;
  }
}

void Sponge::round(std::vector<U256>& state, int r) const {
  const Field& f = *field_;
  const size_t t = state.size();
  const auto& rc = rc_[static_cast<size_t>(r)];
  const bool full = params_.is_full_round(r);
  for (size_t i = 0; i < t; ++i) {
    state[i] = f.add(state[i], rc[i]);
    if (full || i == 0) {
      const U256 sq = f.mul(state[i], state[i]);
      state[i] = f.mul(f.mul(sq, sq), state[i]);
    }
  }
  std::vector<U256> out(t);
  for (size_t i = 0; i < t; ++i) {
    U256 acc;
    for (size_t j = 0; j < t; ++j) acc = f.add(acc, f.mul(mds_[i][j], state[j]));
    out[i] = acc;
  }
  state = std::move(out);
}

void Sponge::permute(std::vector<U256>& state) const {
  if (state.size() != static_cast<size_t>(params_.t)) throw FieldError("sponge state has the wrong width");
  for (int r = 0; r < params_.rounds(); ++r) round(state, r);
}

U256 Sponge::hash(const std::vector<U256>& elements) const {
  if (elements.empty()) throw FieldError("cannot hash an empty input");
  const Field& f = *field_;
  const auto rate = static_cast<size_t>(params_.rate());
  std::vector<U256> state(static_cast<size_t>(params_.t));
  state[0] = f.reduce(U256(elements.size()));
  for (size_t off = 0; off < elements.size(); off += rate) {
    for (size_t k = 0; k < rate && off + k < elements.size(); ++k) {
      state[1 + k] = f.add(state[1 + k], elements[off + k]);
    }
    permute(state);
  }
  return state[1];
}

std::string_view to_string(Visibility v) {
  switch (v) {
    case Visibility::hidden_input_public_weights: return "hidden_input_public_weights";
    case Visibility::public_input_hidden_weights: return "public_input_hidden_weights";
    case Visibility::hidden_input_hidden_weights: return "hidden_input_hidden_weights";
  }
  return "?";
}

Visibility parse_visibility(std::string_view s) {
  if (s == "hidden_input_public_weights") return Visibility::hidden_input_public_weights;
  if (s == "public_input_hidden_weights") return Visibility::public_input_hidden_weights;
  if (s == "hidden_input_hidden_weights") return Visibility::hidden_input_hidden_weights;
  throw FormatError("unknown visibility mode '" + std::string(s) + "'");
}

std::vector<U256> input_elements(const Field& field, const QuantTensor& input) {
  std::vector<U256> out;
  out.reserve(input.data.size());
  for (uint8_t v : input.data) out.push_back(field.from_i64(v));
  return out;
}

std::vector<U256> weight_elements(const Field& field, const ModelGraph& graph) {
  std::vector<U256> out;
  for (const Layer& layer : graph.layers) {
    if (!layer.is_linear()) continue;
    for (int8_t w : layer.weights->data) out.push_back(field.from_i64(w));
    if (layer.bias) {
      for (int32_t b : *layer.bias) out.push_back(field.from_i64(b));
    }
  }
  return out;
}

Commitment commit_model_io(const Sponge& sponge, const ModelGraph& graph, const QuantTensor& input, Visibility mode) {
  const Field& f = sponge.field();
  const InferenceTrace trace = run_inference(graph, input);
  Commitment c;
  for (int64_t v : trace.logits) c.instance.push_back(f.from_i64(v));
  const std::vector<U256> inputs = input_elements(f, input);
  if (input_hidden(mode)) {
    c.input_digest = sponge.hash(inputs);
    c.instance.push_back(*c.input_digest);
  }
  if (weights_hidden(mode)) {
    const std::vector<U256> weights = weight_elements(f, graph);
    if (!weights.empty()) {
      c.weight_digest = sponge.hash(weights);
      c.instance.push_back(*c.weight_digest);
    }
  }
  if (!input_hidden(mode)) c.instance.insert(c.instance.end(), inputs.begin(), inputs.end());
  return c;
}

}  // namespace zkml
