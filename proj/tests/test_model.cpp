// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "json.hpp"
#include "util/codec.hpp"
#include "zkml/gen.hpp"
#include "zkml/interpreter.hpp"
#include "zkml/model.hpp"

using namespace zkml;
using nlohmann::json;

namespace {

std::string b64(const std::vector<int>& bytes) {
  std::vector<uint8_t> raw;
  for (int v : bytes) raw.push_back(static_cast<uint8_t>(v));
  return util::base64_encode(raw.data(), raw.size());
}

json quant(int z, int64_t a, int64_t b) { return json{{"zero_point", z}, {"scale", {{"a", a}, {"b", b}}}}; }

json fc_model() {
  return json{{"version", 1},
              {"input_shape", {1, 2}},
              {"input_quant", quant(0, 1, 1)},
              {"layers",
               {{{"kind", "fully_connected"},
                 {"weights", {{"shape", {1, 2}}, {"data_b64", b64({1, 2})}}},
                 {"out_quant", quant(0, 1, 4)},
                 {"activation", "clip_relu"}},
                {{"kind", "output"}}}}};
}

json conv_model(int in_c, int w_c) {
  std::vector<int> w(static_cast<size_t>(9 * w_c * 2), 1);
  return json{{"version", 1},
              {"input_shape", {1, 8, 8, in_c}},
              {"input_quant", quant(128, 1, 1)},
              {"layers",
               {{{"kind", "conv2d"},
                 {"weights", {{"shape", {2, 3, 3, w_c}}, {"data_b64", b64(w)}}},
                 {"padding", "valid"},
                 {"out_quant", quant(0, 1, 16)}}}}};
}

}  // namespace

TEST_CASE("minimal fully connected file") {
  const ModelGraph g = load_model(fc_model().dump());
  REQUIRE(g.layers.size() == 2);
  CHECK(g.layers[0].kind == LayerKind::fully_connected);
  CHECK(g.layers[1].kind == LayerKind::output);
  CHECK(g.shapes[0] == Shape{1, 1, 1, 1});
  CHECK(g.input_shape == Shape{1, 1, 1, 2});
}

TEST_CASE("output layer is appended when missing") {
  const ModelGraph g = load_model(conv_model(1, 1).dump());
  REQUIRE(g.layers.size() == 2);
  CHECK(g.layers.back().kind == LayerKind::output);
  CHECK(g.shapes[0] == Shape{1, 6, 6, 2});
}

TEST_CASE("load errors") {
  json bad = fc_model();
  bad["layers"][0]["out_quant"]["scale"]["b"] = 0;
  CHECK_THROWS_WITH_AS(load_model(bad.dump()), doctest::Contains("invalid scale factor"), ModelError);

  bad = fc_model();
  bad["layers"][0]["out_quant"]["scale"]["b"] = (1 << 24) + 1;
  CHECK_THROWS_WITH_AS(load_model(bad.dump()), doctest::Contains("invalid scale factor"), ModelError);

  CHECK_THROWS_WITH_AS(load_model(conv_model(2, 1).dump()), doctest::Contains("shape mismatch"), ModelError);

  bad = fc_model();
  bad["layers"][0]["inputs"] = {3};
  CHECK_THROWS_WITH_AS(load_model(bad.dump()), doctest::Contains("dangling input reference"), ModelError);

  bad = fc_model();
  bad["layers"][0]["colour"] = "red";
  CHECK_THROWS_AS(load_model(bad.dump()), ModelError);

  bad = fc_model();
  bad["version"] = 2;
  CHECK_THROWS_AS(load_model(bad.dump()), ModelError);

  bad = fc_model();
  bad["input_quant"]["zero_point"] = 256;
  CHECK_THROWS_AS(load_model(bad.dump()), ModelError);

  bad = fc_model();
  bad["layers"][0]["weights"]["data_b64"] = b64({1});
  CHECK_THROWS_AS(load_model(bad.dump()), ModelError);

  CHECK_THROWS_AS(load_model("{not json"), Error);
}

TEST_CASE("shape inference examples") {
  auto single = [](Shape in, LayerKind kind, std::vector<int64_t> wdims, int stride, Padding pad) {
    ModelGraph g;
    g.input_shape = in;
    Layer l;
    l.kind = kind;
    l.stride = stride;
    l.padding = pad;
    l.inputs = {kGraphInput};
    if (!wdims.empty()) {
      WeightTensor w;
      w.dims = wdims;
      int64_t n = 1;
      for (auto d : wdims) n *= d;
      w.data.assign(static_cast<size_t>(n), 1);
      l.weights = w;
    }
    g.layers.push_back(l);
    return shape_inference(g)[0];
  };
  CHECK(single({1, 8, 8, 1}, LayerKind::conv2d, {5, 3, 3, 1}, 1, Padding::valid) == Shape{1, 6, 6, 5});
  CHECK(single({1, 96, 96, 8}, LayerKind::depthwise_conv2d, {1, 3, 3, 8}, 2, Padding::same) == Shape{1, 48, 48, 8});
  CHECK(single({1, 6, 6, 4}, LayerKind::fully_connected, {10, 144}, 1, Padding::valid) == Shape{1, 1, 1, 10});
  CHECK(single({1, 7, 7, 3}, LayerKind::average_pool, {}, 0, Padding::valid) == Shape{1, 1, 1, 3});
  CHECK(single({1, 7, 7, 3}, LayerKind::average_pool, {}, 2, Padding::valid) == Shape{1, 3, 3, 3});
  CHECK_THROWS_WITH_AS(single({1, 2, 2, 1}, LayerKind::conv2d, {1, 3, 3, 1}, 1, Padding::valid),
                       doctest::Contains("non-positive output dim"), ModelError);
}

TEST_CASE("accumulator bound examples") {
  const int8_t one = 1;
  CHECK(dot_bounds(&one, 1, 0, 0) == Bounds{0, 255});
  CHECK(dot_bounds(&one, 1, 255, 0) == Bounds{-255, 0});
  const std::vector<int8_t> ones(9, 1);
  CHECK(dot_bounds(ones.data(), 9, 128, 0) == Bounds{-1152, 1143});

  // Brute-force oracle: the extremes of a separable sum sit at x in {0, 255}.
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 1 + rng() % 9;
    std::vector<int8_t> w(n);
    for (auto& v : w) v = static_cast<int8_t>(rng());
    const int32_t z = static_cast<int32_t>(rng() % 256);
    const int64_t bias = static_cast<int64_t>(rng() % 2001) - 1000;
    int64_t lo = INT64_MAX, hi = INT64_MIN;
    for (uint32_t mask = 0; mask < (1u << n); ++mask) {
      int64_t s = bias;
      for (size_t i = 0; i < n; ++i) s += (((mask >> i) & 1) ? 255 - z : -z) * int64_t{w[i]};
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    CHECK(dot_bounds(w.data(), n, z, bias) == Bounds{lo, hi});
  }
}

TEST_CASE("property: bounds contain every observed accumulator") {
  gen::Rng rng(2024);
  for (int m = 0; m < 30; ++m) {
    const ModelGraph g = gen::random_model(rng);
    const auto bounds = accumulator_bounds(g);
    for (int t = 0; t < 100; ++t) {
      QuantTensor x = gen::random_input(rng, g);
      // Saturated inputs drive the accumulators to their extremes.
      if (t == 0) std::fill(x.data.begin(), x.data.end(), 0);
      if (t == 1) std::fill(x.data.begin(), x.data.end(), 255);
      const InferenceTrace tr = run_inference(g, x);
      for (size_t l = 0; l < g.layers.size(); ++l) {
        for (int32_t a : tr.layers[l].acc) {
          REQUIRE(a >= bounds[l].min);
          REQUIRE(a <= bounds[l].max);
        }
      }
    }
  }
}

TEST_CASE("property: save and load round-trip") {
  gen::Rng rng(99);
  for (int m = 0; m < 100; ++m) {
    const ModelGraph g = gen::random_model(rng);
    const std::string text = save_model(g);
    const ModelGraph back = load_model(text);
    REQUIRE(back == g);
    REQUIRE(save_model(back) == text);
  }
}

TEST_CASE("derived quantization for non-parametric layers") {
  json doc = conv_model(1, 1);
  doc["layers"].push_back({{"kind", "average_pool"}, {"stride", 2}});
  doc["layers"].push_back({{"kind", "residual_add"}, {"inputs", {1, 1}}});
  const ModelGraph g = load_model(doc.dump());
  CHECK(g.layers[1].out_quant == QuantParams{0, ScaleFactor{1, 4}});
  CHECK(g.layers[2].out_quant == QuantParams{0, ScaleFactor{1, 1}});
  CHECK(g.shapes[1] == Shape{1, 3, 3, 2});

  json mixed = conv_model(2, 2);
  mixed["layers"][0]["padding"] = "same";
  mixed["layers"].push_back({{"kind", "residual_add"}, {"inputs", {0, -1}}});
  CHECK_THROWS_WITH_AS(load_model(mixed.dump()), doctest::Contains("share quantization"), ModelError);
}

TEST_CASE("tensor files") {
  const json t{{"shape", {1, 2, 2, 1}}, {"data_b64", b64({0, 1, 254, 255})}, {"quant", quant(7, 1, 1)}};
  const QuantTensor x = load_tensor(t.dump());
  CHECK(x.data == std::vector<uint8_t>{0, 1, 254, 255});
  CHECK(x.quant.zero_point == 7);
  CHECK(load_tensor(save_tensor(x)).data == x.data);
  json no_quant = t;
  no_quant.erase("quant");
  CHECK_THROWS_AS(load_tensor(no_quant.dump()), ModelError);
  CHECK(load_tensor(no_quant.dump(), QuantParams{3, {1, 1}}).quant.zero_point == 3);
  json short_data = t;
  short_data["data_b64"] = b64({1, 2});
  CHECK_THROWS_AS(load_tensor(short_data.dump()), ModelError);
}
