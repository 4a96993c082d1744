// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "zkml/gen.hpp"
#include "zkml/interpreter.hpp"
#include "zkml/kernels.hpp"

using namespace zkml;

namespace {

int64_t floor_div(int64_t n, int64_t d) {
  int64_t q = n / d;
  if ((n % d != 0) && ((n < 0) != (d < 0))) --q;
  return q;
}

uint8_t requant(int64_t acc, const QuantParams& q) {
  const int64_t v = floor_div(acc * q.scale.a, q.scale.b) + q.zero_point;
  return static_cast<uint8_t>(v < 0 ? 0 : v > 255 ? 255 : v);
}

struct Ref {
  std::vector<std::vector<int64_t>> acc;
  std::vector<std::vector<uint8_t>> act;
  std::vector<int64_t> logits;
};

// Direct nested-loop evaluation, written without the library's geometry helpers.
Ref reference(const ModelGraph& g, const QuantTensor& x) {
  Ref r;
  auto codes = [&](int ref) -> const std::vector<uint8_t>& { return ref < 0 ? x.data : r.act[static_cast<size_t>(ref)]; };
  auto shape = [&](int ref) { return ref < 0 ? g.input_shape : g.shapes[static_cast<size_t>(ref)]; };
  for (size_t li = 0; li < g.layers.size(); ++li) {
    const Layer& L = g.layers[li];
    const Shape in = shape(L.inputs[0]);
    const auto& xin = codes(L.inputs[0]);
    const int64_t z = L.inputs[0] < 0 ? g.input_quant.zero_point : g.layers[static_cast<size_t>(L.inputs[0])].out_quant.zero_point;
    std::vector<int64_t> acc;
    auto at = [&](int64_t h, int64_t w, int64_t c) { return int64_t{xin[static_cast<size_t>((h * in.w + w) * in.c + c)]}; };

    if (L.kind == LayerKind::conv2d || L.kind == LayerKind::depthwise_conv2d || L.kind == LayerKind::average_pool) {
      int64_t kh, kw, s;
      if (L.kind == LayerKind::average_pool) {
        kh = L.stride == 0 ? in.h : L.stride;
        kw = L.stride == 0 ? in.w : L.stride;
        s = L.stride == 0 ? 1 : L.stride;
      } else {
        kh = L.weights->dims[1];
        kw = L.weights->dims[2];
        s = L.stride;
      }
      int64_t oh, ow, pt = 0, pl = 0;
      if (L.padding == Padding::same) {
        oh = (in.h + s - 1) / s;
        ow = (in.w + s - 1) / s;
        pt = std::max<int64_t>(0, (oh - 1) * s + kh - in.h) / 2;
        pl = std::max<int64_t>(0, (ow - 1) * s + kw - in.w) / 2;
      } else {
        oh = (in.h - kh) / s + 1;
        ow = (in.w - kw) / s + 1;
      }
      const int64_t oc = L.kind == LayerKind::conv2d ? L.weights->dims[0] : in.c;
      for (int64_t y = 0; y < oh; ++y) {
        for (int64_t xx = 0; xx < ow; ++xx) {
          for (int64_t o = 0; o < oc; ++o) {
            int64_t sum = L.bias ? (*L.bias)[static_cast<size_t>(o)] : 0;
            for (int64_t i = 0; i < kh; ++i) {
              for (int64_t j = 0; j < kw; ++j) {
                const int64_t h = y * s + i - pt, w = xx * s + j - pl;
                if (h < 0 || w < 0 || h >= in.h || w >= in.w) continue;
                if (L.kind == LayerKind::conv2d) {
                  for (int64_t c = 0; c < in.c; ++c) {
                    sum += (at(h, w, c) - z) * L.weights->data[static_cast<size_t>(((o * kh + i) * kw + j) * in.c + c)];
                  }
                } else if (L.kind == LayerKind::depthwise_conv2d) {
                  sum += (at(h, w, o) - z) * L.weights->data[static_cast<size_t>((i * kw + j) * in.c + o)];
                } else {
                  sum += at(h, w, o) - z;
                }
              }
            }
            acc.push_back(sum);
          }
        }
      }
    } else if (L.kind == LayerKind::fully_connected) {
      const int64_t units = L.weights->dims[0], feat = L.weights->dims[1];
      for (int64_t u = 0; u < units; ++u) {
        int64_t sum = L.bias ? (*L.bias)[static_cast<size_t>(u)] : 0;
        for (int64_t k = 0; k < feat; ++k) sum += (int64_t{xin[static_cast<size_t>(k)]} - z) * L.weights->data[static_cast<size_t>(u * feat + k)];
        acc.push_back(sum);
      }
    } else if (L.kind == LayerKind::residual_add) {
      const auto& x2 = codes(L.inputs[1]);
      for (size_t i = 0; i < xin.size(); ++i) acc.push_back((int64_t{xin[i]} - z) + (int64_t{x2[i]} - z));
    } else {
      // output: the producer's accumulators, or raw codes for the graph input
      if (L.inputs[0] < 0) {
        for (uint8_t v : xin) acc.push_back(v);
      } else {
        acc = r.acc[static_cast<size_t>(L.inputs[0])];
      }
      r.logits = acc;
    }
    std::vector<uint8_t> act;
    if (L.kind != LayerKind::output) {
      for (int64_t a : acc) act.push_back(requant(a, L.out_quant));
    }
    r.acc.push_back(std::move(acc));
    r.act.push_back(std::move(act));
  }
  return r;
}

}  // namespace

TEST_CASE("clip_and_scale examples") {
  CHECK(clip_and_scale(100, {1, 3}, 0) == 33);
  CHECK(clip_and_scale(-50, {2, 4}, 0) == 0);
  CHECK(clip_and_scale(1000, {1, 2}, 10) == 255);
  CHECK(scale_floor(-7, {1, 2}) == -4);
  CHECK(scale_floor(7, {1, 2}) == 3);
  CHECK(scale_floor(-2147483648LL, {2147483647LL, 1}) == -2147483648LL * 2147483647LL);
  CHECK(clip_and_scale(-7, {1, 2}, 100) == 96);
}

TEST_CASE("clip_and_scale is monotone in c") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 200; ++t) {
    const ScaleFactor s{static_cast<int64_t>(1 + rng() % 1000), static_cast<int64_t>(1 + rng() % 100000)};
    const int32_t z = static_cast<int32_t>(rng() % 256);
    int prev = -1;
    for (int64_t c = -70000; c <= 70000; c += 1 + static_cast<int64_t>(rng() % 97)) {
      const int v = clip_and_scale(c, s, z);
      REQUIRE(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("identity and two-tap examples") {
  ModelGraph g;
  g.input_shape = {1, 1, 1, 1};
  g.input_quant = {0, {1, 1}};
  Layer conv;
  conv.kind = LayerKind::conv2d;
  conv.weights = WeightTensor{{1, 1, 1, 1}, {1}};
  conv.inputs = {kGraphInput};
  conv.out_quant = {0, {1, 1}};
  g.layers.push_back(conv);
  validate_graph(g);
  QuantTensor x{{1, 1, 1, 1}, {7}, g.input_quant};
  CHECK(run_inference(g, x).layers[0].act[0] == 7);

  ModelGraph f;
  f.input_shape = {1, 1, 1, 2};
  f.input_quant = {1, {1, 1}};
  Layer fc;
  fc.kind = LayerKind::fully_connected;
  fc.weights = WeightTensor{{1, 2}, {4, 5}};
  fc.inputs = {kGraphInput};
  fc.out_quant = {0, {1, 2}};
  f.layers.push_back(fc);
  validate_graph(f);
  const InferenceTrace tr = run_inference(f, QuantTensor{{1, 1, 1, 2}, {2, 3}, f.input_quant});
  CHECK(tr.layers[0].acc[0] == 14);
  CHECK(tr.layers[0].act[0] == 7);
  CHECK(tr.logits == std::vector<int64_t>{14});
}

TEST_CASE("random 2-layer CNN on an 8x8 input matches the direct oracle") {
  gen::Rng rng(77);
  for (int t = 0; t < 50; ++t) {
    ModelGraph g;
    g.input_shape = {1, 8, 8, 1 + static_cast<int64_t>(rng() % 4)};
    g.input_quant = {static_cast<int32_t>(rng() % 256), {1, 1}};
    for (int l = 0; l < 2; ++l) {
      const Shape in = l == 0 ? g.input_shape : shape_inference(g)[0];
      Layer c;
      c.kind = LayerKind::conv2d;
      const int64_t k = 3, cout = 1 + static_cast<int64_t>(rng() % 4);
      std::vector<int8_t> w(static_cast<size_t>(cout * k * k * in.c));
      for (auto& v : w) v = static_cast<int8_t>(rng());
      c.weights = WeightTensor{{cout, k, k, in.c}, w};
      c.stride = 1 + static_cast<int>(rng() % 2);
      c.padding = rng() % 2 ? Padding::same : Padding::valid;
      c.inputs = {l - 1};
      c.out_quant = {static_cast<int32_t>(rng() % 256), {1 + static_cast<int64_t>(rng() % 3), 256}};
      g.layers.push_back(c);
    }
    validate_graph(g);
    const QuantTensor x = gen::random_input(rng, g);
    const InferenceTrace tr = run_inference(g, x);
    const Ref ref = reference(g, x);
    for (size_t l = 0; l < g.layers.size(); ++l) {
      REQUIRE(std::vector<int64_t>(tr.layers[l].acc.begin(), tr.layers[l].acc.end()) == ref.acc[l]);
      REQUIRE(tr.layers[l].act == ref.act[l]);
    }
    REQUIRE(tr.logits == ref.logits);
  }
}

TEST_CASE("property: random graphs match the direct oracle under every kernel variant") {
  gen::Rng rng(1234);
  const auto saved = kernels::active_isa();
  for (int t = 0; t < 150; ++t) {
    const ModelGraph g = gen::random_model(rng);
    const QuantTensor x = gen::random_input(rng, g);
    const Ref ref = reference(g, x);
    for (auto isa : kernels::available_isas()) {
      kernels::force_isa(isa);
      const InferenceTrace tr = run_inference(g, x);
      for (size_t l = 0; l < g.layers.size(); ++l) {
        REQUIRE(std::vector<int64_t>(tr.layers[l].acc.begin(), tr.layers[l].acc.end()) == ref.acc[l]);
        REQUIRE(tr.layers[l].act == ref.act[l]);
      }
      REQUIRE(tr.logits == ref.logits);
    }
  }
  kernels::force_isa(saved);
}

TEST_CASE("determinism and input validation") {
  gen::Rng rng(5);
  const ModelGraph g = gen::random_model(rng);
  const QuantTensor x = gen::random_input(rng, g);
  CHECK(trace_json(g, run_inference(g, x)) == trace_json(g, run_inference(g, x)));
  QuantTensor bad = x;
  bad.shape.c += 1;
  bad.data.resize(static_cast<size_t>(bad.shape.elements()));
  CHECK_THROWS_WITH_AS(run_inference(g, bad), doctest::Contains("does not match"), ModelError);
  QuantTensor badq = x;
  badq.quant.zero_point = (x.quant.zero_point + 1) % 256;
  CHECK_THROWS_WITH_AS(run_inference(g, badq), doctest::Contains("quantization does not match"), ModelError);
}
