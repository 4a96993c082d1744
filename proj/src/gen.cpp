// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "zkml/gen.hpp"

#include <algorithm>

#include "zkml/interpreter.hpp"

namespace zkml::gen {

int64_t uniform(Rng& rng, int64_t lo, int64_t hi) { return std::uniform_int_distribution<int64_t>(lo, hi)(rng); }

namespace {

bool coin(Rng& rng) { return uniform(rng, 0, 1) == 1; }

// Picks a/b so the quotient range of `bounds` spans roughly 64..1024 values.
ScaleFactor pick_scale(Rng& rng, const Bounds& bounds) {
  const int64_t span = std::max<int64_t>(1, bounds.max - bounds.min);
  const int64_t target = uniform(rng, 64, 1024);
  ScaleFactor s;
  s.a = uniform(rng, 1, 3);
  int64_t b = 1;
  while (b < ScaleFactor::kMaxDenominator && span * s.a / b > target) b <<= 1;
  s.b = b;
  return s;
}

std::vector<int8_t> random_weights(Rng& rng, int64_t n, int max_weight) {
  const int64_t lim = std::min<int64_t>(max_weight, 127);
  std::vector<int8_t> w(static_cast<size_t>(n));
  for (auto& v : w) v = static_cast<int8_t>(uniform(rng, -lim, lim));
  return w;
}

}  // namespace

ModelGraph random_model(Rng& rng, const ModelOptions& opt) {
  ModelGraph g;
  g.input_shape = Shape{1, uniform(rng, 1, opt.max_hw), uniform(rng, 1, opt.max_hw), uniform(rng, 1, opt.max_channels)};
  g.input_quant = QuantParams{static_cast<int32_t>(uniform(rng, 0, 255)), ScaleFactor{1, 1}};

  const int n_layers = static_cast<int>(uniform(rng, opt.min_layers, opt.max_layers));
  for (int attempt = 0; static_cast<int>(g.layers.size()) < n_layers && attempt < 64; ++attempt) {
    g.shapes = shape_inference(g);
    const int last = static_cast<int>(g.layers.size()) - 1;
    const Shape in = g.shape_of(last);
    const int32_t z_in = g.quant_of(last).zero_point;

    Layer layer;
    layer.inputs = {last};
    layer.activation = coin(rng) ? Activation::clip_relu : Activation::none;
    const int kind = static_cast<int>(uniform(rng, 0, 4));
    switch (kind) {
      case 0:
      case 1: {
        layer.kind = kind == 0 ? LayerKind::conv2d : LayerKind::depthwise_conv2d;
        const int64_t k = uniform(rng, 0, 2) == 0 ? 1 : 3;
        layer.stride = static_cast<int>(uniform(rng, 1, 2));
        layer.padding = coin(rng) ? Padding::same : Padding::valid;
        if (layer.padding == Padding::valid && (in.h < k || in.w < k)) layer.padding = Padding::same;
        const int64_t cout = kind == 0 ? uniform(rng, 1, opt.max_channels) : 1;
        layer.weights = WeightTensor{{cout, k, k, in.c}, random_weights(rng, cout * k * k * in.c, opt.max_weight)};
        break;
      }
      case 2: {
        if (!opt.allow_fc || in.per_sample() > 2048) continue;
        layer.kind = LayerKind::fully_connected;
        const int64_t units = uniform(rng, 1, 16);
        layer.weights = WeightTensor{{units, in.per_sample()}, random_weights(rng, units * in.per_sample(), opt.max_weight)};
        break;
      }
      case 3: {
        if (!opt.allow_residual) continue;
        std::vector<int> partners;
        for (int r = kGraphInput; r < last; ++r) {
          if (g.shape_of(r) == in && g.quant_of(r) == g.quant_of(last)) partners.push_back(r);
        }
        layer.kind = LayerKind::residual_add;
        if (partners.empty()) {
          // No earlier tensor matches: add a same-shape branch quantized like
          // its input and join the two.
          if (static_cast<int>(g.layers.size()) + 2 > n_layers) continue;
          const QuantParams q = g.quant_of(last);
          Layer branch;
          branch.inputs = {last};
          branch.kind = coin(rng) ? LayerKind::depthwise_conv2d : LayerKind::conv2d;
          branch.padding = Padding::same;
          branch.activation = coin(rng) ? Activation::clip_relu : Activation::none;
          const int64_t k = coin(rng) ? 3 : 1;
          const int64_t cout = branch.kind == LayerKind::conv2d ? in.c : 1;
          const int64_t taps = k * k * (branch.kind == LayerKind::conv2d ? in.c : 1);
          const int64_t lim = std::clamp<int64_t>(4096 * q.scale.b / (q.scale.a * taps * 510), 1, opt.max_weight);
          branch.weights = WeightTensor{{cout, k, k, in.c}, random_weights(rng, cout * k * k * in.c, static_cast<int>(lim))};
          branch.out_quant = q;
          ModelGraph probe = g;
          probe.layers.push_back(branch);
          const Bounds bb = accumulator_bounds(probe).back();
          if (scale_floor(bb.max, q.scale) - scale_floor(bb.min, q.scale) >= (int64_t{1} << 16)) continue;
          g.layers.push_back(std::move(branch));
          layer.inputs = {last + 1, last};
        } else {
          layer.inputs.push_back(partners[static_cast<size_t>(uniform(rng, 0, static_cast<int64_t>(partners.size()) - 1))]);
        }
        if (coin(rng)) {
          layer.out_quant = QuantParams{z_in, ScaleFactor{1, 1}};
        } else {
          layer.out_quant = QuantParams{static_cast<int32_t>(uniform(rng, 0, 255)),
                                        pick_scale(rng, Bounds{-2 * int64_t{z_in}, 2 * (255 - int64_t{z_in})})};
        }
        g.layers.push_back(layer);
        continue;
      }
      case 4: {
        if (!opt.allow_pool) continue;
        layer.kind = LayerKind::average_pool;
        layer.padding = Padding::valid;
        layer.stride = (in.h >= 2 && in.w >= 2 && coin(rng)) ? 2 : 0;
        layer.out_quant = QuantParams{z_in, ScaleFactor{1, layer.stride == 0 ? in.h * in.w : 4}};
        g.layers.push_back(layer);
        continue;
      }
    }

    // Bias and scale for linear layers, sized from the accumulator bounds.
    const Bounds raw = [&] {
      ModelGraph probe = g;
      probe.layers.push_back(layer);
      return accumulator_bounds(probe).back();
    }();
    if (coin(rng)) {
      const int64_t units = layer.kind == LayerKind::depthwise_conv2d ? layer.weights->dims[3] : layer.weights->dims[0];
      const int64_t lim = std::max<int64_t>(1, (raw.max - raw.min) / 4);
      std::vector<int32_t> bias(static_cast<size_t>(units));
      for (auto& b : bias) b = static_cast<int32_t>(uniform(rng, -lim, lim));
      layer.bias = std::move(bias);
    }
    ModelGraph probe = g;
    probe.layers.push_back(layer);
    const Bounds bounds = accumulator_bounds(probe).back();
    layer.out_quant = QuantParams{static_cast<int32_t>(uniform(rng, 0, 255)), pick_scale(rng, bounds)};
    g.layers.push_back(std::move(layer));
  }
  if (g.layers.empty()) {
    Layer pool;
    pool.kind = LayerKind::average_pool;
    pool.stride = 0;
    pool.inputs = {kGraphInput};
    pool.out_quant = QuantParams{g.input_quant.zero_point, ScaleFactor{1, g.input_shape.h * g.input_shape.w}};
    g.layers.push_back(pool);
  }
  validate_graph(g);
  return g;
}

QuantTensor random_input(Rng& rng, const ModelGraph& graph) {
  QuantTensor t;
  t.shape = graph.input_shape;
  t.quant = graph.input_quant;
  t.data.resize(static_cast<size_t>(t.shape.elements()));
  for (auto& v : t.data) v = static_cast<uint8_t>(uniform(rng, 0, 255));
  return t;
}

}  // namespace zkml::gen
