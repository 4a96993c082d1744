// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "zkml/interpreter.hpp"

#include <algorithm>

#include "json.hpp"
#include "zkml/kernels.hpp"

namespace zkml {

int64_t scale_floor(int64_t c, const ScaleFactor& s) {
  const __int128 num = static_cast<__int128>(c) * s.a;
  __int128 q = num / s.b;
  if (num % s.b != 0 && num < 0) --q;
  return static_cast<int64_t>(q);
}

uint8_t clip_and_scale(int64_t c, const ScaleFactor& s, int32_t z_out, int32_t lo, int32_t hi) {
  const int64_t v = scale_floor(c, s) + z_out;
  return static_cast<uint8_t>(std::clamp<int64_t>(v, lo, hi));
}

namespace {

void conv_like(const Layer& layer, const WindowGeometry& g, const Shape& in, const Shape& out,
               const std::vector<uint8_t>& x, int32_t z, std::vector<int32_t>& acc) {
  const auto& w = *layer.weights;
  const bool depthwise = layer.kind == LayerKind::depthwise_conv2d;
  const int64_t cin = in.c;
  const int64_t cout = out.c;
  std::vector<int32_t> row(static_cast<size_t>(cout));
  for (int64_t n = 0; n < out.n; ++n) {
    for (int64_t oy = 0; oy < out.h; ++oy) {
      for (int64_t ox = 0; ox < out.w; ++ox) {
        if (layer.bias) {
          std::copy(layer.bias->begin(), layer.bias->end(), row.begin());
        } else {
          std::fill(row.begin(), row.end(), 0);
        }
        for (int64_t ky = 0; ky < g.kh; ++ky) {
          const int64_t iy = oy * g.stride + ky - g.pad_top;
          if (iy < 0 || iy >= in.h) continue;
          for (int64_t kx = 0; kx < g.kw; ++kx) {
            const int64_t ix = ox * g.stride + kx - g.pad_left;
            if (ix < 0 || ix >= in.w) continue;
            const uint8_t* xp = x.data() + ((n * in.h + iy) * in.w + ix) * cin;
            if (depthwise) {
              const int8_t* wp = w.data.data() + (ky * g.kw + kx) * cin;
              kernels::madd_u8s8(row.data(), xp, wp, static_cast<size_t>(cin), z);
            } else {
              for (int64_t k = 0; k < cout; ++k) {
                const int8_t* wp = w.data.data() + ((k * g.kh + ky) * g.kw + kx) * cin;
                row[static_cast<size_t>(k)] += kernels::dot_u8s8(xp, wp, static_cast<size_t>(cin), z);
              }
            }
          }
        }
        std::copy(row.begin(), row.end(), acc.begin() + ((n * out.h + oy) * out.w + ox) * cout);
      }
    }
  }
}

}  // namespace

const std::vector<uint8_t>& activations_of(const InferenceTrace& trace, const QuantTensor& input, int ref) {
  return ref == kGraphInput ? input.data : trace.layers.at(static_cast<size_t>(ref)).act;
}

InferenceTrace run_inference(const ModelGraph& graph, const QuantTensor& input) {
  if (!(input.shape == graph.input_shape)) {
    throw ModelError("input shape " + input.shape.str() + " does not match model input " + graph.input_shape.str());
  }
  if (!(input.quant == graph.input_quant)) throw ModelError("input quantization does not match model input");
  if (static_cast<int64_t>(input.data.size()) != input.shape.elements()) throw ModelError("input data length mismatch");

  InferenceTrace trace;
  trace.layers.reserve(graph.layers.size());
  for (size_t i = 0; i < graph.layers.size(); ++i) {
    const Layer& layer = graph.layers[i];
    LayerTrace lt;
    lt.shape = graph.shapes.at(i);
    const int src = layer.inputs.at(0);
    const Shape& in = graph.shape_of(src);
    const std::vector<uint8_t>& x = activations_of(trace, input, src);
    const int32_t z = graph.quant_of(src).zero_point;
    lt.acc.assign(static_cast<size_t>(lt.shape.elements()), 0);

    switch (layer.kind) {
      case LayerKind::conv2d:
      case LayerKind::depthwise_conv2d:
        conv_like(layer, window_geometry(graph, static_cast<int>(i)), in, lt.shape, x, z, lt.acc);
        break;
      case LayerKind::fully_connected: {
        const auto& w = *layer.weights;
        const int64_t units = lt.shape.c;
        const int64_t k = in.per_sample();
        for (int64_t n = 0; n < in.n; ++n) {
          for (int64_t u = 0; u < units; ++u) {
            int32_t v = kernels::dot_u8s8(x.data() + n * k, w.data.data() + u * k, static_cast<size_t>(k), z);
            if (layer.bias) v += (*layer.bias)[static_cast<size_t>(u)];
            lt.acc[static_cast<size_t>(n * units + u)] = v;
          }
        }
        break;
      }
      case LayerKind::residual_add: {
        const std::vector<uint8_t>& x2 = activations_of(trace, input, layer.inputs.at(1));
        kernels::add_centered_u8(lt.acc.data(), x.data(), x.size(), z);
        kernels::add_centered_u8(lt.acc.data(), x2.data(), x2.size(), z);
        break;
      }
      case LayerKind::average_pool: {
        const WindowGeometry g = window_geometry(graph, static_cast<int>(i));
        const Shape& out = lt.shape;
        for (int64_t n = 0; n < out.n; ++n) {
          for (int64_t oy = 0; oy < out.h; ++oy) {
            for (int64_t ox = 0; ox < out.w; ++ox) {
              int32_t* dst = lt.acc.data() + ((n * out.h + oy) * out.w + ox) * out.c;
              for (int64_t ky = 0; ky < g.kh; ++ky) {
                for (int64_t kx = 0; kx < g.kw; ++kx) {
                  const int64_t iy = oy * g.stride + ky;
                  const int64_t ix = ox * g.stride + kx;
                  kernels::add_centered_u8(dst, x.data() + ((n * in.h + iy) * in.w + ix) * in.c,
                                           static_cast<size_t>(in.c), z);
                }
              }
            }
          }
        }
        break;
      }
      case LayerKind::output: {
        if (src == kGraphInput) {
          std::copy(x.begin(), x.end(), lt.acc.begin());
        } else {
          lt.acc = trace.layers.at(static_cast<size_t>(src)).acc;
        }
        trace.logits.assign(lt.acc.begin(), lt.acc.end());
        break;
      }
    }

    if (layer.kind != LayerKind::output) {
      lt.act.resize(lt.acc.size());
      for (size_t j = 0; j < lt.acc.size(); ++j) {
        lt.act[j] = clip_and_scale(lt.acc[j], layer.out_quant.scale, layer.out_quant.zero_point);
      }
    }
    trace.layers.push_back(std::move(lt));
  }
  return trace;
}

std::string trace_json(const ModelGraph& graph, const InferenceTrace& trace) {
  nlohmann::json layers = nlohmann::json::array();
  for (size_t i = 0; i < trace.layers.size(); ++i) {
    const LayerTrace& lt = trace.layers[i];
    nlohmann::json j{{"kind", to_string(graph.layers[i].kind)}, {"shape", lt.shape.dims()}, {"acc", lt.acc}};
    if (!lt.act.empty() || graph.layers[i].kind != LayerKind::output) {
      std::vector<int> act(lt.act.begin(), lt.act.end());
      j["act"] = act;
    }
    layers.push_back(std::move(j));
  }
  nlohmann::json doc{{"layers", std::move(layers)}, {"logits", trace.logits}};
  return doc.dump() + "\n";
}

}  // namespace zkml
