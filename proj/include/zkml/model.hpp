// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zkml/errors.hpp"

namespace zkml {

/// Rational requantization multiplier a/b. Scales are exact rationals; the
/// producer of the model file is responsible for approximating float scales.
struct ScaleFactor {
  int64_t a = 1;
  int64_t b = 1;

  static constexpr int64_t kMaxDenominator = int64_t{1} << 24;
  static constexpr int64_t kMaxNumerator = int64_t{1} << 31;

  void validate() const;
  friend bool operator==(const ScaleFactor&, const ScaleFactor&) = default;
};

struct QuantParams {
  int32_t zero_point = 0;
  ScaleFactor scale;

  void validate() const;
  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

/// NHWC tensor shape. Lower-rank shapes from the file are left-padded with 1s.
struct Shape {
  int64_t n = 1, h = 1, w = 1, c = 1;

  int64_t elements() const { return n * h * w * c; }
  int64_t per_sample() const { return h * w * c; }
  std::vector<int64_t> dims() const { return {n, h, w, c}; }
  static Shape from_dims(const std::vector<int64_t>& dims);
  std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Quantized activation tensor: one unsigned 8-bit code per element.
struct QuantTensor {
  Shape shape;
  std::vector<uint8_t> data;
  QuantParams quant;

  void validate() const;
};

/// Weight tensor. Bytes are stored as two's-complement int8 with an implicit
/// zero point of 0 (symmetric weights).
struct WeightTensor {
  std::vector<int64_t> dims;
  std::vector<int8_t> data;

  int64_t elements() const;
  friend bool operator==(const WeightTensor&, const WeightTensor&) = default;
};

enum class LayerKind { conv2d, depthwise_conv2d, fully_connected, residual_add, average_pool, output };
enum class Padding { same, valid };
enum class Activation { clip_relu, none };

std::string_view to_string(LayerKind kind);
std::string_view to_string(Padding padding);
std::string_view to_string(Activation activation);

/// Index used in `inputs` to refer to the graph input.
inline constexpr int kGraphInput = -1;

struct Layer {
  LayerKind kind = LayerKind::output;
  std::optional<WeightTensor> weights;
  /// Per-output-channel bias already in accumulator scale.
  std::optional<std::vector<int32_t>> bias;
  /// For average_pool the window is stride x stride; 0 means global pooling.
  int stride = 1;
  Padding padding = Padding::valid;
  std::vector<int> inputs;
  QuantParams out_quant;
  Activation activation = Activation::none;

  bool is_linear() const {
    return kind == LayerKind::conv2d || kind == LayerKind::depthwise_conv2d || kind == LayerKind::fully_connected;
  }
  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Topologically ordered layer list; exactly one output layer, last.
struct ModelGraph {
  Shape input_shape;
  QuantParams input_quant;
  std::vector<Layer> layers;
  /// Filled by validation: output shape of each layer.
  std::vector<Shape> shapes;

  const Shape& shape_of(int ref) const { return ref == kGraphInput ? input_shape : shapes.at(static_cast<size_t>(ref)); }
  /// Quantization of the activations produced by `ref` (graph input or layer).
  QuantParams quant_of(int ref) const;
  int output_layer() const { return static_cast<int>(layers.size()) - 1; }
  friend bool operator==(const ModelGraph& a, const ModelGraph& b) {
    return a.input_shape == b.input_shape && a.input_quant == b.input_quant && a.layers == b.layers;
  }
};

/// Parses and validates a model file; runs shape inference.
ModelGraph load_model(std::string_view json_text);
/// Canonical serialization (load_model(save_model(g)) == g).
std::string save_model(const ModelGraph& graph);
ModelGraph load_model_file(const std::string& path);

/// Output shape of every layer; throws ModelError on inconsistent graphs.
std::vector<Shape> shape_inference(const ModelGraph& graph);

/// Validates structure, runs shape inference and stores the shapes.
void validate_graph(ModelGraph& graph);

struct Bounds {
  int64_t min = 0;
  int64_t max = 0;
  friend bool operator==(const Bounds&, const Bounds&) = default;
};

/// Worst-case accumulator interval of every layer over all inputs in [0,255].
/// Output layers report the bounds of the values they expose as logits.
std::vector<Bounds> accumulator_bounds(const ModelGraph& graph);

/// Interval of sum_t (x_t - z) * w_t + bias for x_t in [0,255].
Bounds dot_bounds(const int8_t* w, size_t n, int32_t zero_point, int64_t bias);

/// Geometry of a windowed layer (conv, depthwise, pool).
struct WindowGeometry {
  int64_t kh = 1, kw = 1, stride = 1;
  int64_t pad_top = 0, pad_left = 0;
  int64_t out_h = 1, out_w = 1;
};
WindowGeometry window_geometry(const ModelGraph& graph, int layer);

/// Tensor file: {"shape":[...], "data_b64":..., "quant":{...}}. When the
/// file carries no quant block, `default_quant` is used (error if absent).
QuantTensor load_tensor(std::string_view json_text, std::optional<QuantParams> default_quant = {});
QuantTensor load_tensor_file(const std::string& path, std::optional<QuantParams> default_quant = {});
std::string save_tensor(const QuantTensor& tensor);

}  // namespace zkml
