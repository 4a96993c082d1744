// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "zkml/model.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "json.hpp"
#include "util/codec.hpp"

namespace zkml {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ModelError(msg); }

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!obj.is_object()) fail(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(where + ": unknown field '" + key + "'");
  }
}

int64_t get_int(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) fail(where + ": missing field '" + key + "'");
  const json& v = obj.at(key);
  if (!v.is_number_integer()) fail(where + ": field '" + key + "' must be an integer");
  return v.get<int64_t>();
}

std::vector<int64_t> get_dims(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty() || v.size() > 4) fail(where + ": shape must be a list of 1 to 4 dims");
  std::vector<int64_t> dims;
  for (const auto& d : v) {
    if (!d.is_number_integer() || d.get<int64_t>() <= 0) fail(where + ": dims must be positive integers");
    dims.push_back(d.get<int64_t>());
  }
  return dims;
}

QuantParams parse_quant(const json& obj, const std::string& where) {
  reject_unknown(obj, {"zero_point", "scale"}, where);
  QuantParams q;
  q.zero_point = static_cast<int32_t>(get_int(obj, "zero_point", where));
  if (!obj.contains("scale")) fail(where + ": missing field 'scale'");
  const json& s = obj.at("scale");
  reject_unknown(s, {"a", "b"}, where + ".scale");
  q.scale.a = get_int(s, "a", where + ".scale");
  q.scale.b = get_int(s, "b", where + ".scale");
  q.validate();
  return q;
}

json quant_json(const QuantParams& q) {
  return json{{"zero_point", q.zero_point}, {"scale", json{{"a", q.scale.a}, {"b", q.scale.b}}}};
}

LayerKind parse_kind(const std::string& s) {
  if (s == "conv2d") return LayerKind::conv2d;
  if (s == "depthwise_conv2d") return LayerKind::depthwise_conv2d;
  if (s == "fully_connected") return LayerKind::fully_connected;
  if (s == "residual_add") return LayerKind::residual_add;
  if (s == "average_pool") return LayerKind::average_pool;
  if (s == "output") return LayerKind::output;
  fail("unknown layer kind '" + s + "'");
}

int64_t checked_mul(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_mul_overflow(a, b, &r) || r > (int64_t{1} << 40)) fail("tensor too large");
  return r;
}

Bounds union_bounds(const Bounds& a, const Bounds& b) { return {std::min(a.min, b.min), std::max(a.max, b.max)}; }

}  // namespace

void ScaleFactor::validate() const {
  if (a < 1 || b < 1 || b > kMaxDenominator || a > kMaxNumerator) {
    fail("invalid scale factor " + std::to_string(a) + "/" + std::to_string(b));
  }
}

void QuantParams::validate() const {
  if (zero_point < 0 || zero_point > 255) fail("zero point " + std::to_string(zero_point) + " outside [0,255]");
  scale.validate();
}

Shape Shape::from_dims(const std::vector<int64_t>& dims) {
  if (dims.empty() || dims.size() > 4) fail("shape must have 1 to 4 dims");
  std::vector<int64_t> padded(4 - dims.size(), 1);
  padded.insert(padded.end(), dims.begin(), dims.end());
  for (int64_t d : padded) {
    if (d <= 0) fail("shape dims must be positive");
  }
  Shape s{padded[0], padded[1], padded[2], padded[3]};
  checked_mul(checked_mul(s.n, s.h), checked_mul(s.w, s.c));
  return s;
}

std::string Shape::str() const {
  return std::to_string(n) + "x" + std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

void QuantTensor::validate() const {
  quant.validate();
  if (static_cast<int64_t>(data.size()) != shape.elements()) fail("tensor data length does not match its shape");
}

int64_t WeightTensor::elements() const {
  int64_t n = 1;
  for (int64_t d : dims) n = checked_mul(n, d);
  return n;
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::depthwise_conv2d: return "depthwise_conv2d";
    case LayerKind::fully_connected: return "fully_connected";
    case LayerKind::residual_add: return "residual_add";
    case LayerKind::average_pool: return "average_pool";
    case LayerKind::output: return "output";
  }
  return "?";
}

std::string_view to_string(Padding padding) { return padding == Padding::same ? "same" : "valid"; }
std::string_view to_string(Activation activation) { return activation == Activation::clip_relu ? "clip_relu" : "none"; }

QuantParams ModelGraph::quant_of(int ref) const {
  if (ref == kGraphInput) return input_quant;
  return layers.at(static_cast<size_t>(ref)).out_quant;
}

WindowGeometry window_geometry(const ModelGraph& graph, int layer_index) {
  const Layer& layer = graph.layers.at(static_cast<size_t>(layer_index));
  const Shape& in = graph.shape_of(layer.inputs.at(0));
  WindowGeometry g;
  if (layer.kind == LayerKind::average_pool) {
    if (layer.stride == 0) {
      g.kh = in.h;
      g.kw = in.w;
      g.stride = 1;
    } else {
      g.kh = g.kw = g.stride = layer.stride;
    }
  } else {
    const auto& dims = layer.weights->dims;
    g.kh = dims[1];
    g.kw = dims[2];
    g.stride = layer.stride;
  }
  if (layer.padding == Padding::valid) {
    g.out_h = in.h < g.kh ? 0 : (in.h - g.kh) / g.stride + 1;
    g.out_w = in.w < g.kw ? 0 : (in.w - g.kw) / g.stride + 1;
  } else {
    g.out_h = (in.h + g.stride - 1) / g.stride;
    g.out_w = (in.w + g.stride - 1) / g.stride;
    int64_t pad_h = std::max<int64_t>((g.out_h - 1) * g.stride + g.kh - in.h, 0);
    int64_t pad_w = std::max<int64_t>((g.out_w - 1) * g.stride + g.kw - in.w, 0);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  }
  return g;
}

std::vector<Shape> shape_inference(const ModelGraph& graph) {
  std::vector<Shape> shapes;
  shapes.reserve(graph.layers.size());
  auto shape_of = [&](int ref) -> const Shape& {
    return ref == kGraphInput ? graph.input_shape : shapes.at(static_cast<size_t>(ref));
  };
  // window_geometry reads graph.shapes, so evaluate against a scratch copy.
  ModelGraph scratch;
  scratch.input_shape = graph.input_shape;
  scratch.layers = graph.layers;

  for (size_t i = 0; i < graph.layers.size(); ++i) {
    const Layer& layer = graph.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + std::string(to_string(layer.kind)) + ")";
    const Shape& in = shape_of(layer.inputs.at(0));
    Shape out = in;
    switch (layer.kind) {
      case LayerKind::conv2d:
      case LayerKind::depthwise_conv2d: {
        const auto& dims = layer.weights->dims;
        if (dims.size() != 4) fail(where + ": weights must be 4-D [out, kh, kw, in]");
        if (layer.kind == LayerKind::conv2d && dims[3] != in.c) {
          fail(where + ": shape mismatch, weight input channels " + std::to_string(dims[3]) + " != input channels " +
               std::to_string(in.c));
        }
        if (layer.kind == LayerKind::depthwise_conv2d && (dims[0] != 1 || dims[3] != in.c)) {
          fail(where + ": shape mismatch, depthwise weights must be [1, kh, kw, " + std::to_string(in.c) + "]");
        }
        if (layer.stride < 1) fail(where + ": stride must be positive");
        scratch.shapes = shapes;
        WindowGeometry g = window_geometry(scratch, static_cast<int>(i));
        if (g.out_h <= 0 || g.out_w <= 0) fail(where + ": non-positive output dim");
        out = Shape{in.n, g.out_h, g.out_w, layer.kind == LayerKind::conv2d ? dims[0] : in.c};
        break;
      }
      case LayerKind::fully_connected: {
        const auto& dims = layer.weights->dims;
        if (dims.size() != 2) fail(where + ": weights must be 2-D [units, features]");
        if (dims[1] != in.per_sample()) {
          fail(where + ": shape mismatch, weight features " + std::to_string(dims[1]) + " != flattened input " +
               std::to_string(in.per_sample()));
        }
        out = Shape{in.n, 1, 1, dims[0]};
        break;
      }
      case LayerKind::residual_add: {
        if (!(shape_of(layer.inputs.at(1)) == in)) fail(where + ": shape mismatch between residual inputs");
        break;
      }
      case LayerKind::average_pool: {
        if (layer.stride < 0) fail(where + ": stride must be non-negative");
        scratch.shapes = shapes;
        WindowGeometry g = window_geometry(scratch, static_cast<int>(i));
        if (g.out_h <= 0 || g.out_w <= 0) fail(where + ": non-positive output dim");
        out = Shape{in.n, g.out_h, g.out_w, in.c};
        break;
      }
      case LayerKind::output:
        break;
    }
    shapes.push_back(out);
  }
  return shapes;
}

void validate_graph(ModelGraph& graph) {
  graph.input_quant.validate();
  if (graph.layers.empty() || graph.layers.back().kind != LayerKind::output) {
    Layer out;
    out.kind = LayerKind::output;
    out.inputs = {static_cast<int>(graph.layers.size()) - 1};
    graph.layers.push_back(out);
  }
  for (size_t i = 0; i < graph.layers.size(); ++i) {
    Layer& layer = graph.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + std::string(to_string(layer.kind)) + ")";
    if (layer.kind == LayerKind::output && i + 1 != graph.layers.size()) fail("exactly one output layer, placed last, is required");
    const size_t arity = layer.kind == LayerKind::residual_add ? 2 : 1;
    if (layer.inputs.size() != arity) fail(where + ": expected " + std::to_string(arity) + " input reference(s)");
    for (int ref : layer.inputs) {
      if (ref < kGraphInput || ref >= static_cast<int>(i)) fail(where + ": dangling input reference " + std::to_string(ref));
      if (ref != kGraphInput && graph.layers[static_cast<size_t>(ref)].kind == LayerKind::output) {
        fail(where + ": cannot consume the output layer");
      }
    }
    if (layer.is_linear()) {
      if (!layer.weights) fail(where + ": missing weights");
      if (static_cast<int64_t>(layer.weights->data.size()) != layer.weights->elements()) {
        fail(where + ": weight data length does not match weight shape");
      }
      if (layer.weights->dims.empty()) fail(where + ": weights need a shape");
      if (layer.bias) {
        const int64_t channels =
            layer.kind == LayerKind::depthwise_conv2d ? layer.weights->dims.back() : layer.weights->dims.front();
        if (static_cast<int64_t>(layer.bias->size()) != channels) fail(where + ": bias length must equal output channels");
      }
    } else if (layer.weights || layer.bias) {
      fail(where + ": this layer kind takes no weights or bias");
    }
    if (layer.kind == LayerKind::average_pool && layer.padding != Padding::valid) {
      fail(where + ": average_pool supports valid padding only");
    }
    layer.out_quant.validate();
  }

  graph.shapes = shape_inference(graph);

  // Derived quantization for non-parametric layers.
  for (size_t i = 0; i < graph.layers.size(); ++i) {
    Layer& layer = graph.layers[i];
    const std::string where = "layer " + std::to_string(i);
    if (layer.kind == LayerKind::residual_add) {
      if (!(graph.quant_of(layer.inputs[0]) == graph.quant_of(layer.inputs[1]))) {
        fail(where + ": residual inputs must share quantization parameters");
      }
    } else if (layer.kind == LayerKind::average_pool) {
      const Shape& in = graph.shape_of(layer.inputs[0]);
      const int64_t window = layer.stride == 0 ? in.h * in.w : int64_t{layer.stride} * layer.stride;
      QuantParams derived{graph.quant_of(layer.inputs[0]).zero_point, ScaleFactor{1, window}};
      derived.validate();
      layer.out_quant = derived;
    }
  }

  std::vector<Bounds> bounds = accumulator_bounds(graph);
  for (size_t i = 0; i < bounds.size(); ++i) {
    if (bounds[i].min < std::numeric_limits<int32_t>::min() || bounds[i].max > std::numeric_limits<int32_t>::max()) {
      fail("layer " + std::to_string(i) + ": accumulator range exceeds 32-bit integers");
    }
  }
}

Bounds dot_bounds(const int8_t* w, size_t n, int32_t zero_point, int64_t bias) {
  Bounds b{bias, bias};
  const int64_t lo = -zero_point;
  const int64_t hi = 255 - zero_point;
  for (size_t i = 0; i < n; ++i) {
    const int64_t a = lo * w[i];
    const int64_t c = hi * w[i];
    b.min += std::min(a, c);
    b.max += std::max(a, c);
  }
  return b;
}

std::vector<Bounds> accumulator_bounds(const ModelGraph& graph) {
  std::vector<Bounds> out;
  out.reserve(graph.layers.size());
  for (size_t i = 0; i < graph.layers.size(); ++i) {
    const Layer& layer = graph.layers[i];
    const int32_t z = layer.inputs.empty() ? 0 : graph.quant_of(layer.inputs[0]).zero_point;
    std::optional<Bounds> acc;
    auto merge = [&](Bounds b) { acc = acc ? union_bounds(*acc, b) : b; };
    switch (layer.kind) {
      case LayerKind::conv2d:
      case LayerKind::fully_connected: {
        const auto& w = *layer.weights;
        const int64_t units = w.dims.front();
        const int64_t taps = w.elements() / units;
        for (int64_t k = 0; k < units; ++k) {
          merge(dot_bounds(w.data.data() + k * taps, static_cast<size_t>(taps), z,
                           layer.bias ? (*layer.bias)[static_cast<size_t>(k)] : 0));
        }
        break;
      }
      case LayerKind::depthwise_conv2d: {
        const auto& w = *layer.weights;
        const int64_t channels = w.dims[3];
        const int64_t taps = w.dims[1] * w.dims[2];
        std::vector<int8_t> column(static_cast<size_t>(taps));
        for (int64_t c = 0; c < channels; ++c) {
          for (int64_t t = 0; t < taps; ++t) column[static_cast<size_t>(t)] = w.data[static_cast<size_t>(t * channels + c)];
          merge(dot_bounds(column.data(), column.size(), z, layer.bias ? (*layer.bias)[static_cast<size_t>(c)] : 0));
        }
        break;
      }
      case LayerKind::residual_add:
        merge({-2 * int64_t{z}, 2 * (255 - int64_t{z})});
        break;
      case LayerKind::average_pool: {
        const int64_t window = layer.out_quant.scale.b;
        merge({-window * z, window * (255 - int64_t{z})});
        break;
      }
      case LayerKind::output: {
        const int ref = layer.inputs.at(0);
        merge(ref == kGraphInput ? Bounds{0, 255} : out.at(static_cast<size_t>(ref)));
        break;
      }
    }
    out.push_back(acc.value_or(Bounds{}));
  }
  return out;
}

// ---------------------------------------------------------------------------

ModelGraph load_model(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("malformed model file: ") + e.what());
  }
  reject_unknown(doc, {"version", "input_shape", "input_quant", "layers"}, "model");
  if (get_int(doc, "version", "model") != 1) fail("unsupported model version");
  ModelGraph graph;
  if (!doc.contains("input_shape")) fail("model: missing field 'input_shape'");
  graph.input_shape = Shape::from_dims(get_dims(doc.at("input_shape"), "model.input_shape"));
  if (!doc.contains("input_quant")) fail("model: missing field 'input_quant'");
  graph.input_quant = parse_quant(doc.at("input_quant"), "model.input_quant");
  if (!doc.contains("layers") || !doc.at("layers").is_array()) fail("model: 'layers' must be a list");

  int index = 0;
  for (const json& lj : doc.at("layers")) {
    const std::string where = "layer " + std::to_string(index);
    reject_unknown(lj, {"kind", "weights", "bias", "stride", "padding", "inputs", "out_quant", "activation"}, where);
    Layer layer;
    if (!lj.contains("kind") || !lj.at("kind").is_string()) fail(where + ": missing 'kind'");
    layer.kind = parse_kind(lj.at("kind").get<std::string>());
    layer.stride = layer.kind == LayerKind::average_pool ? 0 : 1;
    if (lj.contains("weights")) {
      const json& wj = lj.at("weights");
      reject_unknown(wj, {"shape", "data_b64"}, where + ".weights");
      if (!wj.contains("shape") || !wj.contains("data_b64") || !wj.at("data_b64").is_string()) {
        fail(where + ".weights: needs 'shape' and 'data_b64'");
      }
      WeightTensor w;
      w.dims = get_dims(wj.at("shape"), where + ".weights");
      std::vector<uint8_t> bytes;
      try {
        bytes = util::base64_decode(wj.at("data_b64").get<std::string>());
      } catch (const FormatError& e) {
        fail(where + ".weights: " + e.what());
      }
      w.data.assign(bytes.begin(), bytes.end());
      layer.weights = std::move(w);
    }
    if (lj.contains("bias")) {
      if (!lj.at("bias").is_array()) fail(where + ": bias must be a list of integers");
      std::vector<int32_t> bias;
      for (const auto& v : lj.at("bias")) {
        if (!v.is_number_integer()) fail(where + ": bias must be a list of integers");
        int64_t b = v.get<int64_t>();
        if (b < std::numeric_limits<int32_t>::min() || b > std::numeric_limits<int32_t>::max()) {
          fail(where + ": bias outside 32-bit range");
        }
        bias.push_back(static_cast<int32_t>(b));
      }
      layer.bias = std::move(bias);
    }
    if (lj.contains("stride")) layer.stride = static_cast<int>(get_int(lj, "stride", where));
    if (lj.contains("padding")) {
      const std::string p = lj.at("padding").is_string() ? lj.at("padding").get<std::string>() : "";
      if (p == "same") {
        layer.padding = Padding::same;
      } else if (p == "valid") {
        layer.padding = Padding::valid;
      } else {
        fail(where + ": padding must be \"same\" or \"valid\"");
      }
    }
    if (lj.contains("inputs")) {
      if (!lj.at("inputs").is_array()) fail(where + ": inputs must be a list");
      for (const auto& v : lj.at("inputs")) {
        if (!v.is_number_integer()) fail(where + ": inputs must be integers");
        layer.inputs.push_back(v.get<int>());
      }
    } else {
      layer.inputs = {index - 1};
    }
    if (lj.contains("out_quant")) {
      if (layer.kind == LayerKind::output || layer.kind == LayerKind::average_pool) {
        fail(where + ": out_quant is derived for this layer kind");
      }
      layer.out_quant = parse_quant(lj.at("out_quant"), where + ".out_quant");
    } else if (layer.is_linear()) {
      fail(where + ": missing 'out_quant'");
    }
    if (lj.contains("activation")) {
      const std::string a = lj.at("activation").is_string() ? lj.at("activation").get<std::string>() : "";
      if (a == "clip_relu") {
        layer.activation = Activation::clip_relu;
      } else if (a == "none") {
        layer.activation = Activation::none;
      } else {
        fail(where + ": activation must be \"clip_relu\" or \"none\"");
      }
    }
    graph.layers.push_back(std::move(layer));
    ++index;
  }

  // Residual layers without explicit out_quant pass the shared quantization through.
  for (size_t i = 0; i < graph.layers.size(); ++i) {
    Layer& layer = graph.layers[i];
    const json& lj = doc.at("layers").at(i);
    if (layer.kind == LayerKind::residual_add && !lj.contains("out_quant") && !layer.inputs.empty()) {
      const int ref = layer.inputs[0];
      if (ref >= kGraphInput && ref < static_cast<int>(i)) {
        layer.out_quant = QuantParams{graph.quant_of(ref).zero_point, ScaleFactor{1, 1}};
      }
    }
  }
  validate_graph(graph);
  return graph;
}

ModelGraph load_model_file(const std::string& path) { return load_model(util::read_file(path)); }

std::string save_model(const ModelGraph& graph) {
  json layers = json::array();
  for (const Layer& layer : graph.layers) {
    json lj;
    lj["kind"] = to_string(layer.kind);
    if (layer.weights) {
      const auto& w = *layer.weights;
      lj["weights"] = json{{"shape", w.dims},
                           {"data_b64", util::base64_encode(reinterpret_cast<const uint8_t*>(w.data.data()), w.data.size())}};
    }
    if (layer.bias) lj["bias"] = *layer.bias;
    if (layer.kind != LayerKind::output && layer.kind != LayerKind::residual_add) lj["stride"] = layer.stride;
    if (layer.kind != LayerKind::output && layer.kind != LayerKind::residual_add && layer.kind != LayerKind::fully_connected) {
      lj["padding"] = to_string(layer.padding);
    }
    lj["inputs"] = layer.inputs;
    if (layer.kind != LayerKind::output && layer.kind != LayerKind::average_pool) lj["out_quant"] = quant_json(layer.out_quant);
    if (layer.kind != LayerKind::output) lj["activation"] = to_string(layer.activation);
    layers.push_back(std::move(lj));
  }
  json doc{{"version", 1},
           {"input_shape", graph.input_shape.dims()},
           {"input_quant", quant_json(graph.input_quant)},
           {"layers", std::move(layers)}};
  return doc.dump(2) + "\n";
}

QuantTensor load_tensor(std::string_view json_text, std::optional<QuantParams> default_quant) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("malformed tensor file: ") + e.what());
  }
  reject_unknown(doc, {"shape", "data_b64", "quant"}, "tensor");
  if (!doc.contains("shape") || !doc.contains("data_b64") || !doc.at("data_b64").is_string()) {
    fail("tensor: needs 'shape' and 'data_b64'");
  }
  QuantTensor t;
  t.shape = Shape::from_dims(get_dims(doc.at("shape"), "tensor.shape"));
  try {
    t.data = util::base64_decode(doc.at("data_b64").get<std::string>());
  } catch (const FormatError& e) {
    fail(std::string("tensor: ") + e.what());
  }
  if (doc.contains("quant")) {
    t.quant = parse_quant(doc.at("quant"), "tensor.quant");
  } else if (default_quant) {
    t.quant = *default_quant;
  } else {
    fail("tensor: missing 'quant'");
  }
  t.validate();
  return t;
}

QuantTensor load_tensor_file(const std::string& path, std::optional<QuantParams> default_quant) {
  return load_tensor(util::read_file(path), default_quant);
}

std::string save_tensor(const QuantTensor& tensor) {
  json doc{{"shape", tensor.shape.dims()},
           {"data_b64", util::base64_encode(tensor.data.data(), tensor.data.size())},
           {"quant", quant_json(tensor.quant)}};
  return doc.dump(2) + "\n";
}

}  // namespace zkml
