// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zkml/model.hpp"

namespace zkml {

struct LayerTrace {
  Shape shape;
  /// Pre-activation accumulators. Output layers repeat the exposed logits.
  std::vector<int32_t> acc;
  /// Post-scale activations; empty for output layers.
  std::vector<uint8_t> act;

  friend bool operator==(const LayerTrace&, const LayerTrace&) = default;
};

struct InferenceTrace {
  std::vector<LayerTrace> layers;
  std::vector<int64_t> logits;

  friend bool operator==(const InferenceTrace&, const InferenceTrace&) = default;
};

/// clip(floor(c * a / b) + z_out, lo, hi), floor toward negative infinity.
uint8_t clip_and_scale(int64_t c, const ScaleFactor& s, int32_t z_out, int32_t lo = 0, int32_t hi = 255);

/// floor(c * a / b) without the clip; exact for every int32 accumulator.
int64_t scale_floor(int64_t c, const ScaleFactor& s);

/// Throws ModelError when the input shape or quantization does not match.
InferenceTrace run_inference(const ModelGraph& graph, const QuantTensor& input);

/// Activation codes produced by `ref` (the input tensor for kGraphInput).
const std::vector<uint8_t>& activations_of(const InferenceTrace& trace, const QuantTensor& input, int ref);

/// {"layers":[{"kind","shape","acc","act"}], "logits":[...]}
std::string trace_json(const ModelGraph& graph, const InferenceTrace& trace);

}  // namespace zkml
