// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

#include "zkml/model.hpp"

// Random quantized models for self-tests and property tests.

namespace zkml::gen {

using Rng = std::mt19937_64;

struct ModelOptions {
  int min_layers = 1;
  int max_layers = 4;
  int max_hw = 16;
  int max_channels = 8;
  /// Largest |weight|; 127 exercises the full int8 range.
  int max_weight = 127;
  bool allow_residual = true;
  bool allow_pool = true;
  bool allow_fc = true;
};

/// Random valid graph. Scale factors are chosen so that every clip table
/// stays within a few thousand rows.
ModelGraph random_model(Rng& rng, const ModelOptions& options = {});

QuantTensor random_input(Rng& rng, const ModelGraph& graph);

/// Uniform integer in [lo, hi].
int64_t uniform(Rng& rng, int64_t lo, int64_t hi);

}  // namespace zkml::gen
