// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "zkml/kernels.hpp"

namespace zkml::kernels::scalar {

int32_t dot_u8s8(const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point) {
  int32_t acc = 0;
  for (size_t i = 0; i < n; ++i) acc += (static_cast<int32_t>(x[i]) - zero_point) * w[i];
  return acc;
}

void madd_u8s8(int32_t* acc, const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point) {
  for (size_t i = 0; i < n; ++i) acc[i] += (static_cast<int32_t>(x[i]) - zero_point) * w[i];
}

void add_centered_u8(int32_t* acc, const uint8_t* x, size_t n, int32_t zero_point) {
  for (size_t i = 0; i < n; ++i) acc[i] += static_cast<int32_t>(x[i]) - zero_point;
}

}  // namespace zkml::kernels::scalar
