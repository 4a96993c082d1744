// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include <arm_neon.h>

#include "zkml/kernels.hpp"

namespace zkml::kernels::neon {

int32_t dot_u8s8(const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point) {
  const int16x8_t z = vdupq_n_s16(static_cast<int16_t>(zero_point));
  int32x4_t acc = vdupq_n_s32(0);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    int16x8_t xv = vsubq_s16(vreinterpretq_s16_u16(vmovl_u8(vld1_u8(x + i))), z);
    int16x8_t wv = vmovl_s8(vld1_s8(w + i));
    acc = vmlal_s16(acc, vget_low_s16(xv), vget_low_s16(wv));
    acc = vmlal_s16(acc, vget_high_s16(xv), vget_high_s16(wv));
  }
  int32_t total = vaddvq_s32(acc);
  for (; i < n; ++i) total += (static_cast<int32_t>(x[i]) - zero_point) * w[i];
  return total;
}

void madd_u8s8(int32_t* acc, const uint8_t* x, const int8_t* w, size_t n, int32_t zero_point) {
  const int16x8_t z = vdupq_n_s16(static_cast<int16_t>(zero_point));
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    int16x8_t xv = vsubq_s16(vreinterpretq_s16_u16(vmovl_u8(vld1_u8(x + i))), z);
    int16x8_t wv = vmovl_s8(vld1_s8(w + i));
    vst1q_s32(acc + i, vmlal_s16(vld1q_s32(acc + i), vget_low_s16(xv), vget_low_s16(wv)));
    vst1q_s32(acc + i + 4, vmlal_s16(vld1q_s32(acc + i + 4), vget_high_s16(xv), vget_high_s16(wv)));
  }
  for (; i < n; ++i) acc[i] += (static_cast<int32_t>(x[i]) - zero_point) * w[i];
}

void add_centered_u8(int32_t* acc, const uint8_t* x, size_t n, int32_t zero_point) {
  const int16x8_t z = vdupq_n_s16(static_cast<int16_t>(zero_point));
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    int16x8_t xv = vsubq_s16(vreinterpretq_s16_u16(vmovl_u8(vld1_u8(x + i))), z);
    vst1q_s32(acc + i, vaddw_s16(vld1q_s32(acc + i), vget_low_s16(xv)));
    vst1q_s32(acc + i + 4, vaddw_s16(vld1q_s32(acc + i + 4), vget_high_s16(xv)));
  }
  for (; i < n; ++i) acc[i] += static_cast<int32_t>(x[i]) - zero_point;
}

}  // namespace zkml::kernels::neon
