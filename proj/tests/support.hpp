// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Shared helpers for the test binaries: big-integer oracles and generators.

#include <boost/multiprecision/cpp_int.hpp>
#include <random>

#include "zkml/field.hpp"

namespace zkml::test {

using BigInt = boost::multiprecision::cpp_int;

inline BigInt to_big(const U256& v) {
  BigInt r = 0;
  for (int i = 3; i >= 0; --i) r = (r << 64) | BigInt(v.limb[static_cast<size_t>(i)]);
  return r;
}

inline U256 from_big(BigInt v) {
  U256 r;
  for (size_t i = 0; i < 4; ++i) {
    r.limb[i] = static_cast<uint64_t>(v & BigInt(~uint64_t{0}));
    v >>= 64;
  }
  return r;
}

/// Uniform value in [0, p) by rejection on the bit length of p.
inline U256 random_below(std::mt19937_64& rng, const U256& p) {
  const unsigned bits = p.bit_length();
  for (;;) {
    U256 v(rng(), rng(), rng(), rng());
    for (unsigned i = bits; i < 256; ++i) v.limb[i / 64] &= ~(uint64_t{1} << (i % 64));
    if (v < p) return v;
  }
}

}  // namespace zkml::test
