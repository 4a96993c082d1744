// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "zkml/errors.hpp"

namespace zkml {

/// Unsigned 256-bit integer, little-endian 64-bit limbs.
struct U256 {
  std::array<uint64_t, 4> limb{};

  constexpr U256() = default;
  constexpr explicit U256(uint64_t v) : limb{v, 0, 0, 0} {}
  constexpr U256(uint64_t l0, uint64_t l1, uint64_t l2, uint64_t l3) : limb{l0, l1, l2, l3} {}

  bool is_zero() const { return (limb[0] | limb[1] | limb[2] | limb[3]) == 0; }
  unsigned bit_length() const;
  bool bit(unsigned i) const { return (limb[i / 64] >> (i % 64)) & 1; }

  friend bool operator==(const U256&, const U256&) = default;
  friend std::strong_ordering operator<=>(const U256& a, const U256& b) {
    for (int i = 3; i >= 0; --i) {
      if (a.limb[i] != b.limb[i]) return a.limb[i] <=> b.limb[i];
    }
    return std::strong_ordering::equal;
  }

  static U256 from_decimal(std::string_view s);
  std::string to_decimal() const;

  // Plain (non-modular) helpers; the bool result reports carry/borrow out.
  static bool add_to(U256& a, const U256& b);
  static bool sub_from(U256& a, const U256& b);
  /// Remainder of division by a small divisor.
  uint64_t mod_small(uint64_t d) const;
  U256 shr1() const;

  /// Little-endian 32-byte encoding (the on-disk cell format).
  void to_bytes_le(uint8_t out[32]) const;
  static U256 from_bytes_le(const uint8_t in[32]);
};

struct U256Hash {
  size_t operator()(const U256& v) const noexcept {
    uint64_t h = v.limb[0] * 0x9E3779B97F4A7C15ULL;
    h ^= v.limb[1] + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
    h ^= v.limb[2] + 0x94D049BB133111EBULL + (h << 6) + (h >> 2);
    h ^= v.limb[3] + 0xBF58476D1CE4E5B9ULL + (h << 6) + (h >> 2);
    return static_cast<size_t>(h ^ (h >> 31));
  }
};

/// A prime field F_p with p odd, 2^16 <= p < 2^255.
///
/// Values handled by the raw API (`add`, `mul`, ...) are canonical residues
/// in [0, p). Multiplication uses Montgomery reduction internally but inputs
/// and outputs stay in canonical form, so cells can be stored and compared
/// as plain integers.
class Field {
 public:
  /// Validates the modulus (odd, in range, passes Miller-Rabin).
  static std::shared_ptr<const Field> create(const U256& modulus);
  static std::shared_ptr<const Field> from_decimal(std::string_view modulus);
  /// The 254-bit BN254 scalar field, used when no modulus is configured.
  static std::shared_ptr<const Field> bn254();
  static constexpr std::string_view kBn254Decimal =
      "21888242871839275222246405745257275088548364400416034343698204186575808495617";

  const U256& modulus() const { return p_; }
  /// floor(p / 2)
  const U256& half() const { return half_; }

  U256 add(const U256& a, const U256& b) const;
  U256 sub(const U256& a, const U256& b) const;
  U256 neg(const U256& a) const;
  U256 mul(const U256& a, const U256& b) const;
  U256 square(const U256& a) const { return mul(a, a); }
  U256 pow(const U256& base, const U256& exp) const;
  /// Throws FieldError on zero.
  U256 inv(const U256& a) const;

  /// Reduces an arbitrary 256-bit integer.
  U256 reduce(const U256& a) const;
  /// Signed embedding: requires |x| < p/2, negatives map to p - |x|.
  U256 from_i64(int64_t x) const;
  /// Same contract for 128-bit inputs (accumulator products during compilation).
  U256 from_i128(__int128 x) const;
  /// Inverse of from_i64 on (-p/2, p/2); throws if the value is outside int64.
  int64_t to_i64(const U256& a) const;
  bool fits_i64(const U256& a) const;

  // Montgomery-domain primitives for hot loops (checker, sponge).
  U256 to_mont(const U256& a) const { return mont_mul(a, r2_); }
  U256 from_mont(const U256& a) const { return mont_mul(a, U256(1)); }
  U256 mont_mul(const U256& a, const U256& b) const;
  const U256& mont_one() const { return r_; }

  bool operator==(const Field& other) const { return p_ == other.p_; }

 private:
  friend bool is_probable_prime(const U256& n);
  explicit Field(const U256& p);
  void sub_p_if_needed(U256& a, bool carry) const;

  U256 p_;
  U256 half_;
  U256 r_;   // 2^256 mod p
  U256 r2_;  // 2^512 mod p
  uint64_t inv64_;  // -p^{-1} mod 2^64
};

/// Miller-Rabin with 40 fixed bases; deterministic for a given input.
bool is_probable_prime(const U256& n);

/// Field element bound to its field. Ops between elements of different
/// fields throw FieldError("modulus mismatch").
class FieldElement {
 public:
  FieldElement(const Field& field, const U256& value);
  static FieldElement from_signed(const Field& field, int64_t x) { return {field, field.from_i64(x)}; }
  static FieldElement zero(const Field& field) { return {field, U256()}; }
  static FieldElement one(const Field& field) { return {field, U256(1)}; }

  const U256& value() const { return value_; }
  const Field& field() const { return *field_; }
  int64_t to_signed() const { return field_->to_i64(value_); }
  bool is_zero() const { return value_.is_zero(); }

  FieldElement operator+(const FieldElement& o) const;
  FieldElement operator-(const FieldElement& o) const;
  FieldElement operator*(const FieldElement& o) const;
  FieldElement operator-() const { return {*field_, field_->neg(value_)}; }
  FieldElement inv() const { return {*field_, field_->inv(value_)}; }

  bool operator==(const FieldElement& o) const { return same_field(o) && value_ == o.value_; }

 private:
  bool same_field(const FieldElement& o) const { return field_ == o.field_ || *field_ == *o.field_; }
  void require_same(const FieldElement& o) const;

  const Field* field_;
  U256 value_;
};

}  // namespace zkml
