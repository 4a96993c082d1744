// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "zkml/field.hpp"

#include <algorithm>

namespace zkml {

using u128 = unsigned __int128;

unsigned U256::bit_length() const {
  for (int i = 3; i >= 0; --i) {
    if (limb[i] != 0) return static_cast<unsigned>(64 * i + 64 - __builtin_clzll(limb[i]));
  }
  return 0;
}

bool U256::add_to(U256& a, const U256& b) {
  uint64_t carry = 0;
  for (int i = 0; i < 4; ++i) {
    u128 s = static_cast<u128>(a.limb[i]) + b.limb[i] + carry;
    a.limb[i] = static_cast<uint64_t>(s);
    carry = static_cast<uint64_t>(s >> 64);
  }
  return carry != 0;
}

bool U256::sub_from(U256& a, const U256& b) {
  uint64_t borrow = 0;
  for (int i = 0; i < 4; ++i) {
    u128 d = static_cast<u128>(a.limb[i]) - b.limb[i] - borrow;
    a.limb[i] = static_cast<uint64_t>(d);
    borrow = static_cast<uint64_t>(d >> 64) & 1;
  }
  return borrow != 0;
}

uint64_t U256::mod_small(uint64_t d) const {
  u128 rem = 0;
  for (int i = 3; i >= 0; --i) {
    rem = ((rem << 64) | limb[i]) % d;
  }
  return static_cast<uint64_t>(rem);
}

U256 U256::shr1() const {
  U256 r;
  for (int i = 0; i < 4; ++i) {
    r.limb[i] = limb[i] >> 1;
    if (i < 3) r.limb[i] |= limb[i + 1] << 63;
  }
  return r;
}

U256 U256::from_decimal(std::string_view s) {
  if (s.empty()) throw FieldError("empty decimal string");
  U256 r;
  for (char ch : s) {
    if (ch < '0' || ch > '9') throw FieldError("invalid decimal digit in '" + std::string(s) + "'");
    uint64_t carry = static_cast<uint64_t>(ch - '0');
    for (int i = 0; i < 4; ++i) {
      u128 t = static_cast<u128>(r.limb[i]) * 10 + carry;
      r.limb[i] = static_cast<uint64_t>(t);
      carry = static_cast<uint64_t>(t >> 64);
    }
    if (carry != 0) throw FieldError("decimal value exceeds 256 bits");
  }
  return r;
}

std::string U256::to_decimal() const {
  if (is_zero()) return "0";
  constexpr uint64_t kChunk = 10000000000000000000ULL;  // 10^19
  U256 v = *this;
  std::string out;
  while (!v.is_zero()) {
    u128 rem = 0;
    for (int i = 3; i >= 0; --i) {
      u128 cur = (rem << 64) | v.limb[i];
      v.limb[i] = static_cast<uint64_t>(cur / kChunk);
      rem = cur % kChunk;
    }
    uint64_t chunk = static_cast<uint64_t>(rem);
    for (int d = 0; d < 19; ++d) {
      out.push_back(static_cast<char>('0' + chunk % 10));
      chunk /= 10;
      if (v.is_zero() && chunk == 0) break;
    }
  }
  std::reverse(out.begin(), out.end());
  return out;
}

void U256::to_bytes_le(uint8_t out[32]) const {
  for (int i = 0; i < 4; ++i) {
    for (int b = 0; b < 8; ++b) out[8 * i + b] = static_cast<uint8_t>(limb[i] >> (8 * b));
  }
}

U256 U256::from_bytes_le(const uint8_t in[32]) {
  U256 r;
  for (int i = 0; i < 4; ++i) {
    uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = (v << 8) | in[8 * i + b];
    r.limb[i] = v;
  }
  return r;
}

// ---------------------------------------------------------------------------

Field::Field(const U256& p) : p_(p), half_(p.shr1()) {
  // -p^{-1} mod 2^64 by Newton iteration.
  uint64_t inv = 1;
  for (int i = 0; i < 7; ++i) inv *= 2 - p.limb[0] * inv;
  inv64_ = ~inv + 1;

  U256 acc(1);
  for (int i = 0; i < 512; ++i) {
    bool carry = U256::add_to(acc, acc);
    sub_p_if_needed(acc, carry);
    if (i == 255) r_ = acc;
  }
  r2_ = acc;
}

std::shared_ptr<const Field> Field::create(const U256& modulus) {
  if (modulus < U256(1ULL << 16)) throw FieldError("modulus must be at least 2^16");
  if (modulus.limb[3] >> 63) throw FieldError("modulus must be below 2^255");
  if ((modulus.limb[0] & 1) == 0) throw FieldError("modulus must be odd");
  if (!is_probable_prime(modulus)) throw FieldError("modulus is not prime");
  return std::shared_ptr<const Field>(new Field(modulus));
}

std::shared_ptr<const Field> Field::from_decimal(std::string_view modulus) {
  return create(U256::from_decimal(modulus));
}

std::shared_ptr<const Field> Field::bn254() {
  static const std::shared_ptr<const Field> field = from_decimal(kBn254Decimal);
  return field;
}

void Field::sub_p_if_needed(U256& a, bool carry) const {
  if (carry || a >= p_) U256::sub_from(a, p_);
}

U256 Field::add(const U256& a, const U256& b) const {
  U256 r = a;
  bool carry = U256::add_to(r, b);
  sub_p_if_needed(r, carry);
  return r;
}

U256 Field::sub(const U256& a, const U256& b) const {
  U256 r = a;
  if (U256::sub_from(r, b)) U256::add_to(r, p_);
  return r;
}

U256 Field::neg(const U256& a) const {
  if (a.is_zero()) return a;
  U256 r = p_;
  U256::sub_from(r, a);
  return r;
}

U256 Field::mont_mul(const U256& a, const U256& b) const {
  // CIOS Montgomery multiplication, 4 limbs.
  uint64_t t[6] = {0, 0, 0, 0, 0, 0};
  for (int i = 0; i < 4; ++i) {
    uint64_t carry = 0;
    for (int j = 0; j < 4; ++j) {
      u128 s = static_cast<u128>(a.limb[j]) * b.limb[i] + t[j] + carry;
      t[j] = static_cast<uint64_t>(s);
      carry = static_cast<uint64_t>(s >> 64);
    }
    u128 s = static_cast<u128>(t[4]) + carry;
    t[4] = static_cast<uint64_t>(s);
    t[5] = static_cast<uint64_t>(s >> 64);

    uint64_t m = t[0] * inv64_;
    s = static_cast<u128>(m) * p_.limb[0] + t[0];
    carry = static_cast<uint64_t>(s >> 64);
    for (int j = 1; j < 4; ++j) {
      s = static_cast<u128>(m) * p_.limb[j] + t[j] + carry;
      t[j - 1] = static_cast<uint64_t>(s);
      carry = static_cast<uint64_t>(s >> 64);
    }
    s = static_cast<u128>(t[4]) + carry;
    t[3] = static_cast<uint64_t>(s);
    t[4] = t[5] + static_cast<uint64_t>(s >> 64);
  }
  U256 r(t[0], t[1], t[2], t[3]);
  sub_p_if_needed(r, t[4] != 0);
  return r;
}

U256 Field::mul(const U256& a, const U256& b) const { return mont_mul(mont_mul(a, b), r2_); }

U256 Field::pow(const U256& base, const U256& exp) const {
  U256 result = r_;
  U256 b = to_mont(base);
  for (int i = static_cast<int>(exp.bit_length()) - 1; i >= 0; --i) {
    result = mont_mul(result, result);
    if (exp.bit(static_cast<unsigned>(i))) result = mont_mul(result, b);
  }
  return from_mont(result);
}

U256 Field::inv(const U256& a) const {
  if (a.is_zero()) throw FieldError("inversion of zero");
  U256 e = p_;
  U256::sub_from(e, U256(2));
  return pow(a, e);
}

U256 Field::reduce(const U256& a) const {
  if (a < p_) return a;
  // a * R^2 * R^-1 = a * R, then strip R: avoids long division.
  return from_mont(mont_mul(a, r2_));
}

U256 Field::from_i128(__int128 x) const {
  const bool negative = x < 0;
  unsigned __int128 mag = negative ? static_cast<unsigned __int128>(-(x + 1)) + 1 : static_cast<unsigned __int128>(x);
  U256 m(static_cast<uint64_t>(mag), static_cast<uint64_t>(mag >> 64), 0, 0);
  // |x| < p/2  <=>  |x| <= floor(p/2) for odd p
  if (m > half_) throw FieldError("magnitude too large for modulus");
  return negative ? neg(m) : m;
}

U256 Field::from_i64(int64_t x) const { return from_i128(x); }

bool Field::fits_i64(const U256& a) const {
  if (a <= half_) return a.limb[1] == 0 && a.limb[2] == 0 && a.limb[3] == 0 && a.limb[0] <= INT64_MAX;
  U256 m = neg(a);
  return m.limb[1] == 0 && m.limb[2] == 0 && m.limb[3] == 0 && m.limb[0] <= static_cast<uint64_t>(INT64_MAX) + 1;
}

int64_t Field::to_i64(const U256& a) const {
  if (!fits_i64(a)) throw FieldError("field value does not fit a signed 64-bit integer");
  if (a <= half_) return static_cast<int64_t>(a.limb[0]);
  U256 m = neg(a);
  return static_cast<int64_t>(~m.limb[0] + 1);
}

bool is_probable_prime(const U256& n) {
  if (n < U256(2)) return false;
  static constexpr uint64_t kBases[] = {2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,
                                        47,  53,  59,  61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107,
                                        109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173};
  for (uint64_t b : kBases) {
    if (n == U256(b)) return true;
    if (n.mod_small(b) == 0) return false;
  }
  // Montgomery arithmetic is valid for any odd modulus, prime or not.
  Field f(n);
  U256 n_minus_1 = n;
  U256::sub_from(n_minus_1, U256(1));
  U256 d = n_minus_1;
  unsigned s = 0;
  while (!d.bit(0)) {
    d = d.shr1();
    ++s;
  }
  for (uint64_t b : kBases) {
    U256 x = f.pow(U256(b), d);
    if (x == U256(1) || x == n_minus_1) continue;
    bool composite = true;
    for (unsigned r = 1; r < s; ++r) {
      x = f.mul(x, x);
      if (x == n_minus_1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

FieldElement::FieldElement(const Field& field, const U256& value) : field_(&field), value_(value) {
  if (!(value < field.modulus())) throw FieldError("field element is not canonical");
}

void FieldElement::require_same(const FieldElement& o) const {
  if (!same_field(o)) throw FieldError("modulus mismatch");
}

FieldElement FieldElement::operator+(const FieldElement& o) const {
  require_same(o);
  return {*field_, field_->add(value_, o.value_)};
}

FieldElement FieldElement::operator-(const FieldElement& o) const {
  require_same(o);
  return {*field_, field_->sub(value_, o.value_)};
}

FieldElement FieldElement::operator*(const FieldElement& o) const {
  require_same(o);
  return {*field_, field_->mul(value_, o.value_)};
}

}  // namespace zkml
