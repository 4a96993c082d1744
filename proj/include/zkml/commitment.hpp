// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zkml/field.hpp"
#include "zkml/model.hpp"

namespace zkml {

/// Parameters of the x^5 permutation sponge. Round constants and the MDS
/// matrix are expanded from `seed`; they are not the published reference
/// constants of any external library. Not a security claim.
struct SpongeParams {
  std::string seed = "zkml/sponge/v1";
  int t = 3;
  int full_rounds = 8;
  int partial_rounds = 57;

  void validate() const;
  int rate() const { return t - 1; }
  int rounds() const { return full_rounds + partial_rounds; }
  /// True when round r applies the S-box to every lane.
  bool is_full_round(int r) const { return r < full_rounds / 2 || r >= full_rounds / 2 + partial_rounds; }

  static SpongeParams from_json(std::string_view text);
  std::string to_json() const;
  friend bool operator==(const SpongeParams&, const SpongeParams&) = default;
};

/// Sponge instance bound to a field. Lane 0 is the capacity; lanes 1..t-1
/// absorb message elements. The initial capacity holds the input length.
class Sponge {
 public:
  /// Throws FieldError when x^5 is not a permutation of the field.
  Sponge(std::shared_ptr<const Field> field, SpongeParams params);

  const SpongeParams& params() const { return params_; }
  const Field& field() const { return *field_; }
  /// round_constants()[r][lane]
  const std::vector<std::vector<U256>>& round_constants() const { return rc_; }
  /// mds()[row][col]
  const std::vector<std::vector<U256>>& mds() const { return mds_; }

  /// Applies round r in place.
  void round(std::vector<U256>& state, int r) const;
  void permute(std::vector<U256>& state) const;
  /// Throws FieldError on empty input.
  U256 hash(const std::vector<U256>& elements) const;

 private:
  std::shared_ptr<const Field> field_;
  SpongeParams params_;
  std::vector<std::vector<U256>> rc_;
  std::vector<std::vector<U256>> mds_;
};

/// Counter-mode SHA-256 expansion with rejection sampling into [0, p).
class SeededStream {
 public:
  SeededStream(const Field& field, std::string_view seed, std::string_view label);
  U256 next();

 private:
  const Field& field_;
  std::string prefix_;
  uint64_t counter_ = 0;
};

enum class Visibility { hidden_input_public_weights, public_input_hidden_weights, hidden_input_hidden_weights };
std::string_view to_string(Visibility v);
Visibility parse_visibility(std::string_view s);
inline bool input_hidden(Visibility v) { return v != Visibility::public_input_hidden_weights; }
inline bool weights_hidden(Visibility v) { return v != Visibility::hidden_input_public_weights; }

/// Input codes as field elements, in tensor order.
std::vector<U256> input_elements(const Field& field, const QuantTensor& input);
/// Every linear layer in order: its weights, then its bias (signed embedding).
std::vector<U256> weight_elements(const Field& field, const ModelGraph& graph);

struct Commitment {
  std::vector<U256> instance;
  std::optional<U256> input_digest;
  std::optional<U256> weight_digest;
};

/// Public instance vector computed outside the circuit:
/// logits ++ [input digest] ++ [weight digest] ++ [raw inputs if public].
/// A model without weights has no weight digest.
Commitment commit_model_io(const Sponge& sponge, const ModelGraph& graph, const QuantTensor& input, Visibility mode);

}  // namespace zkml
