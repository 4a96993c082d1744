// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "zkml/errors.hpp"

// Escrow simulators for the verified-inference marketplace protocols, plus
// the sample-size and cost calculators. Amounts are exact rationals.

namespace zkml::protocol {

using Money = boost::multiprecision::cpp_rational;
using json = nlohmann::json;

/// Parses "12", "-0.16655", "10/99" or a JSON number (via its decimal text).
Money parse_money(const std::string& text);
Money money_from_json(const json& j);
/// Exact form: "120", "10/99".
std::string money_str(const Money& m);
/// Rounded half away from zero to `digits` decimals.
std::string money_decimal(const Money& m, int digits = 2);

enum class Kind { accuracy_simple, accuracy_full, serving, retrieval, data_transfer };
enum class Party { MP, MC, service };
enum class Action { commit, escrow, send_subset, abort, send_snarks, contest, acknowledge, reveal_key, settle, timeout };

std::string_view to_string(Kind k);
std::string_view to_string(Party p);
std::string_view to_string(Action a);
Kind parse_kind(std::string_view s);
Party parse_party(std::string_view s);
Action parse_action(std::string_view s);

struct EconParams {
  Money E = 1, Z = Money(1, 2), P = Money(1, 10);
  int64_t N1 = 100, N2 = 100;
  int64_t K = 100, K1 = 10;
  Money beta = 2;
  /// Escrow fee; defaults to N1 P / 99.
  std::optional<Money> epsilon;
  /// Accuracy target in [0, 1].
  Money accuracy = Money(9, 10);
  /// Retrieval responder bond; zero disables it.
  Money bond = 0;

  int64_t N() const { return N1 + N2; }
  Money eps() const { return epsilon ? *epsilon : Money(N1) * P / 99; }
  Money stake() const { return Money(1000 * N1) * E; }
  /// Throws ProtocolError when E > Z > P, K >= K1 > 0 or beta >= 2 fail.
  void validate() const;

  static EconParams from_json(const json& j);
  json to_json() const;
  friend bool operator==(const EconParams&, const EconParams&) = default;
};

struct Ledger {
  std::map<Party, Money> balance;
  std::map<Party, Money> escrow;
  /// MP stake, locked at MP's commit in the accuracy protocols.
  Money stake = 0;

  Money total() const;
  json to_json() const;
  friend bool operator==(const Ledger&, const Ledger&) = default;
};

struct ProtocolState {
  Kind kind = Kind::accuracy_full;
  EconParams params;
  std::string stage = "init";
  Ledger ledger;
  /// Published hashes and revealed values, by name.
  std::map<std::string, std::string> commitments;
  /// Set for contested serving rounds.
  int64_t contested = 0;

  bool terminal() const;
  json to_json() const;
  friend bool operator==(const ProtocolState&, const ProtocolState&) = default;
};

struct Transition {
  Party actor = Party::MP;
  Action action = Action::commit;
  json payload = json::object();

  static Transition from_json(const json& j);
  json to_json() const;
};

/// Funds that cover every deposit a party can be asked for.
std::map<Party, Money> default_funds(const EconParams& p);

ProtocolState start(Kind kind, const EconParams& params, const std::map<Party, Money>& funds);
inline ProtocolState start(Kind kind, const EconParams& params) { return start(kind, params, default_funds(params)); }

/// Applies one transition. Throws ProtocolError on an illegal transition or
/// when a party lacks the funds for a deposit. Pure: the input is not touched.
ProtocolState step(const ProtocolState& state, const Transition& t);

/// A representative set of transitions accepted at the current stage,
/// covering every (actor, action) pair and each payload branch.
std::vector<Transition> legal_transitions(const ProtocolState& state);

/// Index of the largest logit; ties resolve to the lowest index.
size_t top1(const std::vector<int64_t>& logits);

/// Placeholder stream cipher: SHA-256 in counter mode keyed by `key`.
/// Not a secure encryption scheme; it only exercises the data-transfer flow.
std::string keyed_stream_xor(const std::string& key, const std::string& data);

// Calculators.

struct GriefThresholds {
  Money baseline_epsilon;
  /// alpha must exceed this for the baseline epsilon.
  Money baseline_alpha_bound;
  Money anti_griefing_epsilon;
  Money anti_griefing_alpha;
  json to_json() const;
};
GriefThresholds grief_thresholds(const EconParams& p);

/// (1 - alpha)(N1 P + 2 N2 Z - eps) + alpha N1 P.
Money expected_gain_mp(const EconParams& p, const Money& alpha);

/// Smallest N with (1 - p)^N <= delta / 2: the zero-failure two-sided
/// Clopper-Pearson upper bound at level delta is then at most p.
int64_t retrieval_sample_size(double p_tamper, double delta);

/// ceil(ln(1/delta) / (2 eps^2)).
int64_t hoeffding_sample_size(double epsilon, double delta);

/// N * c rounded half away from zero to cents.
Money cost_estimate(int64_t n, const Money& c);

}  // namespace zkml::protocol
