// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include "zkml/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "util/codec.hpp"

namespace zkml::protocol {

namespace mp = boost::multiprecision;
using Int = mp::cpp_int;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ProtocolError(msg); }

Int pow10(int n) {
  Int r = 1;
  for (int i = 0; i < n; ++i) r *= 10;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Money

Money parse_money(const std::string& text) {
  if (text.empty()) fail("empty amount");
  if (auto slash = text.find('/'); slash != std::string::npos) {
    const Money num = parse_money(text.substr(0, slash));
    const Money den = parse_money(text.substr(slash + 1));
    if (den == 0) fail("zero denominator in amount '" + text + "'");
    return num / den;
  }
  size_t i = 0;
  bool neg = false;
  if (text[i] == '-' || text[i] == '+') neg = text[i++] == '-';
  Int digits = 0;
  int frac = 0;
  bool seen_digit = false, seen_point = false;
  for (; i < text.size(); ++i) {
    const char ch = text[i];
    if (ch >= '0' && ch <= '9') {
      digits = digits * 10 + (ch - '0');
      seen_digit = true;
      if (seen_point) ++frac;
    } else if (ch == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (!seen_digit) fail("malformed amount '" + text + "'");
  int exp10 = -frac;
  if (i < text.size()) {
    if (text[i] != 'e' && text[i] != 'E') fail("malformed amount '" + text + "'");
    try {
      size_t used = 0;
      exp10 += std::stoi(text.substr(i + 1), &used);
      if (i + 1 + used != text.size()) fail("malformed amount '" + text + "'");
    } catch (const std::logic_error&) {
      fail("malformed amount '" + text + "'");
    }
  }
  Money m = exp10 >= 0 ? Money(digits * pow10(exp10)) : Money(digits, pow10(-exp10));
  return neg ? Money(-m) : m;
}

Money money_from_json(const json& j) {
  if (j.is_string()) return parse_money(j.get<std::string>());
  if (j.is_number_integer()) return Money(j.get<int64_t>());
  if (j.is_number()) return parse_money(j.dump());
  fail("amount must be a number or a string");
}

std::string money_str(const Money& m) {
  if (mp::denominator(m) == 1) return mp::numerator(m).str();
  return mp::numerator(m).str() + "/" + mp::denominator(m).str();
}

std::string money_decimal(const Money& m, int digits) {
  const Int scale = pow10(digits);
  const Int num = mp::numerator(m) * scale;
  const Int den = mp::denominator(m);
  const bool neg = num < 0;
  const Int mag = (2 * (neg ? Int(-num) : num) + den) / (2 * den);
  std::string s = mag.str();
  if (digits > 0) {
    if (s.size() <= static_cast<size_t>(digits)) s.insert(0, static_cast<size_t>(digits) + 1 - s.size(), '0');
    s.insert(s.size() - static_cast<size_t>(digits), ".");
  }
  return (neg && mag != 0 ? "-" : "") + s;
}

// ---------------------------------------------------------------------------
// Enums

std::string_view to_string(Kind k) {
  switch (k) {
    case Kind::accuracy_simple: return "accuracy_simple";
    case Kind::accuracy_full: return "accuracy_full";
    case Kind::serving: return "serving";
    case Kind::retrieval: return "retrieval";
    case Kind::data_transfer: return "data_transfer";
  }
  return "?";
}

std::string_view to_string(Party p) {
  switch (p) {
    case Party::MP: return "MP";
    case Party::MC: return "MC";
    case Party::service: return "escrow_service";
  }
  return "?";
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::commit: return "commit";
    case Action::escrow: return "escrow";
    case Action::send_subset: return "send_subset";
    case Action::abort: return "abort";
    case Action::send_snarks: return "send_snarks";
    case Action::contest: return "contest";
    case Action::acknowledge: return "acknowledge";
    case Action::reveal_key: return "reveal_key";
    case Action::settle: return "settle";
    case Action::timeout: return "timeout";
  }
  return "?";
}

namespace {
template <class E, size_t N>
E parse_enum(std::string_view s, const E (&all)[N], const char* what) {
  for (E e : all) {
    if (to_string(e) == s) return e;
  }
  fail(std::string("unknown ") + what + " '" + std::string(s) + "'");
}
constexpr Kind kKinds[] = {Kind::accuracy_simple, Kind::accuracy_full, Kind::serving, Kind::retrieval,
                           Kind::data_transfer};
constexpr Party kParties[] = {Party::MP, Party::MC, Party::service};
constexpr Action kActions[] = {Action::commit,      Action::escrow,  Action::send_subset, Action::abort,
                               Action::send_snarks, Action::contest, Action::acknowledge, Action::reveal_key,
                               Action::settle,      Action::timeout};
}  // namespace

Kind parse_kind(std::string_view s) { return parse_enum(s, kKinds, "protocol kind"); }
Party parse_party(std::string_view s) {
  if (s == "service") return Party::service;
  return parse_enum(s, kParties, "party");
}
Action parse_action(std::string_view s) { return parse_enum(s, kActions, "action"); }

// ---------------------------------------------------------------------------
// Parameters and state

void EconParams::validate() const {
  if (!(E > Z && Z > P)) fail("parameters must satisfy E > Z > P");
  if (P < 0) fail("costs must be nonnegative");
  if (N1 < 0 || N2 < 0 || N() <= 0) fail("N1, N2 must be nonnegative with N1 + N2 > 0");
  if (!(K >= K1 && K1 > 0)) fail("parameters must satisfy K >= K1 > 0");
  if (beta < 2) fail("beta must be at least 2");
  if (eps() < 0) fail("epsilon must be nonnegative");
  if (accuracy < 0 || accuracy > 1) fail("accuracy target must lie in [0, 1]");
  if (bond < 0) fail("bond must be nonnegative");
}

EconParams EconParams::from_json(const json& j) {
  if (!j.is_object()) fail("economic parameters must be a JSON object");
  EconParams p;
  auto count = [&](const json& v, const std::string& key) {
    if (!v.is_number_integer()) fail("'" + key + "' must be an integer");
    return v.get<int64_t>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "E") p.E = money_from_json(v);
    else if (key == "Z") p.Z = money_from_json(v);
    else if (key == "P") p.P = money_from_json(v);
    else if (key == "N1") p.N1 = count(v, key);
    else if (key == "N2") p.N2 = count(v, key);
    else if (key == "K") p.K = count(v, key);
    else if (key == "K1") p.K1 = count(v, key);
    else if (key == "beta") p.beta = money_from_json(v);
    else if (key == "epsilon") p.epsilon = money_from_json(v);
    else if (key == "accuracy") p.accuracy = money_from_json(v);
    else if (key == "bond") p.bond = money_from_json(v);
    else fail("unknown parameter '" + key + "'");
  }
  p.validate();
  return p;
}

json EconParams::to_json() const {
  return json{{"E", money_str(E)},   {"Z", money_str(Z)},       {"P", money_str(P)},
              {"N1", N1},            {"N2", N2},                {"K", K},
              {"K1", K1},            {"beta", money_str(beta)}, {"epsilon", money_str(eps())},
              {"accuracy", money_str(accuracy)}, {"bond", money_str(bond)}};
}

Money Ledger::total() const {
  Money t = stake;
  for (const auto& [p, m] : balance) t += m;
  for (const auto& [p, m] : escrow) t += m;
  return t;
}

json Ledger::to_json() const {
  json b = json::object(), e = json::object();
  for (const auto& [p, m] : balance) b[std::string(to_string(p))] = money_str(m);
  for (const auto& [p, m] : escrow) e[std::string(to_string(p))] = money_str(m);
  return json{{"balance", b}, {"escrow", e}, {"stake", money_str(stake)}};
}

bool ProtocolState::terminal() const {
  return stage == "settled" || stage == "slashed_MP" || stage == "slashed_MC" || stage == "aborted";
}

json ProtocolState::to_json() const {
  json c = json::object();
  for (const auto& [k, v] : commitments) c[k] = v;
  return json{{"kind", to_string(kind)},
              {"stage", stage},
              {"terminal", terminal()},
              {"ledger", ledger.to_json()},
              {"commitments", c}};
}

Transition Transition::from_json(const json& j) {
  if (!j.is_object() || !j.contains("actor") || !j.contains("action")) {
    fail("transition must be an object with 'actor' and 'action'");
  }
  for (const auto& [key, v] : j.items()) {
    if (key != "actor" && key != "action" && key != "payload") fail("unknown transition key '" + key + "'");
  }
  Transition t;
  t.actor = parse_party(j.at("actor").get<std::string>());
  t.action = parse_action(j.at("action").get<std::string>());
  if (j.contains("payload")) {
    if (!j["payload"].is_object()) fail("payload must be an object");
    t.payload = j["payload"];
  }
  return t;
}

json Transition::to_json() const {
  return json{{"actor", to_string(actor)}, {"action", to_string(action)}, {"payload", payload}};
}

std::map<Party, Money> default_funds(const EconParams& p) {
  const Money n = p.N();
  const Money need = p.stake() + 2 * n * p.E + p.eps() + p.beta * p.K * p.Z + 2 * p.K * p.Z + p.bond;
  return {{Party::MP, need}, {Party::MC, need}, {Party::service, 0}};
}

ProtocolState start(Kind kind, const EconParams& params, const std::map<Party, Money>& funds) {
  params.validate();
  ProtocolState s;
  s.kind = kind;
  s.params = params;
  for (Party p : kParties) {
    auto it = funds.find(p);
    const Money m = it == funds.end() ? Money(0) : it->second;
    if (m < 0) fail("initial funds must be nonnegative");
    s.ledger.balance[p] = m;
    s.ledger.escrow[p] = 0;
  }
  return s;
}

size_t top1(const std::vector<int64_t>& logits) {
  if (logits.empty()) fail("empty logit vector");
  return static_cast<size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::string keyed_stream_xor(const std::string& key, const std::string& data) {
  std::string out = data;
  for (size_t block = 0; block * 32 < data.size(); ++block) {
    std::string seed = key;
    for (int b = 7; b >= 0; --b) seed.push_back(static_cast<char>((block >> (8 * b)) & 0xff));
    const auto pad = util::sha256(seed.data(), seed.size());
    for (size_t i = 0; i < 32 && block * 32 + i < data.size(); ++i) out[block * 32 + i] ^= static_cast<char>(pad[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transitions

namespace {

struct Books {
  ProtocolState& s;

  Money& balance(Party p) { return s.ledger.balance[p]; }
  Money& escrow(Party p) { return s.ledger.escrow[p]; }

  void take(Party p, const Money& m) {
    if (balance(p) < m) fail(std::string(to_string(p)) + ": insufficient funds for " + money_str(m));
    balance(p) -= m;
  }
  void deposit(Party p, const Money& m) {
    take(p, m);
    escrow(p) += m;
  }
  void fee(Party p, const Money& m) {
    take(p, m);
    balance(Party::service) += m;
  }
  void lock_stake(const Money& m) {
    take(Party::MP, m);
    s.ledger.stake += m;
  }
  /// Moves `m` out of `from`'s escrow to `to`'s balance.
  void transfer(Party from, Party to, Money m) {
    if (escrow(from) < m) fail("internal: escrow of " + std::string(to_string(from)) + " is short");
    escrow(from) -= m;
    balance(to) += m;
  }
  void forfeit(Party from, Party to) { transfer(from, to, escrow(from)); }
  /// Refunds every remaining escrow and releases the stake.
  void close(const std::string& stage) {
    for (Party p : kParties) transfer(p, p, escrow(p));
    balance(Party::MP) += s.ledger.stake;
    s.ledger.stake = 0;
    s.stage = stage;
  }
};

bool is(const Transition& t, Party actor, Action action) { return t.actor == actor && t.action == action; }

std::string payload_string(const Transition& t, const char* key, bool required) {
  if (!t.payload.contains(key)) {
    if (required) fail(std::string("payload requires '") + key + "'");
    return {};
  }
  if (!t.payload[key].is_string()) fail(std::string("payload '") + key + "' must be a string");
  return t.payload[key].get<std::string>();
}

bool payload_bool(const Transition& t, const char* key) {
  if (!t.payload.contains(key) || !t.payload[key].is_boolean()) {
    fail(std::string("payload requires boolean '") + key + "'");
  }
  return t.payload[key].get<bool>();
}

void record(ProtocolState& s, const Transition& t, const char* key) {
  const std::string v = payload_string(t, key, false);
  if (!v.empty()) s.commitments[key] = v;
}

/// Accuracy verdict from {met}, {correct,total} or {logits,labels}.
bool accuracy_met(const ProtocolState& s, const Transition& t) {
  const json& p = t.payload;
  if (p.contains("met")) return payload_bool(t, "met");
  int64_t correct = 0, total = 0;
  if (p.contains("correct") && p.contains("total")) {
    if (!p["correct"].is_number_integer() || !p["total"].is_number_integer()) fail("correct/total must be integers");
    correct = p["correct"].get<int64_t>();
    total = p["total"].get<int64_t>();
  } else if (p.contains("logits") && p.contains("labels")) {
    const auto logits = p["logits"].get<std::vector<std::vector<int64_t>>>();
    const auto labels = p["labels"].get<std::vector<int64_t>>();
    if (logits.size() != labels.size()) fail("logits and labels differ in length");
    total = static_cast<int64_t>(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) correct += static_cast<int64_t>(top1(logits[i])) == labels[i];
  } else {
    fail("settle payload requires 'met', 'correct'/'total' or 'logits'/'labels'");
  }
  if (total <= 0 || correct < 0 || correct > total) fail("invalid accuracy counts");
  return Money(correct) >= s.params.accuracy * total;
}

// Both accuracy protocols. Stages: init, mp_committed, committed,
// mp_escrowed, escrowed, then the variant-specific tail.
bool step_accuracy(ProtocolState& s, const Transition& t) {
  Books b{s};
  const EconParams& p = s.params;
  const Money N = p.N();
  const std::string& st = s.stage;
  const bool full = s.kind == Kind::accuracy_full;
  const bool any_abort = t.action == Action::abort && t.actor != Party::service;

  if (st == "init") {
    if (is(t, Party::MP, Action::commit)) {
      record(s, t, "weights_hash");
      record(s, t, "keys_hash");
      b.lock_stake(p.stake());
      s.stage = "mp_committed";
      return true;
    }
    if (any_abort) return b.close("aborted"), true;
    return false;
  }
  if (st == "mp_committed" || st == "committed" || st == "mp_escrowed") {
    if (st == "mp_committed" && is(t, Party::MC, Action::commit)) {
      record(s, t, "test_set_hash");
      s.stage = "committed";
      return true;
    }
    if (st == "committed" && is(t, Party::MP, Action::escrow)) {
      b.deposit(Party::MP, 2 * N * p.E);
      b.fee(Party::MP, p.eps());
      s.stage = "mp_escrowed";
      return true;
    }
    if (st == "mp_escrowed" && is(t, Party::MC, Action::escrow)) {
      b.deposit(Party::MC, 2 * N * p.E);
      b.fee(Party::MC, p.eps());
      s.stage = "escrowed";
      return true;
    }
    if (any_abort || is(t, Party::service, Action::timeout)) return b.close("aborted"), true;
    return false;
  }

  // Verdict at the end of both variants.
  if (st == "snarks_sent") {
    if (is(t, Party::service, Action::settle)) {
      if (accuracy_met(s, t)) {
        b.transfer(Party::MC, Party::MP, full ? Money(2 * (p.N1 * p.P + p.N2 * p.Z)) : Money(2 * N * p.Z));
        b.close("settled");
      } else {
        b.forfeit(Party::MP, Party::MC);
        b.close("slashed_MP");
      }
      return true;
    }
    if (is(t, Party::MP, Action::abort)) {
      b.forfeit(Party::MP, Party::MC);
      return b.close("slashed_MP"), true;
    }
    return false;
  }

  if (!full) {
    if (st == "escrowed") {
      if (is(t, Party::MC, Action::send_subset)) {
        record(s, t, "test_set_hash");
        s.stage = "test_sent";
        return true;
      }
      if (any_abort || is(t, Party::service, Action::timeout)) return b.close("aborted"), true;
      return false;
    }
    if (st == "test_sent") {
      if (is(t, Party::MP, Action::send_snarks)) {
        record(s, t, "outputs_hash");
        s.stage = "snarks_sent";
        return true;
      }
      if (is(t, Party::MP, Action::abort) || is(t, Party::service, Action::timeout)) {
        b.transfer(Party::MC, Party::MP, N * p.P);
        return b.close("aborted"), true;
      }
      return false;
    }
    return false;
  }

  if (st == "escrowed") {
    if (is(t, Party::MP, Action::send_subset)) {
      record(s, t, "subset_hash");
      s.stage = "subset_selected";
      return true;
    }
    if (any_abort || is(t, Party::service, Action::timeout)) return b.close("aborted"), true;
    return false;
  }
  // MC walking away once the subset is chosen forfeits its escrow to MP.
  if (st == "subset_selected" || st == "mp_proceeded") {
    if (is(t, Party::MC, Action::send_subset)) {
      s.stage = st == "subset_selected" ? "subset_sent" : "remainder_sent";
      return true;
    }
    if (is(t, Party::MC, Action::abort) || is(t, Party::service, Action::timeout)) {
      b.forfeit(Party::MC, Party::MP);
      return b.close("slashed_MC"), true;
    }
    return false;
  }
  if (st == "subset_sent") {
    if (is(t, Party::MP, Action::acknowledge)) {
      s.stage = "mp_proceeded";
      return true;
    }
    if (is(t, Party::MP, Action::abort) || is(t, Party::service, Action::timeout)) {
      b.transfer(Party::MC, Party::MP, p.N1 * p.P);
      return b.close("aborted"), true;
    }
    return false;
  }
  if (st == "remainder_sent") {
    if (is(t, Party::MP, Action::send_snarks)) {
      record(s, t, "outputs_hash");
      s.stage = "snarks_sent";
      return true;
    }
    if (is(t, Party::MP, Action::abort) || is(t, Party::service, Action::timeout)) {
      b.forfeit(Party::MP, Party::MC);
      return b.close("slashed_MP"), true;
    }
    return false;
  }
  return false;
}

bool step_serving(ProtocolState& s, const Transition& t) {
  Books b{s};
  const EconParams& p = s.params;
  const std::string& st = s.stage;
  const bool any_abort = t.action == Action::abort && t.actor != Party::service;

  if (st == "init" || st == "mc_escrowed" || st == "escrowed" || st == "inputs_sent" || st == "predicted") {
    if (st == "init" && is(t, Party::MC, Action::escrow)) {
      b.deposit(Party::MC, 2 * p.K * p.Z);
      s.stage = "mc_escrowed";
      return true;
    }
    if (st == "mc_escrowed" && is(t, Party::MP, Action::escrow)) {
      b.deposit(Party::MP, p.beta * p.K * p.Z);
      s.stage = "escrowed";
      return true;
    }
    if (st == "escrowed" && is(t, Party::MC, Action::commit)) {
      record(s, t, "inputs_hash");
      s.stage = "inputs_sent";
      return true;
    }
    if (st == "inputs_sent" && is(t, Party::MP, Action::acknowledge)) {
      record(s, t, "predictions_hash");
      s.stage = "predicted";
      return true;
    }
    if (st == "predicted" && is(t, Party::MC, Action::commit)) {
      record(s, t, "io_hash");
      s.stage = "round_open";
      return true;
    }
    if (any_abort || is(t, Party::service, Action::timeout)) return b.close("aborted"), true;
    return false;
  }
  if (st == "round_open") {
    if (is(t, Party::MC, Action::contest)) {
      int64_t k1 = p.K1;
      if (t.payload.contains("k1")) {
        if (!t.payload["k1"].is_number_integer()) fail("payload 'k1' must be an integer");
        k1 = t.payload["k1"].get<int64_t>();
      }
      if (k1 <= 0 || k1 > p.K) fail("contested count must lie in [1, K]");
      s.contested = k1;
      s.stage = "contested";
      return true;
    }
    // End of round: nothing contested, both escrows return.
    if (is(t, Party::service, Action::settle)) return b.close("settled"), true;
    return false;
  }
  if (st == "contested") {
    if (is(t, Party::MP, Action::send_snarks)) {
      if (payload_bool(t, "valid")) {
        b.transfer(Party::MC, Party::MP, 2 * s.contested * p.Z);
        b.close("settled");
      } else {
        b.forfeit(Party::MP, Party::MC);
        b.close("slashed_MP");
      }
      return true;
    }
    if (is(t, Party::MP, Action::abort) || is(t, Party::service, Action::timeout)) {
      b.forfeit(Party::MP, Party::MC);
      return b.close("slashed_MP"), true;
    }
    return false;
  }
  return false;
}

bool step_retrieval(ProtocolState& s, const Transition& t) {
  Books b{s};
  const std::string& st = s.stage;
  const bool any_abort = t.action == Action::abort && t.actor != Party::service;

  if (st == "init" || st == "committed" || st == "bonded") {
    if (st == "init" && is(t, Party::MP, Action::commit)) {
      record(s, t, "dataset_hash");
      s.stage = "committed";
      return true;
    }
    if (st == "committed" && is(t, Party::MP, Action::escrow)) {
      b.deposit(Party::MP, s.params.bond);
      s.stage = "bonded";
      return true;
    }
    if (st == "bonded" && is(t, Party::MC, Action::send_subset)) {
      record(s, t, "model_hash");
      s.stage = "model_sent";
      return true;
    }
    if (any_abort || is(t, Party::service, Action::timeout)) return b.close("aborted"), true;
    return false;
  }
  if (st == "model_sent") {
    if (is(t, Party::MP, Action::send_snarks)) {
      record(s, t, "matches_hash");
      s.stage = "snarks_sent";
      return true;
    }
    if (is(t, Party::MP, Action::abort) || is(t, Party::service, Action::timeout)) {
      b.forfeit(Party::MP, Party::MC);
      return b.close("slashed_MP"), true;
    }
    return false;
  }
  if (st == "snarks_sent" && is(t, Party::service, Action::settle)) {
    // The verdict covers the proofs and the sampled hash audit.
    if (payload_bool(t, "valid")) {
      b.close("settled");
    } else {
      b.forfeit(Party::MP, Party::MC);
      b.close("slashed_MP");
    }
    return true;
  }
  return false;
}

// Timeout-aware data transfer. MC acts in stages hashes/data/key, MP in
// acknowledge/continue; whoever stalls or aborts there is slashed.
bool step_transfer(ProtocolState& s, const Transition& t) {
  Books b{s};
  const std::string& st = s.stage;
  const Money deposit = 2 * s.params.N() * s.params.E;
  auto slash = [&](Party who) {
    const Party other = who == Party::MP ? Party::MC : Party::MP;
    b.forfeit(who, other);
    b.close(who == Party::MP ? "slashed_MP" : "slashed_MC");
    return true;
  };

  if (st == "init" || st == "mc_escrowed") {
    if (st == "init" && is(t, Party::MC, Action::escrow)) {
      b.deposit(Party::MC, deposit);
      s.stage = "mc_escrowed";
      return true;
    }
    if (st == "mc_escrowed" && is(t, Party::MP, Action::escrow)) {
      b.deposit(Party::MP, deposit);
      s.stage = "escrowed";
      return true;
    }
    if ((t.action == Action::abort && t.actor != Party::service) || is(t, Party::service, Action::timeout)) {
      return b.close("aborted"), true;
    }
    return false;
  }

  const bool mc_turn = st == "escrowed" || st == "hashes_sent" || st == "acknowledged";
  const bool mp_turn = st == "data_sent" || st == "key_revealed";
  if (!mc_turn && !mp_turn) return false;
  const Party waiting = mc_turn ? Party::MC : Party::MP;
  if (is(t, Party::service, Action::timeout) || is(t, waiting, Action::abort)) return slash(waiting);

  if (st == "escrowed" && is(t, Party::MC, Action::commit)) {
    s.commitments["inputs_hash"] = payload_string(t, "inputs_hash", true);
    s.commitments["key_hash"] = payload_string(t, "key_hash", true);
    s.stage = "hashes_sent";
    return true;
  }
  if (st == "hashes_sent" && is(t, Party::MC, Action::send_subset)) {
    s.commitments["ciphertext"] = payload_string(t, "ciphertext", true);
    s.stage = "data_sent";
    return true;
  }
  if (st == "data_sent" && is(t, Party::MP, Action::acknowledge)) {
    s.stage = "acknowledged";
    return true;
  }
  if (st == "acknowledged" && is(t, Party::MC, Action::reveal_key)) {
    s.commitments["key"] = payload_string(t, "key", true);
    s.stage = "key_revealed";
    return true;
  }
  if (st == "key_revealed") {
    if (is(t, Party::MP, Action::acknowledge)) return b.close("settled"), true;
    if (is(t, Party::MP, Action::contest)) {
      // A contest stands when the key or the ciphertext misses its hash.
      const auto& c = s.commitments;
      const bool key_ok = util::sha256_hex(c.at("key")) == c.at("key_hash");
      std::string cipher;
      try {
        const auto bytes = util::from_hex(c.at("ciphertext"));
        cipher.assign(bytes.begin(), bytes.end());
      } catch (const Error&) {
        return slash(Party::MC);
      }
      const bool data_ok = util::sha256_hex(cipher) == c.at("inputs_hash");
      return slash(key_ok && data_ok ? Party::MP : Party::MC);
    }
  }
  return false;
}

}  // namespace

ProtocolState step(const ProtocolState& state, const Transition& t) {
  auto illegal = [&](const std::string& why) {
    fail("illegal transition: " + std::string(to_string(t.action)) + " by " + std::string(to_string(t.actor)) +
         " at stage '" + state.stage + "'" + why);
  };
  if (state.terminal()) {
    illegal(t.action == Action::contest ? ": contest after the round has concluded" : ": protocol has ended");
  }
  ProtocolState s = state;
  bool ok = false;
  switch (s.kind) {
    case Kind::accuracy_simple:
    case Kind::accuracy_full: ok = step_accuracy(s, t); break;
    case Kind::serving: ok = step_serving(s, t); break;
    case Kind::retrieval: ok = step_retrieval(s, t); break;
    case Kind::data_transfer: ok = step_transfer(s, t); break;
  }
  if (!ok) illegal("");
  return s;
}

std::vector<Transition> legal_transitions(const ProtocolState& state) {
  static const std::string kKey = "placeholder-key";
  static const std::string kCipher = [] {
    const std::string c = keyed_stream_xor(kKey, "test inputs");
    return util::to_hex(reinterpret_cast<const uint8_t*>(c.data()), c.size());
  }();
  const std::string cipher_raw = keyed_stream_xor(kKey, "test inputs");
  const int64_t k = state.params.K;

  auto variants = [&](Action a) -> std::vector<json> {
    switch (a) {
      case Action::commit:
        return {json{{"inputs_hash", util::sha256_hex(cipher_raw)}, {"key_hash", util::sha256_hex(kKey)}},
                json{{"inputs_hash", util::sha256_hex("other")}, {"key_hash", util::sha256_hex(kKey)}}};
      case Action::send_subset: return {json{{"ciphertext", kCipher}}};
      case Action::reveal_key: return {json{{"key", kKey}}, json{{"key", "wrong"}}};
      case Action::settle:
        return {json::object(), json{{"met", true}}, json{{"met", false}}, json{{"valid", true}},
                json{{"valid", false}}};
      case Action::send_snarks: return {json{{"valid", true}}, json{{"valid", false}}};
      case Action::contest: return {json{{"k1", 1}}, json{{"k1", k}}};
      default: return {json::object()};
    }
  };

  std::vector<Transition> out;
  if (state.terminal()) return out;
  for (Party p : kParties) {
    for (Action a : kActions) {
      for (const json& payload : variants(a)) {
        Transition t{p, a, payload};
        try {
          (void)step(state, t);
          out.push_back(std::move(t));
        } catch (const ProtocolError&) {
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Calculators

json GriefThresholds::to_json() const {
  return json{{"baseline", {{"epsilon", money_str(baseline_epsilon)},
                            {"epsilon_decimal", money_decimal(baseline_epsilon, 6)},
                            {"alpha_lower_bound", money_str(baseline_alpha_bound)},
                            {"alpha_lower_bound_decimal", money_decimal(baseline_alpha_bound, 6)}}},
              {"anti_griefing", {{"epsilon", money_str(anti_griefing_epsilon)},
                                 {"epsilon_decimal", money_decimal(anti_griefing_epsilon, 6)},
                                 {"alpha", money_str(anti_griefing_alpha)},
                                 {"alpha_decimal", money_decimal(anti_griefing_alpha, 6)}}}};
}

GriefThresholds grief_thresholds(const EconParams& p) {
  const Money n1p = p.N1 * p.P;
  const Money n2z = p.N2 * p.Z;
  const Money ne = p.N() * p.E;
  GriefThresholds g;
  g.baseline_epsilon = n1p / 99;
  const Money den = 49 * n1p + 99 * ne;
  if (den == 0) fail("degenerate parameters: 49 N1 P + 99 N E is zero");
  g.baseline_alpha_bound = 49 * n1p / den;
  g.anti_griefing_epsilon = n1p;
  if (n1p == n2z) fail("degenerate parameters: N1 P equals N2 Z");
  g.anti_griefing_alpha = (ne / 50 - 2 * n2z) / (n1p - n2z);
  return g;
}

Money expected_gain_mp(const EconParams& p, const Money& alpha) {
  if (alpha < 0 || alpha > 1) fail("alpha must lie in [0, 1]");
  const Money n1p = p.N1 * p.P;
  return (1 - alpha) * (n1p + 2 * p.N2 * p.Z - p.eps()) + alpha * n1p;
}

int64_t retrieval_sample_size(double p, double delta) {
  if (!(p > 0 && p < 1)) fail("tamper fraction must lie in (0, 1)");
  if (!(delta > 0 && delta < 1)) fail("confidence level must lie in (0, 1)");
  const long double q = 1.0L - p;
  const long double target = delta / 2.0L;
  // Relative slack absorbs the representation error of decimal inputs such
  // as 1 - 0.975, so exact boundary cases resolve the way exact arithmetic would.
  auto passes = [&](int64_t n) { return std::pow(q, static_cast<long double>(n)) <= target * (1.0L + 1e-12L); };
  int64_t n = static_cast<int64_t>(std::ceil(std::log(target) / std::log(q)));
  n = std::max<int64_t>(n, 1);
  // The closed form can land one off under floating point; settle on the exact minimum.
  while (n > 1 && passes(n - 1)) --n;
  while (!passes(n)) ++n;
  return n;
}

int64_t hoeffding_sample_size(double epsilon, double delta) {
  // epsilon = 1 is admitted: the bound degenerates but stays well defined.
  if (!(epsilon > 0 && epsilon <= 1)) fail("accuracy slack must lie in (0, 1]");
  if (!(delta > 0 && delta < 1)) fail("confidence level must lie in (0, 1)");
  const double x = std::log(1.0 / delta) / (2.0 * epsilon * epsilon);
  return std::max<int64_t>(1, static_cast<int64_t>(std::ceil(x - 1e-9)));
}

Money cost_estimate(int64_t n, const Money& c) {
  if (n < 0) fail("sample size must be nonnegative");
  if (c < 0) fail("per-example cost must be nonnegative");
  const Money cents = n * c * 100;
  const Int num = mp::numerator(cents), den = mp::denominator(cents);
  return Money(Int((2 * num + den) / (2 * den)), Int(100));
}

}  // namespace zkml::protocol
