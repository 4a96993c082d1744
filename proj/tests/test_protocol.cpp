// Copyright 2026 The zkml Authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "util/codec.hpp"
#include "zkml/protocol.hpp"

using namespace zkml;
using namespace zkml::protocol;

namespace {

Transition tr(Party p, Action a, json payload = json::object()) { return Transition{p, a, std::move(payload)}; }

ProtocolState run(ProtocolState s, const std::vector<Transition>& log) {
  for (const Transition& t : log) s = step(s, t);
  return s;
}

const std::vector<Transition> kFullHappyPrefix{
    tr(Party::MP, Action::commit), tr(Party::MC, Action::commit),      tr(Party::MP, Action::escrow),
    tr(Party::MC, Action::escrow), tr(Party::MP, Action::send_subset), tr(Party::MC, Action::send_subset),
};

Money delta(const ProtocolState& a, const ProtocolState& b, Party p) {
  return b.ledger.balance.at(p) - a.ledger.balance.at(p);
}

// Smallest N with (1 - p)^N <= delta / 2, in exact rationals.
int64_t binomial_oracle(const Money& p, const Money& delta) {
  const Money q = 1 - p;
  Money tail = 1;
  for (int64_t n = 1;; ++n) {
    tail *= q;
    if (tail <= delta / 2) return n;
  }
}

EconParams random_params(std::mt19937_64& rng) {
  EconParams p;
  auto r = [&](int lo, int hi) { return static_cast<int64_t>(lo + static_cast<int>(rng() % static_cast<uint64_t>(hi - lo + 1))); };
  p.P = Money(r(0, 50), 100);
  p.Z = p.P + Money(r(1, 100), 100);
  p.E = p.Z + Money(r(1, 300), 100);
  p.N1 = r(1, 500);
  p.N2 = r(0, 500);
  p.K = r(1, 200);
  p.K1 = r(1, static_cast<int>(p.K));
  p.beta = Money(r(200, 500), 100);
  if (rng() % 2) p.epsilon = Money(r(0, 100), 7);
  p.accuracy = Money(r(0, 100), 100);
  p.bond = Money(r(0, 1000), 10);
  p.validate();
  return p;
}

}  // namespace

TEST_CASE("accuracy_full settle pays 2(N1 P + N2 Z) = 120") {
  const EconParams p;
  const ProtocolState s0 = start(Kind::accuracy_full, p);
  std::vector<Transition> log = kFullHappyPrefix;
  log.push_back(tr(Party::MP, Action::acknowledge));
  log.push_back(tr(Party::MC, Action::send_subset));
  log.push_back(tr(Party::MP, Action::send_snarks));
  log.push_back(tr(Party::service, Action::settle, {{"correct", 95}, {"total", 100}}));
  const ProtocolState end = run(s0, log);
  CHECK(end.stage == "settled");
  const Money eps = Money(10, 99);
  CHECK(delta(s0, end, Party::MP) == 120 - eps);
  CHECK(delta(s0, end, Party::MC) == -120 - eps);
  CHECK(delta(s0, end, Party::service) == 2 * eps);
  CHECK(end.ledger.total() == s0.ledger.total());
  CHECK(end.ledger.stake == 0);

  // Accuracy below the target slashes MP.
  log.back() = tr(Party::service, Action::settle, {{"correct", 89}, {"total", 100}});
  const ProtocolState bad = run(s0, log);
  CHECK(bad.stage == "slashed_MP");
  CHECK(delta(s0, bad, Party::MC) == 2 * p.N() * p.E - eps);

  // Top-1 from logits and labels.
  log.back() = tr(Party::service, Action::settle, {{"logits", {{1, 5, 2}, {9, 0, 0}}}, {"labels", {1, 0}}});
  CHECK(run(s0, log).stage == "settled");
}

TEST_CASE("MP abort after receiving the subset costs MC N1 P = 10") {
  const ProtocolState s0 = start(Kind::accuracy_full, EconParams{});
  std::vector<Transition> log = kFullHappyPrefix;
  log.push_back(tr(Party::MP, Action::abort));
  const ProtocolState end = run(s0, log);
  CHECK(end.stage == "aborted");
  const Money eps = Money(10, 99);
  CHECK(delta(s0, end, Party::MP) == 10 - eps);
  CHECK(delta(s0, end, Party::MC) == -10 - eps);
  for (Party q : {Party::MP, Party::MC, Party::service}) CHECK(end.ledger.escrow.at(q) == 0);
}

TEST_CASE("formulas hold on random parameters") {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 100; ++t) {
    const EconParams p = random_params(rng);
    const ProtocolState s0 = start(Kind::accuracy_full, p);
    std::vector<Transition> log = kFullHappyPrefix;
    log.push_back(tr(Party::MP, Action::abort));
    REQUIRE(delta(s0, run(s0, log), Party::MP) == p.N1 * p.P - p.eps());
    log.back() = tr(Party::MP, Action::acknowledge);
    log.push_back(tr(Party::MC, Action::send_subset));
    log.push_back(tr(Party::MP, Action::send_snarks));
    log.push_back(tr(Party::service, Action::settle, {{"met", true}}));
    REQUIRE(delta(s0, run(s0, log), Party::MP) == 2 * (p.N1 * p.P + p.N2 * p.Z) - p.eps());
  }
}

TEST_CASE("accuracy_simple") {
  const EconParams p;
  const ProtocolState s0 = start(Kind::accuracy_simple, p);
  const std::vector<Transition> prefix{tr(Party::MP, Action::commit), tr(Party::MC, Action::commit),
                                       tr(Party::MP, Action::escrow), tr(Party::MC, Action::escrow),
                                       tr(Party::MC, Action::send_subset)};
  std::vector<Transition> log = prefix;
  log.push_back(tr(Party::MP, Action::send_snarks));
  log.push_back(tr(Party::service, Action::settle, {{"met", true}}));
  CHECK(delta(s0, run(s0, log), Party::MP) == 2 * p.N() * p.Z - p.eps());
  log = prefix;
  log.push_back(tr(Party::service, Action::timeout));
  CHECK(delta(s0, run(s0, log), Party::MP) == p.N() * p.P - p.eps());
}

TEST_CASE("serving: a valid contest costs MC 2 K1 Z") {
  EconParams p;
  p.beta = 3;
  const ProtocolState s0 = start(Kind::serving, p);
  const std::vector<Transition> log{tr(Party::MC, Action::escrow),      tr(Party::MP, Action::escrow),
                                    tr(Party::MC, Action::commit),      tr(Party::MP, Action::acknowledge),
                                    tr(Party::MC, Action::commit),      tr(Party::MC, Action::contest, {{"k1", 10}}),
                                    tr(Party::MP, Action::send_snarks, {{"valid", true}})};
  const ProtocolState end = run(s0, log);
  CHECK(end.stage == "settled");
  CHECK(delta(s0, end, Party::MC) == -10);
  CHECK(delta(s0, end, Party::MP) == 10);
  CHECK_THROWS_WITH_AS(step(end, tr(Party::MC, Action::contest)), doctest::Contains("after the round has concluded"),
                       ProtocolError);

  std::vector<Transition> invalid = log;
  invalid.back() = tr(Party::MP, Action::send_snarks, {{"valid", false}});
  const ProtocolState slashed = run(s0, invalid);
  CHECK(slashed.stage == "slashed_MP");
  CHECK(delta(s0, slashed, Party::MC) == p.beta * p.K * p.Z);

  std::vector<Transition> quiet(log.begin(), log.begin() + 5);
  quiet.push_back(tr(Party::service, Action::settle));
  const ProtocolState calm = run(s0, quiet);
  CHECK(delta(s0, calm, Party::MC) == 0);
  CHECK(delta(s0, calm, Party::MP) == 0);
  CHECK_THROWS_AS(step(run(s0, std::vector<Transition>(log.begin(), log.begin() + 5)),
                       tr(Party::MC, Action::contest, {{"k1", p.K + 1}})),
                  ProtocolError);
}

TEST_CASE("retrieval") {
  EconParams p;
  p.bond = 25;
  const ProtocolState s0 = start(Kind::retrieval, p);
  const std::vector<Transition> log{tr(Party::MP, Action::commit, {{"dataset_hash", "aa"}}),
                                    tr(Party::MP, Action::escrow), tr(Party::MC, Action::send_subset),
                                    tr(Party::MP, Action::send_snarks)};
  std::vector<Transition> ok = log;
  ok.push_back(tr(Party::service, Action::settle, {{"valid", true}}));
  const ProtocolState good = run(s0, ok);
  CHECK(good.stage == "settled");
  CHECK(good.commitments.at("dataset_hash") == "aa");
  CHECK(delta(s0, good, Party::MP) == 0);
  ok.back() = tr(Party::service, Action::settle, {{"valid", false}});
  CHECK(delta(s0, run(s0, ok), Party::MC) == 25);
}

TEST_CASE("data transfer: hashes, ciphertext, key and contest") {
  const std::string key = "k3y", data = "labelled test inputs";
  const std::string cipher = keyed_stream_xor(key, data);
  CHECK(cipher != data);
  CHECK(keyed_stream_xor(key, cipher) == data);
  const std::string cipher_hex = util::to_hex(reinterpret_cast<const uint8_t*>(cipher.data()), cipher.size());

  const EconParams p;
  const ProtocolState s0 = start(Kind::data_transfer, p);
  auto flow = [&](const std::string& revealed, const std::string& claimed_inputs_hash) {
    return std::vector<Transition>{
        tr(Party::MC, Action::escrow),
        tr(Party::MP, Action::escrow),
        tr(Party::MC, Action::commit, {{"inputs_hash", claimed_inputs_hash}, {"key_hash", util::sha256_hex(key)}}),
        tr(Party::MC, Action::send_subset, {{"ciphertext", cipher_hex}}),
        tr(Party::MP, Action::acknowledge),
        tr(Party::MC, Action::reveal_key, {{"key", revealed}}),
    };
  };
  auto honest = flow(key, util::sha256_hex(cipher));
  CHECK(run(s0, honest).stage == "key_revealed");
  honest.push_back(tr(Party::MP, Action::acknowledge));
  CHECK(run(s0, honest).stage == "settled");

  honest.back() = tr(Party::MP, Action::contest);
  const ProtocolState frivolous = run(s0, honest);
  CHECK(frivolous.stage == "slashed_MP");
  CHECK(delta(s0, frivolous, Party::MC) == 2 * p.N() * p.E);

  auto wrong_key = flow("nope", util::sha256_hex(cipher));
  wrong_key.push_back(tr(Party::MP, Action::contest));
  CHECK(run(s0, wrong_key).stage == "slashed_MC");

  auto wrong_data = flow(key, util::sha256_hex("something else"));
  wrong_data.push_back(tr(Party::MP, Action::contest));
  CHECK(run(s0, wrong_data).stage == "slashed_MC");

  // MC stalls after MP acknowledged the ciphertext.
  std::vector<Transition> stall(honest.begin(), honest.begin() + 5);
  stall.push_back(tr(Party::service, Action::timeout));
  CHECK(run(s0, stall).stage == "slashed_MC");
}

TEST_CASE("illegal transitions") {
  const ProtocolState s0 = start(Kind::accuracy_full, EconParams{});
  CHECK_THROWS_WITH_AS(step(s0, tr(Party::MC, Action::commit)), doctest::Contains("illegal transition"), ProtocolError);
  CHECK_THROWS_AS(step(s0, tr(Party::service, Action::settle)), ProtocolError);
  auto poor = default_funds(EconParams{});
  poor[Party::MP] = 5;
  CHECK_THROWS_WITH_AS(step(start(Kind::accuracy_full, EconParams{}, poor), tr(Party::MP, Action::commit)),
                       doctest::Contains("insufficient funds"), ProtocolError);
  const ProtocolState done = step(s0, tr(Party::MP, Action::abort));
  CHECK_THROWS_WITH_AS(step(done, tr(Party::MP, Action::commit)), doctest::Contains("protocol has ended"), ProtocolError);
  CHECK(legal_transitions(done).empty());
}

TEST_CASE("parameter validation and parsing") {
  EconParams p;
  p.Z = 2;
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("E > Z > P"), ProtocolError);
  p = EconParams{};
  p.beta = Money(19, 10);
  CHECK_THROWS_AS(p.validate(), ProtocolError);
  p = EconParams{};
  p.K1 = 0;
  CHECK_THROWS_AS(p.validate(), ProtocolError);
  CHECK_THROWS_WITH_AS(EconParams::from_json(json{{"E", 1}, {"Q", 2}}), doctest::Contains("unknown parameter"),
                       ProtocolError);
  const EconParams q = EconParams::from_json(json{{"E", "3"}, {"Z", "1/2"}, {"P", 0.1}, {"N1", 7}});
  CHECK(q.P == Money(1, 10));
  CHECK(q.eps() == Money(7, 990));
  CHECK(EconParams::from_json(q.to_json()).to_json() == q.to_json());

  CHECK(parse_money("12") == 12);
  CHECK(parse_money("-0.16655") == Money(-16655, 100000));
  CHECK(parse_money("10/99") == Money(10, 99));
  CHECK(parse_money("1e-2") == Money(1, 100));
  CHECK(parse_money("2.5E1") == 25);
  CHECK_THROWS_AS(parse_money("abc"), ProtocolError);
  CHECK_THROWS_AS(parse_money("1/0"), ProtocolError);
  CHECK_THROWS_AS(parse_money(""), ProtocolError);
  CHECK(money_str(Money(10, 99)) == "10/99");
  CHECK(money_decimal(Money(2, 3)) == "0.67");
  CHECK(money_decimal(Money(-1, 200)) == "-0.01");
  CHECK(money_decimal(Money(1, 200)) == "0.01");
  CHECK(money_decimal(Money(0)) == "0.00");
  CHECK(parse_party("escrow_service") == Party::service);
  CHECK(to_string(Party::service) == "escrow_service");

  const Transition t = Transition::from_json(json{{"actor", "MC"}, {"action", "reveal_key"}, {"payload", {{"key", "x"}}}});
  CHECK(Transition::from_json(t.to_json()).to_json() == t.to_json());
  CHECK_THROWS_AS(Transition::from_json(json{{"actor", "MC"}}), ProtocolError);
  CHECK_THROWS_AS(Transition::from_json(json{{"actor", "MC"}, {"action", "fly"}}), ProtocolError);
}

TEST_CASE("grief thresholds") {
  const GriefThresholds g = grief_thresholds(EconParams{});
  CHECK(g.baseline_epsilon == Money(10, 99));
  CHECK(g.baseline_alpha_bound == Money(490, 20290));
  CHECK(g.anti_griefing_epsilon == 10);
  // (200/50 - 2*50) / (10 - 50)
  CHECK(g.anti_griefing_alpha == Money(12, 5));

  EconParams even;
  even.N1 = 500;  // N1 P = 50 = N2 Z
  CHECK_THROWS_WITH_AS(grief_thresholds(even), doctest::Contains("N1 P equals N2 Z"), ProtocolError);
}

TEST_CASE("expected gain") {
  EconParams p;
  p.epsilon = Money(10, 99);
  CHECK(expected_gain_mp(p, 0) == 10 + 100 - Money(10, 99));
  CHECK(expected_gain_mp(p, 1) == 10);
  CHECK(expected_gain_mp(p, Money(1, 2)) == Money(1, 2) * (10 + 100 - Money(10, 99)) + Money(1, 2) * 10);
  CHECK_THROWS_AS(expected_gain_mp(p, 2), ProtocolError);
}

TEST_CASE("retrieval sample size matches the binomial oracle") {
  CHECK(retrieval_sample_size(0.05, 0.05) == 72);
  CHECK(retrieval_sample_size(0.5, 0.05) == 6);
  CHECK(retrieval_sample_size(0.975, 0.05) == 1);
  const std::vector<std::pair<double, Money>> ps{{0.5, Money(1, 2)},     {0.25, Money(1, 4)},   {0.1, Money(1, 10)},
                                                 {0.05, Money(1, 20)},   {0.025, Money(1, 40)}, {0.01, Money(1, 100)},
                                                 {0.975, Money(39, 40)}, {0.3, Money(3, 10)}};
  const std::vector<std::pair<double, Money>> ds{{0.05, Money(1, 20)}, {0.01, Money(1, 100)}, {0.2, Money(1, 5)}};
  for (const auto& [pd, pr] : ps) {
    for (const auto& [dd, dr] : ds) {
      INFO("p=" << pd << " delta=" << dd);
      CHECK(retrieval_sample_size(pd, dd) == binomial_oracle(pr, dr));
    }
  }
  CHECK_THROWS_AS(retrieval_sample_size(0, 0.05), ProtocolError);
  CHECK_THROWS_AS(retrieval_sample_size(0.1, 1), ProtocolError);
}

TEST_CASE("hoeffding sample size") {
  CHECK(hoeffding_sample_size(0.05, 0.05) == 600);
  CHECK(hoeffding_sample_size(0.01, 0.05) == 14979);
  CHECK(std::abs(hoeffding_sample_size(0.025, 0.05) - 2396) <= 1);
  CHECK(hoeffding_sample_size(1.0, std::exp(-2.0)) == 1);
  CHECK_THROWS_AS(hoeffding_sample_size(0, 0.05), ProtocolError);
  CHECK_THROWS_AS(hoeffding_sample_size(1.5, 0.05), ProtocolError);
  CHECK_THROWS_AS(hoeffding_sample_size(0.1, 0), ProtocolError);

  // Nonincreasing in both arguments.
  for (double d = 0.01; d < 0.99; d += 0.07) {
    int64_t prev = INT64_MAX;
    for (double e = 0.005; e <= 1.0; e += 0.013) {
      const int64_t n = hoeffding_sample_size(e, d);
      REQUIRE(n <= prev);
      prev = n;
      REQUIRE(n >= std::log(1 / d) / (2 * e * e) - 1e-6);
    }
  }
  for (double e = 0.01; e <= 1.0; e += 0.09) {
    int64_t prev = INT64_MAX;
    for (double d = 0.001; d < 1.0; d += 0.011) {
      const int64_t n = hoeffding_sample_size(e, d);
      REQUIRE(n <= prev);
      prev = n;
    }
  }
}

TEST_CASE("cost estimate") {
  const Money c = parse_money("0.16655");
  CHECK(money_decimal(cost_estimate(600, c)) == "99.93");
  CHECK(money_decimal(cost_estimate(72, c)) == "11.99");
  CHECK(cost_estimate(0, c) == 0);
  CHECK(cost_estimate(1, parse_money("0.005")) == Money(1, 100));
  CHECK(cost_estimate(1, parse_money("0.00499")) == 0);
  CHECK_THROWS_AS(cost_estimate(-1, c), ProtocolError);
}

TEST_CASE("property: fuzzed legal sequences conserve funds and never overdraw") {
  std::mt19937_64 rng(2026);
  const Kind kinds[] = {Kind::accuracy_simple, Kind::accuracy_full, Kind::serving, Kind::retrieval,
                        Kind::data_transfer};
  for (int trial = 0; trial < 2000; ++trial) {
    const EconParams p = random_params(rng);
    const Kind kind = kinds[trial % 5];
    const ProtocolState s0 = start(kind, p);
    ProtocolState s = s0;
    std::map<Party, Money> deposited{{Party::MP, 0}, {Party::MC, 0}, {Party::service, 0}};
    Money fees = 0;
    std::vector<Transition> log;
    while (!s.terminal()) {
      const auto options = legal_transitions(s);
      REQUIRE_FALSE(options.empty());
      const Transition& t = options[rng() % options.size()];
      const ProtocolState before = s;
      s = step(s, t);
      REQUIRE(step(before, t) == s);  // same input, same output
      log.push_back(t);
      REQUIRE(s.ledger.total() == s0.ledger.total());
      for (const auto& [party, m] : s.ledger.balance) REQUIRE(m >= 0);
      for (const auto& [party, m] : s.ledger.escrow) {
        REQUIRE(m >= 0);
        if (m > before.ledger.escrow.at(party)) deposited[party] += m - before.ledger.escrow.at(party);
      }
      if (s.ledger.stake > before.ledger.stake) deposited[Party::MP] += s.ledger.stake - before.ledger.stake;
      fees += s.ledger.balance.at(Party::service) - before.ledger.balance.at(Party::service);
      REQUIRE(log.size() < 64);
    }
    for (Party q : {Party::MP, Party::MC, Party::service}) REQUIRE(s.ledger.escrow.at(q) == 0);
    REQUIRE(s.ledger.stake == 0);
    // A party's gain is bounded by what the counterparty put in escrow.
    REQUIRE(delta(s0, s, Party::MP) <= deposited[Party::MC]);
    REQUIRE(delta(s0, s, Party::MC) <= deposited[Party::MP]);
    REQUIRE(delta(s0, s, Party::service) == fees);
    REQUIRE(fees <= 2 * p.eps());
    // Replaying the log reproduces the terminal state.
    REQUIRE(run(s0, log) == s);
  }
}
