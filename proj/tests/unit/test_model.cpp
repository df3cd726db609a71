#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "masaat/checkpoint.hpp"
#include "masaat/errors.hpp"
#include "masaat/model.hpp"

using namespace masaat;
using namespace masaat::model;
using nn::Tensor;
using nn::Var;

namespace {

nn::EncoderConfig small_encoder() { return {8, 2, 1, 16, 1e-5}; }

ModelConfig small_config(std::size_t window = 6) {
  ModelConfig cfg;
  cfg.window = window;
  cfg.channels = {data::Channel::Close, data::Channel::High};
  cfg.agents = {AgentSpec::dc_agent(0.01, small_encoder()), AgentSpec::raw_price(small_encoder())};
  return cfg;
}

Tensor random_prices(std::mt19937_64& rng, std::size_t n, std::size_t m, std::size_t t) {
  std::normal_distribution<double> z(0.0, 0.02);
  Tensor x({n, m, t}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double p = 1.0;
    for (std::size_t k = 0; k < t; ++k) {
      p *= std::exp(z(rng));
      for (std::size_t c = 0; c < m; ++c) x[(i * m + c) * t + k] = p * (1.0 + 0.01 * c);
    }
  }
  return x;
}

Tensor permute_assets(const Tensor& x, const std::vector<std::size_t>& perm) {
  const std::size_t block = x.size() / x.shape()[0];
  Tensor out(x.shape(), 0.0);
  for (std::size_t i = 0; i < perm.size(); ++i)
    std::copy_n(x.values().begin() + perm[i] * block, block, out.values().begin() + i * block);
  return out;
}

std::vector<double> weights_on_tape(const MasaatPolicy& policy, const data::ObservationWindow& w) {
  nn::Tape tape;
  nn::Binding p(tape, policy.parameters(), false);
  const auto v = policy.forward(p, w).value().values();
  return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE("portfolio vector validation") {
  CHECK_NOTHROW(PortfolioVector::uniform(4).validate());
  CHECK_THROWS_AS((PortfolioVector{{0.5, 0.6}}.validate()), ContractError);
  CHECK_THROWS_AS((PortfolioVector{{1.1, -0.1}}.validate()), ContractError);
  CHECK_NOTHROW((PortfolioVector{{0.3, 0.7 + 1e-12}}.validate()));
}

TEST_CASE("CSA tokenization is the asset-major reshape") {
  const Tensor one({1, 1, 3}, std::vector<double>{1, 2, 3});
  CHECK(tokenize_csa(one) == Tensor::matrix(1, 3, {1, 2, 3}));
  // x[i][c][t] = 100 i + 10 c + t
  Tensor x({2, 2, 2}, 0.0);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t t = 0; t < 2; ++t) x[(i * 2 + c) * 2 + t] = 100.0 * i + 10.0 * c + t;
  CHECK(tokenize_csa(x) == Tensor::matrix(2, 4, {0, 1, 10, 11, 100, 101, 110, 111}));
  CHECK(untokenize_csa(tokenize_csa(x), 2, 2) == x);
}

TEST_CASE("TA tokenization puts time points on rows") {
  const Tensor one({1, 1, 3}, std::vector<double>{1, 2, 3});
  CHECK(tokenize_ta(one) == Tensor::matrix(3, 1, {1, 2, 3}));
  std::mt19937_64 rng(1);
  const Tensor x = random_prices(rng, 3, 2, 5);
  const Tensor ta = tokenize_ta(x), csa = tokenize_csa(x);
  CHECK(untokenize_ta(ta, 3, 2) == x);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t c = 0; c < 2; ++c) CHECK(ta(t, i * 2 + c) == csa(i, c * 5 + t));
  const Tensor pooled = pool_assets(ta, 3, 2);
  CHECK(pooled.shape() == nn::Shape{5, 2});
  for (std::size_t t = 0; t < 5; ++t)
    CHECK(pooled(t, 1) == doctest::Approx((ta(t, 1) + ta(t, 3) + ta(t, 5)) / 3.0).epsilon(1e-15));
}

TEST_CASE("fusion head: scalar example and attention rows") {
  nn::Tape t;
  auto out = fuse(t.constant(Tensor::matrix(1, 1, {2})), t.constant(Tensor::matrix(1, 1, {3})),
                  t.constant(Tensor::matrix(1, 1, {0.5})), t.constant(Tensor::matrix(1, 1, {0.1})), 1.0);
  CHECK(out.scores.value()[0] == doctest::Approx(1.6).epsilon(1e-15));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor csa({4, 5}), ta({7, 5}), v({5, 1});
    for (double& e : csa.values()) e = 3 * z(rng);
    for (double& e : ta.values()) e = 3 * z(rng);
    for (double& e : v.values()) e = z(rng);
    nn::Tape tt;
    auto f = fuse(tt.constant(csa), tt.constant(ta), tt.constant(v), tt.constant(Tensor({1, 1}, 0.2)), 0.7);
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0;
      for (std::size_t k = 0; k < 7; ++k) s += f.attention.value()(r, k);
      CHECK(std::fabs(s - 1.0) < 1e-12);
    }
    // identical TA rows: scores do not depend on CSA
    Tensor same({7, 5});
    for (std::size_t k = 0; k < 7; ++k)
      for (std::size_t d = 0; d < 5; ++d) same(k, d) = ta(0, d);
    auto g = fuse(tt.constant(csa), tt.constant(same), tt.constant(v), tt.constant(Tensor({1, 1}, 0.2)), 0.7);
    for (std::size_t r = 1; r < 4; ++r)
      CHECK(g.scores.value()[r] == doctest::Approx(g.scores.value()[0]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(fuse(t.constant(Tensor({2, 3})), t.constant(Tensor({4, 2})), t.constant(Tensor({3, 1})),
                       t.constant(Tensor({1, 1})), 1.0),
                  ConfigError);
}

TEST_CASE("ensemble rule") {
  nn::Tape t;
  const Var equal[] = {t.constant(Tensor::matrix(3, 1, {2, 2, 2})), t.constant(Tensor::matrix(3, 1, {-1, -1, -1}))};
  for (double w : ensemble(equal).value().values()) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const Var single[] = {t.constant(Tensor::matrix(2, 1, {0.0, std::log(3.0)}))};
  const auto w = ensemble(single).value();
  CHECK(w.shape() == nn::Shape{1, 2});
  CHECK(w[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(0.75).epsilon(1e-14));

  const Var a[] = {t.constant(Tensor::matrix(3, 1, {0.1, 0.5, -0.3})), t.constant(Tensor::matrix(3, 1, {1.0, 0.0, 0.2}))};
  const Var shifted[] = {t.constant(Tensor::matrix(3, 1, {5.1, 5.5, 4.7})), t.constant(Tensor::matrix(3, 1, {6.0, 5.0, 5.2}))};
  for (auto rule : {EnsembleRule::MeanScores, EnsembleRule::MeanSoftmax}) {
    const auto x = ensemble(a, rule).value(), y = ensemble(shifted, rule).value();
    for (std::size_t i = 0; i < 3; ++i) CHECK(x[i] == doctest::Approx(y[i]).epsilon(1e-13));
  }
  // identical agents reproduce a single agent's softmax
  const Var one[] = {a[0]};
  const Var three[] = {a[0], a[0], a[0]};
  const auto s1 = ensemble(one).value(), s3 = ensemble(three).value();
  for (std::size_t i = 0; i < 3; ++i) CHECK(s1[i] == doctest::Approx(s3[i]).epsilon(1e-15));
  CHECK_THROWS_AS(ensemble(std::span<const Var>{}), ConfigError);
}

TEST_CASE("CSA and TA block shapes and local properties") {
  const ModelConfig cfg = small_config();
  const MasaatPolicy policy(cfg, 5);
  std::mt19937_64 rng(6);
  for (std::size_t n : {2u, 5u, 10u}) {
    const Tensor x = random_prices(rng, n, 2, 6);
    nn::Tape t;
    nn::Binding p(t, policy.parameters(), false);
    const Var csa = csa_forward(p, "agent1", x, cfg.agents[1]);
    CHECK(csa.value().shape() == nn::Shape{n, 8});
    const auto mask = dc::time_mask(6);
    const Var ta = ta_forward(p, "agent1", x, dc::high_order_signal(x), mask, cfg.agents[1]);
    CHECK(ta.value().shape() == nn::Shape{6, 8});
  }
  // duplicate asset slices give duplicate embedding rows
  Tensor x = random_prices(rng, 3, 2, 6);
  for (std::size_t j = 0; j < 12; ++j) x[24 + j] = x[j];
  nn::Tape t;
  nn::Binding p(t, policy.parameters(), false);
  const Tensor csa = csa_forward(p, "agent0", x, cfg.agents[0]).value();
  for (std::size_t d = 0; d < 8; ++d) CHECK(csa(0, d) == csa(2, d));
  CHECK_THROWS_AS(csa_forward(p, "agent0", random_prices(rng, 3, 2, 5), cfg.agents[0]), ConfigError);
  CHECK_THROWS_AS(ta_forward(p, "agent0", x, Tensor({3, 2, 5}), dc::time_mask(6), cfg.agents[0]), ConfigError);
}

TEST_CASE("time mask scales the embedded tokens") {
  const MasaatPolicy policy(small_config(), 2);
  // every time point identical, so the pre-mask embedding rows coincide
  Tensor x({3, 2, 6}, 1.0);
  nn::Tape t;
  nn::Binding p(t, policy.parameters(), false);
  const Var parts[] = {t.constant(pool_assets(tokenize_ta(x), 3, 2)),
                       t.constant(pool_assets(tokenize_ta(dc::high_order_signal(x)), 3, 2))};
  const auto mask = dc::time_mask(6);
  const Tensor masked = nn::scale_rows(nn::mlp(p, "agent0.ta.embed", nn::concat_cols(parts)), mask).value();
  double prev = -1.0;
  for (std::size_t k = 0; k < 6; ++k) {
    double norm = 0;
    for (std::size_t d = 0; d < 8; ++d) norm += masked(k, d) * masked(k, d);
    if (k == 0) CHECK(norm == 0.0);
    CHECK(norm > prev);
    prev = norm;
  }
}

TEST_CASE("policy: zero fusion heads give the uniform portfolio") {
  ModelConfig cfg = small_config();
  cfg.agents = {AgentSpec::raw_price(small_encoder())};
  MasaatPolicy policy(cfg, 1);
  for (auto& [name, tensor] : policy.parameters())
    if (name.find("fusion") != std::string::npos)
      for (double& v : tensor.values()) v = 0.0;
  std::mt19937_64 rng(1);
  const data::ObservationWindow w{random_prices(rng, 4, 2, 6), 5};
  for (double v : policy.decide(w).weights) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("policy: deterministic, simplex-valued, equivariant") {
  std::mt19937_64 rng(12);
  const ModelConfig cfg = small_config();
  const MasaatPolicy a(cfg, 77), b(cfg, 77);
  CHECK(a.parameters() == b.parameters());
  CHECK_FALSE(a.parameters() == MasaatPolicy(cfg, 78).parameters());
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + trial % 5;
    const data::ObservationWindow w{random_prices(rng, n, 2, 6), 5};
    const auto w1 = policy_forward(w, a), w2 = policy_forward(w, a);
    CHECK(w1.weights == w2.weights);
    CHECK_NOTHROW(w1.validate());
    const auto on_tape = weights_on_tape(a, w);
    for (std::size_t i = 0; i < n; ++i) CHECK(on_tape[i] == doctest::Approx(w1[i]).epsilon(1e-14));

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const data::ObservationWindow pw{permute_assets(w.tensor, perm), 5};
    const auto wp = policy_forward(pw, a);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(wp[i] - w1[perm[i]]) < 1e-9);
  }
}

TEST_CASE("policy rejects mismatched windows and bad configurations") {
  const MasaatPolicy policy(small_config(), 1);
  std::mt19937_64 rng(2);
  CHECK_THROWS_AS(policy.decide({random_prices(rng, 3, 2, 5), 4}), ConfigError);
  CHECK_THROWS_AS(policy.decide({random_prices(rng, 3, 3, 6), 5}), ConfigError);
  ModelConfig empty = small_config();
  empty.agents.clear();
  CHECK_THROWS_AS(MasaatPolicy(empty, 1), ConfigError);
  ModelConfig bad_heads = small_config();
  bad_heads.agents[0].encoder.num_heads = 3;
  CHECK_THROWS_AS(MasaatPolicy(bad_heads, 1), ConfigError);
  CHECK(policy.lambda_for(0) == doctest::Approx(1.0 / std::sqrt(8.0)));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  ModelConfig cfg = small_config();
  cfg.lambda = 0.3;
  cfg.ensemble = EnsembleRule::MeanSoftmax;
  const MasaatPolicy policy(cfg, 19);
  const MasaatPolicy back = checkpoint_from_string(checkpoint_to_string(policy));
  CHECK(back.config() == policy.config());
  CHECK(back.parameters() == policy.parameters());
  std::mt19937_64 rng(4);
  const data::ObservationWindow w{random_prices(rng, 4, 2, 6), 5};
  CHECK(back.decide(w).weights == policy.decide(w).weights);

  auto j = nlohmann::json::parse(checkpoint_to_string(policy));
  j["version"] = 99;
  CHECK_THROWS_AS(checkpoint_from_string(j.dump()), ConfigError);
  auto k = nlohmann::json::parse(checkpoint_to_string(policy));
  k["parameters"].erase("agent0.fusion.b");
  CHECK_THROWS_AS(checkpoint_from_string(k.dump()), ConfigError);
  CHECK_THROWS_AS(checkpoint_from_string("not json"), ConfigError);
}
