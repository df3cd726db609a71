#include "masaat/model.hpp"

#include <cmath>
#include <sstream>

#include "masaat/errors.hpp"

namespace masaat::model {

using nn::Tensor;
using nn::Var;

void PortfolioVector::validate(double tol) const {
  if (weights.empty()) throw ContractError("portfolio: no weights");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("portfolio: negative or non-finite weight");
    total += w;
  }
  if (std::fabs(total - 1.0) >= tol) {
    throw ContractError("portfolio: weights sum to " + std::to_string(total));
  }
}

PortfolioVector PortfolioVector::uniform(std::size_t n) {
  return PortfolioVector{std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

AgentSpec AgentSpec::dc_agent(double threshold, nn::EncoderConfig enc) {
  return AgentSpec{AgentKind::Dc, dc::Threshold(threshold), enc};
}

AgentSpec AgentSpec::raw_price(nn::EncoderConfig enc) {
  return AgentSpec{AgentKind::RawPrice, std::nullopt, enc};
}

std::string AgentSpec::label() const {
  if (kind == AgentKind::RawPrice) return "raw";
  std::ostringstream os;
  os << "dc(" << threshold->value() << ")";
  return os.str();
}

void AgentSpec::validate() const {
  if ((kind == AgentKind::Dc) != threshold.has_value()) {
    throw ConfigError("agent: a DC agent needs a threshold and a raw-price agent must not have one");
  }
  encoder.validate();
}

void ModelConfig::validate() const {
  if (window < 2) throw ConfigError("model: window (T_w) must be >= 2");
  if (channels.empty()) throw ConfigError("model: at least one price channel is required");
  if (agents.empty()) throw ConfigError("model: at least one agent is required");
  for (const auto& a : agents) a.validate();
  if (!std::isfinite(lambda)) throw ConfigError("model: lambda must be finite");
}

ModelConfig default_model_config() {
  ModelConfig cfg;
  for (double th : {0.005, 0.01, 0.02}) cfg.agents.push_back(AgentSpec::dc_agent(th));
  cfg.agents.push_back(AgentSpec::raw_price());
  return cfg;
}

// ---- tokens ----

namespace {

void require_rank3(const Tensor& x, const char* where) {
  if (x.rank() != 3) {
    throw ConfigError(std::string(where) + ": expected N x M x T_w, got " + nn::shape_str(x.shape()));
  }
}

}  // namespace

Tensor tokenize_csa(const Tensor& x) {
  require_rank3(x, "tokenize_csa");
  const auto& s = x.shape();
  return x.reshaped({s[0], s[1] * s[2]});
}

Tensor untokenize_csa(const Tensor& tokens, std::size_t channels, std::size_t length) {
  if (tokens.cols() != channels * length) throw ConfigError("untokenize_csa: width mismatch");
  return tokens.reshaped({tokens.rows(), channels, length});
}

Tensor tokenize_ta(const Tensor& x) {
  require_rank3(x, "tokenize_ta");
  const std::size_t n = x.shape()[0], m = x.shape()[1], len = x.shape()[2];
  Tensor out({len, n * m}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t k = 0; k < len; ++k) out[k * n * m + i * m + c] = x[(i * m + c) * len + k];
  return out;
}

Tensor untokenize_ta(const Tensor& tokens, std::size_t assets, std::size_t channels) {
  if (tokens.cols() != assets * channels) throw ConfigError("untokenize_ta: width mismatch");
  const std::size_t len = tokens.rows();
  Tensor out({assets, channels, len}, 0.0);
  for (std::size_t i = 0; i < assets; ++i)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t k = 0; k < len; ++k)
        out[(i * channels + c) * len + k] = tokens[k * assets * channels + i * channels + c];
  return out;
}

Tensor pool_assets(const Tensor& ta_tokens, std::size_t assets, std::size_t channels) {
  if (ta_tokens.cols() != assets * channels) throw ConfigError("pool_assets: width mismatch");
  const std::size_t len = ta_tokens.rows();
  Tensor out({len, channels}, 0.0);
  const double inv = 1.0 / static_cast<double>(assets);
  for (std::size_t k = 0; k < len; ++k)
    for (std::size_t i = 0; i < assets; ++i)
      for (std::size_t c = 0; c < channels; ++c)
        out[k * channels + c] += ta_tokens[k * assets * channels + i * channels + c] * inv;
  return out;
}

// ---- blocks ----

Var csa_forward(const nn::Binding& p, const std::string& prefix, const Tensor& x,
                const AgentSpec& agent) {
  require_rank3(x, "csa_forward");
  const std::size_t width = x.shape()[1] * x.shape()[2];
  const Tensor& w1 = p.tape().value(p[prefix + ".csa.embed.fc1.weight"].id);
  if (w1.rows() != width) {
    throw ConfigError("csa_forward: token width " + std::to_string(width) +
                      " does not match the embedding input " + std::to_string(w1.rows()));
  }
  Var tokens = p.tape().constant(tokenize_csa(x));
  Var embedded = nn::mlp(p, prefix + ".csa.embed", tokens);
  return nn::encoder_forward(p, prefix + ".csa.encoder", embedded, agent.encoder);
}

Var ta_forward(const nn::Binding& p, const std::string& prefix, const Tensor& x,
               const Tensor& high_order, std::span<const double> mask, const AgentSpec& agent) {
  require_rank3(x, "ta_forward");
  if (high_order.shape() != x.shape()) {
    throw ConfigError("ta_forward: high-order signal shape " + nn::shape_str(high_order.shape()) +
                      " differs from " + nn::shape_str(x.shape()));
  }
  const std::size_t n = x.shape()[0], m = x.shape()[1], len = x.shape()[2];
  if (mask.size() != len) throw ConfigError("ta_forward: mask length differs from T_w");
  nn::Tape& tape = p.tape();
  const Var parts[] = {tape.constant(pool_assets(tokenize_ta(x), n, m)),
                       tape.constant(pool_assets(tokenize_ta(high_order), n, m))};
  Var embedded = nn::mlp(p, prefix + ".ta.embed", nn::concat_cols(parts));
  Var masked = nn::scale_rows(embedded, mask);
  return nn::encoder_forward(p, prefix + ".ta.encoder", masked, agent.encoder);
}

FusionOutput fuse(Var csa, Var ta, Var head_v, Var head_b, double lambda) {
  if (csa.cols() != ta.cols()) {
    throw ConfigError("fuse: embedding widths differ (" + std::to_string(csa.cols()) + " vs " +
                      std::to_string(ta.cols()) + ")");
  }
  if (head_v.rows() != csa.cols() || head_v.cols() != 1 || head_b.value().size() != 1) {
    throw ConfigError("fuse: head V must be D x 1 and b must be 1 x 1");
  }
  if (!(lambda > 0.0)) throw ConfigError("fuse: lambda must be positive");
  Var attention = nn::softmax_rows(nn::scale(nn::matmul(csa, nn::transpose(ta)), lambda));
  Var scores = nn::add_row(nn::matmul(nn::matmul(attention, ta), head_v), head_b);
  return {scores, attention};
}

Var ensemble(std::span<const Var> scores, EnsembleRule rule) {
  if (scores.empty()) throw ConfigError("ensemble: no agent scores");
  const std::size_t n = scores.front().rows();
  for (const Var& s : scores) {
    if (s.rows() != n || s.cols() != 1) throw ConfigError("ensemble: score vectors must be N x 1");
  }
  const double inv = 1.0 / static_cast<double>(scores.size());
  if (rule == EnsembleRule::MeanScores) {
    Var total = scores.front();
    for (std::size_t i = 1; i < scores.size(); ++i) total = nn::add(total, scores[i]);
    return nn::softmax_rows(nn::transpose(nn::scale(total, inv)));
  }
  Var total = nn::softmax_rows(nn::transpose(scores.front()));
  for (std::size_t i = 1; i < scores.size(); ++i) {
    total = nn::add(total, nn::softmax_rows(nn::transpose(scores[i])));
  }
  return nn::scale(total, inv);
}

// ---- policy ----

MasaatPolicy::MasaatPolicy(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  nn::Rng rng(seed);
  const std::size_t m = cfg_.num_channels();
  for (std::size_t a = 0; a < cfg_.agents.size(); ++a) {
    const auto& enc = cfg_.agents[a].encoder;
    const std::size_t d = enc.embed_dim;
    const std::string pre = agent_prefix(a);
    nn::init_mlp(params_, pre + ".csa.embed", m * cfg_.window, 2 * d, d, rng);
    nn::init_encoder(params_, pre + ".csa.encoder", enc, rng);
    nn::init_mlp(params_, pre + ".ta.embed", 2 * m, 2 * d, d, rng);
    nn::init_encoder(params_, pre + ".ta.encoder", enc, rng);
    params_.add(pre + ".fusion.V", nn::uniform_init({d, 1}, d, rng));
    params_.add(pre + ".fusion.b", Tensor({1, 1}, 0.0));
  }
  mask_ = dc::time_mask(cfg_.window);
}

MasaatPolicy::MasaatPolicy(ModelConfig cfg, nn::ParameterSet params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
  const MasaatPolicy reference(cfg_, 0);
  for (const auto& [name, value] : reference.params_) {
    if (!params_.contains(name)) throw ConfigError("checkpoint is missing parameter " + name);
    if (params_.at(name).shape() != value.shape()) {
      throw ConfigError("checkpoint parameter " + name + " has shape " +
                        nn::shape_str(params_.at(name).shape()) + ", expected " +
                        nn::shape_str(value.shape()));
    }
  }
  if (params_.size() != reference.params_.size()) {
    throw ConfigError("checkpoint has parameters the model does not define");
  }
  mask_ = dc::time_mask(cfg_.window);
}

std::string MasaatPolicy::agent_prefix(std::size_t agent) { return "agent" + std::to_string(agent); }

double MasaatPolicy::lambda_for(std::size_t agent) const {
  if (cfg_.lambda > 0.0) return cfg_.lambda;
  return 1.0 / std::sqrt(static_cast<double>(cfg_.agents[agent].encoder.embed_dim));
}

void MasaatPolicy::check_window(const data::ObservationWindow& window) const {
  if (window.tensor.rank() != 3 || window.num_channels() != cfg_.num_channels() ||
      window.length() != cfg_.window) {
    throw ConfigError("policy expects windows of " + std::to_string(cfg_.num_channels()) +
                      " channels x " + std::to_string(cfg_.window) + " days, got " +
                      nn::shape_str(window.tensor.shape()));
  }
}

std::vector<Tensor> MasaatPolicy::dc_maps(const data::ObservationWindow& window) const {
  check_window(window);
  std::vector<Tensor> maps;
  for (const auto& a : cfg_.agents) {
    if (a.kind == AgentKind::Dc) maps.push_back(dc::dc_feature_map(window, *a.threshold));
  }
  return maps;
}

std::vector<AgentInput> MasaatPolicy::agent_inputs(const data::ObservationWindow& window,
                                                   std::span<const Tensor> maps) const {
  check_window(window);
  std::vector<AgentInput> inputs;
  std::size_t next_map = 0;
  for (const auto& a : cfg_.agents) {
    if (a.kind == AgentKind::Dc) {
      if (next_map >= maps.size()) throw ContractError("agent_inputs: missing DC map");
      const Tensor& f = maps[next_map++];
      inputs.push_back({f, dc::high_order_signal(f)});
    } else {
      inputs.push_back({window.tensor, dc::high_order_signal(window.tensor)});
    }
  }
  return inputs;
}

std::vector<Var> MasaatPolicy::agent_scores(const nn::Binding& p,
                                            std::span<const AgentInput> inputs) const {
  if (inputs.size() != cfg_.agents.size()) throw ContractError("agent_scores: input count mismatch");
  std::vector<Var> scores;
  scores.reserve(inputs.size());
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    const std::string pre = agent_prefix(a);
    const auto& spec = cfg_.agents[a];
    Var csa = csa_forward(p, pre, inputs[a].features, spec);
    Var ta = ta_forward(p, pre, inputs[a].features, inputs[a].high_order, mask_, spec);
    scores.push_back(fuse(csa, ta, p[pre + ".fusion.V"], p[pre + ".fusion.b"], lambda_for(a)).scores);
  }
  return scores;
}

Var MasaatPolicy::forward(const nn::Binding& p, std::span<const AgentInput> inputs) const {
  const auto scores = agent_scores(p, inputs);
  return ensemble(scores, cfg_.ensemble);
}

Var MasaatPolicy::forward(const nn::Binding& p, const data::ObservationWindow& window) const {
  const auto maps = dc_maps(window);
  const auto inputs = agent_inputs(window, maps);
  return forward(p, inputs);
}

PortfolioVector MasaatPolicy::decide(const data::ObservationWindow& window) const {
  nn::Tape tape;
  nn::Binding p(tape, params_, false);
  const Tensor& w = forward(p, window).value();
  return PortfolioVector{std::vector<double>(w.values().begin(), w.values().end())};
}

PortfolioVector policy_forward(const data::ObservationWindow& window, const MasaatPolicy& policy) {
  return policy.decide(window);
}

}  // namespace masaat::model
