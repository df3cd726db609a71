#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "masaat/autodiff.hpp"
#include "masaat/dc.hpp"
#include "masaat/layers.hpp"
#include "masaat/market_data.hpp"
#include "masaat/params.hpp"

namespace masaat::model {

// Long-only, fully invested weights.
struct PortfolioVector {
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  double operator[](std::size_t i) const { return weights[i]; }
  // Throws ContractError unless w >= 0 and |sum(w) - 1| < tol.
  void validate(double tol = 1e-9) const;
  static PortfolioVector uniform(std::size_t n);
};

enum class AgentKind { Dc, RawPrice };

struct AgentSpec {
  AgentKind kind = AgentKind::RawPrice;
  std::optional<dc::Threshold> threshold;  // set iff kind == Dc
  nn::EncoderConfig encoder;

  static AgentSpec dc_agent(double threshold, nn::EncoderConfig enc = {});
  static AgentSpec raw_price(nn::EncoderConfig enc = {});
  std::string label() const;
  void validate() const;
  friend bool operator==(const AgentSpec&, const AgentSpec&) = default;
};

enum class EnsembleRule {
  MeanScores,    // softmax(mean_i O_i)
  MeanSoftmax,   // mean_i softmax(O_i)
};

struct ModelConfig {
  std::size_t window = 16;  // T_w
  std::vector<data::Channel> channels = data::default_channels();
  std::vector<AgentSpec> agents;
  double lambda = 0.0;  // <= 0: 1/sqrt(D) per agent
  EnsembleRule ensemble = EnsembleRule::MeanScores;

  std::size_t num_channels() const { return channels.size(); }
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Three DC agents {0.5%, 1%, 2%} plus the raw-price agent.
ModelConfig default_model_config();

// ---- token reconstruction ----

// N x M x T -> N x (M*T); row i is asset i's slice, channel-major then time.
nn::Tensor tokenize_csa(const nn::Tensor& x);
nn::Tensor untokenize_csa(const nn::Tensor& tokens, std::size_t channels, std::size_t length);
// N x M x T -> T x (N*M); row k holds time point k, asset-major then channel.
nn::Tensor tokenize_ta(const nn::Tensor& x);
nn::Tensor untokenize_ta(const nn::Tensor& tokens, std::size_t assets, std::size_t channels);
// T x (N*M) -> T x M: average of the asset blocks. The first TA embedding
// layer ties its weights across assets, which is this average followed by a
// dense layer; it keeps the policy equivariant under asset permutations.
nn::Tensor pool_assets(const nn::Tensor& ta_tokens, std::size_t assets, std::size_t channels);

// ---- per-agent blocks (differentiable) ----

nn::Var csa_forward(const nn::Binding& p, const std::string& prefix, const nn::Tensor& x,
                    const AgentSpec& agent);
// Row k of the embedded tokens is scaled by mask[k] before the encoder.
nn::Var ta_forward(const nn::Binding& p, const std::string& prefix, const nn::Tensor& x,
                   const nn::Tensor& high_order, std::span<const double> mask,
                   const AgentSpec& agent);

struct FusionOutput {
  nn::Var scores;     // N x 1
  nn::Var attention;  // N x T_w, rows sum to one
};
// scores = softmax_rows(lambda * csa * ta^T) * ta * V + b
FusionOutput fuse(nn::Var csa, nn::Var ta, nn::Var head_v, nn::Var head_b, double lambda);

// N x 1 score columns -> 1 x N portfolio row.
nn::Var ensemble(std::span<const nn::Var> scores, EnsembleRule rule = EnsembleRule::MeanScores);

// ---- policy ----

struct AgentInput {
  nn::Tensor features;    // DC map or raw window, N x M x T_w
  nn::Tensor high_order;  // first difference along time
};

class MasaatPolicy {
 public:
  MasaatPolicy(ModelConfig cfg, std::uint64_t seed);
  MasaatPolicy(ModelConfig cfg, nn::ParameterSet params);

  const ModelConfig& config() const { return cfg_; }
  const nn::ParameterSet& parameters() const { return params_; }
  nn::ParameterSet& parameters() { return params_; }

  static std::string agent_prefix(std::size_t agent);
  double lambda_for(std::size_t agent) const;

  // DC maps, one per DC agent, in agent order.
  std::vector<nn::Tensor> dc_maps(const data::ObservationWindow& window) const;
  // Per-agent inputs; `maps` are the DC maps from dc_maps().
  std::vector<AgentInput> agent_inputs(const data::ObservationWindow& window,
                                       std::span<const nn::Tensor> maps) const;

  // 1 x N portfolio row on the binding's tape.
  nn::Var forward(const nn::Binding& p, const data::ObservationWindow& window) const;
  nn::Var forward(const nn::Binding& p, std::span<const AgentInput> inputs) const;
  // Per-agent N x 1 scores.
  std::vector<nn::Var> agent_scores(const nn::Binding& p, std::span<const AgentInput> inputs) const;

  // Inference without gradient bookkeeping.
  PortfolioVector decide(const data::ObservationWindow& window) const;

 private:
  void check_window(const data::ObservationWindow& window) const;

  ModelConfig cfg_;
  nn::ParameterSet params_;
  std::vector<double> mask_;
};

PortfolioVector policy_forward(const data::ObservationWindow& window, const MasaatPolicy& policy);

}  // namespace masaat::model
