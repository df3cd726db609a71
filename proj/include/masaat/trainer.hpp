#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "masaat/adam.hpp"
#include "masaat/backtest.hpp"
#include "masaat/market_data.hpp"
#include "masaat/model.hpp"

namespace masaat::rl {

struct TrainerConfig {
  std::size_t max_iterations = 200;
  std::size_t episode_length = 32;  // T_m
  double learning_rate = 1e-3;
  std::size_t update_every = 1;     // episodes per policy update
  std::size_t validate_every = 1;   // updates between validation backtests
  std::uint64_t seed = 0;
  double initial_value = 1.0;       // C_0

  void validate() const;
  friend bool operator==(const TrainerConfig&, const TrainerConfig&) = default;
};

// One executed day: what the policy saw and what it earned.
struct MemoryTuple {
  model::PortfolioVector weights;
  double gross_return = 1.0;  // rho_t
  double daily_return = 0.0;  // r_t = rho_t - 1
  data::ObservationWindow window;
  std::vector<nn::Tensor> dc_maps;
  std::vector<double> relative_closes;
};

struct EpisodeLog {
  std::size_t start_day = 0;  // t_s, the first decision day
  std::vector<MemoryTuple> steps;
};

// Trading profile collected between policy updates.
class Memory {
 public:
  void store(EpisodeLog episode) { episodes_.push_back(std::move(episode)); }
  void reset() { episodes_.clear(); }
  bool empty() const { return episodes_.empty(); }
  std::size_t size() const { return episodes_.size(); }
  std::span<const EpisodeLog> episodes() const { return episodes_; }

 private:
  std::vector<EpisodeLog> episodes_;
};

// J = (1/T) * (log C_0 + sum log rho_t).
double episode_reward(std::span<const double> gross_returns, double initial_value);

// Rolls the policy forward for T_m days starting at decision day t_s.
EpisodeLog run_episode(const data::MarketFrame& frame, const model::MasaatPolicy& policy,
                       std::size_t start_day, const TrainerConfig& cfg, double cost_rate = 0.0);

// J of a stored episode recomputed on the binding's tape, including the
// turnover cost term when cost_rate > 0.
nn::Var episode_objective(const nn::Binding& p, const model::MasaatPolicy& policy,
                          const EpisodeLog& episode, double initial_value, double cost_rate);

struct UpdateResult {
  double j_before = 0.0;
  double j_after = 0.0;
};

// One optimizer step ascending `objective`. Throws TrainingError when a
// gradient is not finite.
using Objective = std::function<nn::Var(const nn::Binding&)>;
UpdateResult ascend(nn::ParameterSet& params, nn::Adam& optimizer, const Objective& objective);

// Ascends the mean episode J over the memory, then resets the memory.
UpdateResult update_policy(model::MasaatPolicy& policy, Memory& memory, nn::Adam& optimizer,
                           double initial_value, double cost_rate = 0.0);

struct TrainingLogRow {
  std::size_t iteration = 0;
  std::size_t start_day = 0;
  double j_train = 0.0;
  std::optional<double> validation_sharpe;
  std::string checkpoint_id;
};

struct TrainResult {
  model::MasaatPolicy best;
  std::string best_checkpoint_id;
  std::optional<double> best_validation_sharpe;
  std::vector<TrainingLogRow> log;
};

// Range of decision days an episode may start on inside `train`.
data::DayRange episode_start_range(const data::DayRange& train, std::size_t window,
                                   std::size_t episode_length);

TrainResult train(const data::MarketFrame& frame, const data::SplitSpec& splits,
                  model::MasaatPolicy policy, const TrainerConfig& cfg,
                  const backtest::MetricConfig& metrics = {});

// `iteration,t_s,J_train,SR_validation,checkpoint_id`
std::string training_log_csv(std::span<const TrainingLogRow> rows);

}  // namespace masaat::rl
