#include "masaat/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <random>
#include <sstream>

#include "masaat/errors.hpp"

namespace masaat::rl {

using nn::Tensor;
using nn::Var;

void TrainerConfig::validate() const {
  if (episode_length < 1) throw ConfigError("trainer: episode_length (T_m) must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("trainer: learning_rate must be finite and >= 0");
  }
  if (update_every < 1) throw ConfigError("trainer: update_every must be >= 1");
  if (validate_every < 1) throw ConfigError("trainer: validate_every must be >= 1");
  if (!(initial_value > 0.0)) throw ConfigError("trainer: initial_value must be positive");
}

double episode_reward(std::span<const double> gross_returns, double initial_value) {
  if (gross_returns.empty()) throw ContractError("episode_reward: no returns");
  if (!(initial_value > 0.0)) throw NumericDomainError("episode_reward: C_0 must be positive");
  double total = std::log(initial_value);
  for (double rho : gross_returns) {
    if (!(rho > 0.0)) throw NumericDomainError("episode_reward: non-positive gross return");
    total += std::log(rho);
  }
  return total / static_cast<double>(gross_returns.size());
}

EpisodeLog run_episode(const data::MarketFrame& frame, const model::MasaatPolicy& policy,
                       std::size_t start_day, const TrainerConfig& cfg, double cost_rate) {
  const auto& mcfg = policy.config();
  if (start_day + 1 < mcfg.window) {
    throw RangeError("episode start " + std::to_string(start_day) + " leaves less than T_w=" +
                     std::to_string(mcfg.window) + " days of history");
  }
  if (start_day + cfg.episode_length >= frame.num_days()) {
    throw RangeError("episode starting at " + std::to_string(start_day) + " runs past the data");
  }
  EpisodeLog log;
  log.start_day = start_day;
  backtest::BacktestState state;
  for (std::size_t k = 0; k < cfg.episode_length; ++k) {
    const std::size_t t = start_day + k;
    MemoryTuple m;
    m.window = data::window(frame, t, mcfg.window, mcfg.channels);
    m.dc_maps = policy.dc_maps(m.window);
    {
      nn::Tape tape;
      nn::Binding p(tape, policy.parameters(), false);
      const auto inputs = policy.agent_inputs(m.window, m.dc_maps);
      const Tensor& w = policy.forward(p, inputs).value();
      m.weights.weights.assign(w.values().begin(), w.values().end());
    }
    m.relative_closes = frame.relative_closes(t + 1);
    const auto rec = backtest::step(state, m.weights, m.relative_closes, cost_rate);
    m.gross_return = rec.gross;
    m.daily_return = rec.arithmetic;
    log.steps.push_back(std::move(m));
  }
  return log;
}

Var episode_objective(const nn::Binding& p, const model::MasaatPolicy& policy,
                      const EpisodeLog& episode, double initial_value, double cost_rate) {
  if (episode.steps.empty()) throw ContractError("episode_objective: empty episode");
  nn::Tape& tape = p.tape();
  std::vector<Var> log_returns;
  std::optional<Var> drifted;
  for (const auto& m : episode.steps) {
    const auto inputs = policy.agent_inputs(m.window, m.dc_maps);
    Var w = policy.forward(p, inputs);
    Var x = tape.constant(Tensor::row(m.relative_closes));
    Var held = nn::mul(w, x);
    Var growth = nn::sum(held);
    Var rho = growth;
    if (cost_rate > 0.0 && drifted) {
      Var turnover = nn::sum(nn::abs(nn::sub(w, *drifted)));
      Var keep = nn::sub(tape.constant(Tensor({1, 1}, 1.0)), nn::scale(turnover, cost_rate));
      rho = nn::mul(growth, keep);
    }
    drifted = nn::div_by(held, growth);
    log_returns.push_back(nn::log(rho));
  }
  Var total = nn::sum(nn::concat_cols(log_returns));
  total = nn::add(total, tape.constant(Tensor({1, 1}, std::log(initial_value))));
  return nn::scale(total, 1.0 / static_cast<double>(episode.steps.size()));
}

namespace {

double evaluate(const nn::ParameterSet& params, const Objective& objective) {
  nn::Tape tape;
  nn::Binding p(tape, params, false);
  return objective(p).value()[0];
}

}  // namespace

UpdateResult ascend(nn::ParameterSet& params, nn::Adam& optimizer, const Objective& objective) {
  UpdateResult result;
  std::map<std::string, Tensor> grads;
  {
    nn::Tape tape;
    nn::Binding p(tape, params, true);
    Var j = objective(p);
    result.j_before = j.value()[0];
    tape.backward(j);
    grads = p.gradients();
  }
  for (auto& [name, g] : grads) {
    if (!g.all_finite()) {
      throw TrainingError("non-finite gradient for parameter " + name + " (J = " +
                          std::to_string(result.j_before) + ")");
    }
    for (double& v : g.values()) v = -v;  // ascend J
  }
  optimizer.descend(params, grads);
  result.j_after = evaluate(params, objective);
  return result;
}

UpdateResult update_policy(model::MasaatPolicy& policy, Memory& memory, nn::Adam& optimizer,
                           double initial_value, double cost_rate) {
  if (memory.empty()) throw ContractError("update_policy: memory holds no episodes");
  const auto episodes = memory.episodes();
  Objective objective = [&](const nn::Binding& p) {
    std::vector<Var> js;
    for (const auto& ep : episodes) js.push_back(episode_objective(p, policy, ep, initial_value, cost_rate));
    Var total = js.size() == 1 ? js.front() : nn::sum(nn::concat_cols(js));
    return nn::scale(total, 1.0 / static_cast<double>(js.size()));
  };
  const UpdateResult result = ascend(policy.parameters(), optimizer, objective);
  memory.reset();
  return result;
}

data::DayRange episode_start_range(const data::DayRange& train, std::size_t window,
                                   std::size_t episode_length) {
  const std::size_t first = std::max(train.begin, window - 1);
  // Last return day t_s + T_m must stay inside the training range.
  if (train.end < episode_length + 1 || train.end - episode_length - 1 < first) {
    throw RangeError("training range too short for T_w=" + std::to_string(window) +
                     " and T_m=" + std::to_string(episode_length));
  }
  return {first, train.end - episode_length};
}

namespace {

std::optional<double> validation_sharpe(const data::MarketFrame& frame, const data::DayRange& range,
                                        const model::MasaatPolicy& policy,
                                        const backtest::MetricConfig& metrics) {
  backtest::PolicyStrategy strategy(policy);
  return backtest::run_backtest(frame, strategy, range, metrics).sharpe;
}

bool better(const std::optional<double>& candidate, const std::optional<double>& incumbent) {
  if (!candidate) return false;
  return !incumbent || *candidate > *incumbent;
}

std::string checkpoint_name(std::size_t iteration) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt-%06zu", iteration);
  return buf;
}

}  // namespace

TrainResult train(const data::MarketFrame& frame, const data::SplitSpec& splits,
                  model::MasaatPolicy policy, const TrainerConfig& cfg,
                  const backtest::MetricConfig& metrics) {
  cfg.validate();
  metrics.validate();
  splits.validate(frame.num_days());
  const auto starts = episode_start_range(splits.train, policy.config().window, cfg.episode_length);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(starts.begin, starts.end - 1);
  nn::Adam optimizer(nn::AdamConfig{cfg.learning_rate});
  Memory memory;

  TrainResult result{policy, "init", std::nullopt, {}};
  if (cfg.max_iterations == 0) return result;
  result.best_validation_sharpe = validation_sharpe(frame, splits.validation, policy, metrics);

  std::size_t updates = 0;
  for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
    const std::size_t t_s = pick(rng);
    memory.store(run_episode(frame, policy, t_s, cfg, metrics.cost_rate));
    if (it % cfg.update_every != 0 && it != cfg.max_iterations) continue;

    const UpdateResult upd = update_policy(policy, memory, optimizer, cfg.initial_value,
                                           metrics.cost_rate);
    ++updates;
    TrainingLogRow row{it, t_s, upd.j_before, std::nullopt, checkpoint_name(it)};
    if (updates % cfg.validate_every == 0 || it == cfg.max_iterations) {
      row.validation_sharpe = validation_sharpe(frame, splits.validation, policy, metrics);
      if (better(row.validation_sharpe, result.best_validation_sharpe)) {
        result.best = policy;
        result.best_checkpoint_id = row.checkpoint_id;
        result.best_validation_sharpe = row.validation_sharpe;
      }
    }
    result.log.push_back(std::move(row));
  }
  return result;
}

std::string training_log_csv(std::span<const TrainingLogRow> rows) {
  std::ostringstream os;
  os << std::setprecision(17) << "iteration,t_s,J_train,SR_validation,checkpoint_id\n";
  for (const auto& r : rows) {
    os << r.iteration << ',' << r.start_day << ',' << r.j_train << ',';
    if (r.validation_sharpe) os << *r.validation_sharpe;
    os << ',' << r.checkpoint_id << '\n';
  }
  return os.str();
}

}  // namespace masaat::rl
