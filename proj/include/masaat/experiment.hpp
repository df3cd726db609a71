#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "masaat/backtest.hpp"
#include "masaat/baselines.hpp"
#include "masaat/market_data.hpp"
#include "masaat/model.hpp"
#include "masaat/trainer.hpp"

namespace masaat::experiment {

struct DataSource {
  std::optional<std::filesystem::path> csv_dir;
  std::optional<data::SynthSpec> synthetic;
};

struct DateInterval {
  data::Date first;
  data::Date last;
};

struct SplitDates {
  DateInterval train;
  DateInterval validation;
  DateInterval test;
};

// Flat model settings as they appear in the config file.
struct ModelFields {
  std::size_t window = 16;
  std::vector<data::Channel> channels = data::default_channels();
  nn::EncoderConfig encoder{};
  std::vector<double> dc_thresholds{0.005, 0.01, 0.02};
  bool include_raw_price_agent = true;
  double lambda = 0.0;
  model::EnsembleRule ensemble = model::EnsembleRule::MeanScores;

  model::ModelConfig build() const;
};

struct BaselineConfig {
  double eg_eta = 0.05;
  baselines::PamrParams pamr{};
};

struct ExperimentConfig {
  DataSource data;
  std::optional<SplitDates> split;
  ModelFields model;
  rl::TrainerConfig trainer;
  backtest::MetricConfig metrics;
  BaselineConfig baselines;
};

// Strict parse: unknown keys and wrong types raise ConfigError naming the field.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
// Fully expanded config (defaults filled in); parse_config(config_to_json(c)) == c.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

data::MarketFrame load_market(const ExperimentConfig& cfg);
std::vector<data::AssetSeries> load_csv_dir(const std::filesystem::path& dir);
data::SplitSpec resolve_splits(const data::MarketFrame& frame, const ExperimentConfig& cfg);

// crp | eg | pamr
std::unique_ptr<backtest::Strategy> make_baseline(const std::string& name, const BaselineConfig& cfg);

// "YYYYMMDDTHHMMSS-<seed>-<8 hex of config hash>"
std::string run_directory_name(const nlohmann::json& config_echo, std::uint64_t seed);

struct AblationVariant {
  std::string name;
  ModelFields fields;
};

// MASAAT-w/o TS, MASAAT-w/o DC, MASAAT-1, MASAAT-3, MASAAT-5.
std::vector<AblationVariant> ablation_variants(const ModelFields& base);

struct AblationRow {
  std::string variant;
  std::size_t agents = 0;
  std::string dc_thresholds;  // ';'-separated
  bool raw_price_agent = false;
  double ar_pct = 0.0;
  double mdd_pct = 0.0;
  std::optional<double> sharpe;
};

inline constexpr const char* kAblationHeader =
    "variant,agents,dc_thresholds,raw_price_agent,ar_pct,mdd_pct,sharpe";

// Trains every variant on the train split and backtests it on the test split.
std::vector<AblationRow> run_ablation(const data::MarketFrame& frame, const data::SplitSpec& splits,
                                      const ExperimentConfig& cfg);
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace masaat::experiment
