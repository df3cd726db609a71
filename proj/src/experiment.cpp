#include "masaat/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "masaat/errors.hpp"
#include "masaat/strict_json.hpp"

namespace masaat::experiment {

using nlohmann::json;

model::ModelConfig ModelFields::build() const {
  model::ModelConfig cfg;
  cfg.window = window;
  cfg.channels = channels;
  cfg.lambda = lambda;
  cfg.ensemble = ensemble;
  for (double th : dc_thresholds) cfg.agents.push_back(model::AgentSpec::dc_agent(th, encoder));
  if (include_raw_price_agent) cfg.agents.push_back(model::AgentSpec::raw_price(encoder));
  cfg.validate();
  return cfg;
}

namespace {

data::Date require_date(const json& j, const std::string& path) {
  data::Date d;
  if (!j.is_string() || !data::parse_date(j.get<std::string>(), d)) {
    throw ConfigError(path + ": expected a YYYY-MM-DD date");
  }
  return d;
}

DateInterval parse_interval(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(path + ": expected [first, last] dates");
  DateInterval iv{require_date(j[0], path + "[0]"), require_date(j[1], path + "[1]")};
  if (iv.last < iv.first) throw ConfigError(path + ": last date precedes first date");
  return iv;
}

json interval_json(const DateInterval& iv) {
  return json::array({data::format_date(iv.first), data::format_date(iv.last)});
}

data::SynthSpec parse_synth(const json& j, const std::string& path) {
  StrictObject o(j, path);
  data::SynthSpec s;
  s.days = o.require<std::size_t>("days");
  s.seed = o.get<std::uint64_t>("seed", 0);
  s.initial_price = o.get<double>("initial_price", s.initial_price);
  s.intraday_noise = o.get<double>("intraday_noise", s.intraday_noise);
  if (o.has("start_date")) s.start_date = require_date(o.child("start_date"), o.field("start_date"));
  const auto& assets = o.child("assets");
  if (!assets.is_array() || assets.empty()) throw ConfigError(o.field("assets") + ": expected a non-empty array");
  for (std::size_t i = 0; i < assets.size(); ++i) {
    StrictObject a(assets[i], o.field("assets") + "[" + std::to_string(i) + "]");
    data::SynthAsset sa;
    sa.asset_id = a.require<std::string>("id");
    sa.drift = a.get<double>("drift", 0.0);
    sa.volatility = a.get<double>("volatility", 0.0);
    if (sa.volatility < 0.0) throw ConfigError(a.field("volatility") + ": must be >= 0");
    a.finish();
    s.assets.push_back(sa);
  }
  o.finish();
  if (s.days < 2) throw ConfigError(o.field("days") + ": must be >= 2");
  return s;
}

json synth_json(const data::SynthSpec& s) {
  json assets = json::array();
  for (const auto& a : s.assets) {
    assets.push_back({{"id", a.asset_id}, {"drift", a.drift}, {"volatility", a.volatility}});
  }
  return json{{"days", s.days},
              {"seed", s.seed},
              {"initial_price", s.initial_price},
              {"intraday_noise", s.intraday_noise},
              {"start_date", data::format_date(s.start_date)},
              {"assets", assets}};
}

const char* pamr_variant_name(baselines::PamrVariant v) {
  switch (v) {
    case baselines::PamrVariant::Pamr0: return "pamr0";
    case baselines::PamrVariant::Pamr1: return "pamr1";
    case baselines::PamrVariant::Pamr2: return "pamr2";
  }
  return "?";
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  StrictObject root(j, "");
  root.expect_only({"data", "split", "model", "trainer", "metrics", "baselines"});
  ExperimentConfig cfg;

  {
    StrictObject d(root.child("data"), "data");
    const bool has_csv = d.has("csv_dir"), has_synth = d.has("synthetic");
    if (has_csv == has_synth) throw ConfigError("data: give exactly one of csv_dir or synthetic");
    if (has_csv) cfg.data.csv_dir = d.require<std::string>("csv_dir");
    if (has_synth) cfg.data.synthetic = parse_synth(d.child("synthetic"), "data.synthetic");
    d.finish();
  }

  if (root.has("split")) {
    StrictObject s(root.child("split"), "split");
    SplitDates sd{parse_interval(s.child("train"), "split.train"),
                  parse_interval(s.child("validation"), "split.validation"),
                  parse_interval(s.child("test"), "split.test")};
    s.finish();
    if (!(sd.train.last < sd.validation.first) || !(sd.validation.last < sd.test.first)) {
      throw ConfigError("split: ranges must be chronological and non-overlapping");
    }
    cfg.split = sd;
  }

  if (root.has("model")) {
    StrictObject m(root.child("model"), "model");
    auto& f = cfg.model;
    f.window = m.get<std::size_t>("window", f.window);
    if (m.has("channels")) {
      f.channels.clear();
      for (const auto& c : m.child("channels")) {
        if (!c.is_string()) throw ConfigError("model.channels: entries must be strings");
        f.channels.push_back(data::parse_channel(c.get<std::string>()));
      }
    }
    f.encoder.embed_dim = m.get<std::size_t>("embed_dim", f.encoder.embed_dim);
    f.encoder.num_heads = m.get<std::size_t>("num_heads", f.encoder.num_heads);
    f.encoder.num_layers = m.get<std::size_t>("num_layers", f.encoder.num_layers);
    f.encoder.ffn_hidden = m.get<std::size_t>("ffn_hidden", 4 * f.encoder.embed_dim);
    f.encoder.layernorm_epsilon = m.get<double>("layernorm_epsilon", f.encoder.layernorm_epsilon);
    f.dc_thresholds = m.get<std::vector<double>>("dc_thresholds", f.dc_thresholds);
    f.include_raw_price_agent = m.get<bool>("include_raw_price_agent", f.include_raw_price_agent);
    f.lambda = m.get<double>("lambda", f.lambda);
    const auto rule = m.get<std::string>("ensemble", "mean_scores");
    if (rule == "mean_scores") {
      f.ensemble = model::EnsembleRule::MeanScores;
    } else if (rule == "mean_softmax") {
      f.ensemble = model::EnsembleRule::MeanSoftmax;
    } else {
      throw ConfigError("model.ensemble: expected mean_scores or mean_softmax");
    }
    m.finish();
  }
  try {
    (void)cfg.model.build();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }

  if (root.has("trainer")) {
    StrictObject t(root.child("trainer"), "trainer");
    auto& tc = cfg.trainer;
    tc.max_iterations = t.get<std::size_t>("max_iterations", tc.max_iterations);
    tc.episode_length = t.get<std::size_t>("episode_length", tc.episode_length);
    tc.learning_rate = t.get<double>("learning_rate", tc.learning_rate);
    tc.update_every = t.get<std::size_t>("update_every", tc.update_every);
    tc.validate_every = t.get<std::size_t>("validate_every", tc.validate_every);
    tc.seed = t.get<std::uint64_t>("seed", tc.seed);
    tc.initial_value = t.get<double>("initial_value", tc.initial_value);
    t.finish();
  }
  cfg.trainer.validate();

  if (root.has("metrics")) {
    StrictObject mt(root.child("metrics"), "metrics");
    auto& mc = cfg.metrics;
    mc.trading_days_per_year = mt.get<std::size_t>("trading_days_per_year", mc.trading_days_per_year);
    mc.risk_free = mt.get<double>("risk_free", mc.risk_free);
    mc.cost_rate = mt.get<double>("cost_rate", mc.cost_rate);
    mt.finish();
  }
  cfg.metrics.validate();

  if (root.has("baselines")) {
    StrictObject b(root.child("baselines"), "baselines");
    auto& bc = cfg.baselines;
    bc.eg_eta = b.get<double>("eg_eta", bc.eg_eta);
    bc.pamr.epsilon = b.get<double>("pamr_epsilon", bc.pamr.epsilon);
    bc.pamr.aggressiveness = b.get<double>("pamr_aggressiveness", bc.pamr.aggressiveness);
    const auto variant = b.get<std::string>("pamr_variant", "pamr0");
    if (variant == "pamr0") {
      bc.pamr.variant = baselines::PamrVariant::Pamr0;
    } else if (variant == "pamr1") {
      bc.pamr.variant = baselines::PamrVariant::Pamr1;
    } else if (variant == "pamr2") {
      bc.pamr.variant = baselines::PamrVariant::Pamr2;
    } else {
      throw ConfigError("baselines.pamr_variant: expected pamr0, pamr1 or pamr2");
    }
    b.finish();
    if (!(bc.eg_eta > 0.0)) throw ConfigError("baselines.eg_eta: must be positive");
    if (bc.pamr.epsilon < 0.0) throw ConfigError("baselines.pamr_epsilon: must be >= 0");
  }

  root.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
  return parse_config(j);
}

json config_to_json(const ExperimentConfig& cfg) {
  json data;
  if (cfg.data.csv_dir) data["csv_dir"] = cfg.data.csv_dir->string();
  if (cfg.data.synthetic) data["synthetic"] = synth_json(*cfg.data.synthetic);

  json channels = json::array();
  for (auto c : cfg.model.channels) channels.push_back(data::channel_name(c));
  const auto& f = cfg.model;
  json root{
      {"data", data},
      {"model",
       {{"window", f.window},
        {"channels", channels},
        {"embed_dim", f.encoder.embed_dim},
        {"num_heads", f.encoder.num_heads},
        {"num_layers", f.encoder.num_layers},
        {"ffn_hidden", f.encoder.ffn_hidden},
        {"layernorm_epsilon", f.encoder.layernorm_epsilon},
        {"dc_thresholds", f.dc_thresholds},
        {"include_raw_price_agent", f.include_raw_price_agent},
        {"lambda", f.lambda},
        {"ensemble", f.ensemble == model::EnsembleRule::MeanScores ? "mean_scores" : "mean_softmax"}}},
      {"trainer",
       {{"max_iterations", cfg.trainer.max_iterations},
        {"episode_length", cfg.trainer.episode_length},
        {"learning_rate", cfg.trainer.learning_rate},
        {"update_every", cfg.trainer.update_every},
        {"validate_every", cfg.trainer.validate_every},
        {"seed", cfg.trainer.seed},
        {"initial_value", cfg.trainer.initial_value}}},
      {"metrics",
       {{"trading_days_per_year", cfg.metrics.trading_days_per_year},
        {"risk_free", cfg.metrics.risk_free},
        {"cost_rate", cfg.metrics.cost_rate}}},
      {"baselines",
       {{"eg_eta", cfg.baselines.eg_eta},
        {"pamr_epsilon", cfg.baselines.pamr.epsilon},
        {"pamr_variant", pamr_variant_name(cfg.baselines.pamr.variant)},
        {"pamr_aggressiveness", cfg.baselines.pamr.aggressiveness}}}};
  if (cfg.split) {
    root["split"] = {{"train", interval_json(cfg.split->train)},
                     {"validation", interval_json(cfg.split->validation)},
                     {"test", interval_json(cfg.split->test)}};
  }
  return root;
}

std::vector<data::AssetSeries> load_csv_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IngestionError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<data::AssetSeries> out;
  for (const auto& f : files) out.push_back(data::load_csv(f));
  return out;
}

data::MarketFrame load_market(const ExperimentConfig& cfg) {
  if (cfg.data.synthetic) return data::synthesize(*cfg.data.synthetic);
  return data::align(load_csv_dir(*cfg.data.csv_dir), 2 * cfg.model.window);
}

data::SplitSpec resolve_splits(const data::MarketFrame& frame, const ExperimentConfig& cfg) {
  if (!cfg.split) return data::default_split(frame.num_days());
  data::SplitSpec s{data::range_from_dates(frame, cfg.split->train.first, cfg.split->train.last),
                    data::range_from_dates(frame, cfg.split->validation.first, cfg.split->validation.last),
                    data::range_from_dates(frame, cfg.split->test.first, cfg.split->test.last)};
  s.validate(frame.num_days());
  return s;
}

std::unique_ptr<backtest::Strategy> make_baseline(const std::string& name, const BaselineConfig& cfg) {
  if (name == "crp") return std::make_unique<baselines::CrpStrategy>();
  if (name == "eg") return std::make_unique<baselines::EgStrategy>(cfg.eg_eta);
  if (name == "pamr") return std::make_unique<baselines::PamrStrategy>(cfg.pamr);
  throw UsageError("unknown strategy '" + name + "' (expected crp, eg, pamr or a checkpoint)");
}

std::string run_directory_name(const json& config_echo, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : config_echo.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%S", &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s-%llu-%08llx", stamp, static_cast<unsigned long long>(seed),
                static_cast<unsigned long long>(h & 0xffffffffull));
  return buf;
}

std::vector<AblationVariant> ablation_variants(const ModelFields& base) {
  std::vector<AblationVariant> out;
  ModelFields no_ts = base;
  no_ts.include_raw_price_agent = false;
  if (no_ts.dc_thresholds.empty()) no_ts.dc_thresholds = {0.005, 0.01, 0.02};
  out.push_back({"MASAAT-w/o TS", no_ts});

  ModelFields no_dc = base;
  no_dc.dc_thresholds.clear();
  no_dc.include_raw_price_agent = true;
  out.push_back({"MASAAT-w/o DC", no_dc});

  const std::vector<std::vector<double>> sets{
      {0.01}, {0.005, 0.01, 0.02}, {0.0025, 0.005, 0.01, 0.02, 0.04}};
  for (const auto& s : sets) {
    ModelFields f = base;
    f.dc_thresholds = s;
    f.include_raw_price_agent = true;
    out.push_back({"MASAAT-" + std::to_string(s.size()), f});
  }
  return out;
}

std::vector<AblationRow> run_ablation(const data::MarketFrame& frame, const data::SplitSpec& splits,
                                      const ExperimentConfig& cfg) {
  std::vector<AblationRow> rows;
  for (const auto& v : ablation_variants(cfg.model)) {
    const auto mcfg = v.fields.build();
    auto result = rl::train(frame, splits, model::MasaatPolicy(mcfg, cfg.trainer.seed), cfg.trainer,
                            cfg.metrics);
    backtest::PolicyStrategy strategy(result.best);
    const auto report = backtest::run_backtest(frame, strategy, splits.test, cfg.metrics);
    std::ostringstream th;
    for (std::size_t i = 0; i < v.fields.dc_thresholds.size(); ++i) {
      if (i) th << ';';
      th << v.fields.dc_thresholds[i];
    }
    rows.push_back({v.name, mcfg.agents.size(), th.str(), v.fields.include_raw_price_agent,
                    report.ar_pct, report.mdd_pct, report.sharpe});
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(10) << kAblationHeader << '\n';
  for (const auto& r : rows) {
    os << r.variant << ',' << r.agents << ',' << r.dc_thresholds << ','
       << (r.raw_price_agent ? "true" : "false") << ',' << r.ar_pct << ',' << r.mdd_pct << ',';
    if (r.sharpe) os << *r.sharpe;
    os << '\n';
  }
  return os.str();
}

}  // namespace masaat::experiment
