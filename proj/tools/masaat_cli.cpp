// masaat: train, backtest, inspect DC events, synthesize data, run ablations.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "masaat/backtest.hpp"
#include "masaat/checkpoint.hpp"
#include "masaat/dc.hpp"
#include "masaat/errors.hpp"
#include "masaat/experiment.hpp"
#include "masaat/market_data.hpp"

namespace fs = std::filesystem;
using namespace masaat;

namespace {

struct Options {
  std::string config;
  std::string checkpoint;
  std::string strategy;
  std::string range;
  std::size_t runs = 1;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> csv_files;
  std::vector<double> thresholds;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
  if (!os) throw Error("failed writing " + path.string());
}

experiment::ExperimentConfig load(const Options& o) {
  if (o.config.empty()) throw UsageError("--config is required");
  auto cfg = experiment::load_config(o.config);
  if (o.seed) cfg.trainer.seed = *o.seed;
  return cfg;
}

// Creates <out>/<timestamp-seed-hash>; only called once every input is valid.
fs::path make_run_dir(const std::string& out, const nlohmann::json& echo, std::uint64_t seed) {
  const fs::path base = fs::path(out.empty() ? "runs" : out) / experiment::run_directory_name(echo, seed);
  fs::path dir = base;
  for (int k = 2; fs::exists(dir); ++k) dir = base.string() + "-" + std::to_string(k);
  fs::create_directories(dir);
  return dir;
}

data::DayRange parse_range(const data::MarketFrame& frame, const std::string& text) {
  const auto colon = text.find(':');
  data::Date first, last;
  if (colon == std::string::npos || !data::parse_date(text.substr(0, colon), first) ||
      !data::parse_date(text.substr(colon + 1), last)) {
    throw UsageError("--range expects START:END as YYYY-MM-DD:YYYY-MM-DD, got '" + text + "'");
  }
  if (last < first) throw UsageError("--range end precedes start");
  if (first < frame.calendar.front() || last > frame.calendar.back()) {
    throw RangeError("range " + text + " lies outside the data (" + data::format_date(frame.calendar.front()) +
                     " to " + data::format_date(frame.calendar.back()) + ")");
  }
  return data::range_from_dates(frame, first, last);
}

int cmd_train(const Options& o) {
  const auto cfg = load(o);
  const auto frame = experiment::load_market(cfg);
  const auto splits = experiment::resolve_splits(frame, cfg);
  const auto mcfg = cfg.model.build();
  model::MasaatPolicy init(mcfg, cfg.trainer.seed);
  // fail on a too-short training range before anything is written
  rl::episode_start_range(splits.train, mcfg.window, cfg.trainer.episode_length);

  const auto echo = experiment::config_to_json(cfg);
  spdlog::info("training {} agents on {} assets x {} days, {} iterations", mcfg.agents.size(),
               frame.num_assets(), frame.num_days(), cfg.trainer.max_iterations);
  const auto result = rl::train(frame, splits, std::move(init), cfg.trainer, cfg.metrics);
  for (const auto& row : result.log) {
    spdlog::debug("iteration {} t_s {} J {:.6g} SR_val {}", row.iteration, row.start_day, row.j_train,
                  row.validation_sharpe ? std::to_string(*row.validation_sharpe) : "undefined");
  }

  const fs::path dir = make_run_dir(o.out, echo, cfg.trainer.seed);
  model::save_checkpoint(result.best, dir / "checkpoint.json");
  write_text(dir / "training_log.csv", rl::training_log_csv(result.log));
  write_text(dir / "config.json", echo.dump(2) + "\n");
  spdlog::info("best policy {} (validation SR {})", result.best_checkpoint_id,
               result.best_validation_sharpe ? std::to_string(*result.best_validation_sharpe) : "undefined");
  std::cout << dir.string() << "\n";
  return 0;
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os << std::setprecision(17) << *v;
  return os.str();
}

int cmd_backtest(const Options& o) {
  const auto cfg = load(o);
  if (o.runs == 0) throw UsageError("--runs must be at least 1");
  if (o.checkpoint.empty() == o.strategy.empty()) {
    throw UsageError("backtest needs exactly one of --checkpoint or --strategy");
  }
  const auto frame = experiment::load_market(cfg);
  const data::DayRange range =
      o.range.empty() ? experiment::resolve_splits(frame, cfg).test : parse_range(frame, o.range);

  std::optional<model::MasaatPolicy> policy;
  if (!o.checkpoint.empty()) policy = model::load_checkpoint(o.checkpoint);
  auto make_strategy = [&]() -> std::unique_ptr<backtest::Strategy> {
    if (policy) return std::make_unique<backtest::PolicyStrategy>(*policy);
    return experiment::make_baseline(o.strategy, cfg.baselines);
  };

  std::vector<backtest::BacktestReport> reports;
  for (std::size_t k = 0; k < o.runs; ++k) {
    auto strategy = make_strategy();
    reports.push_back(backtest::run_backtest(frame, *strategy, range, cfg.metrics));
    spdlog::info("run {}: AR {:.4f}% MDD {:.4f}% SR {}", k + 1, reports.back().ar_pct, reports.back().mdd_pct,
                 fmt_opt(reports.back().sharpe));
  }

  auto echo = experiment::config_to_json(cfg);
  echo["backtest"] = {{"strategy", reports.front().strategy},
                      {"checkpoint", o.checkpoint},
                      {"range", {data::format_date(frame.calendar[range.begin]),
                                 data::format_date(frame.calendar[range.end - 1])}},
                      {"runs", o.runs}};
  const fs::path dir = make_run_dir(o.out, echo, cfg.trainer.seed);
  write_text(dir / "report.json", backtest::report_json(reports.front()));
  write_text(dir / "equity.csv", backtest::equity_csv(reports.front()));
  write_text(dir / "config.json", echo.dump(2) + "\n");

  std::ostringstream runs;
  runs << std::setprecision(17) << "run,ar_pct,mdd_pct,sharpe,final_value\n";
  double ar = 0, mdd = 0, fv = 0, sr = 0;
  bool sr_defined = true;
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const auto& r = reports[k];
    runs << k + 1 << ',' << r.ar_pct << ',' << r.mdd_pct << ',' << fmt_opt(r.sharpe) << ',' << r.final_value()
         << '\n';
    ar += r.ar_pct;
    mdd += r.mdd_pct;
    fv += r.final_value();
    if (r.sharpe) sr += *r.sharpe;
    else sr_defined = false;
  }
  const double n = static_cast<double>(reports.size());
  runs << "mean," << ar / n << ',' << mdd / n << ','
       << (sr_defined ? fmt_opt(sr / n) : std::string()) << ',' << fv / n << '\n';
  write_text(dir / "runs.csv", runs.str());
  std::cout << dir.string() << "\n";
  return 0;
}

int cmd_dc_inspect(const Options& o) {
  if (o.csv_files.empty()) throw UsageError("dc-inspect needs at least one asset CSV");
  if (o.thresholds.empty()) throw UsageError("dc-inspect needs --threshold");
  std::vector<dc::Threshold> ths;
  for (double t : o.thresholds) ths.emplace_back(t);
  std::vector<data::AssetSeries> assets;
  for (const auto& f : o.csv_files) assets.push_back(data::load_csv(f));

  std::ostringstream os;
  os << "asset_id,direction,confirm_date,extreme_date,threshold\n";
  for (const auto& a : assets) {
    const auto& close = a.channel(data::Channel::Close);
    for (const auto& th : ths) {
      for (const auto& e : dc::detect_events(close, th)) {
        os << a.asset_id << ',' << dc::direction_name(e.direction) << ',' << data::format_date(a.dates[e.confirm_index])
           << ',' << data::format_date(a.dates[e.extreme_index]) << ',' << th.value() << '\n';
      }
    }
  }
  if (o.out.empty()) {
    std::cout << os.str();
  } else {
    const fs::path p(o.out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_text(p, os.str());
  }
  return 0;
}

int cmd_synth(const Options& o) {
  auto cfg = load(o);
  if (!cfg.data.synthetic) throw ConfigError("data.synthetic: synth needs a synthetic data section");
  if (o.out.empty()) throw UsageError("synth needs --out DIR");
  auto spec = *cfg.data.synthetic;
  if (o.seed) spec.seed = *o.seed;
  const auto frame = data::synthesize(spec);
  fs::create_directories(o.out);
  for (const auto& a : frame.assets) data::write_csv(a, fs::path(o.out) / (a.asset_id + ".csv"));
  spdlog::info("wrote {} assets x {} days to {}", frame.num_assets(), frame.num_days(), o.out);
  return 0;
}

int cmd_ablate(const Options& o) {
  const auto cfg = load(o);
  const auto frame = experiment::load_market(cfg);
  const auto splits = experiment::resolve_splits(frame, cfg);
  for (const auto& v : experiment::ablation_variants(cfg.model)) v.fields.build().validate();
  rl::episode_start_range(splits.train, cfg.model.window, cfg.trainer.episode_length);

  const auto rows = experiment::run_ablation(frame, splits, cfg);
  const auto echo = experiment::config_to_json(cfg);
  const fs::path dir = make_run_dir(o.out, echo, cfg.trainer.seed);
  write_text(dir / "ablation.csv", experiment::ablation_csv(rows));
  write_text(dir / "config.json", echo.dump(2) + "\n");
  std::cout << dir.string() << "\n";
  return 0;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("masaat");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("MASAAT_LOG")) spdlog::cfg::helpers::load_levels(level);
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Multi-agent DC-attention portfolio trainer and backtester"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train a policy and write checkpoint, log and config echo");
  train->add_option("--config", o.config, "Experiment config (JSON)")->required();
  train->add_option("--out", o.out, "Parent directory for the run directory (default: runs)");
  train->add_option("--seed", o.seed, "Override trainer.seed");

  auto* bt = app.add_subcommand("backtest", "Backtest a checkpoint or a baseline");
  bt->add_option("--config", o.config, "Experiment config (JSON)")->required();
  bt->add_option("--checkpoint", o.checkpoint, "Policy checkpoint");
  bt->add_option("--strategy", o.strategy, "Baseline: crp, eg or pamr");
  bt->add_option("--range", o.range, "Inclusive dates START:END (default: test split)");
  bt->add_option("--runs", o.runs, "Repeat the backtest K times and report the mean");
  bt->add_option("--out", o.out, "Parent directory for the run directory (default: runs)");
  bt->add_option("--seed", o.seed, "Override trainer.seed");

  auto* insp = app.add_subcommand("dc-inspect", "List directional-change events of asset CSVs");
  insp->add_option("csv", o.csv_files, "Asset CSV files")->required();
  insp->add_option("--threshold", o.thresholds, "DC threshold, e.g. 0.01 (repeatable)")->required();
  insp->add_option("--out", o.out, "Output CSV (default: stdout)");

  auto* synth = app.add_subcommand("synth", "Write the configured synthetic data set as CSVs");
  synth->add_option("--config", o.config, "Experiment config with data.synthetic")->required();
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--seed", o.seed, "Override data.synthetic.seed");

  auto* ablate = app.add_subcommand("ablate", "Train and test the ablation variants");
  ablate->add_option("--config", o.config, "Experiment config (JSON)")->required();
  ablate->add_option("--out", o.out, "Parent directory for the run directory (default: runs)");
  ablate->add_option("--seed", o.seed, "Override trainer.seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train) return cmd_train(o);
    if (*bt) return cmd_backtest(o);
    if (*insp) return cmd_dc_inspect(o);
    if (*synth) return cmd_synth(o);
    if (*ablate) return cmd_ablate(o);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return 2;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("unexpected: {}", e.what());
    return 1;
  }
  return 2;
}
