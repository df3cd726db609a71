#include "masaat/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "masaat/errors.hpp"
#include "masaat/strict_json.hpp"

namespace masaat::model {

using nlohmann::json;

json encoder_config_to_json(const nn::EncoderConfig& cfg) {
  return json{{"embed_dim", cfg.embed_dim},
              {"num_heads", cfg.num_heads},
              {"num_layers", cfg.num_layers},
              {"ffn_hidden", cfg.ffn_hidden},
              {"layernorm_epsilon", cfg.layernorm_epsilon}};
}

nn::EncoderConfig encoder_config_from_json(const json& j, const std::string& path) {
  StrictObject o(j, path);
  nn::EncoderConfig cfg;
  cfg.embed_dim = o.get<std::size_t>("embed_dim", cfg.embed_dim);
  cfg.num_heads = o.get<std::size_t>("num_heads", cfg.num_heads);
  cfg.num_layers = o.get<std::size_t>("num_layers", cfg.num_layers);
  // ffn_hidden follows embed_dim unless given explicitly.
  cfg.ffn_hidden = o.get<std::size_t>("ffn_hidden", 4 * cfg.embed_dim);
  cfg.layernorm_epsilon = o.get<double>("layernorm_epsilon", cfg.layernorm_epsilon);
  o.finish();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return cfg;
}

json model_config_to_json(const ModelConfig& cfg) {
  json agents = json::array();
  for (const auto& a : cfg.agents) {
    json ja{{"kind", a.kind == AgentKind::Dc ? "dc" : "raw_price"},
            {"encoder", encoder_config_to_json(a.encoder)}};
    if (a.threshold) ja["threshold"] = a.threshold->value();
    agents.push_back(ja);
  }
  json channels = json::array();
  for (auto c : cfg.channels) channels.push_back(data::channel_name(c));
  return json{{"window", cfg.window},
              {"channels", channels},
              {"lambda", cfg.lambda},
              {"ensemble", cfg.ensemble == EnsembleRule::MeanScores ? "mean_scores" : "mean_softmax"},
              {"agents", agents}};
}

ModelConfig model_config_from_json(const json& j, const std::string& path) {
  StrictObject o(j, path);
  ModelConfig cfg;
  cfg.window = o.require<std::size_t>("window");
  cfg.channels.clear();
  for (const auto& c : o.child("channels")) {
    if (!c.is_string()) throw ConfigError(o.field("channels") + ": entries must be strings");
    cfg.channels.push_back(data::parse_channel(c.get<std::string>()));
  }
  cfg.lambda = o.get<double>("lambda", 0.0);
  const auto rule = o.get<std::string>("ensemble", "mean_scores");
  if (rule == "mean_scores") {
    cfg.ensemble = EnsembleRule::MeanScores;
  } else if (rule == "mean_softmax") {
    cfg.ensemble = EnsembleRule::MeanSoftmax;
  } else {
    throw ConfigError(o.field("ensemble") + ": expected mean_scores or mean_softmax");
  }
  const auto& agents = o.child("agents");
  if (!agents.is_array()) throw ConfigError(o.field("agents") + ": expected an array");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string apath = o.field("agents") + "[" + std::to_string(i) + "]";
    StrictObject a(agents[i], apath);
    const auto kind = a.require<std::string>("kind");
    const auto enc = encoder_config_from_json(a.child("encoder"), a.field("encoder"));
    if (kind == "dc") {
      cfg.agents.push_back(AgentSpec::dc_agent(a.require<double>("threshold"), enc));
    } else if (kind == "raw_price") {
      cfg.agents.push_back(AgentSpec::raw_price(enc));
    } else {
      throw ConfigError(a.field("kind") + ": expected dc or raw_price");
    }
    a.finish();
  }
  o.finish();
  cfg.validate();
  return cfg;
}

std::string checkpoint_to_string(const MasaatPolicy& policy) {
  json params = json::object();
  for (const auto& [name, t] : policy.parameters()) {
    params[name] = json{{"shape", t.shape()},
                        {"data", std::vector<double>(t.values().begin(), t.values().end())}};
  }
  json root{{"format", kCheckpointFormat},
            {"version", kCheckpointVersion},
            {"model", model_config_to_json(policy.config())},
            {"parameters", params}};
  return root.dump(1) + "\n";
}

MasaatPolicy checkpoint_from_string(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  StrictObject o(root, "checkpoint");
  if (o.require<std::string>("format") != kCheckpointFormat) {
    throw ConfigError("checkpoint: not a policy checkpoint");
  }
  const int version = o.require<int>("version");
  if (version != kCheckpointVersion) {
    throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
  }
  ModelConfig cfg = model_config_from_json(o.child("model"), "checkpoint.model");
  nn::ParameterSet params;
  for (const auto& [name, entry] : o.child("parameters").items()) {
    StrictObject p(entry, "checkpoint.parameters." + name);
    auto shape = p.require<nn::Shape>("shape");
    auto values = p.require<std::vector<double>>("data");
    p.finish();
    try {
      params.add(name, nn::Tensor(std::move(shape), std::move(values)));
    } catch (const ContractError& e) {
      throw ConfigError("checkpoint.parameters." + name + ": " + e.what());
    }
  }
  o.finish();
  return MasaatPolicy(std::move(cfg), std::move(params));
}

void save_checkpoint(const MasaatPolicy& policy, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  out << checkpoint_to_string(policy);
}

MasaatPolicy load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace masaat::model
