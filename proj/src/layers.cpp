#include "masaat/layers.hpp"

#include <cmath>
#include <vector>

#include "masaat/errors.hpp"

namespace masaat::nn {

void EncoderConfig::validate() const {
  if (embed_dim == 0 || num_heads == 0 || num_layers == 0 || ffn_hidden == 0) {
    throw ConfigError("encoder: embed_dim, num_heads, num_layers and ffn_hidden must be positive");
  }
  if (embed_dim % num_heads != 0) {
    throw ConfigError("encoder: embed_dim " + std::to_string(embed_dim) +
                      " is not divisible by num_heads " + std::to_string(num_heads));
  }
  if (!(layernorm_epsilon > 0.0)) throw ConfigError("encoder: layernorm_epsilon must be positive");
}

void init_linear(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out,
                 Rng& rng) {
  params.add(prefix + ".weight", uniform_init({in, out}, in, rng));
  params.add(prefix + ".bias", uniform_init({1, out}, in, rng));
}

Var linear(const Binding& p, const std::string& prefix, Var x) {
  return add_row(matmul(x, p[prefix + ".weight"]), p[prefix + ".bias"]);
}

void init_mlp(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t hidden,
              std::size_t out, Rng& rng) {
  init_linear(params, prefix + ".fc1", in, hidden, rng);
  init_linear(params, prefix + ".fc2", hidden, out, rng);
}

Var mlp(const Binding& p, const std::string& prefix, Var x) {
  return linear(p, prefix + ".fc2", gelu(linear(p, prefix + ".fc1", x)));
}

void init_layer_norm(ParameterSet& params, const std::string& prefix, std::size_t width) {
  params.add(prefix + ".gamma", Tensor({1, width}, 1.0));
  params.add(prefix + ".beta", Tensor({1, width}, 0.0));
}

Var layer_norm(const Binding& p, const std::string& prefix, Var x, double eps) {
  return layer_norm_rows(x, p[prefix + ".gamma"], p[prefix + ".beta"], eps);
}

void init_self_attention(ParameterSet& params, const std::string& prefix, std::size_t dim, Rng& rng) {
  init_linear(params, prefix + ".query", dim, dim, rng);
  init_linear(params, prefix + ".key", dim, dim, rng);
  init_linear(params, prefix + ".value", dim, dim, rng);
  init_linear(params, prefix + ".out", dim, dim, rng);
}

Var self_attention(const Binding& p, const std::string& prefix, Var x, std::size_t num_heads) {
  const std::size_t dim = x.cols();
  const std::size_t head_dim = dim / num_heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(head_dim));
  Var q = linear(p, prefix + ".query", x);
  Var k = linear(p, prefix + ".key", x);
  Var v = linear(p, prefix + ".value", x);
  std::vector<Var> heads;
  heads.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    const std::size_t off = h * head_dim;
    Var qh = slice_cols(q, off, head_dim);
    Var kh = slice_cols(k, off, head_dim);
    Var vh = slice_cols(v, off, head_dim);
    Var weights = softmax_rows(scale(matmul(qh, transpose(kh)), scale_factor));
    heads.push_back(matmul(weights, vh));
  }
  Var merged = num_heads == 1 ? heads.front() : concat_cols(heads);
  return linear(p, prefix + ".out", merged);
}

void init_encoder(ParameterSet& params, const std::string& prefix, const EncoderConfig& cfg,
                  Rng& rng) {
  cfg.validate();
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::string layer = prefix + ".layer" + std::to_string(l);
    init_layer_norm(params, layer + ".ln_attn", cfg.embed_dim);
    init_self_attention(params, layer + ".attn", cfg.embed_dim, rng);
    init_layer_norm(params, layer + ".ln_ffn", cfg.embed_dim);
    init_mlp(params, layer + ".ffn", cfg.embed_dim, cfg.ffn_hidden, cfg.embed_dim, rng);
  }
  init_layer_norm(params, prefix + ".ln_final", cfg.embed_dim);
}

Var encoder_forward(const Binding& p, const std::string& prefix, Var tokens,
                    const EncoderConfig& cfg) {
  cfg.validate();
  if (tokens.value().rank() != 2 || tokens.cols() != cfg.embed_dim) {
    throw ConfigError("encoder " + prefix + ": tokens " + shape_str(tokens.shape()) +
                      " do not have width " + std::to_string(cfg.embed_dim));
  }
  Var x = tokens;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::string layer = prefix + ".layer" + std::to_string(l);
    Var attn = self_attention(p, layer + ".attn",
                              layer_norm(p, layer + ".ln_attn", x, cfg.layernorm_epsilon),
                              cfg.num_heads);
    x = add(x, attn);
    Var ffn = mlp(p, layer + ".ffn", layer_norm(p, layer + ".ln_ffn", x, cfg.layernorm_epsilon));
    x = add(x, ffn);
  }
  return layer_norm(p, prefix + ".ln_final", x, cfg.layernorm_epsilon);
}

Tensor encoder_forward(const Tensor& tokens, const EncoderConfig& cfg, const ParameterSet& params,
                       const std::string& prefix) {
  Tape tape;
  Binding p(tape, params, false);
  return encoder_forward(p, prefix, tape.constant(tokens), cfg).value();
}

}  // namespace masaat::nn
