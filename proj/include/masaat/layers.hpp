#pragma once

#include <cstddef>
#include <string>

#include "masaat/autodiff.hpp"
#include "masaat/params.hpp"

namespace masaat::nn {

struct EncoderConfig {
  std::size_t embed_dim = 64;
  std::size_t num_heads = 4;
  std::size_t num_layers = 2;
  std::size_t ffn_hidden = 256;
  double layernorm_epsilon = 1e-5;

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// x[m x in] * W[in x out] + b[1 x out]; parameters `<prefix>.weight`, `<prefix>.bias`.
void init_linear(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out,
                 Rng& rng);
Var linear(const Binding& p, const std::string& prefix, Var x);

// Two linear layers with GELU in between.
void init_mlp(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t hidden,
              std::size_t out, Rng& rng);
Var mlp(const Binding& p, const std::string& prefix, Var x);

void init_layer_norm(ParameterSet& params, const std::string& prefix, std::size_t width);
Var layer_norm(const Binding& p, const std::string& prefix, Var x, double eps);

// Multi-head scaled dot-product self-attention over the rows of x.
void init_self_attention(ParameterSet& params, const std::string& prefix, std::size_t dim, Rng& rng);
Var self_attention(const Binding& p, const std::string& prefix, Var x, std::size_t num_heads);

// Pre-norm encoder stack:
//   x += MHA(LN(x));  x += FFN(LN(x))   per layer, then a final LN.
// No positional encoding, so the map is equivariant under row permutations.
void init_encoder(ParameterSet& params, const std::string& prefix, const EncoderConfig& cfg, Rng& rng);
Var encoder_forward(const Binding& p, const std::string& prefix, Var tokens, const EncoderConfig& cfg);
Tensor encoder_forward(const Tensor& tokens, const EncoderConfig& cfg, const ParameterSet& params,
                       const std::string& prefix);

}  // namespace masaat::nn
