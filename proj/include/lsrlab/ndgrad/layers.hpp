#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "lsrlab/ndgrad/ops.hpp"
#include "lsrlab/ndgrad/param_store.hpp"

namespace lsrlab::ndgrad {

/// Bound GRU weights. Gate blocks along the 3H axis are [reset | update | candidate].
struct GruWeights {
  Var w_x;  // [in, 3H]
  Var w_h;  // [H, 3H]
  Var b_x;  // [3H]
  Var b_h;  // [3H]
  std::size_t hidden = 0;

  static GruWeights bind(Tape& tape, const ParamStore& store, const std::string& prefix);
};

/// Adds prefix.{w_x,w_h,b_x,b_h} initialized U(-1/sqrt(H), 1/sqrt(H)).
void add_gru_params(ParamStore& store, const std::string& prefix, std::size_t input,
                    std::size_t hidden, std::mt19937_64& rng);
/// Adds prefix.{w,b}; weights U(-1/sqrt(in), 1/sqrt(in)), bias zero.
void add_linear_params(ParamStore& store, const std::string& prefix, std::size_t input,
                       std::size_t output, std::mt19937_64& rng);

/// r = s(x Wxr + bxr + h Whr + bhr), u = s(...), n = tanh(x Wxn + bxn + r*(h Whn + bhn)),
/// h' = (1 - u) * h + u * n.
Var gru_cell(Var x_t, Var h_prev, const GruWeights& w);
/// Same cell with the input projection x Wx + bx precomputed ([B, 3H]).
Var gru_cell_projected(Var x_proj, Var h_prev, const GruWeights& w);

Var linear(Var x, Var w, Var b);
Var linear(Tape& tape, const ParamStore& store, const std::string& prefix, Var x);

/// z = mean + exp(logvar / 2) * noise.
Var reparameterize(Var mean, Var logvar, const Tensor& noise);
/// Batch mean of 0.5 * sum_d (exp(logvar) + mean^2 - 1 - logvar).
Var kld_standard_normal(Var mean, Var logvar);

}  // namespace lsrlab::ndgrad
