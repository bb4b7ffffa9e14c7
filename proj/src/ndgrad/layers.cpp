#include "lsrlab/ndgrad/layers.hpp"

#include <cmath>

#include "lsrlab/error.hpp"

namespace lsrlab::ndgrad {

namespace {

Tensor uniform(std::vector<std::size_t> shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (double& x : t.data) x = dist(rng);
  return t;
}

}  // namespace

GruWeights GruWeights::bind(Tape& tape, const ParamStore& store, const std::string& prefix) {
  GruWeights w;
  w.w_x = store.var(tape, prefix + ".w_x");
  w.w_h = store.var(tape, prefix + ".w_h");
  w.b_x = store.var(tape, prefix + ".b_x");
  w.b_h = store.var(tape, prefix + ".b_h");
  w.hidden = w.w_h.value().rows();
  if (w.w_h.value().cols() != 3 * w.hidden || w.w_x.value().cols() != 3 * w.hidden) {
    throw Error(ErrorCode::ShapeMismatch, "GRU weights under " + prefix + " are not [*, 3H]");
  }
  return w;
}

void add_gru_params(ParamStore& store, const std::string& prefix, std::size_t input,
                    std::size_t hidden, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  store.add(prefix + ".w_x", uniform({input, 3 * hidden}, bound, rng));
  store.add(prefix + ".w_h", uniform({hidden, 3 * hidden}, bound, rng));
  store.add(prefix + ".b_x", uniform({3 * hidden}, bound, rng));
  store.add(prefix + ".b_h", uniform({3 * hidden}, bound, rng));
}

void add_linear_params(ParamStore& store, const std::string& prefix, std::size_t input,
                       std::size_t output, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(input));
  store.add(prefix + ".w", uniform({input, output}, bound, rng));
  store.add(prefix + ".b", Tensor({output}, 0.0));
}

Var gru_cell_projected(Var x_proj, Var h_prev, const GruWeights& w) {
  const std::size_t h = w.hidden;
  if (h_prev.value().rank() != 2 || h_prev.value().cols() != h || x_proj.value().cols() != 3 * h ||
      x_proj.value().rows() != h_prev.value().rows()) {
    throw Error(ErrorCode::ShapeMismatch, "gru_cell: input " + x_proj.value().shape_string() +
                                              ", hidden " + h_prev.value().shape_string());
  }
  Var gh = add_bias(matmul(h_prev, w.w_h), w.b_h);
  Var reset = sigmoid(add(slice_cols(x_proj, 0, h), slice_cols(gh, 0, h)));
  Var update = sigmoid(add(slice_cols(x_proj, h, 2 * h), slice_cols(gh, h, 2 * h)));
  Var cand = tanh(add(slice_cols(x_proj, 2 * h, 3 * h), mul(reset, slice_cols(gh, 2 * h, 3 * h))));
  // (1 - u) * h + u * n  ==  h + u * (n - h)
  return add(h_prev, mul(update, sub(cand, h_prev)));
}

Var gru_cell(Var x_t, Var h_prev, const GruWeights& w) {
  if (x_t.value().rank() != 2 || x_t.value().cols() != w.w_x.value().rows()) {
    throw Error(ErrorCode::ShapeMismatch, "gru_cell: input " + x_t.value().shape_string() +
                                              " vs w_x " + w.w_x.value().shape_string());
  }
  return gru_cell_projected(add_bias(matmul(x_t, w.w_x), w.b_x), h_prev, w);
}

Var linear(Var x, Var w, Var b) { return add_bias(matmul(x, w), b); }

Var linear(Tape& tape, const ParamStore& store, const std::string& prefix, Var x) {
  return linear(x, store.var(tape, prefix + ".w"), store.var(tape, prefix + ".b"));
}

Var reparameterize(Var mean, Var logvar, const Tensor& noise) {
  if (!mean.value().same_shape(logvar.value()) || mean.value().size() != noise.size()) {
    throw Error(ErrorCode::ShapeMismatch, "reparameterize: mean " + mean.value().shape_string() +
                                              ", logvar " + logvar.value().shape_string() +
                                              ", noise " + noise.shape_string());
  }
  Tensor eps = noise;
  eps.shape = mean.value().shape;
  Var std_dev = exp(affine(logvar, 0.5));
  return add(mean, mul(std_dev, mean.tape->constant(std::move(eps))));
}

Var kld_standard_normal(Var mean, Var logvar) {
  if (!mean.value().same_shape(logvar.value())) {
    throw Error(ErrorCode::ShapeMismatch, "kld: mean " + mean.value().shape_string() +
                                              " vs logvar " + logvar.value().shape_string());
  }
  // exp(lv) + m^2 - 1 - lv
  Var terms = affine(sub(add(exp(logvar), mul(mean, mean)), logvar), 1.0, -1.0);
  const double rows = static_cast<double>(mean.value().rows());
  return affine(sum(terms), 0.5 / rows);
}

}  // namespace lsrlab::ndgrad
