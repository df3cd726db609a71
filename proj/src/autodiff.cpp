#include "masaat/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "masaat/errors.hpp"

namespace masaat::nn {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
  }
}

void require_scalar(const Tensor& t, const char* op) {
  if (t.size() != 1) {
    throw ContractError(std::string(op) + ": expected a scalar, got " + shape_str(t.shape()));
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// dst += a * b^T   (a: m x k, b: n x k, dst: m x n)
void gemm_nt_into(Tensor& dst, const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  for (std::size_t i = 0; i < m; ++i) {
    const double* ar = &a[i * k];
    for (std::size_t j = 0; j < n; ++j) {
      const double* br = &b[j * k];
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
      dst[i * n + j] += acc;
    }
  }
}

// dst += a^T * b   (a: m x k, b: m x n, dst: k x n)
void gemm_tn_into(Tensor& dst, const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    const double* ar = &a[i * k];
    const double* br = &b[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ar[p];
      if (av == 0.0) continue;
      double* dr = &dst[p * n];
      for (std::size_t j = 0; j < n; ++j) dr[j] += av * br[j];
    }
  }
}

}  // namespace

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  require_finite(value, "leaf");
  nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward, const char* op) {
  if (!value.all_finite()) {
    throw NumericDomainError(std::string("non-finite result from ") + op);
  }
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.tape != this) throw ContractError(std::string(op) + ": input from another tape");
    needs = needs || nodes_[in.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, needs, needs ? std::move(backward) : nullptr});
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::accumulator(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("backward: loss belongs to another tape");
  if (nodes_[loss.id].value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got " +
                        shape_str(nodes_[loss.id].value.shape()));
  }
  if (backward_done_) throw ContractError("backward: already run on this tape");
  backward_done_ = true;
  accumulator(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward(*this, i);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

// ---- kernels ----

double gelu_scalar(double x) { return 0.5 * x * std::erfc(-x / std::numbers::sqrt2); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Tensor gelu(const Tensor& x) {
  require_finite(x, "gelu input");
  Tensor y = x;
  for (double& v : y.values()) v = gelu_scalar(v);
  return y;
}

Tensor softmax(const Tensor& x, int axis) {
  require_finite(x, "softmax input");
  if (axis == 0) return transpose(softmax(transpose(x), 1));
  if (axis != 1 && axis != -1) throw ContractError("softmax: axis must be 0, 1 or -1");
  Tensor y = x;
  const std::size_t m = x.rows(), n = x.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double* r = &y[i * n];
    const double mx = *std::max_element(r, r + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      r[j] = std::exp(r[j] - mx);
      total += r[j];
    }
    for (std::size_t j = 0; j < n; ++j) r[j] /= total;
  }
  return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ContractError("matmul: inner dimensions differ " + shape_str(a.shape()) + " * " +
                        shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c({m, n}, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* cr = &c[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* br = &b[p * n];
      for (std::size_t j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor t({n, m}, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
  return t;
}

// ---- tape ops ----

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  add_into(y, b.value());
  const Var in[] = {a, b};
  return a.tape->record(std::move(y), in, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_ref(self);
    if (t.requires_grad(a)) add_into(t.accumulator(a), g);
    if (t.requires_grad(b)) add_into(t.accumulator(b), g);
  }, "add");
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  auto yv = y.values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] -= bv[i];
  const Var in[] = {a, b};
  return a.tape->record(std::move(y), in, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_ref(self);
    if (t.requires_grad(a)) add_into(t.accumulator(a), g);
    if (t.requires_grad(b)) {
      Tensor& gb = t.accumulator(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  }, "sub");
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  const Var in[] = {a, b};
  return a.tape->record(std::move(y), in, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (t.requires_grad(a)) {
      Tensor& ga = t.accumulator(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.accumulator(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  }, "mul");
}

Var scale(Var a, double factor) {
  Tensor y = a.value();
  for (double& v : y.values()) v *= factor;
  const Var in[] = {a};
  return a.tape->record(std::move(y), in, [a = a.id, factor](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& ga = t.accumulator(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  }, "scale");
}

Var add_row(Var a, Var bias) {
  const std::size_t m = a.rows(), n = a.cols();
  if (bias.value().size() != n) {
    throw ContractError("add_row: bias " + shape_str(bias.shape()) + " does not fit " +
                        shape_str(a.shape()));
  }
  Tensor y = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] += bias.value()[j];
  const Var in[] = {a, bias};
  return a.tape->record(std::move(y), in, [a = a.id, b = bias.id, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_ref(self);
    if (t.requires_grad(a)) add_into(t.accumulator(a), g);
    if (t.requires_grad(b)) {
      Tensor& gb = t.accumulator(b);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  }, "add_row");
}

Var matmul(Var a, Var b) {
  Tensor y = matmul(a.value(), b.value());
  const Var in[] = {a, b};
  return a.tape->record(std::move(y), in, [a = a.id, b = b.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_ref(self);
    // dA = G B^T, dB = A^T G
    if (t.requires_grad(a)) gemm_nt_into(t.accumulator(a), g, t.value(b));
    if (t.requires_grad(b)) gemm_tn_into(t.accumulator(b), t.value(a), g);
  }, "matmul");
}

Var transpose(Var a) {
  Tensor y = transpose(a.value());
  const Var in[] = {a};
  return a.tape->record(std::move(y), in, [a = a.id](Tape& t, std::size_t self) {
    add_into(t.accumulator(a), transpose(t.grad_ref(self)));
  }, "transpose");
}

Var gelu(Var a) {
  Tensor y = gelu(a.value());
  const Var in[] = {a};
  return a.tape->record(std::move(y), in, [a = a.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& x = t.value(a);
    Tensor& ga = t.accumulator(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * gelu_derivative(x[i]);
  }, "gelu");
}

Var softmax_rows(Var a) {
  Tensor y = softmax(a.value(), 1);
  const Var in[] = {a};
  return a.tape->record(std::move(y), in, [a = a.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.accumulator(a);
    const std::size_t m = y.rows(), n = y.cols();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  }, "softmax_rows");
}

Var layer_norm_rows(Var a, Var gamma, Var beta, double eps) {
  const std::size_t m = a.rows(), n = a.cols();
  if (gamma.value().size() != n || beta.value().size() != n) {
    throw ContractError("layer_norm_rows: affine parameters do not match width " +
                        std::to_string(n));
  }
  if (!(eps > 0.0)) throw ConfigError("layer_norm_rows: epsilon must be positive");
  const Tensor& x = a.value();
  Tensor xhat({m, n}, 0.0);
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += x[i * n + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = x[i * n + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) xhat[i * n + j] = (x[i * n + j] - mean) * inv_std[i];
  }
  Tensor y({m, n}, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      y[i * n + j] = xhat[i * n + j] * gamma.value()[j] + beta.value()[j];
  const Var in[] = {a, gamma, beta};
  return a.tape->record(
      std::move(y), in,
      [a = a.id, gm = gamma.id, bt = beta.id, xhat = std::move(xhat), inv_std = std::move(inv_std),
       m, n](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_ref(self);
        const Tensor& gamma = t.value(gm);
        if (t.requires_grad(gm)) {
          Tensor& gg = t.accumulator(gm);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat[i * n + j];
        }
        if (t.requires_grad(bt)) {
          Tensor& gb = t.accumulator(bt);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
        if (t.requires_grad(a)) {
          Tensor& ga = t.accumulator(a);
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = g[i * n + j] * gamma[j];
              mean_d += d;
              mean_dx += d * xhat[i * n + j];
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = g[i * n + j] * gamma[j];
              ga[i * n + j] += inv_std[i] * (d - mean_d - xhat[i * n + j] * mean_dx);
            }
          }
        }
      },
      "layer_norm_rows");
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  const std::size_t m = a.rows(), n = a.cols();
  if (count == 0 || start + count > n) {
    throw ContractError("slice_cols: [" + std::to_string(start) + ", " +
                        std::to_string(start + count) + ") outside width " + std::to_string(n));
  }
  Tensor y({m, count}, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) y[i * count + j] = a.value()[i * n + start + j];
  const Var in[] = {a};
  return a.tape->record(std::move(y), in, [a = a.id, start, count, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& ga = t.accumulator(a);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) ga[i * n + start + j] += g[i * count + j];
  }, "slice_cols");
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t m = parts.front().rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.rows() != m) throw ContractError("concat_cols: row counts differ");
    total += p.cols();
  }
  Tensor y({m, total}, 0.0);
  std::vector<std::pair<std::size_t, std::size_t>> layout;  // id, offset
  std::size_t off = 0;
  for (const Var& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) y[i * total + off + j] = p.value()[i * w + j];
    layout.emplace_back(p.id, off);
    off += w;
  }
  return parts.front().tape->record(
      std::move(y), parts, [layout = std::move(layout), m, total](Tape& t, std::size_t self) {
        const Tensor& g = t.grad_ref(self);
        for (auto [id, off] : layout) {
          if (!t.requires_grad(id)) continue;
          Tensor& gp = t.accumulator(id);
          const std::size_t w = gp.cols();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * total + off + j];
        }
      },
      "concat_cols");
}

Var scale_rows(Var a, std::span<const double> factors) {
  const std::size_t m = a.rows(), n = a.cols();
  if (factors.size() != m) throw ContractError("scale_rows: factor count differs from row count");
  std::vector<double> f(factors.begin(), factors.end());
  Tensor y = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] *= f[i];
  const Var in[] = {a};
  return a.tape->record(std::move(y), in, [a = a.id, f = std::move(f), m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_ref(self);
    Tensor& ga = t.accumulator(a);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] * f[i];
  }, "scale_rows");
}

Var log(Var a) {
  Tensor y = a.value();
  for (double& v : y.values()) {
    if (!(v > 0.0)) throw NumericDomainError("log: non-positive argument");
    v = std::log(v);
  }
  const Var in[] = {a};
  return a.tape->record(std::move(y), in, [a = a.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& x = t.value(a);
    Tensor& ga = t.accumulator(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
  }, "log");
}

Var abs(Var a) {
  Tensor y = a.value();
  for (double& v : y.values()) v = std::fabs(v);
  const Var in[] = {a};
  return a.tape->record(std::move(y), in, [a = a.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& x = t.value(a);
    Tensor& ga = t.accumulator(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += x[i] > 0.0 ? g[i] : (x[i] < 0.0 ? -g[i] : 0.0);
    }
  }, "abs");
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const Var in[] = {a};
  return a.tape->record(Tensor({1, 1}, total), in, [a = a.id](Tape& t, std::size_t self) {
    const double g = t.grad_ref(self)[0];
    for (double& v : t.accumulator(a).values()) v += g;
  }, "sum");
}

Var div_by(Var a, Var scalar) {
  require_scalar(scalar.value(), "div_by");
  const double s = scalar.value()[0];
  if (s == 0.0) throw NumericDomainError("div_by: division by zero");
  Tensor y = a.value();
  for (double& v : y.values()) v /= s;
  const Var in[] = {a, scalar};
  return a.tape->record(std::move(y), in, [a = a.id, sc = scalar.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_ref(self);
    const double s = t.value(sc)[0];
    if (t.requires_grad(a)) {
      Tensor& ga = t.accumulator(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / s;
    }
    if (t.requires_grad(sc)) {
      const Tensor& x = t.value(a);
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x[i];
      t.accumulator(sc)[0] -= acc / (s * s);
    }
  }, "div_by");
}

Var mul_by(Var a, Var scalar) {
  require_scalar(scalar.value(), "mul_by");
  const double s = scalar.value()[0];
  Tensor y = a.value();
  for (double& v : y.values()) v *= s;
  const Var in[] = {a, scalar};
  return a.tape->record(std::move(y), in, [a = a.id, sc = scalar.id](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_ref(self);
    const double s = t.value(sc)[0];
    if (t.requires_grad(a)) {
      Tensor& ga = t.accumulator(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    }
    if (t.requires_grad(sc)) {
      const Tensor& x = t.value(a);
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x[i];
      t.accumulator(sc)[0] += acc;
    }
  }, "mul_by");
}

}  // namespace masaat::nn
