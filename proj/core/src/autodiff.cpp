#include "vega/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "vega/error.hpp"

namespace vega::ad {

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const {
  if (!tape_) throw ValidationError("use of an unbound Var");
  return tape_->value(id_);
}

bool Tape::Context::needs(std::size_t input) const {
  const auto& node = tape_.nodes_[node_];
  return tape_.nodes_[node.inputs[input]].requires_grad;
}

std::span<double> Tape::Context::grad(std::size_t input) {
  return tape_.grad_buffer(tape_.nodes_[node_].inputs[input]);
}

const Tensor& Tape::Context::input(std::size_t input) const {
  return tape_.value(tape_.nodes_[node_].inputs[input]);
}

Var Tape::param(Tensor& leaf) {
  Node node;
  node.leaf = &leaf;
  node.requires_grad = record_gradients_ && leaf.requires_grad();
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(Var v) const {
  if (v.tape_ != this) throw ValidationError("Var belongs to a different tape");
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    check_owned(in);
    node.inputs.push_back(in.id_);
    node.requires_grad = node.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& node = nodes_.at(id);
  return node.leaf ? *node.leaf : node.value;
}

bool Tape::requires_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id_].requires_grad;
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  auto& g = grads_[id];
  if (g.empty()) g.assign(value(id).size(), 0.0);
  return g;
}

void Tape::backward(Var loss) {
  check_owned(loss);
  if (value(loss.id_).size() != 1) {
    throw ValidationError("backward needs a scalar loss, got shape " + shape_string(value(loss.id_).shape()));
  }
  if (!nodes_[loss.id_].requires_grad) return;

  grads_.assign(nodes_.size(), {});
  grad_buffer(loss.id_)[0] = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || grads_[i].empty()) continue;
    if (node.leaf) {
      auto dst = node.leaf->grad();
      const auto& src = grads_[i];
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    } else if (node.backward) {
      Context ctx(*this, i);
      node.backward(grads_[i], ctx);
    }
  }
  grads_.clear();
}

// ---------------------------------------------------------------------------
// Kernels

namespace kernels {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.data() + i * n;
    std::fill(crow, crow + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

constexpr double kInvSqrt2 = 0.70710678118654752440;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi * kInvSqrt2);
  return cdf + x * pdf;
}

}  // namespace kernels

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw ValidationError("use of an unbound Var");
  return *a.tape();
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ValidationError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
  }
}

void require_matrix(const char* op, Var a) {
  if (a.value().rank() != 2) {
    throw ValidationError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
  }
}

// dst[k x n] += a^T[k x m] * g[m x n]
void accumulate_at_b(std::span<const double> a, std::span<const double> g, std::span<double> dst, std::size_t m,
                     std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      double* drow = dst.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) drow[j] += av * grow[j];
    }
  }
}

// dst[m x k] += g[m x n] * b^T  where b is [k x n]
void accumulate_a_bt(std::span<const double> g, std::span<const double> b, std::span<double> dst, std::size_t m,
                     std::size_t k, std::size_t n) {
  std::vector<double> bt(n * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  for (std::size_t i = 0; i < m; ++i) {
    double* drow = dst.data() + i * k;
    const double* grow = g.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double gv = grow[j];
      const double* btrow = bt.data() + j * k;
      for (std::size_t p = 0; p < k; ++p) drow[p] += gv * btrow[p];
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Ops

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a);
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ValidationError("matmul: inner extents differ, " + shape_string(a.shape()) + " x " +
                          shape_string(b.shape()));
  }
  Tensor out({m, n});
  kernels::matmul(a.value().values(), b.value().values(), out.values(), m, k, n);
  return tape.record(std::move(out), {a, b}, [m, k, n](std::span<const double> g, Tape::Context& ctx) {
    if (ctx.needs(0)) accumulate_a_bt(g, ctx.input(1).values(), ctx.grad(0), m, k, n);
    if (ctx.needs(1)) accumulate_at_b(ctx.input(0).values(), g, ctx.grad(1), m, k, n);
  });
}

Var transpose(Var a) {
  Tape& tape = tape_of(a);
  require_matrix("transpose", a);
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor out({n, m});
  const auto& in = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = in[i * n + j];
  return tape.record(std::move(out), {a}, [m, n](std::span<const double> g, Tape::Context& ctx) {
    auto d = ctx.grad(0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] += g[j * m + i];
  });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of(a);
  require_same_shape("add", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return tape.record(std::move(out), {a, b}, [](std::span<const double> g, Tape::Context& ctx) {
    for (std::size_t in = 0; in < 2; ++in) {
      if (!ctx.needs(in)) continue;
      auto d = ctx.grad(in);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of(a);
  require_same_shape("sub", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return tape.record(std::move(out), {a, b}, [](std::span<const double> g, Tape::Context& ctx) {
    if (ctx.needs(0)) {
      auto d = ctx.grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (ctx.needs(1)) {
      auto d = ctx.grad(1);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a);
  require_same_shape("mul", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return tape.record(std::move(out), {a, b}, [](std::span<const double> g, Tape::Context& ctx) {
    for (std::size_t in = 0; in < 2; ++in) {
      if (!ctx.needs(in)) continue;
      const auto& other = ctx.input(1 - in);
      auto d = ctx.grad(in);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * other[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tape& tape = tape_of(a);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * factor;
  return tape.record(std::move(out), {a}, [factor](std::span<const double> g, Tape::Context& ctx) {
    auto d = ctx.grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * factor;
  });
}

Var add_bias(Var a, Var bias) {
  Tape& tape = tape_of(a);
  const std::size_t n = a.value().cols();
  if (bias.value().size() != n) {
    throw ValidationError("add_bias: bias " + shape_string(bias.shape()) + " does not match last axis of " +
                          shape_string(a.shape()));
  }
  const std::size_t m = a.value().rows();
  Tensor out(a.shape());
  const auto& x = a.value();
  const auto& b = bias.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + b[j];
  return tape.record(std::move(out), {a, bias}, [m, n](std::span<const double> g, Tape::Context& ctx) {
    if (ctx.needs(0)) {
      auto d = ctx.grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (ctx.needs(1)) {
      auto d = ctx.grad(1);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) d[j] += g[i * n + j];
    }
  });
}

Var add_tiled(Var a, Var table) {
  Tape& tape = tape_of(a);
  require_matrix("add_tiled", a);
  require_matrix("add_tiled", table);
  const std::size_t rows = a.shape()[0], n = a.shape()[1], group = table.shape()[0];
  if (table.shape()[1] != n || rows % group != 0) {
    throw ValidationError("add_tiled: cannot tile " + shape_string(table.shape()) + " over " +
                          shape_string(a.shape()));
  }
  Tensor out(a.shape());
  const auto& x = a.value();
  const auto& t = table.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = x[r * n + j] + t[(r % group) * n + j];
  return tape.record(std::move(out), {a, table}, [rows, n, group](std::span<const double> g, Tape::Context& ctx) {
    if (ctx.needs(0)) {
      auto d = ctx.grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (ctx.needs(1)) {
      auto d = ctx.grad(1);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) d[(r % group) * n + j] += g[r * n + j];
    }
  });
}

Var slice_rows(Var a, std::size_t first, std::size_t count) {
  Tape& tape = tape_of(a);
  require_matrix("slice_rows", a);
  const std::size_t n = a.shape()[1];
  if (count == 0 || first + count > a.shape()[0]) {
    throw ValidationError("slice_rows: rows [" + std::to_string(first) + ", " + std::to_string(first + count) +
                          ") out of range for " + shape_string(a.shape()));
  }
  const auto src = a.value().values().subspan(first * n, count * n);
  Tensor out({count, n}, std::vector<double>(src.begin(), src.end()));
  return tape.record(std::move(out), {a}, [first, n](std::span<const double> g, Tape::Context& ctx) {
    auto d = ctx.grad(0).subspan(first * n, g.size());
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& tape = tape_of(x);
  if (!(eps > 0.0)) throw ValidationError("layer_norm: eps must be positive");
  const std::size_t d = x.value().cols();
  if (gain.value().size() != d || bias.value().size() != d) {
    throw ValidationError("layer_norm: gain " + shape_string(gain.shape()) + " / bias " +
                          shape_string(bias.shape()) + " do not match last axis of " + shape_string(x.shape()));
  }
  const std::size_t m = x.value().rows();
  const auto& in = x.value();
  const auto& gv = gain.value();
  const auto& bv = bias.value();
  Tensor out(x.shape());
  std::vector<double> xhat(in.size());
  std::vector<double> inv_std(m);
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = in.values().data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * is;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  return tape.record(
      std::move(out), {x, gain, bias},
      [m, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](std::span<const double> g, Tape::Context& ctx) {
        if (ctx.needs(1)) {
          auto dg = ctx.grad(1);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < d; ++j) dg[j] += g[r * d + j] * xhat[r * d + j];
        }
        if (ctx.needs(2)) {
          auto db = ctx.grad(2);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < d; ++j) db[j] += g[r * d + j];
        }
        if (ctx.needs(0)) {
          const auto& gv = ctx.input(1);
          auto dx = ctx.grad(0);
          std::vector<double> dh(d);
          for (std::size_t r = 0; r < m; ++r) {
            double mean_dh = 0.0, mean_dh_h = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              dh[j] = g[r * d + j] * gv[j];
              mean_dh += dh[j];
              mean_dh_h += dh[j] * xhat[r * d + j];
            }
            mean_dh /= static_cast<double>(d);
            mean_dh_h /= static_cast<double>(d);
            for (std::size_t j = 0; j < d; ++j) {
              dx[r * d + j] += inv_std[r] * (dh[j] - mean_dh - xhat[r * d + j] * mean_dh_h);
            }
          }
        }
      });
}

Var gelu(Var x) {
  Tape& tape = tape_of(x);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = kernels::gelu(x.value()[i]);
  return tape.record(std::move(out), {x}, [](std::span<const double> g, Tape::Context& ctx) {
    const auto& in = ctx.input(0);
    auto d = ctx.grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * kernels::gelu_grad(in[i]);
  });
}

namespace {
void softmax_row(const double* in, double* out, std::size_t n) {
  double mx = in[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[j]);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = std::exp(in[j] - mx);
    total += out[j];
  }
  const double inv = 1.0 / total;
  for (std::size_t j = 0; j < n; ++j) out[j] *= inv;
}

// d_in += p * (g - <g, p>) for one row.
void softmax_row_backward(const double* p, const double* g, double* d, std::size_t n) {
  double dot = 0.0;
  for (std::size_t j = 0; j < n; ++j) dot += g[j] * p[j];
  for (std::size_t j = 0; j < n; ++j) d[j] += p[j] * (g[j] - dot);
}
}  // namespace

Var softmax(Var x) {
  Tape& tape = tape_of(x);
  const std::size_t n = x.value().cols();
  const std::size_t m = x.value().rows();
  Tensor out(x.shape());
  for (std::size_t r = 0; r < m; ++r) softmax_row(x.value().values().data() + r * n, out.values().data() + r * n, n);
  std::vector<double> probs(out.data());
  return tape.record(std::move(out), {x},
                     [m, n, probs = std::move(probs)](std::span<const double> g, Tape::Context& ctx) {
                       auto d = ctx.grad(0);
                       for (std::size_t r = 0; r < m; ++r) {
                         softmax_row_backward(probs.data() + r * n, g.data() + r * n, d.data() + r * n, n);
                       }
                     });
}

Var self_attention(Var qkv, std::size_t tokens_per_group, std::size_t heads) {
  Tape& tape = tape_of(qkv);
  require_matrix("self_attention", qkv);
  const std::size_t rows = qkv.shape()[0], width = qkv.shape()[1];
  if (width % 3 != 0 || heads == 0 || (width / 3) % heads != 0 || tokens_per_group == 0 ||
      rows % tokens_per_group != 0) {
    throw ValidationError("self_attention: incompatible qkv shape " + shape_string(qkv.shape()) + " for " +
                          std::to_string(heads) + " heads and groups of " + std::to_string(tokens_per_group));
  }
  const std::size_t d = width / 3, dh = d / heads, n = tokens_per_group, groups = rows / n;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto& in = qkv.value();

  // probs layout: [group][head][n x n]
  std::vector<double> probs(groups * heads * n * n);
  std::vector<double> scores(n);
  Tensor out({rows, d});
  for (std::size_t b = 0; b < groups; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      double* p = probs.data() + (b * heads + h) * n * n;
      for (std::size_t i = 0; i < n; ++i) {
        const double* q = in.values().data() + (b * n + i) * width + h * dh;
        for (std::size_t j = 0; j < n; ++j) {
          const double* k = in.values().data() + (b * n + j) * width + d + h * dh;
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += q[c] * k[c];
          scores[j] = s * sc;
        }
        softmax_row(scores.data(), p + i * n, n);
        double* o = out.values().data() + (b * n + i) * d + h * dh;
        for (std::size_t j = 0; j < n; ++j) {
          const double pij = p[i * n + j];
          const double* v = in.values().data() + (b * n + j) * width + 2 * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) o[c] += pij * v[c];
        }
      }
    }
  }

  return tape.record(
      std::move(out), {qkv},
      [=, probs = std::move(probs)](std::span<const double> g, Tape::Context& ctx) {
        const auto& x = ctx.input(0).values();
        auto dx = ctx.grad(0);
        std::vector<double> dp(n), ds(n);
        for (std::size_t b = 0; b < groups; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            const double* p = probs.data() + (b * heads + h) * n * n;
            for (std::size_t i = 0; i < n; ++i) {
              const double* go = g.data() + (b * n + i) * d + h * dh;
              // dV_j += p_ij * dO_i ; dP_ij = dO_i . V_j
              for (std::size_t j = 0; j < n; ++j) {
                const double* v = x.data() + (b * n + j) * width + 2 * d + h * dh;
                double* dv = dx.data() + (b * n + j) * width + 2 * d + h * dh;
                const double pij = p[i * n + j];
                double acc = 0.0;
                for (std::size_t c = 0; c < dh; ++c) {
                  dv[c] += pij * go[c];
                  acc += go[c] * v[c];
                }
                dp[j] = acc;
              }
              std::fill(ds.begin(), ds.end(), 0.0);
              softmax_row_backward(p + i * n, dp.data(), ds.data(), n);
              const double* q = x.data() + (b * n + i) * width + h * dh;
              double* dq = dx.data() + (b * n + i) * width + h * dh;
              for (std::size_t j = 0; j < n; ++j) {
                const double s = ds[j] * sc;
                const double* k = x.data() + (b * n + j) * width + d + h * dh;
                double* dk = dx.data() + (b * n + j) * width + d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) {
                  dq[c] += s * k[c];
                  dk[c] += s * q[c];
                }
              }
            }
          }
        }
      });
}

Var mean_pool(Var x, std::size_t rows_per_group) {
  Tape& tape = tape_of(x);
  require_matrix("mean_pool", x);
  const std::size_t rows = x.shape()[0], n = x.shape()[1];
  if (rows_per_group == 0 || rows % rows_per_group != 0) {
    throw ValidationError("mean_pool: " + std::to_string(rows) + " rows do not split into groups of " +
                          std::to_string(rows_per_group));
  }
  const std::size_t groups = rows / rows_per_group;
  const double inv = 1.0 / static_cast<double>(rows_per_group);
  Tensor out({groups, n});
  const auto& in = x.value();
  for (std::size_t b = 0; b < groups; ++b) {
    for (std::size_t r = 0; r < rows_per_group; ++r)
      for (std::size_t j = 0; j < n; ++j) out[b * n + j] += in[(b * rows_per_group + r) * n + j];
    for (std::size_t j = 0; j < n; ++j) out[b * n + j] *= inv;
  }
  return tape.record(std::move(out), {x}, [=](std::span<const double> g, Tape::Context& ctx) {
    auto d = ctx.grad(0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < n; ++j) d[r * n + j] += g[(r / rows_per_group) * n + j] * inv;
  });
}

Var sum(Var a) {
  Tape& tape = tape_of(a);
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return tape.record(Tensor::scalar(s), {a}, [](std::span<const double> g, Tape::Context& ctx) {
    auto d = ctx.grad(0);
    for (double& v : d) v += g[0];
  });
}

Var mean(Var a) {
  Tape& tape = tape_of(a);
  const double inv = 1.0 / static_cast<double>(a.value().size());
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return tape.record(Tensor::scalar(s * inv), {a}, [inv](std::span<const double> g, Tape::Context& ctx) {
    auto d = ctx.grad(0);
    for (double& v : d) v += g[0] * inv;
  });
}

Var mse(Var pred, Var target) {
  Tape& tape = tape_of(pred);
  require_same_shape("mse", pred, target);
  const std::size_t n = pred.value().size();
  const double inv = 1.0 / static_cast<double>(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = pred.value()[i] - target.value()[i];
    s += e * e;
  }
  return tape.record(Tensor::scalar(s * inv), {pred, target}, [n, inv](std::span<const double> g, Tape::Context& ctx) {
    const auto& p = ctx.input(0);
    const auto& t = ctx.input(1);
    for (std::size_t in = 0; in < 2; ++in) {
      if (!ctx.needs(in)) continue;
      const double sign = in == 0 ? 1.0 : -1.0;
      auto d = ctx.grad(in);
      for (std::size_t i = 0; i < n; ++i) d[i] += sign * 2.0 * inv * g[0] * (p[i] - t[i]);
    }
  });
}

Var l1(Var pred, Var target) {
  Tape& tape = tape_of(pred);
  require_same_shape("l1", pred, target);
  const std::size_t n = pred.value().size();
  const double inv = 1.0 / static_cast<double>(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(pred.value()[i] - target.value()[i]);
  return tape.record(Tensor::scalar(s * inv), {pred, target}, [n, inv](std::span<const double> g, Tape::Context& ctx) {
    const auto& p = ctx.input(0);
    const auto& t = ctx.input(1);
    for (std::size_t in = 0; in < 2; ++in) {
      if (!ctx.needs(in)) continue;
      const double sign = in == 0 ? 1.0 : -1.0;
      auto d = ctx.grad(in);
      for (std::size_t i = 0; i < n; ++i) {
        const double e = p[i] - t[i];
        const double sgn = e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
        d[i] += sign * inv * g[0] * sgn;
      }
    }
  });
}

Var cosine_distance(Var a, Var b) {
  Tape& tape = tape_of(a);
  require_same_shape("cosine_distance", a, b);
  const std::size_t n = a.value().cols(), m = a.value().rows();
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<double> na(m), nb(m), dots(m);
  double total = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    double aa = 0.0, bb = 0.0, ab = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double x = av[r * n + j], y = bv[r * n + j];
      aa += x * x;
      bb += y * y;
      ab += x * y;
    }
    if (bb == 0.0) throw ValidationError("cosine_distance: target row " + std::to_string(r) + " has zero norm");
    if (aa == 0.0) throw ValidationError("cosine_distance: input row " + std::to_string(r) + " has zero norm");
    na[r] = std::sqrt(aa);
    nb[r] = std::sqrt(bb);
    dots[r] = ab;
    total += 1.0 - ab / (na[r] * nb[r]);
  }
  const double inv = 1.0 / static_cast<double>(m);
  return tape.record(Tensor::scalar(total * inv), {a, b},
                     [=, na = std::move(na), nb = std::move(nb), dots = std::move(dots)](std::span<const double> g,
                                                                                          Tape::Context& ctx) {
                       const auto& x = ctx.input(0);
                       const auto& y = ctx.input(1);
                       // d(1 - cos)/dx = -(y/(|x||y|) - cos * x/|x|^2); symmetric for y.
                       for (std::size_t in = 0; in < 2; ++in) {
                         if (!ctx.needs(in)) continue;
                         const auto& self = in == 0 ? x : y;
                         const auto& other = in == 0 ? y : x;
                         auto d = ctx.grad(in);
                         for (std::size_t r = 0; r < m; ++r) {
                           const double ns = std::max(in == 0 ? na[r] : nb[r], kCosineGradEps);
                           const double no = std::max(in == 0 ? nb[r] : na[r], kCosineGradEps);
                           const double cos = dots[r] / (ns * no);
                           const double c = -g[0] * inv;
                           for (std::size_t j = 0; j < n; ++j) {
                             d[r * n + j] += c * (other[r * n + j] / (ns * no) - cos * self[r * n + j] / (ns * ns));
                           }
                         }
                       }
                     });
}

}  // namespace vega::ad
