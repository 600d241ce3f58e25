#include "ckpl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ckpl/errors.hpp"

namespace ckpl {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

template <class Backward>
Tensor make_op(Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
               Backward&& backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->seq = detail::next_sequence();
  bool needs = std::any_of(parents.begin(), parents.end(),
                           [](const NodePtr& p) { return p->requires_grad; });
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::forward<Backward>(backward_fn);
  }
  return Tensor(std::move(node));
}

// Gradient buffer of a parent, or nullptr if it does not take gradients.
double* grad_of(Node& self, std::size_t i) {
  auto& p = *self.parents[i];
  return p.requires_grad ? p.ensure_grad().data() : nullptr;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = &bv[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return make_op({m, n}, std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
    const auto& g = self.grad;
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (double* ga = grad_of(self, 0)) {
      // dA = G B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (double* gb = grad_of(self, 1)) {
      // dB = A^T G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  auto av = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return make_op({c, r}, std::move(out), {a.node()}, [r, c](Node& self) {
    double* ga = grad_of(self, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_op(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (double* g = grad_of(self, p))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_op(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (double* g = grad_of(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_op(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    if (double* g = grad_of(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= factor;
  return make_op(a.shape(), std::move(out), {a.node()}, [factor](Node& self) {
    double* g = grad_of(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor add_n(std::span<const Tensor> terms) {
  if (terms.empty()) throw DimensionError("add_n: no terms");
  std::vector<double> out(terms[0].values().begin(), terms[0].values().end());
  std::vector<NodePtr> parents{terms[0].node()};
  for (std::size_t t = 1; t < terms.size(); ++t) {
    require_same_shape(terms[0], terms[t], "add_n");
    auto v = terms[t].values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    parents.push_back(terms[t].node());
  }
  return make_op(terms[0].shape(), std::move(out), std::move(parents), [](Node& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p)
      if (double* g = grad_of(self, p))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(weight, 2, "linear weight");
  require_rank(bias, 1, "linear bias");
  const std::size_t in = weight.dim(0), out_dim = weight.dim(1);
  if (bias.dim(0) != out_dim || x.cols() != in || x.rank() == 0 || x.rank() > 2) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + ", weight " +
                         shape_str(weight.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const std::size_t t = x.rows();
  std::vector<double> out(t * out_dim);
  auto xv = x.values();
  auto wv = weight.values();
  auto bv = bias.values();
  for (std::size_t r = 0; r < t; ++r) {
    double* orow = &out[r * out_dim];
    std::copy(bv.begin(), bv.end(), orow);
    for (std::size_t p = 0; p < in; ++p) {
      const double xp = xv[r * in + p];
      const double* wrow = &wv[p * out_dim];
      for (std::size_t j = 0; j < out_dim; ++j) orow[j] += xp * wrow[j];
    }
  }
  Shape shape = x.rank() == 1 ? Shape{out_dim} : Shape{t, out_dim};
  return make_op(std::move(shape), std::move(out), {x.node(), weight.node(), bias.node()},
                 [t, in, out_dim](Node& self) {
                   const auto& g = self.grad;
                   const auto& xv = self.parents[0]->value;
                   const auto& wv = self.parents[1]->value;
                   if (double* gx = grad_of(self, 0)) {
                     for (std::size_t r = 0; r < t; ++r)
                       for (std::size_t p = 0; p < in; ++p) {
                         double acc = 0.0;
                         for (std::size_t j = 0; j < out_dim; ++j)
                           acc += g[r * out_dim + j] * wv[p * out_dim + j];
                         gx[r * in + p] += acc;
                       }
                   }
                   if (double* gw = grad_of(self, 1)) {
                     for (std::size_t r = 0; r < t; ++r)
                       for (std::size_t p = 0; p < in; ++p) {
                         const double xp = xv[r * in + p];
                         for (std::size_t j = 0; j < out_dim; ++j)
                           gw[p * out_dim + j] += xp * g[r * out_dim + j];
                       }
                   }
                   if (double* gb = grad_of(self, 2)) {
                     for (std::size_t r = 0; r < t; ++r)
                       for (std::size_t j = 0; j < out_dim; ++j) gb[j] += g[r * out_dim + j];
                   }
                 });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return make_op(x.shape(), std::move(out), {x.node()}, [](Node& self) {
    double* g = grad_of(self, 0);
    const auto& xv = self.parents[0]->value;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (xv[i] > 0.0) g[i] += self.grad[i];
  });
}

constexpr double kInvSqrt2 = 0.70710678118654752440;

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * kInvSqrt2));
  return make_op(x.shape(), std::move(out), {x.node()}, [](Node& self) {
    double* g = grad_of(self, 0);
    const auto& xv = self.parents[0]->value;
    const double inv_sqrt_2pi = std::numbers::inv_sqrtpi * kInvSqrt2;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double v = xv[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      g[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor log(const Tensor& x) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(xv[i]);
  return make_op(x.shape(), std::move(out), {x.node()}, [](Node& self) {
    double* g = grad_of(self, 0);
    const auto& xv = self.parents[0]->value;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] / xv[i];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return make_op({}, {total}, {x.node()}, [](Node& self) {
    double* g = grad_of(self, 0);
    const std::size_t n = self.parents[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank(gamma, 1, "layer_norm gamma");
  require_same_shape(gamma, beta, "layer_norm");
  const std::size_t d = x.cols();
  if (gamma.dim(0) != d || x.rank() == 0 || x.rank() > 2) {
    throw DimensionError("layer_norm: input " + shape_str(x.shape()) + " vs gamma " +
                         shape_str(gamma.shape()));
  }
  const std::size_t t = x.rows();
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<double> out(t * d), xhat(t * d), inv_std(t);
  for (std::size_t r = 0; r < t; ++r) {
    const double* xr = &xv[r * d];
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (xr[j] - mean) * inv_std[r];
      out[r * d + j] = gv[j] * xhat[r * d + j] + bv[j];
    }
  }
  return make_op(x.shape(), std::move(out), {x.node(), gamma.node(), beta.node()},
                 [t, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                   const auto& g = self.grad;
                   const auto& gv = self.parents[1]->value;
                   double* gx = grad_of(self, 0);
                   double* gg = grad_of(self, 1);
                   double* gb = grad_of(self, 2);
                   std::vector<double> dxhat(d);
                   for (std::size_t r = 0; r < t; ++r) {
                     double mean_d = 0.0, mean_dx = 0.0;
                     for (std::size_t j = 0; j < d; ++j) {
                       const double gij = g[r * d + j];
                       if (gg) gg[j] += gij * xhat[r * d + j];
                       if (gb) gb[j] += gij;
                       dxhat[j] = gij * gv[j];
                       mean_d += dxhat[j];
                       mean_dx += dxhat[j] * xhat[r * d + j];
                     }
                     if (!gx) continue;
                     mean_d /= static_cast<double>(d);
                     mean_dx /= static_cast<double>(d);
                     for (std::size_t j = 0; j < d; ++j)
                       gx[r * d + j] +=
                           inv_std[r] * (dxhat[j] - mean_d - xhat[r * d + j] * mean_dx);
                   }
                 });
}

namespace {

void softmax_inplace(double* v, std::size_t n, double inv_tau) {
  double mx = v[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = std::exp((v[i] - mx) * inv_tau);
    z += v[i];
  }
  for (std::size_t i = 0; i < n; ++i) v[i] /= z;
}

// dz = (p * (g - <g, p>)) * inv_tau, row by row.
void softmax_backward(const std::vector<double>& p, const std::vector<double>& g, double* gz,
                      std::size_t rows, std::size_t n, double inv_tau) {
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * p[r * n + j];
    for (std::size_t j = 0; j < n; ++j)
      gz[r * n + j] += p[r * n + j] * (g[r * n + j] - dot) * inv_tau;
  }
}

}  // namespace

Tensor softmax_rows(const Tensor& x) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t t = x.dim(0), n = x.dim(1);
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t r = 0; r < t; ++r) softmax_inplace(&out[r * n], n, 1.0);
  return make_op(x.shape(), std::move(out), {x.node()}, [t, n](Node& self) {
    softmax_backward(self.value, self.grad, grad_of(self, 0), t, n, 1.0);
  });
}

Tensor softmax_with_temperature(const Tensor& logits, double tau) {
  if (!(tau > 0.0)) throw ParameterError("softmax temperature must be positive, got " +
                                         std::to_string(tau));
  require_rank(logits, 1, "softmax_with_temperature");
  const std::size_t n = logits.size();
  std::vector<double> out(logits.values().begin(), logits.values().end());
  const double inv_tau = 1.0 / tau;
  softmax_inplace(out.data(), n, inv_tau);
  return make_op(logits.shape(), std::move(out), {logits.node()}, [n, inv_tau](Node& self) {
    softmax_backward(self.value, self.grad, grad_of(self, 0), 1, n, inv_tau);
  });
}

std::vector<double> softmax_with_temperature(std::span<const double> logits, double tau) {
  if (!(tau > 0.0)) throw ParameterError("softmax temperature must be positive, got " +
                                         std::to_string(tau));
  if (logits.empty()) throw DimensionError("softmax_with_temperature: empty logits");
  std::vector<double> out(logits.begin(), logits.end());
  softmax_inplace(out.data(), out.size(), 1.0 / tau);
  return out;
}

namespace {

struct CosineParts {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  bool degenerate = false;
  double value() const { return degenerate ? 0.0 : dot / (nu * nv); }
};

CosineParts cosine_parts(std::span<const double> u, std::span<const double> v) {
  CosineParts c;
  double uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    c.dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  c.nu = std::sqrt(uu);
  c.nv = std::sqrt(vv);
  c.degenerate = c.nu < kDegenerateNorm || c.nv < kDegenerateNorm;
  return c;
}

}  // namespace

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw DimensionError("cosine_similarity: lengths " + std::to_string(u.size()) + " and " +
                         std::to_string(v.size()));
  }
  return cosine_parts(u, v).value();
}

Tensor cosine_similarity(const Tensor& u, const Tensor& v) {
  if (u.size() != v.size()) {
    throw DimensionError("cosine_similarity: shapes " + shape_str(u.shape()) + " and " +
                         shape_str(v.shape()));
  }
  const auto parts = cosine_parts(u.values(), v.values());
  return make_op({}, {parts.value()}, {u.node(), v.node()}, [parts](Node& self) {
    if (parts.degenerate) return;
    const auto& uv = self.parents[0]->value;
    const auto& vv = self.parents[1]->value;
    const double g = self.grad[0];
    const double c = parts.value();
    const double inv = 1.0 / (parts.nu * parts.nv);
    if (double* gu = grad_of(self, 0)) {
      const double k = c / (parts.nu * parts.nu);
      for (std::size_t i = 0; i < uv.size(); ++i) gu[i] += g * (vv[i] * inv - k * uv[i]);
    }
    if (double* gv = grad_of(self, 1)) {
      const double k = c / (parts.nv * parts.nv);
      for (std::size_t i = 0; i < vv.size(); ++i) gv[i] += g * (uv[i] * inv - k * vv[i]);
    }
  });
}

namespace {

// Normalizes each of `rows` rows of length d; norms of degenerate rows are 0.
std::vector<double> normalize_rows(std::span<const double> x, std::size_t rows, std::size_t d,
                                   std::vector<double>& norms) {
  std::vector<double> out(x.begin(), x.end());
  norms.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += x[r * d + j] * x[r * d + j];
    const double n = std::sqrt(s);
    if (n < kDegenerateNorm) {
      std::fill_n(&out[r * d], d, 0.0);
      continue;
    }
    norms[r] = n;
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] /= n;
  }
  return out;
}

Tensor normalize_op(const Tensor& x, std::size_t rows, std::size_t d) {
  std::vector<double> norms;
  auto out = normalize_rows(x.values(), rows, d, norms);
  return make_op(x.shape(), std::move(out), {x.node()},
                 [rows, d, norms = std::move(norms)](Node& self) {
                   double* gx = grad_of(self, 0);
                   const auto& y = self.value;
                   const auto& g = self.grad;
                   for (std::size_t r = 0; r < rows; ++r) {
                     if (norms[r] == 0.0) continue;
                     double dot = 0.0;
                     for (std::size_t j = 0; j < d; ++j) dot += g[r * d + j] * y[r * d + j];
                     for (std::size_t j = 0; j < d; ++j)
                       gx[r * d + j] += (g[r * d + j] - y[r * d + j] * dot) / norms[r];
                   }
                 });
}

}  // namespace

Tensor l2_normalize(const Tensor& x) {
  require_rank(x, 1, "l2_normalize");
  return normalize_op(x, 1, x.size());
}

Tensor l2_normalize_rows(const Tensor& x) {
  require_rank(x, 2, "l2_normalize_rows");
  return normalize_op(x, x.dim(0), x.dim(1));
}

Tensor cross_entropy(const Tensor& logits, std::size_t label) {
  require_rank(logits, 1, "cross_entropy");
  const std::size_t n = logits.size();
  if (label >= n) {
    throw IndexError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                     std::to_string(n) + " classes");
  }
  std::vector<double> p(logits.values().begin(), logits.values().end());
  const double mx = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (auto& v : p) z += std::exp(v - mx);
  const double loss = std::log(z) + mx - logits.values()[label];
  for (auto& v : p) v = std::exp(v - mx) / z;
  return make_op({}, {loss}, {logits.node()}, [label, p = std::move(p)](Node& self) {
    double* g = grad_of(self, 0);
    const double s = self.grad[0];
    for (std::size_t i = 0; i < p.size(); ++i) g[i] += s * (p[i] - (i == label ? 1.0 : 0.0));
  });
}

Tensor select(const Tensor& x, std::size_t index) {
  require_rank(x, 1, "select");
  if (index >= x.size()) {
    throw IndexError("select: index " + std::to_string(index) + " out of range for length " +
                     std::to_string(x.size()));
  }
  return make_op({}, {x.values()[index]}, {x.node()}, [index](Node& self) {
    grad_of(self, 0)[index] += self.grad[0];
  });
}

Tensor stack(std::span<const Tensor> scalars) {
  if (scalars.empty()) throw DimensionError("stack: no inputs");
  std::vector<double> out;
  std::vector<NodePtr> parents;
  out.reserve(scalars.size());
  for (const auto& s : scalars) {
    if (s.size() != 1) throw DimensionError("stack: input of shape " + shape_str(s.shape()));
    out.push_back(s.values()[0]);
    parents.push_back(s.node());
  }
  return make_op({scalars.size()}, std::move(out), std::move(parents), [](Node& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i)
      if (double* g = grad_of(self, i)) g[0] += self.grad[i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_op(std::move(shape), std::move(out), {x.node()}, [](Node& self) {
    double* g = grad_of(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t d = parts[0].cols();
  std::size_t total = 0;
  std::vector<double> out;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    if (p.rank() == 0 || p.rank() > 2 || p.cols() != d) {
      throw DimensionError("concat_rows: part of shape " + shape_str(p.shape()) +
                           " does not have " + std::to_string(d) + " columns");
    }
    total += p.rows();
    out.insert(out.end(), p.values().begin(), p.values().end());
    parents.push_back(p.node());
  }
  return make_op({total, d}, std::move(out), std::move(parents), [](Node& self) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      const std::size_t n = self.parents[i]->value.size();
      if (double* g = grad_of(self, i))
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[offset + j];
      offset += n;
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_rows");
  if (begin >= end || end > x.dim(0)) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") of shape " + shape_str(x.shape()));
  }
  const std::size_t d = x.dim(1);
  std::vector<double> out(x.values().begin() + begin * d, x.values().begin() + end * d);
  return make_op({end - begin, d}, std::move(out), {x.node()}, [begin, d](Node& self) {
    double* g = grad_of(self, 0) + begin * d;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor row(const Tensor& x, std::size_t index) {
  require_rank(x, 2, "row");
  if (index >= x.dim(0)) {
    throw IndexError("row: index " + std::to_string(index) + " of shape " + shape_str(x.shape()));
  }
  const std::size_t d = x.dim(1);
  std::vector<double> out(x.values().begin() + index * d, x.values().begin() + (index + 1) * d);
  return make_op({d}, std::move(out), {x.node()}, [index, d](Node& self) {
    double* g = grad_of(self, 0) + index * d;
    for (std::size_t i = 0; i < d; ++i) g[i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_cols");
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (begin >= end || end > c) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") of shape " + shape_str(x.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<double> out(r * w);
  auto xv = x.values();
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(&xv[i * c + begin], w, &out[i * w]);
  return make_op({r, w}, std::move(out), {x.node()}, [r, c, w, begin](Node& self) {
    double* g = grad_of(self, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * c + begin + j] += self.grad[i * w + j];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != r) {
      throw DimensionError("concat_cols: part of shape " + shape_str(p.shape()) + " needs " +
                           std::to_string(r) + " rows");
    }
    widths.push_back(p.dim(1));
    total += p.dim(1);
    parents.push_back(p.node());
  }
  std::vector<double> out(r * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].values();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(&v[i * widths[k]], widths[k], &out[i * total + offset]);
    offset += widths[k];
  }
  return make_op({r, total}, std::move(out), std::move(parents),
                 [r, total, widths = std::move(widths)](Node& self) {
                   std::size_t offset = 0;
                   for (std::size_t k = 0; k < widths.size(); ++k) {
                     if (double* g = grad_of(self, k))
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < widths[k]; ++j)
                           g[i * widths[k] + j] += self.grad[i * total + offset + j];
                     offset += widths[k];
                   }
                 });
}

Tensor weighted_sum(const Tensor& weights, std::span<const Tensor> items) {
  require_rank(weights, 1, "weighted_sum weights");
  if (items.size() != weights.size()) {
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(items.size()) + " items");
  }
  std::vector<double> out(items[0].size(), 0.0);
  std::vector<NodePtr> parents{weights.node()};
  auto wv = weights.values();
  for (std::size_t j = 0; j < items.size(); ++j) {
    require_same_shape(items[0], items[j], "weighted_sum");
    auto v = items[j].values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += wv[j] * v[i];
    parents.push_back(items[j].node());
  }
  return make_op(items[0].shape(), std::move(out), std::move(parents), [](Node& self) {
    const auto& wv = self.parents[0]->value;
    double* gw = grad_of(self, 0);
    const std::size_t n = self.grad.size();
    for (std::size_t j = 0; j < wv.size(); ++j) {
      const auto& item = self.parents[j + 1]->value;
      if (gw) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += self.grad[i] * item[i];
        gw[j] += acc;
      }
      if (double* gi = grad_of(self, j + 1))
        for (std::size_t i = 0; i < n; ++i) gi[i] += wv[j] * self.grad[i];
    }
  });
}

}  // namespace ckpl
