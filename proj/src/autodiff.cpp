// Copyright 2026 The diffts Authors
// SPDX-License-Identifier: Apache-2.0

#include "dts/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

namespace dts {
namespace ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<Mat>;
using MapC = Eigen::Map<const Mat>;

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

void Node::accumulate(const Tensor& g) {
  if (!requires_grad) return;
  if (!grad_init) {
    grad = g;
    grad_init = true;
  } else {
    grad.add_inplace(g);
  }
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var param(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var detach(const Var& v) { return constant(v.value()); }

namespace {

bool any_requires(std::initializer_list<const Var*> parents) {
  for (const Var* p : parents)
    if (p && p->defined() && p->requires_grad()) return true;
  return false;
}

Var make_op(Tensor value, std::initializer_list<const Var*> parents, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (g_grad_enabled && any_requires(parents)) {
    n->requires_grad = true;
    for (const Var* p : parents)
      if (p && p->defined()) n->parents.push_back(p->node());
    n->backprop = std::move(fn);
  }
  return Var(std::move(n));
}

}  // namespace

void zero_grads(const Var& root) {
  std::vector<Node*> stack{root.node().get()};
  std::unordered_set<Node*> seen;
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    n->grad_init = false;
    n->grad = Tensor();
    for (auto& p : n->parents) stack.push_back(p.get());
  }
}

void backward(const Var& root) {
  check_contract(root.defined(), "backward on undefined Var");
  check_contract(root.value().numel() == 1, "backward root must be scalar");
  zero_grads(root);

  // Iterative post-order DFS for the topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node* p = n->parents[idx++].get();
      if (seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  Node* r = root.node().get();
  r->grad = Tensor(r->value.shape(), 1.0);
  r->grad_init = true;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->grad_init) n->backprop(*n);
  }
}

// ---------------------------------------------------------------- elementwise

namespace {

Var unary_op(const Var& a, Tensor value, std::function<Tensor(const Tensor& g)> dgrad) {
  NodePtr an = a.node();
  return make_op(std::move(value), {&a}, [an, dgrad](Node& self) { an->accumulate(dgrad(self.grad)); });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  NodePtr an = a.node(), bn = b.node();
  return make_op(a.value() + b.value(), {&a, &b}, [an, bn](Node& self) {
    an->accumulate(self.grad);
    bn->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  NodePtr an = a.node(), bn = b.node();
  return make_op(a.value() - b.value(), {&a, &b}, [an, bn](Node& self) {
    an->accumulate(self.grad);
    if (bn->requires_grad) {
      Tensor g = self.grad;
      g.scale_inplace(-1.0);
      bn->accumulate(g);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  NodePtr an = a.node(), bn = b.node();
  return make_op(a.value() * b.value(), {&a, &b}, [an, bn](Node& self) {
    if (an->requires_grad) an->accumulate(self.grad * bn->value);
    if (bn->requires_grad) bn->accumulate(self.grad * an->value);
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor v = a.value();
  for (int64_t i = 0; i < v.numel(); ++i) v[i] += s;
  return unary_op(a, std::move(v), [](const Tensor& g) { return g; });
}

Var mul_scalar(const Var& a, double s) {
  return unary_op(a, a.value() * s, [s](const Tensor& g) { return g * s; });
}

Var square(const Var& a) {
  NodePtr an = a.node();
  return make_op(a.value() * a.value(), {&a}, [an](Node& self) {
    Tensor g = self.grad * an->value;
    g.scale_inplace(2.0);
    an->accumulate(g);
  });
}

namespace {

Var pointwise(const Var& a, double (*f)(double), double (*df)(double)) {
  Tensor v(a.shape());
  const Tensor& x = a.value();
  for (int64_t i = 0; i < x.numel(); ++i) v[i] = f(x[i]);
  NodePtr an = a.node();
  return make_op(std::move(v), {&a}, [an, df](Node& self) {
    Tensor g(an->value.shape());
    for (int64_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * df(an->value[i]);
    an->accumulate(g);
  });
}

double sigmoid_f(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Var relu(const Var& a) {
  return pointwise(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var gelu(const Var& a) {
  return pointwise(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); },
      [](double x) {
        double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
        double pdf = std::exp(-0.5 * x * x) * 0.3989422804014327;
        return cdf + x * pdf;
      });
}

Var swish(const Var& a) {
  return pointwise(
      a, [](double x) { return x * sigmoid_f(x); },
      [](double x) {
        double s = sigmoid_f(x);
        return s + x * s * (1.0 - s);
      });
}

Var sigmoid(const Var& a) {
  return pointwise(a, sigmoid_f, [](double x) {
    double s = sigmoid_f(x);
    return s * (1.0 - s);
  });
}

Var tanh_op(const Var& a) {
  return pointwise(
      a, [](double x) { return std::tanh(x); },
      [](double x) {
        double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

Var exp_op(const Var& a) {
  Tensor v(a.shape());
  for (int64_t i = 0; i < v.numel(); ++i) v[i] = std::exp(a.value()[i]);
  NodePtr an = a.node();
  Tensor vc = v;
  return make_op(std::move(v), {&a}, [an, vc](Node& self) { an->accumulate(self.grad * vc); });
}

Var log_op(const Var& a) {
  return pointwise(
      a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var clamp(const Var& a, double lo, double hi) {
  Tensor v(a.shape());
  const Tensor& x = a.value();
  for (int64_t i = 0; i < x.numel(); ++i) v[i] = std::min(hi, std::max(lo, x[i]));
  NodePtr an = a.node();
  return make_op(std::move(v), {&a}, [an, lo, hi](Node& self) {
    Tensor g(an->value.shape());
    for (int64_t i = 0; i < g.numel(); ++i) {
      double x = an->value[i];
      g[i] = (x > lo && x < hi) ? self.grad[i] : 0.0;
    }
    an->accumulate(g);
  });
}

// --------------------------------------------------------------- broadcasting

Var add_bias(const Var& x, const Var& b) {
  const int64_t c = b.value().numel();
  check_contract(x.value().numel() % c == 0 && x.value().dim(x.value().rank() - 1) == c,
                 "add_bias: last dim mismatch");
  Tensor v = x.value();
  const int64_t rows = v.numel() / c;
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t j = 0; j < c; ++j) v[r * c + j] += b.value()[j];
  NodePtr xn = x.node(), bn = b.node();
  return make_op(std::move(v), {&x, &b}, [xn, bn, rows, c](Node& self) {
    xn->accumulate(self.grad);
    if (bn->requires_grad) {
      Tensor g(bn->value.shape(), 0.0);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < c; ++j) g[j] += self.grad[r * c + j];
      bn->accumulate(g);
    }
  });
}

Var add_rows_bcast(const Var& x, const Var& r) {
  check_contract(x.value().rank() == 3 && r.value().rank() == 2 && x.value().dim(0) == r.value().dim(0) &&
                     x.value().dim(2) == r.value().dim(1),
                 "add_rows_bcast: expected x(B,L,C), r(B,C)");
  const int64_t bsz = x.value().dim(0), len = x.value().dim(1), c = x.value().dim(2);
  Tensor v = x.value();
  for (int64_t b = 0; b < bsz; ++b)
    for (int64_t l = 0; l < len; ++l)
      for (int64_t j = 0; j < c; ++j) v.at(b, l, j) += r.value().at(b, j);
  NodePtr xn = x.node(), rn = r.node();
  return make_op(std::move(v), {&x, &r}, [xn, rn, bsz, len, c](Node& self) {
    xn->accumulate(self.grad);
    if (rn->requires_grad) {
      Tensor g({bsz, c}, 0.0);
      for (int64_t b = 0; b < bsz; ++b)
        for (int64_t l = 0; l < len; ++l)
          for (int64_t j = 0; j < c; ++j) g.at(b, j) += self.grad[(b * len + l) * c + j];
      rn->accumulate(g);
    }
  });
}

Var mul_by_scalar_var(const Var& x, const Var& s) {
  check_contract(s.value().numel() == 1, "mul_by_scalar_var: scalar expected");
  double sv = s.value()[0];
  NodePtr xn = x.node(), sn = s.node();
  return make_op(x.value() * sv, {&x, &s}, [xn, sn, sv](Node& self) {
    if (xn->requires_grad) xn->accumulate(self.grad * sv);
    if (sn->requires_grad) {
      double acc = 0.0;
      for (int64_t i = 0; i < self.grad.numel(); ++i) acc += self.grad[i] * xn->value[i];
      Tensor g({1});
      g[0] = acc;
      sn->accumulate(g);
    }
  });
}

// ------------------------------------------------------------- linear algebra

Var matmul(const Var& a, const Var& b) {
  NodePtr an = a.node(), bn = b.node();
  return make_op(matmul2d(a.value(), b.value()), {&a, &b}, [an, bn](Node& self) {
    const Tensor& g = self.grad;
    const int64_t m = g.dim(0), n = g.dim(1), k = an->value.dim(1);
    if (an->requires_grad) {  // dA = G * B^T
      Tensor da({m, k});
      MapC mg(g.data(), m, n), mb(bn->value.data(), k, n);
      MapM mda(da.data(), m, k);
      mda.noalias() = mg * mb.transpose();
      an->accumulate(da);
    }
    if (bn->requires_grad) {  // dB = A^T * G
      Tensor db({k, n});
      MapC ma(an->value.data(), m, k), mg(g.data(), m, n);
      MapM mdb(db.data(), k, n);
      mdb.noalias() = ma.transpose() * mg;
      bn->accumulate(db);
    }
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  check_contract(a.value().rank() == 2 && b.value().rank() == 2 && a.value().dim(1) == b.value().dim(1),
                 "matmul_nt shape mismatch");
  const int64_t m = a.value().dim(0), n = b.value().dim(0), k = a.value().dim(1);
  Tensor v({m, n});
  {
    MapC ma(a.value().data(), m, k), mb(b.value().data(), n, k);
    MapM mv(v.data(), m, n);
    mv.noalias() = ma * mb.transpose();
  }
  NodePtr an = a.node(), bn = b.node();
  return make_op(std::move(v), {&a, &b}, [an, bn, m, n, k](Node& self) {
    MapC mg(self.grad.data(), m, n);
    if (an->requires_grad) {  // dA = G * B
      Tensor da({m, k});
      MapC mb(bn->value.data(), n, k);
      MapM mda(da.data(), m, k);
      mda.noalias() = mg * mb;
      an->accumulate(da);
    }
    if (bn->requires_grad) {  // dB = G^T * A
      Tensor db({n, k});
      MapC ma(an->value.data(), m, k);
      MapM mdb(db.data(), n, k);
      mdb.noalias() = mg.transpose() * ma;
      bn->accumulate(db);
    }
  });
}

Var linear(const Var& x, const Var& w, const Var* b) {
  const Tensor& xv = x.value();
  const int64_t cin = w.value().dim(0), cout = w.value().dim(1);
  check_contract(xv.dim(xv.rank() - 1) == cin, "linear: input channels " + std::to_string(xv.dim(xv.rank() - 1)) +
                                                   " != weight rows " + std::to_string(cin));
  const int64_t rows = xv.numel() / cin;
  Shape out_shape = xv.shape();
  out_shape.back() = cout;
  Tensor v(out_shape);
  {
    MapC mx(xv.data(), rows, cin), mw(w.value().data(), cin, cout);
    MapM mv(v.data(), rows, cout);
    mv.noalias() = mx * mw;
    if (b) {
      check_contract(b->value().numel() == cout, "linear: bias size mismatch");
      Eigen::Map<const Eigen::RowVectorXd> mb(b->value().data(), cout);
      mv.rowwise() += mb;
    }
  }
  NodePtr xn = x.node(), wn = w.node(), bn = b ? b->node() : nullptr;
  return make_op(std::move(v), {&x, &w, b}, [xn, wn, bn, rows, cin, cout](Node& self) {
    MapC mg(self.grad.data(), rows, cout);
    if (xn->requires_grad) {
      Tensor dx(xn->value.shape());
      MapC mw(wn->value.data(), cin, cout);
      MapM mdx(dx.data(), rows, cin);
      mdx.noalias() = mg * mw.transpose();
      xn->accumulate(dx);
    }
    if (wn->requires_grad) {
      Tensor dw({cin, cout});
      MapC mx(xn->value.data(), rows, cin);
      MapM mdw(dw.data(), cin, cout);
      mdw.noalias() = mx.transpose() * mg;
      wn->accumulate(dw);
    }
    if (bn && bn->requires_grad) {
      Tensor db({cout});
      Eigen::Map<Eigen::RowVectorXd> mdb(db.data(), cout);
      mdb = mg.colwise().sum();
      bn->accumulate(db);
    }
  });
}

// ---------------------------------------------------------------- convolution

namespace {

// Gathers the dilated patch matrix (L, k*Cin) for one batch item.
void im2col_1d(const double* x, int64_t len, int64_t cin, int64_t k, int64_t dil, double* col) {
  const int64_t half = (k - 1) / 2;
  for (int64_t l = 0; l < len; ++l) {
    double* row = col + l * k * cin;
    for (int64_t j = 0; j < k; ++j) {
      const int64_t src = l + (j - half) * dil;
      if (src >= 0 && src < len) {
        std::memcpy(row + j * cin, x + src * cin, sizeof(double) * static_cast<size_t>(cin));
      } else {
        std::memset(row + j * cin, 0, sizeof(double) * static_cast<size_t>(cin));
      }
    }
  }
}

void col2im_1d(const double* col, int64_t len, int64_t cin, int64_t k, int64_t dil, double* dx) {
  const int64_t half = (k - 1) / 2;
  for (int64_t l = 0; l < len; ++l) {
    const double* row = col + l * k * cin;
    for (int64_t j = 0; j < k; ++j) {
      const int64_t src = l + (j - half) * dil;
      if (src < 0 || src >= len) continue;
      double* dst = dx + src * cin;
      const double* s = row + j * cin;
      for (int64_t c = 0; c < cin; ++c) dst[c] += s[c];
    }
  }
}

}  // namespace

Var conv1d(const Var& x, const Var& w, const Var* b, int64_t dilation) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  check_contract(xv.rank() == 3 && wv.rank() == 3, "conv1d: expected x(B,L,C), w(k,Cin,Cout)");
  const int64_t bsz = xv.dim(0), len = xv.dim(1), cin = xv.dim(2);
  const int64_t k = wv.dim(0), cout = wv.dim(2);
  check_contract(wv.dim(1) == cin, "conv1d: channel mismatch: x has " + std::to_string(cin) + ", w expects " +
                                       std::to_string(wv.dim(1)));
  check_contract(k % 2 == 1, "conv1d: kernel size must be odd for symmetric padding");
  check_contract(dilation >= 1, "conv1d: dilation must be >= 1");

  Tensor v({bsz, len, cout});
  Tensor col({bsz, len, k * cin});
  for (int64_t i = 0; i < bsz; ++i) {
    im2col_1d(xv.data() + i * len * cin, len, cin, k, dilation, col.data() + i * len * k * cin);
    MapC mcol(col.data() + i * len * k * cin, len, k * cin);
    MapC mw(wv.data(), k * cin, cout);
    MapM mv(v.data() + i * len * cout, len, cout);
    mv.noalias() = mcol * mw;
  }
  if (b) {
    check_contract(b->value().numel() == cout, "conv1d: bias size mismatch");
    for (int64_t i = 0; i < bsz * len; ++i)
      for (int64_t c = 0; c < cout; ++c) v[i * cout + c] += b->value()[c];
  }
  NodePtr xn = x.node(), wn = w.node(), bn = b ? b->node() : nullptr;
  // The patch matrix is captured for the weight gradient; recomputation would
  // also work but training speed matters more than graph memory here.
  auto col_keep = std::make_shared<Tensor>(std::move(col));
  return make_op(std::move(v), {&x, &w, b}, [xn, wn, bn, col_keep, bsz, len, cin, k, cout, dilation](Node& self) {
    const Tensor& g = self.grad;
    if (wn->requires_grad) {
      Tensor dw({k, cin, cout}, 0.0);
      MapM mdw(dw.data(), k * cin, cout);
      for (int64_t i = 0; i < bsz; ++i) {
        MapC mcol(col_keep->data() + i * len * k * cin, len, k * cin);
        MapC mg(g.data() + i * len * cout, len, cout);
        mdw.noalias() += mcol.transpose() * mg;
      }
      wn->accumulate(dw);
    }
    if (bn && bn->requires_grad) {
      Tensor db({cout}, 0.0);
      for (int64_t i = 0; i < bsz * len; ++i)
        for (int64_t c = 0; c < cout; ++c) db[c] += g[i * cout + c];
      bn->accumulate(db);
    }
    if (xn->requires_grad) {
      Tensor dx({bsz, len, cin}, 0.0);
      Tensor dcol({len, k * cin});
      for (int64_t i = 0; i < bsz; ++i) {
        MapC mg(g.data() + i * len * cout, len, cout);
        MapC mw(wn->value.data(), k * cin, cout);
        MapM mdcol(dcol.data(), len, k * cin);
        mdcol.noalias() = mg * mw.transpose();
        col2im_1d(dcol.data(), len, cin, k, dilation, dx.data() + i * len * cin);
      }
      xn->accumulate(dx);
    }
  });
}

Var conv2d(const Var& x, const Var& w, const Var* b, int64_t stride_h, int64_t stride_w) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  check_contract(xv.rank() == 4 && wv.rank() == 4, "conv2d: expected x(B,C,H,W), w(Cin,kh,kw,Cout)");
  const int64_t bsz = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), wid = xv.dim(3);
  const int64_t kh = wv.dim(1), kw = wv.dim(2), cout = wv.dim(3);
  check_contract(wv.dim(0) == cin, "conv2d: channel mismatch");
  const int64_t ph = kh / 2, pw = kw / 2;
  const int64_t oh = (h + 2 * ph - kh) / stride_h + 1;
  const int64_t ow = (wid + 2 * pw - kw) / stride_w + 1;
  const int64_t patch = cin * kh * kw;

  // Patch rows ordered (c, dh, dw) to match the (Cin,kh,kw,Cout) weight layout.
  auto fill_col = [&](const double* xb, double* col) {
    for (int64_t oy = 0; oy < oh; ++oy) {
      for (int64_t ox = 0; ox < ow; ++ox) {
        double* row = col + (oy * ow + ox) * patch;
        for (int64_t c = 0; c < cin; ++c) {
          for (int64_t dy = 0; dy < kh; ++dy) {
            const int64_t sy = oy * stride_h - ph + dy;
            for (int64_t dx2 = 0; dx2 < kw; ++dx2) {
              const int64_t sx = ox * stride_w - pw + dx2;
              row[(c * kh + dy) * kw + dx2] =
                  (sy >= 0 && sy < h && sx >= 0 && sx < wid) ? xb[(c * h + sy) * wid + sx] : 0.0;
            }
          }
        }
      }
    }
  };

  Tensor v({bsz, cout, oh, ow});
  Tensor col({bsz, oh * ow, patch});
  Tensor tmp({oh * ow, cout});
  for (int64_t i = 0; i < bsz; ++i) {
    fill_col(xv.data() + i * cin * h * wid, col.data() + i * oh * ow * patch);
    MapC mcol(col.data() + i * oh * ow * patch, oh * ow, patch);
    MapC mw(wv.data(), patch, cout);
    MapM mt(tmp.data(), oh * ow, cout);
    mt.noalias() = mcol * mw;
    // (oh*ow, cout) -> (cout, oh, ow)
    double* out = v.data() + i * cout * oh * ow;
    for (int64_t p = 0; p < oh * ow; ++p)
      for (int64_t c = 0; c < cout; ++c) out[c * oh * ow + p] = tmp[p * cout + c];
  }
  if (b) {
    check_contract(b->value().numel() == cout, "conv2d: bias size mismatch");
    for (int64_t i = 0; i < bsz; ++i)
      for (int64_t c = 0; c < cout; ++c) {
        double* out = v.data() + (i * cout + c) * oh * ow;
        for (int64_t p = 0; p < oh * ow; ++p) out[p] += b->value()[c];
      }
  }

  NodePtr xn = x.node(), wn = w.node(), bn = b ? b->node() : nullptr;
  auto col_keep = std::make_shared<Tensor>(std::move(col));
  return make_op(std::move(v), {&x, &w, b},
                 [xn, wn, bn, col_keep, bsz, cin, h, wid, kh, kw, cout, oh, ow, patch, stride_h, stride_w,
                  ph, pw](Node& self) {
                   const Tensor& g = self.grad;
                   Tensor gt({oh * ow, cout});
                   Tensor dcol({oh * ow, patch});
                   Tensor dw({cin, kh, kw, cout}, 0.0);
                   Tensor dx;
                   if (xn->requires_grad) dx = Tensor({bsz, cin, h, wid}, 0.0);
                   Tensor db({cout}, 0.0);
                   for (int64_t i = 0; i < bsz; ++i) {
                     const double* gb = g.data() + i * cout * oh * ow;
                     for (int64_t p = 0; p < oh * ow; ++p)
                       for (int64_t c = 0; c < cout; ++c) gt[p * cout + c] = gb[c * oh * ow + p];
                     MapC mg(gt.data(), oh * ow, cout);
                     if (wn->requires_grad) {
                       MapC mcol(col_keep->data() + i * oh * ow * patch, oh * ow, patch);
                       MapM mdw(dw.data(), patch, cout);
                       mdw.noalias() += mcol.transpose() * mg;
                     }
                     if (bn && bn->requires_grad)
                       for (int64_t p = 0; p < oh * ow; ++p)
                         for (int64_t c = 0; c < cout; ++c) db[c] += gt[p * cout + c];
                     if (xn->requires_grad) {
                       MapC mw(wn->value.data(), patch, cout);
                       MapM mdcol(dcol.data(), oh * ow, patch);
                       mdcol.noalias() = mg * mw.transpose();
                       double* dxb = dx.data() + i * cin * h * wid;
                       for (int64_t oy = 0; oy < oh; ++oy)
                         for (int64_t ox = 0; ox < ow; ++ox) {
                           const double* row = dcol.data() + (oy * ow + ox) * patch;
                           for (int64_t c = 0; c < cin; ++c)
                             for (int64_t dy = 0; dy < kh; ++dy) {
                               const int64_t sy = oy * stride_h - ph + dy;
                               if (sy < 0 || sy >= h) continue;
                               for (int64_t dx2 = 0; dx2 < kw; ++dx2) {
                                 const int64_t sx = ox * stride_w - pw + dx2;
                                 if (sx < 0 || sx >= wid) continue;
                                 dxb[(c * h + sy) * wid + sx] += row[(c * kh + dy) * kw + dx2];
                               }
                             }
                         }
                     }
                   }
                   if (wn->requires_grad) wn->accumulate(dw);
                   if (bn && bn->requires_grad) bn->accumulate(db);
                   if (xn->requires_grad) xn->accumulate(dx);
                 });
}

// ------------------------------------------------------- normalization & attn

Var layer_norm_plain(const Var& x, double eps) {
  const Tensor& xv = x.value();
  const int64_t c = xv.dim(xv.rank() - 1);
  const int64_t rows = xv.numel() / c;
  Tensor v(xv.shape());
  Tensor inv_std({rows});
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * c;
    double mu = 0.0;
    for (int64_t j = 0; j < c; ++j) mu += xr[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (int64_t j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    double* vr = v.data() + r * c;
    for (int64_t j = 0; j < c; ++j) vr[j] = (xr[j] - mu) * is;
  }
  NodePtr xn = x.node();
  auto y_keep = std::make_shared<Tensor>(v);
  auto is_keep = std::make_shared<Tensor>(std::move(inv_std));
  return make_op(std::move(v), {&x}, [xn, y_keep, is_keep, rows, c](Node& self) {
    Tensor dx(xn->value.shape());
    for (int64_t r = 0; r < rows; ++r) {
      const double* gy = self.grad.data() + r * c;
      const double* y = y_keep->data() + r * c;
      double gmean = 0.0, gymean = 0.0;
      for (int64_t j = 0; j < c; ++j) {
        gmean += gy[j];
        gymean += gy[j] * y[j];
      }
      gmean /= static_cast<double>(c);
      gymean /= static_cast<double>(c);
      const double is = (*is_keep)[r];
      double* dxr = dx.data() + r * c;
      for (int64_t j = 0; j < c; ++j) dxr[j] = is * (gy[j] - gmean - y[j] * gymean);
    }
    xn->accumulate(dx);
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  Var norm = layer_norm_plain(x, eps);
  // y = norm * gamma + beta, gamma/beta broadcast over rows
  const int64_t c = gamma.value().numel();
  const int64_t rows = norm.value().numel() / c;
  Tensor v = norm.value();
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t j = 0; j < c; ++j) v[r * c + j] = v[r * c + j] * gamma.value()[j] + beta.value()[j];
  NodePtr nn = norm.node(), gn = gamma.node(), bn = beta.node();
  return make_op(std::move(v), {&norm, &gamma, &beta}, [nn, gn, bn, rows, c](Node& self) {
    if (nn->requires_grad) {
      Tensor dn(nn->value.shape());
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < c; ++j) dn[r * c + j] = self.grad[r * c + j] * gn->value[j];
      nn->accumulate(dn);
    }
    if (gn->requires_grad) {
      Tensor dg({c}, 0.0);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < c; ++j) dg[j] += self.grad[r * c + j] * nn->value[r * c + j];
      gn->accumulate(dg);
    }
    if (bn->requires_grad) {
      Tensor db({c}, 0.0);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < c; ++j) db[j] += self.grad[r * c + j];
      bn->accumulate(db);
    }
  });
}

namespace {

void softmax_rows(const double* x, double* y, int64_t rows, int64_t c) {
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = x + r * c;
    double* yr = y + r * c;
    double mx = xr[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, xr[j]);
    double z = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      z += yr[j];
    }
    const double iz = 1.0 / z;
    for (int64_t j = 0; j < c; ++j) yr[j] *= iz;
  }
}

}  // namespace

Var softmax_lastdim(const Var& x) {
  const Tensor& xv = x.value();
  const int64_t c = xv.dim(xv.rank() - 1);
  const int64_t rows = xv.numel() / c;
  Tensor v(xv.shape());
  softmax_rows(xv.data(), v.data(), rows, c);
  NodePtr xn = x.node();
  auto y_keep = std::make_shared<Tensor>(v);
  return make_op(std::move(v), {&x}, [xn, y_keep, rows, c](Node& self) {
    Tensor dx(xn->value.shape());
    for (int64_t r = 0; r < rows; ++r) {
      const double* y = y_keep->data() + r * c;
      const double* gy = self.grad.data() + r * c;
      double dot = 0.0;
      for (int64_t j = 0; j < c; ++j) dot += gy[j] * y[j];
      double* dxr = dx.data() + r * c;
      for (int64_t j = 0; j < c; ++j) dxr[j] = y[j] * (gy[j] - dot);
    }
    xn->accumulate(dx);
  });
}

Var log_softmax_lastdim(const Var& x) {
  const Tensor& xv = x.value();
  const int64_t c = xv.dim(xv.rank() - 1);
  const int64_t rows = xv.numel() / c;
  Tensor v(xv.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * c;
    double* vr = v.data() + r * c;
    double mx = xr[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, xr[j]);
    double z = 0.0;
    for (int64_t j = 0; j < c; ++j) z += std::exp(xr[j] - mx);
    const double lz = mx + std::log(z);
    for (int64_t j = 0; j < c; ++j) vr[j] = xr[j] - lz;
  }
  NodePtr xn = x.node();
  auto y_keep = std::make_shared<Tensor>(v);
  return make_op(std::move(v), {&x}, [xn, y_keep, rows, c](Node& self) {
    Tensor dx(xn->value.shape());
    for (int64_t r = 0; r < rows; ++r) {
      const double* y = y_keep->data() + r * c;
      const double* gy = self.grad.data() + r * c;
      double gsum = 0.0;
      for (int64_t j = 0; j < c; ++j) gsum += gy[j];
      double* dxr = dx.data() + r * c;
      for (int64_t j = 0; j < c; ++j) dxr[j] = gy[j] - std::exp(y[j]) * gsum;
    }
    xn->accumulate(dx);
  });
}

Var multihead_attention(const Var& q, const Var& k, const Var& v, int64_t heads, const Tensor* key_mask) {
  const Tensor& qv = q.value();
  check_contract(qv.rank() == 3, "attention: expected (B,L,D)");
  const int64_t bsz = qv.dim(0), len = qv.dim(1), d = qv.dim(2);
  check_contract(k.value().same_shape(qv) && v.value().same_shape(qv), "attention: q/k/v shape mismatch");
  check_contract(d % heads == 0, "attention: dim not divisible by heads");
  const int64_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (key_mask)
    check_contract(key_mask->rank() == 2 && key_mask->dim(0) == bsz && key_mask->dim(1) == len,
                   "attention: key mask must be (B,L)");

  Tensor out({bsz, len, d});
  auto attn_keep = std::make_shared<Tensor>(Shape{bsz * heads, len, len});
  for (int64_t b = 0; b < bsz; ++b) {
    MapC mq(qv.data() + b * len * d, len, d);
    MapC mk(k.value().data() + b * len * d, len, d);
    MapC mv(v.value().data() + b * len * d, len, d);
    MapM mo(out.data() + b * len * d, len, d);
    for (int64_t h = 0; h < heads; ++h) {
      MapM ma(attn_keep->data() + (b * heads + h) * len * len, len, len);
      ma.noalias() = mq.middleCols(h * dh, dh) * mk.middleCols(h * dh, dh).transpose() * scale;
      if (key_mask) {
        for (int64_t i = 0; i < len; ++i)
          for (int64_t j = 0; j < len; ++j)
            if (key_mask->at(b, j) == 0.0) ma(i, j) = -1e30;
      }
      softmax_rows(attn_keep->data() + (b * heads + h) * len * len,
                   attn_keep->data() + (b * heads + h) * len * len, len, len);
      mo.middleCols(h * dh, dh).noalias() = ma * mv.middleCols(h * dh, dh);
    }
  }

  NodePtr qn = q.node(), kn = k.node(), vn = v.node();
  return make_op(std::move(out), {&q, &k, &v}, [qn, kn, vn, attn_keep, bsz, len, d, heads, dh, scale](Node& self) {
    Tensor dq({bsz, len, d}, 0.0), dk({bsz, len, d}, 0.0), dv({bsz, len, d}, 0.0);
    Mat da(len, len), ds(len, len);
    for (int64_t b = 0; b < bsz; ++b) {
      MapC mq(qn->value.data() + b * len * d, len, d);
      MapC mk(kn->value.data() + b * len * d, len, d);
      MapC mv(vn->value.data() + b * len * d, len, d);
      MapC mg(self.grad.data() + b * len * d, len, d);
      MapM mdq(dq.data() + b * len * d, len, d);
      MapM mdk(dk.data() + b * len * d, len, d);
      MapM mdv(dv.data() + b * len * d, len, d);
      for (int64_t h = 0; h < heads; ++h) {
        MapC ma(attn_keep->data() + (b * heads + h) * len * len, len, len);
        auto gh = mg.middleCols(h * dh, dh);
        mdv.middleCols(h * dh, dh).noalias() = ma.transpose() * gh;
        da.noalias() = gh * mv.middleCols(h * dh, dh).transpose();
        // softmax backward per row
        for (int64_t i = 0; i < len; ++i) {
          const double dot = (da.row(i).array() * ma.row(i).array()).sum();
          ds.row(i) = ma.row(i).array() * (da.row(i).array() - dot);
        }
        mdq.middleCols(h * dh, dh).noalias() = ds * mk.middleCols(h * dh, dh) * scale;
        mdk.middleCols(h * dh, dh).noalias() = ds.transpose() * mq.middleCols(h * dh, dh) * scale;
      }
    }
    if (qn->requires_grad) qn->accumulate(dq);
    if (kn->requires_grad) kn->accumulate(dk);
    if (vn->requires_grad) vn->accumulate(dv);
  });
}

Var l2_normalize_rows(const Var& x, double eps) {
  const Tensor& xv = x.value();
  const int64_t c = xv.dim(xv.rank() - 1);
  const int64_t rows = xv.numel() / c;
  Tensor v(xv.shape());
  Tensor inv_norm({rows});
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * c;
    double nrm = eps;
    for (int64_t j = 0; j < c; ++j) nrm += xr[j] * xr[j];
    const double in = 1.0 / std::sqrt(nrm);
    inv_norm[r] = in;
    for (int64_t j = 0; j < c; ++j) v[r * c + j] = xr[j] * in;
  }
  NodePtr xn = x.node();
  auto y_keep = std::make_shared<Tensor>(v);
  auto in_keep = std::make_shared<Tensor>(std::move(inv_norm));
  return make_op(std::move(v), {&x}, [xn, y_keep, in_keep, rows, c](Node& self) {
    Tensor dx(xn->value.shape());
    for (int64_t r = 0; r < rows; ++r) {
      const double* y = y_keep->data() + r * c;
      const double* gy = self.grad.data() + r * c;
      double dot = 0.0;
      for (int64_t j = 0; j < c; ++j) dot += gy[j] * y[j];
      const double in = (*in_keep)[r];
      double* dxr = dx.data() + r * c;
      for (int64_t j = 0; j < c; ++j) dxr[j] = in * (gy[j] - y[j] * dot);
    }
    xn->accumulate(dx);
  });
}

// ------------------------------------------------------------ indexing/shape

Var reshape(const Var& x, Shape shape) {
  NodePtr xn = x.node();
  Shape orig = x.value().shape();
  return make_op(x.value().reshaped(std::move(shape)), {&x},
                 [xn, orig](Node& self) { xn->accumulate(self.grad.reshaped(orig)); });
}

Var embedding(const Var& table, const std::vector<int64_t>& ids) {
  const Tensor& tv = table.value();
  check_contract(tv.rank() == 2, "embedding: table must be (V,E)");
  const int64_t vocab = tv.dim(0), e = tv.dim(1);
  Tensor v({static_cast<int64_t>(ids.size()), e});
  for (size_t i = 0; i < ids.size(); ++i) {
    check_contract(ids[i] >= 0 && ids[i] < vocab,
                   "embedding: id " + std::to_string(ids[i]) + " out of range [0," + std::to_string(vocab) + ")");
    std::memcpy(v.data() + i * e, tv.data() + ids[i] * e, sizeof(double) * static_cast<size_t>(e));
  }
  NodePtr tn = table.node();
  return make_op(std::move(v), {&table}, [tn, ids, e](Node& self) {
    Tensor dt(tn->value.shape(), 0.0);
    for (size_t i = 0; i < ids.size(); ++i) {
      double* dst = dt.data() + ids[i] * e;
      const double* src = self.grad.data() + i * e;
      for (int64_t j = 0; j < e; ++j) dst[j] += src[j];
    }
    tn->accumulate(dt);
  });
}

Var gather_rows(const Var& x, const std::vector<int64_t>& idx) {
  const Tensor& xv = x.value();
  check_contract(xv.rank() == 2, "gather_rows: expected (N,C)");
  const int64_t n = xv.dim(0), c = xv.dim(1);
  Tensor v({static_cast<int64_t>(idx.size()), c});
  for (size_t i = 0; i < idx.size(); ++i) {
    check_contract(idx[i] >= 0 && idx[i] < n, "gather_rows: index out of range");
    std::memcpy(v.data() + i * c, xv.data() + idx[i] * c, sizeof(double) * static_cast<size_t>(c));
  }
  NodePtr xn = x.node();
  return make_op(std::move(v), {&x}, [xn, idx, c](Node& self) {
    Tensor dx(xn->value.shape(), 0.0);
    for (size_t i = 0; i < idx.size(); ++i) {
      double* dst = dx.data() + idx[i] * c;
      const double* src = self.grad.data() + i * c;
      for (int64_t j = 0; j < c; ++j) dst[j] += src[j];
    }
    xn->accumulate(dx);
  });
}

Var repeat_rows(const Var& x, const std::vector<int64_t>& durations) {
  const Tensor& xv = x.value();
  check_contract(xv.rank() == 2, "repeat_rows: expected (K,C)");
  check_contract(static_cast<int64_t>(durations.size()) == xv.dim(0),
                 "repeat_rows: " + std::to_string(xv.dim(0)) + " rows vs " + std::to_string(durations.size()) +
                     " durations");
  const int64_t c = xv.dim(1);
  int64_t total = 0;
  for (int64_t dur : durations) {
    check_contract(dur >= 0, "repeat_rows: negative duration");
    total += dur;
  }
  Tensor v({total, c});
  int64_t row = 0;
  for (size_t i = 0; i < durations.size(); ++i)
    for (int64_t r = 0; r < durations[i]; ++r, ++row)
      std::memcpy(v.data() + row * c, xv.data() + i * c, sizeof(double) * static_cast<size_t>(c));
  NodePtr xn = x.node();
  return make_op(std::move(v), {&x}, [xn, durations, c](Node& self) {
    Tensor dx(xn->value.shape(), 0.0);
    int64_t row = 0;
    for (size_t i = 0; i < durations.size(); ++i)
      for (int64_t r = 0; r < durations[i]; ++r, ++row) {
        double* dst = dx.data() + i * c;
        const double* src = self.grad.data() + row * c;
        for (int64_t j = 0; j < c; ++j) dst[j] += src[j];
      }
    xn->accumulate(dx);
  });
}

Var concat_rows(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  check_contract(av.rank() == 2 && bv.rank() == 2 && av.dim(1) == bv.dim(1), "concat_rows: column mismatch");
  const int64_t na = av.dim(0), nb = bv.dim(0), c = av.dim(1);
  Tensor v({na + nb, c});
  std::memcpy(v.data(), av.data(), sizeof(double) * static_cast<size_t>(na * c));
  std::memcpy(v.data() + na * c, bv.data(), sizeof(double) * static_cast<size_t>(nb * c));
  NodePtr an = a.node(), bn = b.node();
  return make_op(std::move(v), {&a, &b}, [an, bn, na, nb, c](Node& self) {
    if (an->requires_grad) {
      Tensor da({na, c});
      std::memcpy(da.data(), self.grad.data(), sizeof(double) * static_cast<size_t>(na * c));
      an->accumulate(da);
    }
    if (bn->requires_grad) {
      Tensor db({nb, c});
      std::memcpy(db.data(), self.grad.data() + na * c, sizeof(double) * static_cast<size_t>(nb * c));
      bn->accumulate(db);
    }
  });
}

Var slice_lastdim(const Var& x, int64_t start, int64_t len) {
  const Tensor& xv = x.value();
  const int64_t c = xv.dim(xv.rank() - 1);
  check_contract(start >= 0 && len > 0 && start + len <= c, "slice_lastdim: bad range");
  const int64_t rows = xv.numel() / c;
  Shape out_shape = xv.shape();
  out_shape.back() = len;
  Tensor v(out_shape);
  for (int64_t r = 0; r < rows; ++r)
    std::memcpy(v.data() + r * len, xv.data() + r * c + start, sizeof(double) * static_cast<size_t>(len));
  NodePtr xn = x.node();
  return make_op(std::move(v), {&x}, [xn, start, len, rows, c](Node& self) {
    Tensor dx(xn->value.shape(), 0.0);
    for (int64_t r = 0; r < rows; ++r)
      std::memcpy(dx.data() + r * c + start, self.grad.data() + r * len,
                  sizeof(double) * static_cast<size_t>(len));
    xn->accumulate(dx);
  });
}

// ------------------------------------------------------------------ reductions

Var sum_all(const Var& x) {
  Tensor v({1});
  v[0] = x.value().sum();
  NodePtr xn = x.node();
  return make_op(std::move(v), {&x}, [xn](Node& self) {
    Tensor g(xn->value.shape(), self.grad[0]);
    xn->accumulate(g);
  });
}

Var mean_all(const Var& x) {
  const double inv = 1.0 / static_cast<double>(x.value().numel());
  Tensor v({1});
  v[0] = x.value().sum() * inv;
  NodePtr xn = x.node();
  return make_op(std::move(v), {&x}, [xn, inv](Node& self) {
    Tensor g(xn->value.shape(), self.grad[0] * inv);
    xn->accumulate(g);
  });
}

Var masked_mean(const Var& x, const Tensor& mask) {
  const Tensor& xv = x.value();
  check_contract(xv.rank() == 3, "masked_mean: expected x(B,L,C)");
  const int64_t bsz = xv.dim(0), len = xv.dim(1), c = xv.dim(2);
  check_contract(mask.rank() == 2 && mask.dim(0) == bsz && mask.dim(1) == len,
                 "masked_mean: mask must be (B,L), got " + shape_str(mask.shape()));
  int64_t valid = 0;
  double acc = 0.0;
  for (int64_t b = 0; b < bsz; ++b)
    for (int64_t l = 0; l < len; ++l)
      if (mask.at(b, l) != 0.0) {
        ++valid;
        const double* row = xv.data() + (b * len + l) * c;
        for (int64_t j = 0; j < c; ++j) acc += row[j];
      }
  check_contract(valid > 0, "masked_mean: mask has no valid frames");
  const double inv = 1.0 / static_cast<double>(valid * c);
  Tensor v({1});
  v[0] = acc * inv;
  NodePtr xn = x.node();
  Tensor mask_copy = mask;
  return make_op(std::move(v), {&x}, [xn, mask_copy, inv, bsz, len, c](Node& self) {
    Tensor g(xn->value.shape(), 0.0);
    const double gv = self.grad[0] * inv;
    for (int64_t b = 0; b < bsz; ++b)
      for (int64_t l = 0; l < len; ++l)
        if (mask_copy.at(b, l) != 0.0) {
          double* row = g.data() + (b * len + l) * c;
          for (int64_t j = 0; j < c; ++j) row[j] = gv;
        }
    xn->accumulate(g);
  });
}

Var neg_mean_diag(const Var& x) {
  const Tensor& xv = x.value();
  check_contract(xv.rank() == 2 && xv.dim(0) == xv.dim(1), "neg_mean_diag: square matrix expected");
  const int64_t m = xv.dim(0);
  Tensor v({1});
  double acc = 0.0;
  for (int64_t i = 0; i < m; ++i) acc += xv.at(i, i);
  v[0] = -acc / static_cast<double>(m);
  NodePtr xn = x.node();
  return make_op(std::move(v), {&x}, [xn, m](Node& self) {
    Tensor g(xn->value.shape(), 0.0);
    const double gv = -self.grad[0] / static_cast<double>(m);
    for (int64_t i = 0; i < m; ++i) g.at(i, i) = gv;
    xn->accumulate(g);
  });
}

Var global_avg_pool2d(const Var& x) {
  const Tensor& xv = x.value();
  check_contract(xv.rank() == 4, "global_avg_pool2d: expected (B,C,H,W)");
  const int64_t bsz = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  Tensor v({bsz, c});
  const double inv = 1.0 / static_cast<double>(hw);
  for (int64_t b = 0; b < bsz; ++b)
    for (int64_t ch = 0; ch < c; ++ch) {
      const double* p = xv.data() + (b * c + ch) * hw;
      double acc = 0.0;
      for (int64_t i = 0; i < hw; ++i) acc += p[i];
      v.at(b, ch) = acc * inv;
    }
  NodePtr xn = x.node();
  return make_op(std::move(v), {&x}, [xn, bsz, c, hw, inv](Node& self) {
    Tensor g(xn->value.shape());
    for (int64_t b = 0; b < bsz; ++b)
      for (int64_t ch = 0; ch < c; ++ch) {
        const double gv = self.grad.at(b, ch) * inv;
        double* p = g.data() + (b * c + ch) * hw;
        for (int64_t i = 0; i < hw; ++i) p[i] = gv;
      }
    xn->accumulate(g);
  });
}

Var scale_channels(const Var& y, const Var& gate) {
  const Tensor& yv = y.value();
  check_contract(yv.rank() == 4, "scale_channels: expected y(B,C,H,W)");
  const int64_t bsz = yv.dim(0), c = yv.dim(1), hw = yv.dim(2) * yv.dim(3);
  check_contract(gate.value().rank() == 2 && gate.value().dim(0) == bsz && gate.value().dim(1) == c,
                 "scale_channels: gate must be (B,C)");
  Tensor v(yv.shape());
  for (int64_t b = 0; b < bsz; ++b)
    for (int64_t ch = 0; ch < c; ++ch) {
      const double gv = gate.value().at(b, ch);
      const double* src = yv.data() + (b * c + ch) * hw;
      double* dst = v.data() + (b * c + ch) * hw;
      for (int64_t i = 0; i < hw; ++i) dst[i] = src[i] * gv;
    }
  NodePtr yn = y.node(), gn = gate.node();
  return make_op(std::move(v), {&y, &gate}, [yn, gn, bsz, c, hw](Node& self) {
    if (yn->requires_grad) {
      Tensor dy(yn->value.shape());
      for (int64_t b = 0; b < bsz; ++b)
        for (int64_t ch = 0; ch < c; ++ch) {
          const double gv = gn->value.at(b, ch);
          const double* src = self.grad.data() + (b * c + ch) * hw;
          double* dst = dy.data() + (b * c + ch) * hw;
          for (int64_t i = 0; i < hw; ++i) dst[i] = src[i] * gv;
        }
      yn->accumulate(dy);
    }
    if (gn->requires_grad) {
      Tensor dg({bsz, c}, 0.0);
      for (int64_t b = 0; b < bsz; ++b)
        for (int64_t ch = 0; ch < c; ++ch) {
          const double* gsrc = self.grad.data() + (b * c + ch) * hw;
          const double* ysrc = yn->value.data() + (b * c + ch) * hw;
          double acc = 0.0;
          for (int64_t i = 0; i < hw; ++i) acc += gsrc[i] * ysrc[i];
          dg.at(b, ch) = acc;
        }
      gn->accumulate(dg);
    }
  });
}

}  // namespace ad
}  // namespace dts
