#include "tsrp/tape.hpp"

#include <cmath>
#include <memory>
#include <numbers>

#include <fmt/format.h>

#include "tsrp/error.hpp"

namespace tsrp {

const Matrix& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Matrix value) {
  Node& n = nodes_.emplace_back();
  n.owned = std::move(value);
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant_ref(const Matrix& value) {
  Node& n = nodes_.emplace_back();
  n.ref = &value;
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  if (!p.trainable) return constant_ref(p.value);
  if (auto it = params_.find(&p); it != params_.end()) return Var(this, it->second);
  Node& n = nodes_.emplace_back();
  n.ref = &p.value;
  n.requires_grad = true;
  params_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, bool requires_grad, Backward backward) {
  Node& n = nodes_.emplace_back();
  n.owned = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  return Var(this, nodes_.size() - 1);
}

const Matrix& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.ref != nullptr ? *n.ref : n.owned;
}

const Matrix& Tape::grad(std::size_t id) const { return nodes_[id].grad; }

Matrix& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    const Matrix& v = value(id);
    n.grad = Matrix(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ConfigError("backward: loss belongs to another tape");
  const Matrix& lv = value(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError(fmt::format("backward: loss must be 1x1, got {}", lv.shape_string()));
  }
  if (!requires_grad(loss.id())) return;
  for (Node& n : nodes_) n.grad = Matrix();
  nodes_[loss.id()].grad = Matrix(1, 1, 1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.backward && !n.grad.empty()) n.backward(*this, id);
  }
}

std::optional<Matrix> Tape::gradient(const Parameter& p) const {
  if (!p.trainable) return std::nullopt;
  auto it = params_.find(&p);
  if (it == params_.end()) return std::nullopt;
  const Node& n = nodes_[it->second];
  if (n.grad.empty()) return Matrix(p.value.rows(), p.value.cols());
  return n.grad;
}

namespace ad {
namespace {

Tape& tape_of(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw ConfigError("op inputs on different tapes");
  return *a.tape();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(fmt::format("{}: {} vs {}", op, a.shape_string(), b.shape_string()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  Matrix out = tsrp::matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    if (tp.requires_grad(ia)) tp.accumulate(ia, tsrp::matmul_nt(g, tp.value(ib)));
                    if (tp.requires_grad(ib)) tp.accumulate(ib, tsrp::matmul_tn(tp.value(ia), g));
                  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a, b);
  Matrix out = tsrp::matmul_nt(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    if (tp.requires_grad(ia)) tp.accumulate(ia, tsrp::matmul(g, tp.value(ib)));
                    if (tp.requires_grad(ib)) tp.accumulate(ib, tsrp::matmul_tn(g, tp.value(ia)));
                  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(tsrp::add(a.value(), b.value()), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    tp.accumulate(ia, g);
                    tp.accumulate(ib, g);
                  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(tsrp::subtract(a.value(), b.value()), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, std::size_t self) {
                    Matrix g = tp.grad(self);
                    tp.accumulate(ia, g);
                    g *= -1.0;
                    tp.accumulate(ib, g);
                  });
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError(fmt::format("add_row: {} + {}", av.shape_string(), rv.shape_string()));
  }
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += rv(0, j);
  }
  const std::size_t ia = a.id(), ir = row.id();
  return t.record(std::move(out), a.requires_grad() || row.requires_grad(),
                  [ia, ir](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    tp.accumulate(ia, g);
                    if (tp.requires_grad(ir)) {
                      Matrix& gr = tp.grad_slot(ir);
                      for (std::size_t i = 0; i < g.rows(); ++i)
                        for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
                    }
                  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape();
  Matrix out = a.value();
  out *= s;
  const std::size_t ia = a.id();
  return t.record(std::move(out), a.requires_grad(), [ia, s](Tape& tp, std::size_t self) {
    Matrix g = tp.grad(self);
    g *= s;
    tp.accumulate(ia, g);
  });
}

Var linear(Var x, Var weight, Var bias) { return add_row(matmul_nt(x, weight), bias); }
Var linear(Var x, Var weight) { return matmul_nt(x, weight); }

Var gelu(Var a) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  auto src = av.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = 0.5 * src[i] * (1.0 + std::erf(src[i] * std::numbers::sqrt2 / 2.0));
  }
  const std::size_t ia = a.id();
  return t.record(std::move(out), a.requires_grad(), [ia](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& x = tp.value(ia);
    Matrix& gx = tp.grad_slot(ia);
    auto xd = x.data();
    auto gd = g.data();
    auto gxd = gx.data();
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (std::size_t i = 0; i < xd.size(); ++i) {
      const double cdf = 0.5 * (1.0 + std::erf(xd[i] * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * xd[i] * xd[i]);
      gxd[i] += gd[i] * (cdf + xd[i] * pdf);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = tape_of(x, gain);
  tape_of(x, bias);
  const Matrix& xv = x.value();
  const std::size_t n = xv.rows(), d = xv.cols();
  const Matrix& gv = gain.value();
  const Matrix& bv = bias.value();
  if (gv.rows() != 1 || gv.cols() != d || !gv.same_shape(bv)) {
    throw ShapeError(fmt::format("layer_norm: x {} gain {} bias {}", xv.shape_string(),
                                 gv.shape_string(), bv.shape_string()));
  }
  auto xhat = std::make_shared<Matrix>(n, d);
  auto inv_std = std::make_shared<std::vector<double>>(n);
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = xv.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (r[j] - mean) * is;
      (*xhat)(i, j) = h;
      out(i, j) = h * gv(0, j) + bv(0, j);
    }
  }
  const bool needs = x.requires_grad() || gain.requires_grad() || bias.requires_grad();
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return t.record(std::move(out), needs,
                  [ix, ig, ib, xhat, inv_std](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    const Matrix& gain_v = tp.value(ig);
                    const std::size_t rows = g.rows(), dim = g.cols();
                    if (tp.requires_grad(ig)) {
                      Matrix& gg = tp.grad_slot(ig);
                      for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < dim; ++j) gg(0, j) += g(i, j) * (*xhat)(i, j);
                    }
                    if (tp.requires_grad(ib)) {
                      Matrix& gb = tp.grad_slot(ib);
                      for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < dim; ++j) gb(0, j) += g(i, j);
                    }
                    if (tp.requires_grad(ix)) {
                      Matrix& gx = tp.grad_slot(ix);
                      std::vector<double> dxhat(dim);
                      const double inv_d = 1.0 / static_cast<double>(dim);
                      for (std::size_t i = 0; i < rows; ++i) {
                        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                        for (std::size_t j = 0; j < dim; ++j) {
                          dxhat[j] = g(i, j) * gain_v(0, j);
                          sum_dxhat += dxhat[j];
                          sum_dxhat_xhat += dxhat[j] * (*xhat)(i, j);
                        }
                        const double is = (*inv_std)[i];
                        for (std::size_t j = 0; j < dim; ++j) {
                          gx(i, j) += is * (dxhat[j] - inv_d * sum_dxhat -
                                            (*xhat)(i, j) * inv_d * sum_dxhat_xhat);
                        }
                      }
                    }
                  });
}

namespace {

struct AttentionShape {
  std::size_t n, m, ctx, total, heads, dh;
};

AttentionShape check_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                               const AttentionOptions& opts) {
  if (opts.heads == 0) throw ConfigError("attention: heads must be >= 1");
  if ((opts.context_keys == nullptr) != (opts.context_values == nullptr)) {
    throw ConfigError("attention: context keys and values must be given together");
  }
  const std::size_t width = q.cols();
  if (width % opts.heads != 0) {
    throw ShapeError(fmt::format("attention: width {} not divisible by {} heads", width, opts.heads));
  }
  if (k.cols() != width || v.cols() != width || k.rows() != v.rows()) {
    throw ShapeError(fmt::format("attention: q {} k {} v {}", q.shape_string(), k.shape_string(),
                                 v.shape_string()));
  }
  std::size_t ctx = 0;
  if (opts.context_keys != nullptr) {
    const Matrix& ck = *opts.context_keys;
    const Matrix& cv = *opts.context_values;
    if (ck.rows() > 0 && (ck.cols() != width || !ck.same_shape(cv))) {
      throw ShapeError(fmt::format("attention: context keys {} values {} for width {}",
                                   ck.shape_string(), cv.shape_string(), width));
    }
    ctx = ck.rows();
  }
  if (opts.causal && q.rows() != k.rows()) {
    throw ShapeError("attention: causal mode needs one key row per query row");
  }
  const std::size_t total = ctx + k.rows();
  if (total == 0) throw ConfigError("attention: no keys to attend to");
  return {q.rows(), k.rows(), ctx, total, opts.heads, width / opts.heads};
}

const double* key_row(const Matrix& k, const Matrix* ctx_k, std::size_t ctx, std::size_t j) {
  return j < ctx ? ctx_k->row(j).data() : k.row(j - ctx).data();
}

std::size_t visible_keys(const AttentionShape& s, bool causal, std::size_t i) {
  return causal ? s.ctx + i + 1 : s.total;
}

// Probabilities laid out [head][query][key] with stride `total`.
std::vector<double> attention_probs(const Matrix& q, const Matrix& k, const AttentionOptions& opts,
                                    const AttentionShape& s) {
  std::vector<double> probs(s.heads * s.n * s.total, 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(s.dh));
  for (std::size_t h = 0; h < s.heads; ++h) {
    const std::size_t off = h * s.dh;
    for (std::size_t i = 0; i < s.n; ++i) {
      const double* qi = q.row(i).data() + off;
      double* p = probs.data() + (h * s.n + i) * s.total;
      const std::size_t vis = visible_keys(s, opts.causal, i);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < vis; ++j) {
        const double* kj = key_row(k, opts.context_keys, s.ctx, j) + off;
        double dot = 0.0;
        for (std::size_t t = 0; t < s.dh; ++t) dot += qi[t] * kj[t];
        p[j] = dot * scale;
        mx = std::max(mx, p[j]);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < vis; ++j) {
        p[j] = std::exp(p[j] - mx);
        sum += p[j];
      }
      for (std::size_t j = 0; j < vis; ++j) p[j] /= sum;
    }
  }
  return probs;
}

}  // namespace

std::vector<Matrix> attention_weights(const Matrix& q, const Matrix& k,
                                      const AttentionOptions& opts) {
  const AttentionShape s = check_attention(q, k, k, opts);
  std::vector<double> probs = attention_probs(q, k, opts, s);
  std::vector<Matrix> out;
  out.reserve(s.heads);
  for (std::size_t h = 0; h < s.heads; ++h) {
    auto first = probs.begin() + static_cast<std::ptrdiff_t>(h * s.n * s.total);
    out.emplace_back(s.n, s.total,
                     std::vector<double>(first, first + static_cast<std::ptrdiff_t>(s.n * s.total)));
  }
  return out;
}

Var attention(Var q, Var k, Var v, const AttentionOptions& opts) {
  Tape& t = tape_of(q, k);
  tape_of(q, v);
  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();
  const AttentionShape s = check_attention(qv, kv, vv, opts);
  auto probs = std::make_shared<std::vector<double>>(attention_probs(qv, kv, opts, s));

  const Matrix* ctx_v = opts.context_values;
  Matrix out(s.n, s.heads * s.dh);
  for (std::size_t h = 0; h < s.heads; ++h) {
    const std::size_t off = h * s.dh;
    for (std::size_t i = 0; i < s.n; ++i) {
      const double* p = probs->data() + (h * s.n + i) * s.total;
      double* oi = out.row(i).data() + off;
      const std::size_t vis = visible_keys(s, opts.causal, i);
      for (std::size_t j = 0; j < vis; ++j) {
        const double* vj = key_row(vv, ctx_v, s.ctx, j) + off;
        for (std::size_t c = 0; c < s.dh; ++c) oi[c] += p[j] * vj[c];
      }
    }
  }

  const bool needs = q.requires_grad() || k.requires_grad() || v.requires_grad();
  const std::size_t iq = q.id(), ik = k.id(), iv = v.id();
  const Matrix* ctx_k = opts.context_keys;
  const bool causal = opts.causal;
  return t.record(
      std::move(out), needs,
      [iq, ik, iv, s, probs, ctx_k, ctx_v, causal](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        const Matrix& qm = tp.value(iq);
        const Matrix& km = tp.value(ik);
        const Matrix& vm = tp.value(iv);
        const bool gq = tp.requires_grad(iq), gk = tp.requires_grad(ik), gv = tp.requires_grad(iv);
        Matrix* dq = gq ? &tp.grad_slot(iq) : nullptr;
        Matrix* dk = gk ? &tp.grad_slot(ik) : nullptr;
        Matrix* dv = gv ? &tp.grad_slot(iv) : nullptr;
        const double scale = 1.0 / std::sqrt(static_cast<double>(s.dh));
        std::vector<double> ds(s.total);
        for (std::size_t h = 0; h < s.heads; ++h) {
          const std::size_t off = h * s.dh;
          for (std::size_t i = 0; i < s.n; ++i) {
            const double* p = probs->data() + (h * s.n + i) * s.total;
            const double* go = g.row(i).data() + off;
            const std::size_t vis = visible_keys(s, causal, i);
            double weighted = 0.0;
            for (std::size_t j = 0; j < vis; ++j) {
              const double* vj = key_row(vm, ctx_v, s.ctx, j) + off;
              double dp = 0.0;
              for (std::size_t c = 0; c < s.dh; ++c) dp += go[c] * vj[c];
              ds[j] = dp;
              weighted += p[j] * dp;
            }
            for (std::size_t j = 0; j < vis; ++j) ds[j] = p[j] * (ds[j] - weighted) * scale;
            const double* qi = qm.row(i).data() + off;
            for (std::size_t j = 0; j < vis; ++j) {
              if (dq != nullptr) {
                const double* kj = key_row(km, ctx_k, s.ctx, j) + off;
                double* dqi = dq->row(i).data() + off;
                for (std::size_t c = 0; c < s.dh; ++c) dqi[c] += ds[j] * kj[c];
              }
              if (j < s.ctx) continue;
              const std::size_t r = j - s.ctx;
              if (dk != nullptr) {
                double* dkr = dk->row(r).data() + off;
                for (std::size_t c = 0; c < s.dh; ++c) dkr[c] += ds[j] * qi[c];
              }
              if (dv != nullptr) {
                double* dvr = dv->row(r).data() + off;
                for (std::size_t c = 0; c < s.dh; ++c) dvr[c] += p[j] * go[c];
              }
            }
          }
        }
      });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Tape& t = *parts.front().tape();
  std::size_t rows = 0;
  const std::size_t cols = parts.front().cols();
  bool needs = false;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw ConfigError("concat_rows: parts on different tapes");
    if (p.rows() > 0 && p.cols() != cols) {
      throw ShapeError(fmt::format("concat_rows: widths {} and {}", cols, p.cols()));
    }
    rows += p.rows();
    needs = needs || p.requires_grad();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
    ids.push_back(p.id());
  }
  return t.record(Matrix(rows, cols, std::move(data)), needs,
                  [ids = std::move(ids)](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    std::size_t row = 0;
                    for (std::size_t id : ids) {
                      const std::size_t r = tp.value(id).rows();
                      if (tp.requires_grad(id)) tp.accumulate(id, tsrp::slice_rows(g, row, r));
                      row += r;
                    }
                  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  Tape& t = *a.tape();
  Matrix out = tsrp::slice_rows(a.value(), begin, count);
  const std::size_t ia = a.id();
  return t.record(std::move(out), a.requires_grad(), [ia, begin](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad_slot(ia);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      auto src = g.row(i);
      auto dst = ga.row(begin + i);
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    }
  });
}

Var flatten(Var a) {
  Tape& t = *a.tape();
  const Matrix& av = a.value();
  Matrix out(1, av.size(), std::vector<double>(av.data().begin(), av.data().end()));
  const std::size_t ia = a.id();
  return t.record(std::move(out), a.requires_grad(), [ia](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& src = tp.value(ia);
    tp.accumulate(ia, Matrix(src.rows(), src.cols(),
                             std::vector<double>(g.data().begin(), g.data().end())));
  });
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
  Tape& t = *table.tape();
  const Matrix& tv = table.value();
  Matrix out(ids.size(), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows()) {
      throw ShapeError(fmt::format("gather_rows: id {} outside table of {} rows", ids[i], tv.rows()));
    }
    auto src = tv.row(ids[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  const std::size_t it = table.id();
  return t.record(std::move(out), table.requires_grad(),
                  [it, idx = std::vector<std::size_t>(ids.begin(), ids.end())](Tape& tp,
                                                                               std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    Matrix& gt = tp.grad_slot(it);
                    for (std::size_t i = 0; i < idx.size(); ++i) {
                      auto src = g.row(i);
                      auto dst = gt.row(idx[i]);
                      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
                    }
                  });
}

Var mse(Var pred, const Matrix& target) {
  Tape& t = *pred.tape();
  const Matrix& pv = pred.value();
  require_same_shape(pv, target, "mse");
  if (pv.size() == 0) throw ShapeError("mse: empty input");
  const double inv_n = 1.0 / static_cast<double>(pv.size());
  double acc = 0.0;
  auto pd = pv.data();
  auto td = target.data();
  for (std::size_t i = 0; i < pd.size(); ++i) acc += (pd[i] - td[i]) * (pd[i] - td[i]);
  const std::size_t ip = pred.id();
  return t.record(Matrix(1, 1, acc * inv_n), pred.requires_grad(),
                  [ip, target, inv_n](Tape& tp, std::size_t self) {
                    const double g = tp.grad(self)(0, 0);
                    const Matrix& p = tp.value(ip);
                    Matrix& gp = tp.grad_slot(ip);
                    auto pdv = p.data();
                    auto tdv = target.data();
                    auto gd = gp.data();
                    for (std::size_t i = 0; i < pdv.size(); ++i)
                      gd[i] += 2.0 * inv_n * g * (pdv[i] - tdv[i]);
                  });
}

Var mean(std::span<const Var> scalars) {
  if (scalars.empty()) throw ShapeError("mean: no inputs");
  Tape& t = *scalars.front().tape();
  double acc = 0.0;
  bool needs = false;
  std::vector<std::size_t> ids;
  for (const Var& s : scalars) {
    if (s.tape() != &t) throw ConfigError("mean: inputs on different tapes");
    if (s.rows() != 1 || s.cols() != 1) throw ShapeError("mean: inputs must be 1x1");
    acc += s.value()(0, 0);
    needs = needs || s.requires_grad();
    ids.push_back(s.id());
  }
  const double inv_n = 1.0 / static_cast<double>(scalars.size());
  return t.record(Matrix(1, 1, acc * inv_n), needs,
                  [ids = std::move(ids), inv_n](Tape& tp, std::size_t self) {
                    const Matrix g(1, 1, tp.grad(self)(0, 0) * inv_n);
                    for (std::size_t id : ids) tp.accumulate(id, g);
                  });
}

}  // namespace ad
}  // namespace tsrp
