#include "pgn/graph.hpp"

#include <cmath>

#include "pgn/errors.hpp"
#include "pgn/kernels.hpp"

namespace pgn {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError("diffcore", std::string(op) + " shape mismatch: " + a.shape_str() +
                                         " vs " + b.shape_str());
  }
}

}  // namespace

Var Graph::add_node(Tensor value, std::vector<int> parents,
                    std::function<void(Graph&, int)> backfn) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  for (int p : n.parents) {
    if (nodes_[static_cast<std::size_t>(p)].track) {
      n.track = true;
      break;
    }
  }
  n.backfn = n.track ? std::move(backfn) : nullptr;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::leaf(Tensor value, bool track_grad) {
  Node n;
  n.value = std::move(value);
  n.track = track_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::param(Parameter& p) {
  if (!p.trainable) return constant(p.value);
  Node n;
  n.value = p.value;
  n.track = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace_back(&p, id);
  return Var{id};
}

void Graph::ensure_grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.numel() == 0 || !n.grad.same_shape(n.value)) n.grad = Tensor::zeros(n.value.shape());
}

void Graph::accumulate(int id, const Tensor& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.track) return;
  ensure_grad(id);
  float* dst = n.grad.data();
  const float* src = g.data();
  for (std::int64_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
}

void Graph::backward(Var scalar_loss) {
  Node& loss = nodes_[static_cast<std::size_t>(scalar_loss.id)];
  if (loss.value.numel() != 1) {
    throw ContractError("diffcore",
                        "backward requires a scalar loss, got shape " + loss.value.shape_str());
  }
  registry_.clear();
  if (!loss.track) return;
  ensure_grad(scalar_loss.id);
  loss.grad[0] = 1.0f;
  for (int id = scalar_loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.track || n.grad.numel() == 0) continue;
    if (n.backfn) n.backfn(*this, id);
  }
  for (auto& [p, id] : param_nodes_) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.numel() == 0) continue;
    float* dst = p->grad.data();
    const float* src = n.grad.data();
    for (std::int64_t i = 0; i < n.grad.numel(); ++i) dst[i] += src[i];
    registry_.push_back(p);
  }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

Var conv2d(Graph& g, Var x, Var w, Var b, int stride, int padding) {
  Tensor y = kernels::conv2d_forward(g.value(x), g.value(w), g.value(b), stride, padding);
  const int xi = x.id, wi = w.id, bi = b.id;
  return g.add_node(std::move(y), {xi, wi, bi}, [xi, wi, bi, stride, padding](Graph& gr, int id) {
    const Tensor& gout = gr.grad(Var{id});
    const Tensor& xv = gr.value(Var{xi});
    const Tensor& wv = gr.value(Var{wi});
    Tensor* gx = nullptr;
    Tensor* gw = nullptr;
    Tensor* gb = nullptr;
    Tensor gxs, gws, gbs;
    if (gr.tracked(Var{xi})) {
      gxs = Tensor::zeros(xv.shape());
      gx = &gxs;
    }
    if (gr.tracked(Var{wi})) {
      gws = Tensor::zeros(wv.shape());
      gw = &gws;
    }
    if (gr.tracked(Var{bi})) {
      gbs = Tensor::zeros(gr.value(Var{bi}).shape());
      gb = &gbs;
    }
    kernels::conv2d_backward(xv, wv, gout, stride, padding, gx, gw, gb);
    if (gx) gr.accumulate(xi, gxs);
    if (gw) gr.accumulate(wi, gws);
    if (gb) gr.accumulate(bi, gbs);
  });
}

Var conv_transpose2d(Graph& g, Var x, Var w, Var b, int stride, int padding) {
  Tensor y = kernels::conv_transpose2d_forward(g.value(x), g.value(w), g.value(b), stride, padding);
  const int xi = x.id, wi = w.id, bi = b.id;
  return g.add_node(std::move(y), {xi, wi, bi}, [xi, wi, bi, stride, padding](Graph& gr, int id) {
    const Tensor& gout = gr.grad(Var{id});
    const Tensor& xv = gr.value(Var{xi});
    const Tensor& wv = gr.value(Var{wi});
    Tensor gxs, gws, gbs;
    Tensor* gx = nullptr;
    Tensor* gw = nullptr;
    Tensor* gb = nullptr;
    if (gr.tracked(Var{xi})) {
      gxs = Tensor::zeros(xv.shape());
      gx = &gxs;
    }
    if (gr.tracked(Var{wi})) {
      gws = Tensor::zeros(wv.shape());
      gw = &gws;
    }
    if (gr.tracked(Var{bi})) {
      gbs = Tensor::zeros(gr.value(Var{bi}).shape());
      gb = &gbs;
    }
    kernels::conv_transpose2d_backward(xv, wv, gout, stride, padding, gx, gw, gb);
    if (gx) gr.accumulate(xi, gxs);
    if (gw) gr.accumulate(wi, gws);
    if (gb) gr.accumulate(bi, gbs);
  });
}

Var dense(Graph& g, Var x, Var w, Var b) {
  Tensor y = kernels::dense_forward(g.value(x), g.value(w), g.value(b));
  const int xi = x.id, wi = w.id, bi = b.id;
  return g.add_node(std::move(y), {xi, wi, bi}, [xi, wi, bi](Graph& gr, int id) {
    const Tensor& gout = gr.grad(Var{id});
    const Tensor& xv = gr.value(Var{xi});
    const Tensor& wv = gr.value(Var{wi});
    Tensor gxs, gws, gbs;
    Tensor* gx = nullptr;
    Tensor* gw = nullptr;
    Tensor* gb = nullptr;
    if (gr.tracked(Var{xi})) {
      gxs = Tensor::zeros(xv.shape());
      gx = &gxs;
    }
    if (gr.tracked(Var{wi})) {
      gws = Tensor::zeros(wv.shape());
      gw = &gws;
    }
    if (gr.tracked(Var{bi})) {
      gbs = Tensor::zeros(gr.value(Var{bi}).shape());
      gb = &gbs;
    }
    kernels::dense_backward(xv, wv, gout, gx, gw, gb);
    if (gx) gr.accumulate(xi, gxs);
    if (gw) gr.accumulate(wi, gws);
    if (gb) gr.accumulate(bi, gbs);
  });
}

Var relu(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  Tensor y(xv.shape());
  for (std::int64_t i = 0; i < xv.numel(); ++i) y[i] = xv[i] > 0.0f ? xv[i] : 0.0f;
  const int xi = x.id;
  return g.add_node(std::move(y), {xi}, [xi](Graph& gr, int id) {
    const Tensor& gout = gr.grad(Var{id});
    const Tensor& xv = gr.value(Var{xi});
    Tensor gx(xv.shape());
    for (std::int64_t i = 0; i < xv.numel(); ++i) gx[i] = xv[i] > 0.0f ? gout[i] : 0.0f;
    gr.accumulate(xi, gx);
  });
}

Var sigmoid(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  Tensor y(xv.shape());
  // Result clamped into the open interval (0,1). The floor keeps the y(1-y)
  // derivative large enough that a saturated unit can still be pulled back
  // within a few hundred optimizer steps.
  constexpr float kLo = 1e-2f;
  constexpr float kHi = 1.0f - 1e-2f;
  for (std::int64_t i = 0; i < xv.numel(); ++i) {
    const float v = xv[i];
    float s;
    if (v >= 0.0f) {
      s = 1.0f / (1.0f + std::exp(-v));
    } else {
      const float e = std::exp(v);
      s = e / (1.0f + e);
    }
    y[i] = std::min(kHi, std::max(kLo, s));
  }
  const int xi = x.id;
  return g.add_node(std::move(y), {xi}, [xi](Graph& gr, int id) {
    const Tensor& gout = gr.grad(Var{id});
    const Tensor& yv = gr.value(Var{id});
    Tensor gx(yv.shape());
    for (std::int64_t i = 0; i < yv.numel(); ++i) gx[i] = gout[i] * yv[i] * (1.0f - yv[i]);
    gr.accumulate(xi, gx);
  });
}

Var avg_pool2d(Graph& g, Var x, int k) {
  Tensor y = kernels::avg_pool2d_forward(g.value(x), k);
  const int xi = x.id;
  return g.add_node(std::move(y), {xi}, [xi, k](Graph& gr, int id) {
    const Tensor& gout = gr.grad(Var{id});
    const Tensor& xv = gr.value(Var{xi});
    Tensor gx = Tensor::zeros(xv.shape());
    kernels::avg_pool2d_backward(xv, gout, k, &gx);
    gr.accumulate(xi, gx);
  });
}

Var flatten(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  if (xv.ndim() < 2) throw DimensionError("diffcore", "flatten expects at least 2 dims");
  const int n = xv.dim(0);
  const int rest = static_cast<int>(xv.numel() / n);
  Tensor y({n, rest}, std::vector<float>(xv.data(), xv.data() + xv.numel()));
  const int xi = x.id;
  return g.add_node(std::move(y), {xi}, [xi](Graph& gr, int id) {
    const Tensor& gout = gr.grad(Var{id});
    const Tensor& xv = gr.value(Var{xi});
    Tensor gx(xv.shape(), std::vector<float>(gout.data(), gout.data() + gout.numel()));
    gr.accumulate(xi, gx);
  });
}

Var softmax(Graph& g, Var x) {
  Tensor y = kernels::softmax_forward(g.value(x));
  const int xi = x.id;
  return g.add_node(std::move(y), {xi}, [xi](Graph& gr, int id) {
    const Tensor& gout = gr.grad(Var{id});
    const Tensor& yv = gr.value(Var{id});
    const int n = yv.dim(0), k = yv.dim(1);
    Tensor gx({n, k});
    for (int r = 0; r < n; ++r) {
      double dot = 0.0;
      for (int c = 0; c < k; ++c) dot += static_cast<double>(gout.at2(r, c)) * yv.at2(r, c);
      for (int c = 0; c < k; ++c)
        gx.at2(r, c) = yv.at2(r, c) * (gout.at2(r, c) - static_cast<float>(dot));
    }
    gr.accumulate(xi, gx);
  });
}

Var softmax_cross_entropy(Graph& g, Var logits, const std::vector<int>& labels) {
  const Tensor& xv = g.value(logits);
  if (xv.ndim() != 2) throw DimensionError("diffcore", "softmax_cross_entropy expects (N,K) logits");
  const int n = xv.dim(0), k = xv.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    throw DimensionError("diffcore", "softmax_cross_entropy needs one label per row");
  }
  for (int label : labels) {
    if (label < 0 || label >= k) {
      throw ContractError("diffcore", "label " + std::to_string(label) + " out of range [0," +
                                          std::to_string(k) + ")");
    }
  }
  double total = 0.0;
  for (int r = 0; r < n; ++r) {
    float mx = xv.at2(r, 0);
    for (int c = 1; c < k; ++c) mx = std::max(mx, xv.at2(r, c));
    double z = 0.0;
    for (int c = 0; c < k; ++c) z += std::exp(static_cast<double>(xv.at2(r, c)) - mx);
    total += mx + std::log(z) - static_cast<double>(xv.at2(r, labels[static_cast<std::size_t>(r)]));
  }
  Tensor y = Tensor::scalar(static_cast<float>(total / n));
  const int xi = logits.id;
  auto labels_copy = labels;
  return g.add_node(std::move(y), {xi}, [xi, labels_copy](Graph& gr, int id) {
    const float gs = gr.grad(Var{id})[0];
    const Tensor& xv = gr.value(Var{xi});
    const Tensor sm = kernels::softmax_forward(xv);
    const int n = xv.dim(0), k = xv.dim(1);
    Tensor gx({n, k});
    const float scale = gs / static_cast<float>(n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < k; ++c)
        gx.at2(r, c) =
            scale * (sm.at2(r, c) - (labels_copy[static_cast<std::size_t>(r)] == c ? 1.0f : 0.0f));
    gr.accumulate(xi, gx);
  });
}

Var add(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  check_same_shape(av, bv, "add");
  Tensor y(av.shape());
  for (std::int64_t i = 0; i < av.numel(); ++i) y[i] = av[i] + bv[i];
  const int ai = a.id, bi = b.id;
  return g.add_node(std::move(y), {ai, bi}, [ai, bi](Graph& gr, int id) {
    const Tensor& gout = gr.grad(Var{id});
    gr.accumulate(ai, gout);
    gr.accumulate(bi, gout);
  });
}

Var sub(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  check_same_shape(av, bv, "sub");
  Tensor y(av.shape());
  for (std::int64_t i = 0; i < av.numel(); ++i) y[i] = av[i] - bv[i];
  const int ai = a.id, bi = b.id;
  return g.add_node(std::move(y), {ai, bi}, [ai, bi](Graph& gr, int id) {
    const Tensor& gout = gr.grad(Var{id});
    gr.accumulate(ai, gout);
    Tensor neg(gout.shape());
    for (std::int64_t i = 0; i < gout.numel(); ++i) neg[i] = -gout[i];
    gr.accumulate(bi, neg);
  });
}

Var mul(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  check_same_shape(av, bv, "mul");
  Tensor y(av.shape());
  for (std::int64_t i = 0; i < av.numel(); ++i) y[i] = av[i] * bv[i];
  const int ai = a.id, bi = b.id;
  return g.add_node(std::move(y), {ai, bi}, [ai, bi](Graph& gr, int id) {
    const Tensor& gout = gr.grad(Var{id});
    const Tensor& av = gr.value(Var{ai});
    const Tensor& bv = gr.value(Var{bi});
    if (gr.tracked(Var{ai})) {
      Tensor ga(av.shape());
      for (std::int64_t i = 0; i < av.numel(); ++i) ga[i] = gout[i] * bv[i];
      gr.accumulate(ai, ga);
    }
    if (gr.tracked(Var{bi})) {
      Tensor gb(bv.shape());
      for (std::int64_t i = 0; i < bv.numel(); ++i) gb[i] = gout[i] * av[i];
      gr.accumulate(bi, gb);
    }
  });
}

Var affine(Graph& g, Var x, float scale, float shift) {
  const Tensor& xv = g.value(x);
  Tensor y(xv.shape());
  for (std::int64_t i = 0; i < xv.numel(); ++i) y[i] = scale * xv[i] + shift;
  const int xi = x.id;
  return g.add_node(std::move(y), {xi}, [xi, scale](Graph& gr, int id) {
    const Tensor& gout = gr.grad(Var{id});
    Tensor gx(gout.shape());
    for (std::int64_t i = 0; i < gout.numel(); ++i) gx[i] = scale * gout[i];
    gr.accumulate(xi, gx);
  });
}

Var abs_val(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  Tensor y(xv.shape());
  for (std::int64_t i = 0; i < xv.numel(); ++i) y[i] = std::fabs(xv[i]);
  const int xi = x.id;
  return g.add_node(std::move(y), {xi}, [xi](Graph& gr, int id) {
    const Tensor& gout = gr.grad(Var{id});
    const Tensor& xv = gr.value(Var{xi});
    Tensor gx(xv.shape());
    for (std::int64_t i = 0; i < xv.numel(); ++i)
      gx[i] = xv[i] > 0.0f ? gout[i] : (xv[i] < 0.0f ? -gout[i] : 0.0f);
    gr.accumulate(xi, gx);
  });
}

Var log_val(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  Tensor y(xv.shape());
  for (std::int64_t i = 0; i < xv.numel(); ++i) {
    if (xv[i] <= 0.0f) {
      throw DomainError("diffcore", "log of non-positive value " + std::to_string(xv[i]));
    }
    y[i] = std::log(xv[i]);
  }
  const int xi = x.id;
  return g.add_node(std::move(y), {xi}, [xi](Graph& gr, int id) {
    const Tensor& gout = gr.grad(Var{id});
    const Tensor& xv = gr.value(Var{xi});
    Tensor gx(xv.shape());
    for (std::int64_t i = 0; i < xv.numel(); ++i) gx[i] = gout[i] / xv[i];
    gr.accumulate(xi, gx);
  });
}

Var clamp(Graph& g, Var x, float lo, float hi) {
  const Tensor& xv = g.value(x);
  Tensor y(xv.shape());
  for (std::int64_t i = 0; i < xv.numel(); ++i) y[i] = std::min(hi, std::max(lo, xv[i]));
  const int xi = x.id;
  return g.add_node(std::move(y), {xi}, [xi, lo, hi](Graph& gr, int id) {
    const Tensor& gout = gr.grad(Var{id});
    const Tensor& xv = gr.value(Var{xi});
    Tensor gx(xv.shape());
    for (std::int64_t i = 0; i < xv.numel(); ++i)
      gx[i] = (xv[i] > lo && xv[i] < hi) ? gout[i] : 0.0f;
    gr.accumulate(xi, gx);
  });
}

Var sum(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  Tensor y = Tensor::scalar(static_cast<float>(xv.sum64()));
  const int xi = x.id;
  return g.add_node(std::move(y), {xi}, [xi](Graph& gr, int id) {
    const float gs = gr.grad(Var{id})[0];
    const Tensor& xv = gr.value(Var{xi});
    gr.accumulate(xi, Tensor::full(xv.shape(), gs));
  });
}

Var mean(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  const double n = static_cast<double>(xv.numel());
  Tensor y = Tensor::scalar(static_cast<float>(xv.sum64() / n));
  const int xi = x.id;
  return g.add_node(std::move(y), {xi}, [xi](Graph& gr, int id) {
    const float gs = gr.grad(Var{id})[0];
    const Tensor& xv = gr.value(Var{xi});
    gr.accumulate(xi, Tensor::full(xv.shape(), gs / static_cast<float>(xv.numel())));
  });
}

}  // namespace pgn
