#include "formcoach/ad/graph.hpp"

#include <algorithm>
#include <cmath>

namespace formcoach::ad {

// ---------------------------------------------------------------------------
// ParamStore

Param& ParamStore::create(const std::string& name, std::vector<std::size_t> shape, bool trainable) {
  if (find(name)) throw Error("duplicate parameter name: " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Tensor(shape);
  p->grad = Tensor(shape);
  p->trainable = trainable;
  items_.push_back(std::move(p));
  return *items_.back();
}

Param* ParamStore::find(const std::string& name) {
  for (auto& p : items_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Param* ParamStore::find(const std::string& name) const {
  for (const auto& p : items_)
    if (p->name == name) return p.get();
  return nullptr;
}

void ParamStore::zero_grads() {
  for (auto& p : items_) p->grad.fill(0.0);
}

std::size_t ParamStore::trainable_element_count() const {
  std::size_t n = 0;
  for (const auto& p : items_)
    if (p->trainable) n += p->value.size();
  return n;
}

BatchNormState make_batch_norm(ParamStore& store, const std::string& name, std::vector<std::size_t> feature_shape) {
  BatchNormState bn;
  bn.gamma = &store.create(name + ".gamma", feature_shape);
  bn.gamma->value.fill(1.0);
  bn.beta = &store.create(name + ".beta", feature_shape);
  bn.running_mean = &store.create(name + ".running_mean", feature_shape, /*trainable=*/false);
  bn.running_var = &store.create(name + ".running_var", feature_shape, /*trainable=*/false);
  bn.running_var->value.fill(1.0);
  return bn;
}

// ---------------------------------------------------------------------------
// Node types

namespace {

struct LeafNode final : Node {
  void backward(Graph&) override {}
};

struct MatmulNode final : Node {
  // Cases: 2Dx2D; 2Dx3D (shared left, per-sample right); 3Dx2D.
  void backward(Graph& g) override {
    Node* a = inputs[0];
    Node* b = inputs[1];
    const auto& as = a->val.shape();
    const auto& bs = b->val.shape();
    if (a->val.rank() == 2 && b->val.rank() == 2) {
      if (a->needs_grad)
        detail::matmul_bt_acc(grad.data(), b->val.data(), a->grad.data(), as[0], bs[1], as[1]);
      if (b->needs_grad)
        detail::matmul_at_acc(a->val.data(), grad.data(), b->grad.data(), as[0], as[1], bs[1]);
      return;
    }
    if (a->val.rank() == 2 && b->val.rank() == 3) {
      const std::size_t batch = bs[0], n = as[0], k = as[1], m = bs[2];
      if (a->needs_grad) {
        // dA[i,:] += sum_b dY_b[i,:] * B_b^T, partitioned over rows of dA.
        parallel_for(n, g.threads(), [&](std::size_t r0, std::size_t r1) {
          for (std::size_t bi = 0; bi < batch; ++bi) {
            const double* dy = grad.data() + bi * n * m;
            const double* bb = b->val.data() + bi * k * m;
            for (std::size_t i = r0; i < r1; ++i) {
              double* da = a->grad.data() + i * k;
              const double* dy_row = dy + i * m;
              for (std::size_t p = 0; p < k; ++p) {
                const double* b_row = bb + p * m;
                double acc = 0.0;
                for (std::size_t q = 0; q < m; ++q) acc += dy_row[q] * b_row[q];
                da[p] += acc;
              }
            }
          }
        });
      }
      if (b->needs_grad) {
        parallel_for(batch, g.threads(), [&](std::size_t b0, std::size_t b1) {
          for (std::size_t bi = b0; bi < b1; ++bi)
            detail::matmul_at_acc(a->val.data(), grad.data() + bi * n * m, b->grad.data() + bi * k * m, n, k, m);
        });
      }
      return;
    }
    // 3D x 2D
    const std::size_t batch = as[0], n = as[1], k = as[2], m = bs[1];
    if (a->needs_grad) {
      parallel_for(batch, g.threads(), [&](std::size_t b0, std::size_t b1) {
        for (std::size_t bi = b0; bi < b1; ++bi)
          detail::matmul_bt_acc(grad.data() + bi * n * m, b->val.data(), a->grad.data() + bi * n * k, n, m, k);
      });
    }
    if (b->needs_grad) {
      // dB[p,:] += sum_b sum_i A[b,i,p] * dY_b[i,:], partitioned over rows of dB.
      parallel_for(k, g.threads(), [&](std::size_t p0, std::size_t p1) {
        for (std::size_t bi = 0; bi < batch; ++bi) {
          const double* av = a->val.data() + bi * n * k;
          const double* dy = grad.data() + bi * n * m;
          for (std::size_t i = 0; i < n; ++i) {
            const double* dy_row = dy + i * m;
            for (std::size_t p = p0; p < p1; ++p) {
              double w = av[i * k + p];
              if (w == 0.0) continue;
              double* db_row = b->grad.data() + p * m;
              for (std::size_t q = 0; q < m; ++q) db_row[q] += w * dy_row[q];
            }
          }
        }
      });
    }
  }
};

struct AddNode final : Node {
  void backward(Graph&) override {
    for (Node* in : inputs) {
      if (!in->needs_grad) continue;
      for (std::size_t i = 0; i < grad.size(); ++i) in->grad[i] += grad[i];
    }
  }
};

struct AddBiasNode final : Node {
  void backward(Graph&) override {
    Node* a = inputs[0];
    Node* bias = inputs[1];
    const std::size_t f = bias->val.size();
    const std::size_t rows = grad.size() / f;
    if (a->needs_grad)
      for (std::size_t i = 0; i < grad.size(); ++i) a->grad[i] += grad[i];
    if (bias->needs_grad)
      for (std::size_t r = 0; r < rows; ++r) {
        const double* g = grad.data() + r * f;
        for (std::size_t i = 0; i < f; ++i) bias->grad[i] += g[i];
      }
  }
};

struct ReluNode final : Node {
  void backward(Graph&) override {
    Node* a = inputs[0];
    if (!a->needs_grad) return;
    for (std::size_t i = 0; i < grad.size(); ++i)
      if (a->val[i] > 0.0) a->grad[i] += grad[i];
  }
};

struct DropoutNode final : Node {
  std::vector<float> mask;  // scale factors, applied at train time
  void backward(Graph&) override {
    Node* a = inputs[0];
    if (!a->needs_grad) return;
    if (mask.empty()) {
      for (std::size_t i = 0; i < grad.size(); ++i) a->grad[i] += grad[i];
    } else {
      for (std::size_t i = 0; i < grad.size(); ++i) a->grad[i] += grad[i] * mask[i];
    }
  }
};

struct BatchNormNode final : Node {
  BatchNormState* bn = nullptr;
  bool train = false;
  std::vector<double> xhat;
  std::vector<double> inv_std;  // per position
  void backward(Graph&) override {
    Node* a = inputs[0];
    const std::size_t p = bn->gamma->value.size();
    const std::size_t batch = a->val.size() / p;
    const double* gamma = bn->gamma->value.data();
    // gamma / beta gradients.
    for (std::size_t b = 0; b < batch; ++b) {
      const double* gy = grad.data() + b * p;
      const double* xh = xhat.data() + b * p;
      double* dgamma = bn->gamma->grad.data();
      double* dbeta = bn->beta->grad.data();
      for (std::size_t i = 0; i < p; ++i) {
        dgamma[i] += gy[i] * xh[i];
        dbeta[i] += gy[i];
      }
    }
    if (!a->needs_grad) return;
    if (!train) {
      for (std::size_t b = 0; b < batch; ++b) {
        double* da = a->grad.data() + b * p;
        const double* gy = grad.data() + b * p;
        for (std::size_t i = 0; i < p; ++i) da[i] += gy[i] * gamma[i] * inv_std[i];
      }
      return;
    }
    // Train mode: gradients through the batch statistics.
    std::vector<double> sum_dxhat(p, 0.0), sum_dxhat_xhat(p, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* gy = grad.data() + b * p;
      const double* xh = xhat.data() + b * p;
      for (std::size_t i = 0; i < p; ++i) {
        double dxh = gy[i] * gamma[i];
        sum_dxhat[i] += dxh;
        sum_dxhat_xhat[i] += dxh * xh[i];
      }
    }
    const double inv_b = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      double* da = a->grad.data() + b * p;
      const double* gy = grad.data() + b * p;
      const double* xh = xhat.data() + b * p;
      for (std::size_t i = 0; i < p; ++i) {
        double dxh = gy[i] * gamma[i];
        da[i] += inv_std[i] * (dxh - inv_b * sum_dxhat[i] - xh[i] * inv_b * sum_dxhat_xhat[i]);
      }
    }
  }
};

struct ConcatNode final : Node {
  void backward(Graph&) override {
    Node* a = inputs[0];
    Node* b = inputs[1];
    const std::size_t ca = a->val.shape().back();
    const std::size_t cb = b->val.shape().back();
    const std::size_t rows = grad.size() / (ca + cb);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* g = grad.data() + r * (ca + cb);
      if (a->needs_grad) {
        double* da = a->grad.data() + r * ca;
        for (std::size_t i = 0; i < ca; ++i) da[i] += g[i];
      }
      if (b->needs_grad) {
        double* db = b->grad.data() + r * cb;
        for (std::size_t i = 0; i < cb; ++i) db[i] += g[ca + i];
      }
    }
  }
};

struct TileRowsNode final : Node {
  void backward(Graph&) override {
    Node* a = inputs[0];
    if (!a->needs_grad) return;
    const std::size_t batch = a->val.dim(0);
    const std::size_t f = a->val.dim(1);
    const std::size_t rows = val.dim(1);
    for (std::size_t b = 0; b < batch; ++b) {
      double* da = a->grad.data() + b * f;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* g = grad.data() + (b * rows + r) * f;
        for (std::size_t i = 0; i < f; ++i) da[i] += g[i];
      }
    }
  }
};

struct MaxPoolNode final : Node {
  std::vector<std::size_t> argmax;  // flat index into the input per output element
  void backward(Graph&) override {
    Node* a = inputs[0];
    if (!a->needs_grad) return;
    for (std::size_t i = 0; i < grad.size(); ++i) a->grad[argmax[i]] += grad[i];
  }
};

struct Conv1dNode final : Node {
  void backward(Graph&) override {
    Node* x = inputs[0];
    Node* w = inputs[1];
    Node* bias = inputs[2];
    const std::size_t batch = x->val.dim(0), cin = x->val.dim(1), len = x->val.dim(2);
    const std::size_t cout = w->val.dim(0), k = w->val.dim(2);
    const std::size_t pad = (k - 1) / 2;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < cout; ++o) {
        const double* gy = grad.data() + (b * cout + o) * len;
        if (bias->needs_grad) {
          double acc = 0.0;
          for (std::size_t l = 0; l < len; ++l) acc += gy[l];
          bias->grad[o] += acc;
        }
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double* xv = x->val.data() + (b * cin + ci) * len;
          double* dx = x->grad.data() + (b * cin + ci) * len;
          const double* wv = w->val.data() + (o * cin + ci) * k;
          double* dw = w->grad.data() + (o * cin + ci) * k;
          for (std::size_t t = 0; t < k; ++t) {
            for (std::size_t l = 0; l < len; ++l) {
              std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l + t) - static_cast<std::ptrdiff_t>(pad);
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
              if (w->needs_grad) dw[t] += gy[l] * xv[src];
              if (x->needs_grad) dx[src] += gy[l] * wv[t];
            }
          }
        }
      }
    }
  }
};

struct ReshapeNode final : Node {
  void backward(Graph&) override {
    Node* a = inputs[0];
    if (!a->needs_grad) return;
    for (std::size_t i = 0; i < grad.size(); ++i) a->grad[i] += grad[i];
  }
};

struct TransposeNode final : Node {
  void backward(Graph&) override {
    Node* a = inputs[0];
    if (!a->needs_grad) return;
    const std::size_t n = a->val.dim(0), m = a->val.dim(1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) a->grad[i * m + j] += grad[j * n + i];
  }
};

struct SliceBatchNode final : Node {
  std::size_t index = 0;
  void backward(Graph&) override {
    Node* a = inputs[0];
    if (!a->needs_grad) return;
    double* dst = a->grad.data() + index * grad.size();
    for (std::size_t i = 0; i < grad.size(); ++i) dst[i] += grad[i];
  }
};

struct SoftmaxXentNode final : Node {
  std::vector<int> labels;
  std::vector<double> softmax;  // B x C
  void backward(Graph&) override {
    Node* logits = inputs[0];
    if (!logits->needs_grad) return;
    const std::size_t b = logits->val.dim(0), c = logits->val.dim(1);
    const double g = grad[0] / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
      double* dl = logits->grad.data() + i * c;
      const double* sm = softmax.data() + i * c;
      for (std::size_t q = 0; q < c; ++q)
        dl[q] += g * (sm[q] - (static_cast<int>(q) == labels[i] ? 1.0 : 0.0));
    }
  }
};

struct MseNode final : Node {
  Tensor target;
  void backward(Graph&) override {
    Node* a = inputs[0];
    if (!a->needs_grad) return;
    const double g = grad[0] * 2.0 / static_cast<double>(a->val.size());
    for (std::size_t i = 0; i < a->val.size(); ++i) a->grad[i] += g * (a->val[i] - target[i]);
  }
};

struct ScaleNode final : Node {
  double factor = 1.0;
  void backward(Graph&) override {
    Node* a = inputs[0];
    if (!a->needs_grad) return;
    for (std::size_t i = 0; i < grad.size(); ++i) a->grad[i] += factor * grad[i];
  }
};

struct SumNode final : Node {
  void backward(Graph&) override {
    Node* a = inputs[0];
    if (!a->needs_grad) return;
    for (std::size_t i = 0; i < a->val.size(); ++i) a->grad[i] += grad[0];
  }
};

bool any_needs_grad(const std::vector<Node*>& ins) {
  for (Node* n : ins)
    if (n->needs_grad) return true;
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph

Graph::Graph(Mode mode, std::uint64_t dropout_seed, int threads)
    : rng_(dropout_seed), mode_(mode), threads_(threads < 1 ? 1 : threads) {}

Node* Graph::adopt(std::unique_ptr<Node> node) {
  node->needs_grad = any_needs_grad(node->inputs);
  nodes_.push_back(std::move(node));
  return nodes_.back().get();
}

Node* Graph::input(Tensor value) {
  auto n = std::make_unique<LeafNode>();
  n->val = std::move(value);
  nodes_.push_back(std::move(n));
  nodes_.back()->needs_grad = false;
  return nodes_.back().get();
}

Node* Graph::param(Param& p) {
  auto n = std::make_unique<LeafNode>();
  n->val = p.value;
  n->needs_grad = true;
  nodes_.push_back(std::move(n));
  param_links_.emplace_back(nodes_.back().get(), &p);
  return nodes_.back().get();
}

Node* Graph::matmul(Node* a, Node* b) {
  const auto& as = a->val.shape();
  const auto& bs = b->val.shape();
  auto n = std::make_unique<MatmulNode>();
  n->inputs = {a, b};
  if (a->val.rank() == 2 && b->val.rank() == 2) {
    if (as[1] != bs[0]) throw ShapeError("matmul: " + a->val.shape_string() + " x " + b->val.shape_string());
    n->val = Tensor({as[0], bs[1]});
    detail::matmul_acc(a->val.data(), b->val.data(), n->val.data(), as[0], as[1], bs[1]);
  } else if (a->val.rank() == 2 && b->val.rank() == 3) {
    if (as[1] != bs[1]) throw ShapeError("matmul: " + a->val.shape_string() + " x " + b->val.shape_string());
    const std::size_t batch = bs[0];
    n->val = Tensor({batch, as[0], bs[2]});
    Node* raw = n.get();
    parallel_for(batch, threads_, [&, raw](std::size_t b0, std::size_t b1) {
      for (std::size_t bi = b0; bi < b1; ++bi)
        detail::matmul_acc(a->val.data(), b->val.data() + bi * bs[1] * bs[2], raw->val.data() + bi * as[0] * bs[2],
                           as[0], as[1], bs[2]);
    });
  } else if (a->val.rank() == 3 && b->val.rank() == 2) {
    if (as[2] != bs[0]) throw ShapeError("matmul: " + a->val.shape_string() + " x " + b->val.shape_string());
    const std::size_t batch = as[0];
    n->val = Tensor({batch, as[1], bs[1]});
    Node* raw = n.get();
    parallel_for(batch, threads_, [&, raw](std::size_t b0, std::size_t b1) {
      for (std::size_t bi = b0; bi < b1; ++bi)
        detail::matmul_acc(a->val.data() + bi * as[1] * as[2], b->val.data(), raw->val.data() + bi * as[1] * bs[1],
                           as[1], as[2], bs[1]);
    });
  } else {
    throw ShapeError("matmul: unsupported ranks " + a->val.shape_string() + " x " + b->val.shape_string());
  }
  return adopt(std::move(n));
}

Node* Graph::add(Node* a, Node* b) {
  require_same_shape(a->val, b->val, "add");
  auto n = std::make_unique<AddNode>();
  n->inputs = {a, b};
  n->val = a->val;
  for (std::size_t i = 0; i < n->val.size(); ++i) n->val[i] += b->val[i];
  return adopt(std::move(n));
}

Node* Graph::add_bias(Node* a, Node* bias) {
  if (bias->val.rank() != 1 || a->val.shape().back() != bias->val.dim(0))
    throw ShapeError("add_bias: " + a->val.shape_string() + " + " + bias->val.shape_string());
  auto n = std::make_unique<AddBiasNode>();
  n->inputs = {a, bias};
  n->val = a->val;
  const std::size_t f = bias->val.size();
  const std::size_t rows = n->val.size() / f;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = n->val.data() + r * f;
    for (std::size_t i = 0; i < f; ++i) row[i] += bias->val[i];
  }
  return adopt(std::move(n));
}

Node* Graph::relu(Node* a) {
  auto n = std::make_unique<ReluNode>();
  n->inputs = {a};
  n->val = a->val;
  for (auto& x : n->val.values()) x = x > 0.0 ? x : 0.0;
  return adopt(std::move(n));
}

Node* Graph::dropout(Node* a, double p) {
  if (p < 0.0 || p >= 1.0) throw ValidationError("dropout probability must be in [0,1)");
  auto n = std::make_unique<DropoutNode>();
  n->inputs = {a};
  n->val = a->val;
  if (training() && p > 0.0) {
    n->mask.resize(n->val.size());
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < n->val.size(); ++i) {
      bool keep = uni(rng_) >= p;
      n->mask[i] = keep ? static_cast<float>(keep_scale) : 0.0f;
      n->val[i] *= n->mask[i];
    }
  }
  return adopt(std::move(n));
}

Node* Graph::batch_norm(Node* a, BatchNormState& bn) {
  const std::size_t p = bn.gamma->value.size();
  if (a->val.size() % p != 0 || a->val.dim(0) == 0)
    throw ShapeError("batch_norm: input " + a->val.shape_string() + " incompatible with feature count " +
                     std::to_string(p));
  const std::size_t batch = a->val.dim(0);
  if (batch * p != a->val.size()) throw ShapeError("batch_norm: features must cover all non-batch axes");
  auto n = std::make_unique<BatchNormNode>();
  n->inputs = {a};
  n->bn = &bn;
  n->train = training();
  n->val = Tensor(a->val.shape());
  n->xhat.resize(a->val.size());
  n->inv_std.resize(p);
  const double* gamma = bn.gamma->value.data();
  const double* beta = bn.beta->value.data();
  if (n->train) {
    std::vector<double> mean(p, 0.0), var(p, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* x = a->val.data() + b * p;
      for (std::size_t i = 0; i < p; ++i) mean[i] += x[i];
    }
    for (auto& m : mean) m /= static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* x = a->val.data() + b * p;
      for (std::size_t i = 0; i < p; ++i) {
        double diff = x[i] - mean[i];
        var[i] += diff * diff;
      }
    }
    for (auto& v : var) v /= static_cast<double>(batch);
    for (std::size_t i = 0; i < p; ++i) n->inv_std[i] = 1.0 / std::sqrt(var[i] + bn.eps);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* x = a->val.data() + b * p;
      double* xh = n->xhat.data() + b * p;
      double* y = n->val.data() + b * p;
      for (std::size_t i = 0; i < p; ++i) {
        xh[i] = (x[i] - mean[i]) * n->inv_std[i];
        y[i] = gamma[i] * xh[i] + beta[i];
      }
    }
    // Update running statistics (unbiased variance when possible).
    const double mom = bn.momentum;
    const double unbias = batch > 1 ? static_cast<double>(batch) / static_cast<double>(batch - 1) : 1.0;
    for (std::size_t i = 0; i < p; ++i) {
      bn.running_mean->value[i] = (1.0 - mom) * bn.running_mean->value[i] + mom * mean[i];
      bn.running_var->value[i] = (1.0 - mom) * bn.running_var->value[i] + mom * var[i] * unbias;
    }
  } else {
    const double* rm = bn.running_mean->value.data();
    const double* rv = bn.running_var->value.data();
    for (std::size_t i = 0; i < p; ++i) n->inv_std[i] = 1.0 / std::sqrt(rv[i] + bn.eps);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* x = a->val.data() + b * p;
      double* xh = n->xhat.data() + b * p;
      double* y = n->val.data() + b * p;
      for (std::size_t i = 0; i < p; ++i) {
        xh[i] = (x[i] - rm[i]) * n->inv_std[i];
        y[i] = gamma[i] * xh[i] + beta[i];
      }
    }
  }
  Node* out = adopt(std::move(n));
  // gamma/beta receive gradients directly, so the node participates in the
  // backward sweep even above constant inputs.
  out->needs_grad = true;
  return out;
}

Node* Graph::concat(Node* a, Node* b) {
  if (a->val.rank() != b->val.rank()) throw ShapeError("concat: rank mismatch");
  for (std::size_t i = 0; i + 1 < a->val.rank(); ++i)
    if (a->val.dim(i) != b->val.dim(i)) throw ShapeError("concat: leading dims differ");
  auto shape = a->val.shape();
  const std::size_t ca = a->val.shape().back(), cb = b->val.shape().back();
  shape.back() = ca + cb;
  auto n = std::make_unique<ConcatNode>();
  n->inputs = {a, b};
  n->val = Tensor(shape);
  const std::size_t rows = n->val.size() / (ca + cb);
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = n->val.data() + r * (ca + cb);
    const double* va = a->val.data() + r * ca;
    const double* vb = b->val.data() + r * cb;
    for (std::size_t i = 0; i < ca; ++i) dst[i] = va[i];
    for (std::size_t i = 0; i < cb; ++i) dst[ca + i] = vb[i];
  }
  return adopt(std::move(n));
}

Node* Graph::tile_rows(Node* a, std::size_t rows) {
  if (a->val.rank() != 2) throw ShapeError("tile_rows expects a rank-2 input");
  const std::size_t batch = a->val.dim(0), f = a->val.dim(1);
  auto n = std::make_unique<TileRowsNode>();
  n->inputs = {a};
  n->val = Tensor({batch, rows, f});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t r = 0; r < rows; ++r) {
      double* dst = n->val.data() + (b * rows + r) * f;
      const double* src = a->val.data() + b * f;
      for (std::size_t i = 0; i < f; ++i) dst[i] = src[i];
    }
  return adopt(std::move(n));
}

namespace {

std::unique_ptr<MaxPoolNode> pool_impl(Node* a, std::size_t batch, std::size_t groups, std::size_t extent,
                                        bool over_middle) {
  // over_middle: input {B, extent, groups} pooled over the middle axis;
  // otherwise input {B, groups, extent} pooled over the last axis.
  auto n = std::make_unique<MaxPoolNode>();
  n->inputs = {a};
  n->val = Tensor({batch, groups});
  n->argmax.resize(batch * groups);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t g = 0; g < groups; ++g) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_idx = 0;
      for (std::size_t e = 0; e < extent; ++e) {
        std::size_t idx = over_middle ? (b * extent + e) * groups + g : (b * groups + g) * extent + e;
        if (a->val[idx] > best) {
          best = a->val[idx];
          best_idx = idx;
        }
      }
      n->val.at(b, g) = best;
      n->argmax[b * groups + g] = best_idx;
    }
  }
  return n;
}

}  // namespace

Node* Graph::spatial_max_pool(Node* a) {
  if (a->val.rank() != 3) throw ShapeError("spatial_max_pool expects {B,R,C}");
  return adopt(pool_impl(a, a->val.dim(0), a->val.dim(2), a->val.dim(1), /*over_middle=*/true));
}

Node* Graph::temporal_max_pool(Node* a) {
  if (a->val.rank() != 3) throw ShapeError("temporal_max_pool expects {B,C,L}");
  return adopt(pool_impl(a, a->val.dim(0), a->val.dim(1), a->val.dim(2), /*over_middle=*/false));
}

Node* Graph::conv1d(Node* a, Node* weight, Node* bias) {
  if (a->val.rank() != 3 || weight->val.rank() != 3) throw ShapeError("conv1d expects {B,Cin,L} and {Cout,Cin,k}");
  const std::size_t batch = a->val.dim(0), cin = a->val.dim(1), len = a->val.dim(2);
  const std::size_t cout = weight->val.dim(0), k = weight->val.dim(2);
  if (weight->val.dim(1) != cin) throw ShapeError("conv1d: channel mismatch");
  if (bias->val.size() != cout) throw ShapeError("conv1d: bias size mismatch");
  const std::size_t pad = (k - 1) / 2;
  auto n = std::make_unique<Conv1dNode>();
  n->inputs = {a, weight, bias};
  n->val = Tensor({batch, cout, len});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < cout; ++o) {
      double* y = n->val.data() + (b * cout + o) * len;
      for (std::size_t l = 0; l < len; ++l) y[l] = bias->val[o];
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* x = a->val.data() + (b * cin + ci) * len;
        const double* w = weight->val.data() + (o * cin + ci) * k;
        for (std::size_t t = 0; t < k; ++t) {
          double wv = w[t];
          if (wv == 0.0) continue;
          for (std::size_t l = 0; l < len; ++l) {
            std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l + t) - static_cast<std::ptrdiff_t>(pad);
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
            y[l] += wv * x[src];
          }
        }
      }
    }
  return adopt(std::move(n));
}

Node* Graph::reshape(Node* a, std::vector<std::size_t> shape) {
  auto n = std::make_unique<ReshapeNode>();
  n->inputs = {a};
  n->val = Tensor(std::move(shape), a->val.values());
  return adopt(std::move(n));
}

Node* Graph::transpose(Node* a) {
  if (a->val.rank() != 2) throw ShapeError("transpose expects a rank-2 input");
  const std::size_t r = a->val.dim(0), c = a->val.dim(1);
  auto n = std::make_unique<TransposeNode>();
  n->inputs = {a};
  n->val = Tensor({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) n->val.at(j, i) = a->val.at(i, j);
  return adopt(std::move(n));
}

Node* Graph::slice_batch(Node* a, std::size_t index) {
  if (a->val.rank() != 3) throw ShapeError("slice_batch expects {B,R,C}");
  if (index >= a->val.dim(0)) throw ShapeError("slice_batch index out of range");
  const std::size_t r = a->val.dim(1), c = a->val.dim(2);
  auto n = std::make_unique<SliceBatchNode>();
  n->inputs = {a};
  n->index = index;
  n->val = Tensor({r, c});
  const double* src = a->val.data() + index * r * c;
  std::copy(src, src + r * c, n->val.data());
  return adopt(std::move(n));
}

Node* Graph::softmax_cross_entropy(Node* logits, std::vector<int> labels) {
  if (logits->val.rank() != 2) throw ShapeError("softmax_cross_entropy expects {B,C} logits");
  const std::size_t b = logits->val.dim(0), c = logits->val.dim(1);
  if (labels.size() != b) throw ShapeError("softmax_cross_entropy: label count mismatch");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= c) throw ValidationError("label index out of range");
  auto n = std::make_unique<SoftmaxXentNode>();
  n->inputs = {logits};
  n->labels = std::move(labels);
  n->softmax.resize(b * c);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double* z = logits->val.data() + i * c;
    double mx = z[0];
    for (std::size_t q = 1; q < c; ++q) mx = std::max(mx, z[q]);
    double denom = 0.0;
    for (std::size_t q = 0; q < c; ++q) denom += std::exp(z[q] - mx);
    double lse = mx + std::log(denom);
    for (std::size_t q = 0; q < c; ++q) n->softmax[i * c + q] = std::exp(z[q] - mx) / denom;
    total += lse - z[n->labels[i]];
  }
  n->val = Tensor::scalar(total / static_cast<double>(b));
  return adopt(std::move(n));
}

Node* Graph::mse(Node* a, Tensor target) {
  require_same_shape(a->val, target, "mse");
  auto n = std::make_unique<MseNode>();
  n->inputs = {a};
  double acc = 0.0;
  for (std::size_t i = 0; i < a->val.size(); ++i) {
    double diff = a->val[i] - target[i];
    acc += diff * diff;
  }
  n->val = Tensor::scalar(acc / static_cast<double>(a->val.size()));
  n->target = std::move(target);
  return adopt(std::move(n));
}

Node* Graph::scale(Node* a, double s) {
  auto n = std::make_unique<ScaleNode>();
  n->inputs = {a};
  n->factor = s;
  n->val = a->val;
  for (auto& x : n->val.values()) x *= s;
  return adopt(std::move(n));
}

Node* Graph::sum(Node* a) {
  auto n = std::make_unique<SumNode>();
  n->inputs = {a};
  double acc = 0.0;
  for (double x : a->val.values()) acc += x;
  n->val = Tensor::scalar(acc);
  return adopt(std::move(n));
}

void Graph::backward(Node* root) {
  if (!root->val.is_scalar()) throw NonScalarRoot("backward root must be scalar, got " + root->val.shape_string());
  for (auto& n : nodes_) {
    n->grad = Tensor(n->val.shape());
  }
  root->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node* n = it->get();
    if (!n->needs_grad) continue;
    n->backward(*this);
  }
  for (auto& [node, p] : param_links_) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += node->grad[i];
  }
}

}  // namespace formcoach::ad
