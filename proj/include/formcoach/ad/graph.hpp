#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "formcoach/tensor.hpp"

namespace formcoach::ad {

// A learnable (or persistent) tensor. Lives in a ParamStore; graphs link to
// it by pointer and flush gradients back after backward().
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

class ParamStore {
 public:
  Param& create(const std::string& name, std::vector<std::size_t> shape, bool trainable = true);
  Param* find(const std::string& name);
  const Param* find(const std::string& name) const;
  std::size_t size() const { return items_.size(); }
  Param& at(std::size_t i) { return *items_[i]; }
  const Param& at(std::size_t i) const { return *items_[i]; }
  void zero_grads();
  std::size_t trainable_element_count() const;

 private:
  std::vector<std::unique_ptr<Param>> items_;
};

class Graph;

// One node of the define-by-run graph. `val` is computed at construction;
// backward() scatters `grad` into the inputs' grads.
struct Node {
  Tensor val;
  Tensor grad;
  std::vector<Node*> inputs;
  bool needs_grad = true;

  virtual ~Node() = default;
  virtual void backward(Graph& g) = 0;
};

enum class Mode { Train, Eval };

// Per-layer batch-norm state. gamma/beta are trainable Params; the running
// statistics are persistent non-trainable Params updated in train mode.
struct BatchNormState {
  Param* gamma = nullptr;
  Param* beta = nullptr;
  Param* running_mean = nullptr;
  Param* running_var = nullptr;
  double momentum = 0.1;
  double eps = 1e-5;
};

BatchNormState make_batch_norm(ParamStore& store, const std::string& name, std::vector<std::size_t> feature_shape);

class Graph {
 public:
  explicit Graph(Mode mode = Mode::Eval, std::uint64_t dropout_seed = 0, int threads = 1);

  Mode mode() const { return mode_; }
  bool training() const { return mode_ == Mode::Train; }
  int threads() const { return threads_; }
  std::mt19937_64& rng() { return rng_; }

  // Leaves.
  Node* input(Tensor value);          // constant, no gradient
  Node* constant(Tensor value) { return input(std::move(value)); }
  Node* param(Param& p);              // gradient flushed to p.grad by backward()

  // Primitives. Shapes follow the batched layout {B, R, C} for feature maps.
  Node* matmul(Node* a, Node* b);     // 2Dx2D, 2Dx3D (shared left), 3Dx2D (shared right)
  Node* add(Node* a, Node* b);        // same shape
  Node* add_bias(Node* a, Node* bias);  // bias broadcast over leading axes (last-axis vector)
  Node* relu(Node* a);
  Node* dropout(Node* a, double p);   // train: inverted-scaling mask; eval: identity
  Node* batch_norm(Node* a, BatchNormState& bn);  // stats over batch per feature position
  Node* concat(Node* a, Node* b);     // last axis
  Node* tile_rows(Node* a, std::size_t rows);     // {B,F} -> {B,rows,F}
  Node* spatial_max_pool(Node* a);    // {B,R,C} -> {B,C}, max over the joint axis
  Node* temporal_max_pool(Node* a);   // {B,C,L} -> {B,C}, max over the coefficient axis
  Node* conv1d(Node* a, Node* weight, Node* bias);  // same padding, stride 1
  Node* reshape(Node* a, std::vector<std::size_t> shape);
  Node* transpose(Node* a);           // 2D
  Node* slice_batch(Node* a, std::size_t index);    // {B,R,C} -> {R,C}
  Node* softmax_cross_entropy(Node* logits, std::vector<int> labels);  // mean over batch
  Node* mse(Node* a, Tensor target);  // mean squared error over all elements
  Node* scale(Node* a, double s);
  Node* sum(Node* a);                 // full reduction to a scalar

  // Registers an externally constructed node (custom ops).
  Node* adopt(std::unique_ptr<Node> node);

  // Reverse accumulation from a scalar root; flushes parameter gradients into
  // their Params (accumulating). Throws NonScalarRoot otherwise.
  void backward(Node* root);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<std::pair<Node*, Param*>> param_links_;
  std::mt19937_64 rng_;
  Mode mode_;
  int threads_;
};

}  // namespace formcoach::ad
