#pragma once

// Reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Graph records every op applied during a forward pass. Values are dense
// column-major matrices; vectors are single columns. Parameters live in a
// ParamStore and enter a graph as leaves, so the same store can be driven by
// many graphs (one per training example, possibly on different threads).

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "user/common/error.hpp"

namespace user::ad {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Validity flags along one axis; an empty mask means "all valid".
using Mask = std::vector<bool>;

inline bool mask_valid(const Mask& m, Eigen::Index i) { return m.empty() || m[static_cast<std::size_t>(i)]; }

inline std::string shape_str(Eigen::Index r, Eigen::Index c) { return std::to_string(r) + "x" + std::to_string(c); }

template <typename S>
std::string shape_str(const Matrix<S>& m) {
  return shape_str(m.rows(), m.cols());
}

struct ParamId {
  std::size_t value = static_cast<std::size_t>(-1);
  bool valid() const { return value != static_cast<std::size_t>(-1); }
  friend bool operator==(ParamId, ParamId) = default;
};

template <typename S>
struct Parameter {
  std::string name;
  Matrix<S> value;
  Matrix<S> grad;  // empty until a gradient has been written
  Matrix<S> m;     // Adam first moment
  Matrix<S> v;     // Adam second moment
};

/// Named trainable arrays in registration order, plus optimizer state.
template <typename S>
class ParamStore {
 public:
  ParamId add(std::string name, Matrix<S> init) {
    if (index_.count(name)) throw Error("duplicate parameter name: " + name);
    ParamId id{params_.size()};
    index_.emplace(name, id.value);
    Parameter<S> p;
    p.name = std::move(name);
    p.m = Matrix<S>::Zero(init.rows(), init.cols());
    p.v = Matrix<S>::Zero(init.rows(), init.cols());
    p.value = std::move(init);
    params_.push_back(std::move(p));
    return id;
  }

  Parameter<S>& operator[](ParamId id) { return params_.at(id.value); }
  const Parameter<S>& operator[](ParamId id) const { return params_.at(id.value); }

  ParamId find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? ParamId{} : ParamId{it->second};
  }
  Parameter<S>& at(std::string_view name) {
    auto id = find(name);
    if (!id.valid()) throw Error("unknown parameter: " + std::string(name));
    return params_[id.value];
  }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Allocates (if needed) and zeroes every gradient.
  void zero_grad() {
    for (auto& p : params_) p.grad = Matrix<S>::Zero(p.value.rows(), p.value.cols());
  }

  /// Clears Adam moments and the step counter.
  void reset_optimizer() {
    step = 0;
    for (auto& p : params_) {
      p.m.setZero();
      p.v.setZero();
    }
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  long step = 0;

 private:
  std::vector<Parameter<S>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Per-parameter gradient buffers indexed like a ParamStore.
template <typename S>
using GradientBuffer = std::vector<Matrix<S>>;

template <typename S>
GradientBuffer<S> make_gradient_buffer(const ParamStore<S>& store) {
  GradientBuffer<S> buf;
  buf.reserve(store.size());
  for (const auto& p : store) buf.push_back(Matrix<S>::Zero(p.value.rows(), p.value.cols()));
  return buf;
}

template <typename S>
class Graph;

/// Handle to a node of a Graph.
template <typename S>
class Var {
 public:
  Var() = default;
  Var(Graph<S>* g, int id) : graph_(g), id_(id) {}

  bool defined() const { return graph_ != nullptr; }
  Graph<S>& graph() const { return *graph_; }
  int id() const { return id_; }
  const Matrix<S>& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  S scalar() const { return value()(0, 0); }

 private:
  Graph<S>* graph_ = nullptr;
  int id_ = -1;
};

template <typename S>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Matrix<S>& grad_out)>;

  /// `store` may be null for graphs over constants only. With `track_grad`
  /// false no backward closures are recorded (inference mode).
  explicit Graph(ParamStore<S>* store = nullptr, bool track_grad = true) : store_(store), track_(track_grad) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool tracking() const { return track_; }
  bool checked() const { return checked_; }
  void set_checked(bool on) { checked_ = on; }
  ParamStore<S>* store() const { return store_; }

  Var<S> constant(Matrix<S> value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n), "constant");
  }

  /// Leaf for a stored parameter. Repeated calls return the same node, so
  /// gradients from every use accumulate in one place.
  Var<S> param(ParamId id) {
    if (!store_) throw Error("graph has no parameter store");
    auto it = param_nodes_.find(id.value);
    if (it != param_nodes_.end()) return Var<S>(this, it->second);
    Node n;
    n.ref = &(*store_)[id].value;
    n.param = id;
    n.requires_grad = track_;
    auto v = push(std::move(n), "param");
    param_nodes_.emplace(id.value, v.id());
    return v;
  }

  /// Records an op result. `fn` receives the output gradient and must route
  /// it to parents via accumulate().
  Var<S> record(Matrix<S> value, std::initializer_list<Var<S>> parents, BackwardFn fn, std::string_view op) {
    Node n;
    n.value = std::move(value);
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[static_cast<std::size_t>(p.id())].requires_grad;
    n.requires_grad = track_ && needs;
    if (n.requires_grad) n.backward = std::move(fn);
    return push(std::move(n), op);
  }

  Var<S> record(Matrix<S> value, const std::vector<Var<S>>& parents, BackwardFn fn, std::string_view op) {
    Node n;
    n.value = std::move(value);
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[static_cast<std::size_t>(p.id())].requires_grad;
    n.requires_grad = track_ && needs;
    if (n.requires_grad) n.backward = std::move(fn);
    return push(std::move(n), op);
  }

  const Matrix<S>& value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.ref ? *n.ref : n.value;
  }

  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  /// Adds `g` into the gradient of node `id` (no-op for constants).
  template <typename Expr>
  void accumulate(int id, const Expr& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Gradient storage of node `id`, zero-allocated on first use; null for
  /// nodes that do not require a gradient.
  Matrix<S>* grad_buffer(int id, Eigen::Index rows, Eigen::Index cols) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return nullptr;
    if (n.grad.size() == 0) n.grad = Matrix<S>::Zero(rows, cols);
    return &n.grad;
  }

  /// Gradient currently held by a node (empty if none reached it).
  const Matrix<S>& grad(Var<S> v) const { return nodes_[static_cast<std::size_t>(v.id())].grad; }

  /// Back-propagates from a scalar node into parameter gradients held by the
  /// store. Repeated calls accumulate.
  void backward(Var<S> loss) { backward_impl(loss, nullptr); }

  /// Same, but writes parameter gradients into `sink` instead of the store.
  void backward(Var<S> loss, GradientBuffer<S>& sink) { backward_impl(loss, &sink); }

  std::size_t size() const { return nodes_.size(); }

  /// Count of degenerate events (zero-norm cosines, all-masked softmaxes)
  /// observed while building this graph.
  std::size_t flags() const { return flags_; }
  void raise_flag() { ++flags_; }

 private:
  struct Node {
    Matrix<S> value;
    const Matrix<S>* ref = nullptr;
    Matrix<S> grad;
    BackwardFn backward;
    ParamId param;
    bool requires_grad = false;
  };

  Var<S> push(Node n, std::string_view op) {
    if (checked_) {
      const Matrix<S>& v = n.ref ? *n.ref : n.value;
      if (!v.allFinite()) throw NumericError("non-finite value produced by " + std::string(op));
    }
    nodes_.push_back(std::move(n));
    return Var<S>(this, static_cast<int>(nodes_.size() - 1));
  }

  void backward_impl(Var<S> loss, GradientBuffer<S>* sink) {
    if (loss.rows() != 1 || loss.cols() != 1)
      throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.rows(), loss.cols()));
    if (!track_) throw Error("backward on a graph built without gradient tracking");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    accumulate(loss.id(), Matrix<S>::Ones(1, 1));
    for (int i = loss.id(); i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.param.valid()) {
        Matrix<S>& dst = sink ? (*sink)[n.param.value] : (*store_)[n.param].grad;
        if (dst.size() == 0) {
          dst = n.grad;
        } else {
          dst += n.grad;
        }
      }
    }
  }

  ParamStore<S>* store_;
  bool track_;
  bool checked_ = true;
  std::size_t flags_ = 0;
  std::vector<Node> nodes_;
  std::unordered_map<std::size_t, int> param_nodes_;
};

template <typename S>
const Matrix<S>& Var<S>::value() const {
  return graph_->value(id_);
}

}  // namespace user::ad
