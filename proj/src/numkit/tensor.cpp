#include "scapv/numkit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "scapv/numkit/errors.hpp"

namespace scapv::numkit {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

std::vector<double>& Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

void check_shape(const Shape& shape, std::size_t n) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != n) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " + std::to_string(n) +
                         " values");
  }
}

// Topological order of the differentiable subgraph rooted at `root`.
std::vector<detail::Node*> topo_order(detail::Node* root) {
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape, values.size());
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::data() const {
  shape();
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  shape();
  if (!node_->is_leaf()) throw ContractError("in-place write to a non-leaf tensor");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  const auto& s = shape();
  if (s.size() != 2 || row >= s[0] || col >= s[1]) {
    throw DimensionError("at(" + std::to_string(row) + ", " + std::to_string(col) + ") on " +
                         shape_str(s));
  }
  return node_->value[row * s[1] + col];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  shape();
  if (!node_->is_leaf()) throw ContractError("requires_grad can only be toggled on leaves");
  node_->requires_grad = on;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient buffer");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  shape();
  return node_->ensure_grad();
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_str(shape()));
  }
  if (!node_->requires_grad) throw ContractError("backward() on a tensor outside any graph");
  auto order = topo_order(node_.get());
  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
  // Interior gradients are scratch; only leaves keep theirs.
  for (auto* n : order) {
    if (!n->is_leaf()) n->grad.clear();
  }
}

Tensor Tensor::detach() const {
  return Tensor(Shape(shape()), std::vector<double>(node_->value), false);
}

Tensor Tensor::clone() const {
  Tensor t = detach();
  t.node_->requires_grad = node_->requires_grad && node_->is_leaf();
  return t;
}

const char* Tensor::op_name() const { return node_ ? node_->op : "undefined"; }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor& ParameterSet::add(std::string name, Tensor value) {
  if (find(name)) throw ContractError("duplicate parameter name '" + name + "'");
  params_.push_back({std::move(name), std::move(value)});
  return params_.back().value;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  const Tensor* t = find(name);
  if (!t) throw ContractError("no parameter named '" + name + "'");
  return *t;
}

Tensor* ParameterSet::find(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return &p.value;
  }
  return nullptr;
}

const Tensor* ParameterSet::find(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->find(name);
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.name);
  return out;
}

ParameterSet ParameterSet::subset(const std::string& prefix) const {
  ParameterSet out;
  for (const auto& p : params_) {
    if (p.name.starts_with(prefix)) out.params_.push_back(p);
  }
  return out;
}

void ParameterSet::merge(const ParameterSet& other) {
  for (const auto& p : other) add(p.name, p.value);
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

void ParameterSet::set_requires_grad(bool on) {
  for (auto& p : params_) p.value.set_requires_grad(on);
}

std::vector<std::string> unreachable_parameters(const Tensor& loss, const ParameterSet& params) {
  std::unordered_set<const detail::Node*> reached;
  if (loss.requires_grad()) {
    for (auto* n : topo_order(loss.node().get())) reached.insert(n);
  }
  std::vector<std::string> out;
  for (const auto& p : params) {
    if (!reached.count(p.value.id())) out.push_back(p.name);
  }
  return out;
}

}  // namespace scapv::numkit
