#include "rrm/tensor.hpp"

#include <cmath>
#include <sstream>

#include "rrm/error.hpp"

namespace rrm {

namespace {

std::uint64_t next_id() {
  thread_local std::uint64_t counter = 0;
  return ++counter;
}

thread_local bool g_grad_enabled = true;

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::vector<double>& TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive: " + shape_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  impl_ = std::make_shared<TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->id = next_id();
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return impl_->grad;
}

Tensor Tensor::clone() const { return Tensor(shape(), impl_->data); }

Tensor make_result(Shape shape, std::vector<double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite value produced in tensor of shape " + shape_string(shape));
    }
  }
  return Tensor(std::move(shape), std::move(values));
}

void Tape::backward(const Tensor& root) {
  if (!root.defined() || root.numel() != 1) {
    throw ContractError("backward() requires a scalar root");
  }
  if (entries_.empty() && !root.requires_grad()) {
    throw ContractError("backward() on an empty tape");
  }
  root.impl()->grad_buffer()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward();
  }
}

Tape& active_tape() {
  thread_local Tape tape;
  return tape;
}

void backward(const Tensor& root) {
  active_tape().backward(root);
  active_tape().clear();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

std::uint64_t& FlopCounter::value() {
  thread_local std::uint64_t macs = 0;
  return macs;
}

namespace detail {

bool needs_grad(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_enabled) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

bool needs_grad(std::span<const Tensor> inputs) {
  if (!g_grad_enabled) return false;
  for (const Tensor& t : inputs) {
    if (t.defined() && t.requires_grad()) return true;
  }
  return false;
}

void record(std::string_view op, std::vector<Tensor> inputs, Tensor& out,
            std::function<void()> backward) {
  out.set_requires_grad(true);
  Tape::Entry entry;
  entry.op = op;
  entry.inputs.reserve(inputs.size());
  for (const Tensor& t : inputs) entry.inputs.push_back(t.impl());
  entry.output = out.impl();
  entry.backward = std::move(backward);
  active_tape().record(std::move(entry));
}

}  // namespace detail

}  // namespace rrm
