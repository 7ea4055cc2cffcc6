#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rrm {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Storage behind a Tensor handle. Shared between handles and tape entries.
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::uint64_t id = 0;

  /// Returns the gradient buffer, allocating it (zeroed) on first use.
  std::vector<double>& grad_buffer();
};

/// Dense row-major real tensor. Copies share storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value) { return full({1}, value); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }
  std::uint64_t id() const { return impl_->id; }

  std::span<const double> data() const { return impl_->data; }
  /// Direct write access. Mutating a tensor that is already recorded on the
  /// tape invalidates the saved activations of its consumers.
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;
  double operator[](std::size_t i) const { return impl_->data[i]; }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient values; all zeros if backward never reached this tensor.
  std::vector<double> grad() const;
  void zero_grad() { impl_->grad.clear(); }

  /// Deep copy without gradient or tape history.
  Tensor clone() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_result(Shape shape, std::vector<double> values);

  std::shared_ptr<TensorImpl> impl_;
};

/// Wraps freshly computed values into a tensor, checking they are finite.
Tensor make_result(Shape shape, std::vector<double> values);

/// Ordered record of primitive applications for reverse-mode differentiation.
///
/// Entries are appended in execution order, so every input of an entry was
/// produced by an earlier entry or is a leaf. backward() visits each entry
/// once in reverse order and accumulates into input gradients.
class Tape {
 public:
  struct Entry {
    std::string_view op;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    std::function<void()> backward;
  };

  void record(Entry entry) { entries_.push_back(std::move(entry)); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

  /// Seeds d(root)/d(root) = 1 and propagates to every reachable leaf.
  /// Throws ContractError when root is not a single element.
  void backward(const Tensor& root);

 private:
  std::vector<Entry> entries_;
};

/// Tape used by primitives on the calling thread.
Tape& active_tape();

/// Convenience: active_tape().backward(root) followed by clearing the tape.
void backward(const Tensor& root);

/// Disables recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Multiply-accumulate counter fed by conv, matmul and scan primitives.
struct FlopCounter {
  static std::uint64_t& value();
  static void add(std::uint64_t macs) { value() += macs; }
  static void reset() { value() = 0; }
};

namespace detail {

/// True when an op over these inputs must be recorded.
bool needs_grad(std::initializer_list<const Tensor*> inputs);
bool needs_grad(std::span<const Tensor> inputs);

/// Marks out as differentiable and appends the tape entry.
void record(std::string_view op, std::vector<Tensor> inputs, Tensor& out,
            std::function<void()> backward);

}  // namespace detail

}  // namespace rrm
