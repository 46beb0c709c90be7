#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace helios {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty means "no gradient allocated yet"
  bool requires_grad = false;
  bool is_leaf = true;

  std::span<double> grad_buffer();  // allocates zeros on first use
};

}  // namespace detail

/// Dense row-major array of doubles.
///
/// Tensor is a handle: copies share storage, like parameters shared between a
/// model and the tape that records operations on them. Use clone() for an
/// independent copy.
class Tensor {
 public:
  Tensor();  // scalar 0
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value) { return Tensor(std::move(shape), value); }
  /// 2-D tensor from nested rows.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<double> data() { return node_->data; }
  std::span<const double> data() const { return node_->data; }
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;
  double& at(std::initializer_list<std::size_t> index);

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on = true);

  /// Gradient buffer, or nullopt when the tensor does not track gradients or
  /// no reverse pass has reached it.
  std::optional<std::span<const double>> grad() const;
  std::span<double> grad_buffer() { return node_->grad_buffer(); }
  void zero_grad();

  /// Independent deep copy of the values (gradient tracking preserved, grad not).
  Tensor clone() const;
  /// Copy of the values that never tracks gradients.
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }
  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

  static Tensor from_node(std::shared_ptr<detail::TensorNode> node);

 private:
  std::size_t flat_index(std::initializer_list<std::size_t> index) const;
  std::shared_ptr<detail::TensorNode> node_;
};

/// Ordered record of primitive operations for one reverse pass.
///
/// Operations append themselves while a TapeScope for this tape is active and
/// at least one input requires gradients, so entries are topologically
/// ordered by construction. A tape and its tensors belong to one thread.
class Tape {
 public:
  using Backward = std::function<void(std::span<const double> grad_out)>;

  enum class GradMode { reset, accumulate };

  void record(std::vector<std::shared_ptr<detail::TensorNode>> inputs,
              std::shared_ptr<detail::TensorNode> output, Backward backward);

  /// Reverse accumulation from a scalar loss recorded on this tape.
  /// GradMode::reset (the default) zeroes every leaf gradient first;
  /// GradMode::accumulate adds into existing leaf gradients.
  void backward(const Tensor& loss, GradMode mode = GradMode::reset);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::vector<std::shared_ptr<detail::TensorNode>> inputs;
    std::shared_ptr<detail::TensorNode> output;
    Backward backward;
  };
  std::vector<Entry> entries_;
};

/// Makes `tape` the recording target for operations on this thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording on this thread (e.g. for finite-difference probes).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

}  // namespace helios
