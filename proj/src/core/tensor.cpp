#include "helios/core/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "helios/core/error.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace helios {

namespace {

// Training allocates and frees many multi-megabyte buffers per step. glibc
// serves those with fresh mmap regions by default, so every step pays the
// page faults again; keeping them on the heap lets freed blocks be reused.
[[maybe_unused]] const bool kAllocatorTuned = [] {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 512 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  return true;
}();

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

std::span<double> TensorNode::grad_buffer() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

}  // namespace detail

Tensor::Tensor() : Tensor(Shape{}, 0.0) {}

Tensor::Tensor(Shape shape, double fill) : node_(std::make_shared<detail::TensorNode>()) {
  node_->data.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : node_(std::make_shared<detail::TensorNode>()) {
  if (values.size() != shape_numel(shape)) {
    fail(ErrorCode::dimension, "tensor of shape " + shape_string(shape) + " needs " +
                                   std::to_string(shape_numel(shape)) + " values, got " +
                                   std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, value); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(ErrorCode::dimension, "ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(values));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.data()[i * n + i] = 1.0;
  return t;
}

double Tensor::item() const {
  if (numel() != 1) fail(ErrorCode::dimension, "item() on tensor of shape " + shape_string(shape()));
  return node_->data[0];
}

std::size_t Tensor::flat_index(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) fail(ErrorCode::dimension, "index rank mismatch");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= node_->shape[axis]) fail(ErrorCode::dimension, "index out of range");
    flat = flat * node_->shape[axis] + i;
    ++axis;
  }
  return flat;
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return node_->data[flat_index(index)];
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
  return node_->data[flat_index(index)];
}

Tensor& Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (!on) node_->grad.clear();
  return *this;
}

std::optional<std::span<const double>> Tensor::grad() const {
  if (!node_->requires_grad || node_->grad.size() != node_->data.size()) return std::nullopt;
  return std::span<const double>(node_->grad);
}

void Tensor::zero_grad() {
  if (node_->requires_grad) node_->grad.assign(node_->data.size(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor t(node_->shape, node_->data);
  t.node_->requires_grad = node_->requires_grad;
  return t;
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->data); }

Tensor Tensor::from_node(std::shared_ptr<detail::TensorNode> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

// ---------------------------------------------------------------------------

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

void Tape::record(std::vector<std::shared_ptr<detail::TensorNode>> inputs,
                  std::shared_ptr<detail::TensorNode> output, Backward backward) {
  output->is_leaf = false;
  output->requires_grad = true;
  entries_.push_back({std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss, GradMode mode) {
  if (loss.numel() != 1 || loss.rank() != 0) {
    fail(ErrorCode::dimension, "backward needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  const auto& loss_node = loss.node();
  auto last = std::find_if(entries_.rbegin(), entries_.rend(),
                           [&](const Entry& e) { return e.output == loss_node; });
  if (last == entries_.rend()) fail(ErrorCode::tape, "loss was not produced on this tape");

  std::unordered_set<const detail::TensorNode*> leaves;
  for (auto& e : entries_) {
    e.output->grad.clear();
    for (auto& in : e.inputs) {
      if (in->is_leaf && in->requires_grad && leaves.insert(in.get()).second) {
        if (mode == GradMode::reset) {
          in->grad.assign(in->data.size(), 0.0);
        } else {
          in->grad_buffer();
        }
      }
    }
  }

  loss_node->grad.assign(1, 1.0);
  for (auto it = last; it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward(it->output->grad);
  }
}

}  // namespace helios
