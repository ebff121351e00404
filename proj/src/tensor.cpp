#include "vistrack/tensor.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vistrack {

void contract_violation(const std::string& message) {
  throw std::invalid_argument(message);
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {
std::int64_t numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int e : shape) {
    VT_CHECK(e >= 0, "tensor extent must be nonnegative, got " + std::to_string(e));
    n *= e;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape, bool requires_grad) {
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->data.assign(static_cast<std::size_t>(numel(impl_->shape)), 0.0);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = value;
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  VT_CHECK(numel(t.impl_->shape) == static_cast<std::int64_t>(values.size()),
           "tensor data length " + std::to_string(values.size()) +
               " does not match shape " + shape_string(t.impl_->shape));
  t.impl_->data = std::move(values);
  return t;
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor::Impl& Tensor::impl() {
  VT_CHECK(impl_ != nullptr, "use of undefined tensor");
  return *impl_;
}

const Tensor::Impl& Tensor::impl() const {
  VT_CHECK(impl_ != nullptr, "use of undefined tensor");
  return *impl_;
}

int Tensor::rank() const { return static_cast<int>(impl().shape.size()); }

int Tensor::extent(int axis) const {
  VT_CHECK(axis >= 0 && axis < rank(),
           "axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank()));
  return impl().shape[static_cast<std::size_t>(axis)];
}

const std::vector<int>& Tensor::shape() const { return impl().shape; }

std::int64_t Tensor::size() const { return static_cast<std::int64_t>(impl().data.size()); }

std::span<double> Tensor::data() { return impl().data; }
std::span<const double> Tensor::data() const { return impl().data; }

double Tensor::item() const {
  VT_CHECK(size() == 1, "item() requires a single-element tensor, shape is " +
                            shape_string(shape()));
  return impl().data[0];
}

double Tensor::at(std::initializer_list<int> index) const {
  return const_cast<Tensor*>(this)->at(index);
}

double& Tensor::at(std::initializer_list<int> index) {
  Impl& im = impl();
  VT_CHECK(index.size() == im.shape.size(), "index rank mismatch");
  std::int64_t offset = 0;
  std::size_t axis = 0;
  for (int i : index) {
    VT_CHECK(i >= 0 && i < im.shape[axis], "index out of range on axis " + std::to_string(axis));
    offset = offset * im.shape[axis] + i;
    ++axis;
  }
  return im.data[static_cast<std::size_t>(offset)];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }
void Tensor::set_requires_grad(bool value) { impl().requires_grad = value; }

bool Tensor::has_grad() const { return !impl().grad.empty(); }

std::span<double> Tensor::grad() {
  Impl& im = impl();
  if (im.grad.empty()) im.grad.assign(im.data.size(), 0.0);
  return im.grad;
}

std::span<const double> Tensor::grad() const {
  return const_cast<Tensor*>(this)->grad();
}

void Tensor::zero_grad() {
  Impl& im = impl();
  im.grad.assign(im.data.size(), 0.0);
}

Tensor Tensor::clone() const {
  const Impl& im = impl();
  Tensor t = Tensor::from(im.shape, im.data);
  t.impl_->requires_grad = im.requires_grad;
  return t;
}

bool Tensor::same_storage(const Tensor& other) const { return impl_ == other.impl_; }

bool Tensor::all_finite() const {
  for (double v : impl().data)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {
thread_local std::vector<Tape*> g_tape_stack;
}

Tape::Tape() { g_tape_stack.push_back(this); }

Tape::~Tape() {
  if (!g_tape_stack.empty() && g_tape_stack.back() == this) g_tape_stack.pop_back();
}

Tape* Tape::active() { return g_tape_stack.empty() ? nullptr : g_tape_stack.back(); }

void Tape::record(std::function<void()> backward) { nodes_.push_back(std::move(backward)); }

void Tape::backward(Tensor loss) {
  VT_CHECK(loss.size() == 1, "backward requires a scalar loss, shape is " +
                                 shape_string(loss.shape()));
  loss.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

}  // namespace vistrack
