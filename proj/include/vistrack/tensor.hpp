#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vistrack {

[[noreturn]] void contract_violation(const std::string& message);

// Contract checks throw std::invalid_argument naming the offending
// dimension or value.
#define VT_CHECK(cond, message)                           \
  do {                                                    \
    if (!(cond)) ::vistrack::contract_violation(message); \
  } while (0)

std::string shape_string(const std::vector<int>& shape);

// Dense row-major tensor of doubles. Tensor is a shared handle: copies
// alias the same storage, which is what lets a tape accumulate gradients
// into parameters held elsewhere. Use clone() for an independent copy.
// The gradient buffer is allocated lazily on first access.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, bool requires_grad = false);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  int rank() const;
  int extent(int axis) const;
  const std::vector<int>& shape() const;
  std::int64_t size() const;

  std::span<double> data();
  std::span<const double> data() const;
  double item() const;  // value of a single-element tensor

  double at(std::initializer_list<int> index) const;
  double& at(std::initializer_list<int> index);

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  std::span<double> grad();  // allocates a zero buffer on first use
  std::span<const double> grad() const;
  void zero_grad();

  Tensor clone() const;
  bool same_storage(const Tensor& other) const;
  bool all_finite() const;

 private:
  struct Impl {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until touched
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;

  Impl& impl();
  const Impl& impl() const;
};

// Records backward closures for one evaluation. Constructing a Tape makes
// it the active tape for the current thread (tapes nest as a stack);
// destruction pops it. A tape belongs to the thread that created it;
// independent evaluations on different threads each use their own tape.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backward);
  std::size_t node_count() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and runs recorded nodes in reverse order.
  void backward(Tensor loss);

  static Tape* active();

 private:
  std::vector<std::function<void()>> nodes_;
};

}  // namespace vistrack
