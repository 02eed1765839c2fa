#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <memory>
#include <new>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "stbeamsnet/errors.hpp"

namespace stbn::nn {

/// 64-byte aligned allocation for tensor buffers. Keeping every buffer at the
/// same alignment keeps Eigen's vectorized kernels on one code path, so
/// repeated runs produce bit-identical results regardless of heap layout.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlign = 64;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    const std::size_t bytes = (n * sizeof(T) + kAlign - 1) / kAlign * kAlign;
    void* p = std::aligned_alloc(kAlign, bytes);
    if (p == nullptr) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) { std::free(p); }

  // resize() default-initializes (leaves trivial types uninitialized); op
  // outputs are fully overwritten, so the usual zero-fill would be pure
  // memory-bandwidth waste on the training hot path
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    if constexpr (sizeof...(Args) == 0) {
      ::new (static_cast<void*>(p)) U;
    } else {
      ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
  }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

template <typename T>
using AlignedBuffer = std::vector<T, AlignedAllocator<T>>;

inline std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

/// Dense n-dimensional array, row-major. Copies are shallow views of one
/// shared storage block (values, gradient, requires_grad), which is what lets
/// a recorded computation accumulate gradients into tensors the caller still
/// holds. Only the shape is per-view, so reshaping is free.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, bool requires_grad = false)
      : shape_(std::move(shape)), storage_(std::make_shared<Storage>()) {
    storage_->values.assign(count_(shape_), T(0));
    if (requires_grad) set_requires_grad(true);
  }

  static Tensor from(std::vector<std::size_t> shape, std::vector<T> values) {
    Tensor t;
    t.shape_ = std::move(shape);
    if (values.size() != count_(t.shape_)) {
      throw ShapeError("tensor init: " + std::to_string(values.size()) +
                       " values for shape " + shape_str(t.shape_));
    }
    t.storage_ = std::make_shared<Storage>();
    t.storage_->values.assign(values.begin(), values.end());
    return t;
  }

  static Tensor scalar(T v) { return from({1}, {v}); }

  /// Buffer left uninitialized; for op outputs that are fully overwritten.
  static Tensor uninitialized(std::vector<std::size_t> shape) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.storage_ = std::make_shared<Storage>();
    t.storage_->values.resize(count_(t.shape_));
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const { return storage_ ? storage_->values.size() : 0; }

  /// Rows/cols of a 2-d tensor (a 1-d tensor reads as a single row).
  std::size_t rows() const { return shape_.size() >= 2 ? shape_[0] : 1; }
  std::size_t cols() const {
    return shape_.empty() ? 0 : shape_[shape_.size() >= 2 ? 1 : 0];
  }

  T* data() { return storage_->values.data(); }
  const T* data() const { return storage_->values.data(); }
  T& operator[](std::size_t i) { return storage_->values[i]; }
  const T& operator[](std::size_t i) const { return storage_->values[i]; }
  T& at(std::size_t r, std::size_t c) { return storage_->values[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return storage_->values[r * cols() + c]; }

  bool defined() const { return static_cast<bool>(storage_); }
  bool requires_grad() const { return storage_->requires_grad; }
  void set_requires_grad(bool on) {
    storage_->requires_grad = on;
    if (on) ensure_grad();
  }

  bool has_grad() const { return storage_ && !storage_->grad.empty(); }
  T* grad() { return has_grad() ? storage_->grad.data() : nullptr; }
  const T* grad() const { return has_grad() ? storage_->grad.data() : nullptr; }

  void ensure_grad() {
    if (storage_->grad.empty()) storage_->grad.assign(numel(), T(0));
  }

  /// Gradient buffer without the zero fill; only for tape-tracked outputs,
  /// whose gradients are cleared at the start of every backward pass.
  void ensure_grad_uninit() {
    if (storage_->grad.empty()) storage_->grad.resize(numel());
  }

  void zero_grad() {
    if (storage_) std::fill(storage_->grad.begin(), storage_->grad.end(), T(0));
  }

  /// View with a new shape over the same storage. Gradients flow through the
  /// shared buffers, so no tape node is needed.
  Tensor reshaped(std::vector<std::size_t> new_shape) const {
    if (count_(new_shape) != numel()) {
      throw ShapeError("reshape: cannot view " + shape_str(shape_) + " as " +
                       shape_str(new_shape));
    }
    Tensor t(*this);
    t.shape_ = std::move(new_shape);
    return t;
  }

  /// Deep copy of the values (fresh storage, no gradient, requires_grad off).
  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.storage_ = std::make_shared<Storage>();
    t.storage_->values = storage_->values;
    return t;
  }

  /// True when both tensors alias the same storage.
  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

 private:
  struct Storage {
    AlignedBuffer<T> values;
    AlignedBuffer<T> grad;  // empty until ensure_grad()
    bool requires_grad = false;
  };

  static std::size_t count_(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<std::size_t>());
  }

  std::vector<std::size_t> shape_;
  std::shared_ptr<Storage> storage_;
};

/// Record of executed primitive ops. Each op run under a recording tape
/// appends one backward closure; backward() replays them in exact reverse
/// execution order. Gradients of op outputs are reset on every backward pass,
/// while leaf tensors (parameters, inputs) accumulate additively across
/// passes.
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return steps_.size(); }

  /// Registers an op output: allocates its gradient buffer and marks it for
  /// zeroing at the start of every backward pass.
  void track_output(Tensor<T>& t) {
    t.ensure_grad_uninit();
    outputs_.push_back(t);
  }

  void record(std::function<void()> backward_step) {
    steps_.push_back(std::move(backward_step));
  }

  void backward(Tensor<T>& loss) {
    if (loss.numel() != 1) {
      throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                  shape_str(loss.shape()));
    }
    if (!recording_ || !loss.has_grad()) {
      throw std::invalid_argument("backward: loss was not produced under this recording tape");
    }
    for (auto& out : outputs_) out.zero_grad();
    loss.grad()[0] = T(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> steps_;
  std::vector<Tensor<T>> outputs_;
  bool recording_;
};

}  // namespace stbn::nn
