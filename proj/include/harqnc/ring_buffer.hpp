#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace harqnc {

/// Fixed-capacity FIFO that overwrites its oldest element when full.
/// Index 0 is the most recently pushed element.
template <class T>
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity = 1) : slots_(capacity == 0 ? 1 : capacity) {}

  void push(T value) {
    head_ = (head_ + 1) % slots_.size();
    slots_[head_] = std::move(value);
    if (size_ < slots_.size()) ++size_;
  }

  /// age 0 is the newest element, age size()-1 the oldest retained one.
  const T& recent(std::size_t age) const {
    assert(age < size_);
    return slots_[(head_ + slots_.size() - age) % slots_.size()];
  }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return slots_.size(); }
  bool empty() const { return size_ == 0; }
  void clear() { size_ = 0; }

 private:
  std::vector<T> slots_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

}  // namespace harqnc
