#pragma once

#include <concepts>
#include <memory>
#include <type_traits>
#include <utility>

namespace morphnas {

// Owning pointer with value semantics: copying a Box deep-copies the pointee.
// Lets recursive variants (a tree node holding its own children) stay regular types.
template <class T>
class Box {
 public:
  // Constrained so that copying a Box never needs T to be complete.
  template <class U>
    requires std::same_as<std::remove_cvref_t<U>, T>
  Box(U&& value) : ptr_(std::make_unique<T>(std::forward<U>(value))) {}  // NOLINT(google-explicit-constructor)
  Box(const Box& other) : ptr_(std::make_unique<T>(*other.ptr_)) {}
  Box(Box&&) noexcept = default;
  Box& operator=(const Box& other) {
    if (this != &other) ptr_ = std::make_unique<T>(*other.ptr_);
    return *this;
  }
  Box& operator=(Box&&) noexcept = default;
  ~Box() = default;

  T& operator*() { return *ptr_; }
  const T& operator*() const { return *ptr_; }
  T* operator->() { return ptr_.get(); }
  const T* operator->() const { return ptr_.get(); }

 private:
  std::unique_ptr<T> ptr_;
};

}  // namespace morphnas
