#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "phosc/net/tensor.hpp"

namespace phosc::net {

// Named parameter tensors in registration order. The same layout is used for
// gradients and optimizer moments (see zeros_like).
template <class T>
class ParamStore {
 public:
  std::size_t add(const std::string& name, Shape shape) {
    if (index_.count(name)) throw Error(ErrorCode::kSpecMismatch, "duplicate parameter '" + name + "'");
    index_[name] = tensors_.size();
    names_.push_back(name);
    tensors_.emplace_back(std::move(shape));
    return tensors_.size() - 1;
  }

  bool contains(std::string_view name) const { return index_.find(std::string(name)) != index_.end(); }
  std::size_t index(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw Error(ErrorCode::kSpecMismatch, "no parameter '" + std::string(name) + "'");
    return it->second;
  }

  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor<T>& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor<T>& operator[](std::size_t i) const { return tensors_[i]; }
  Tensor<T>& at(std::string_view name) { return tensors_[index(name)]; }
  const Tensor<T>& at(std::string_view name) const { return tensors_[index(name)]; }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  ParamStore zeros_like() const {
    ParamStore out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], tensors_[i].shape());
    return out;
  }

  void zero() {
    for (auto& t : tensors_) t.fill(T{0});
  }

  // this += scale * other (same layout).
  void add_scaled(const ParamStore& other, T scale) {
    for (std::size_t i = 0; i < size(); ++i) {
      T* dst = tensors_[i].data();
      const T* src = other[i].data();
      for (std::size_t j = 0; j < tensors_[i].size(); ++j) dst[j] += scale * src[j];
    }
  }

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (std::size_t i = 0; i < size(); ++i) {
      out.add(names_[i], tensors_[i].shape());
      out[i] = tensors_[i].template cast<U>();
    }
    return out;
  }

  bool operator==(const ParamStore& other) const {
    return names_ == other.names_ && tensors_ == other.tensors_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace phosc::net
