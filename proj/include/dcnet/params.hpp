#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcnet/tensor.hpp"

namespace dcnet {

/// Role of a learnable tensor; only `weight` entries enter the l2 penalty.
enum class ParamKind { weight, bias, slope };

inline const char* to_string(ParamKind k) {
  switch (k) {
    case ParamKind::weight: return "weight";
    case ParamKind::bias: return "bias";
    case ParamKind::slope: return "slope";
  }
  return "?";
}

/// Named, insertion-ordered collection of learnable tensors.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    ParamKind kind;
    BasicTensor<T> value;
  };

  BasicTensor<T>& add(const std::string& name, ParamKind kind, BasicTensor<T> value) {
    if (index_.count(name) != 0) throw ConfigError("parameter registered twice: " + name);
    value.set_requires_grad(true);
    index_.emplace(name, entries_.size());
    entries_.push_back(Entry{name, kind, std::move(value)});
    return entries_.back().value;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const BasicTensor<T>& get(const std::string& name) const { return entries_.at(lookup(name)).value; }
  BasicTensor<T>& get(const std::string& name) { return entries_.at(lookup(name)).value; }
  const Entry& entry(const std::string& name) const { return entries_.at(lookup(name)); }

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.value.zero_grad();
  }

  /// Deep copy; the copy shares no storage with this store.
  ParamStore clone() const {
    ParamStore out;
    for (const auto& e : entries_) out.add(e.name, e.kind, e.value.clone());
    return out;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace dcnet
