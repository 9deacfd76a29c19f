#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "d2dtoken/model.hpp"

namespace d2dtoken {

// Dense table over the (type, tokens) grid in the model's enumeration order.
template <typename T>
class StateTable {
 public:
  StateTable() = default;
  StateTable(int num_types, int token_cap, T fill = T{})
      : num_types_(num_types),
        token_cap_(token_cap),
        data_(static_cast<std::size_t>(num_types) * static_cast<std::size_t>(token_cap + 1), fill) {}
  explicit StateTable(const MdpModel& m, T fill = T{}) : StateTable(m.num_types(), m.token_cap, fill) {}

  int num_types() const { return num_types_; }
  int token_cap() const { return token_cap_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int type, int tokens) { return data_[offset(type, tokens)]; }
  const T& operator()(int type, int tokens) const { return data_[offset(type, tokens)]; }
  T& operator[](const State& s) { return (*this)(s.type, s.tokens); }
  const T& operator[](const State& s) const { return (*this)(s.type, s.tokens); }

  T& flat(std::size_t i) { return data_[i]; }
  const T& flat(std::size_t i) const { return data_[i]; }
  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }

  bool same_shape(const MdpModel& m) const { return num_types_ == m.num_types() && token_cap_ == m.token_cap; }

  friend bool operator==(const StateTable&, const StateTable&) = default;

 private:
  std::size_t offset(int type, int tokens) const {
    return static_cast<std::size_t>(type) * static_cast<std::size_t>(token_cap_ + 1) +
           static_cast<std::size_t>(tokens);
  }

  int num_types_ = 0;
  int token_cap_ = 0;
  std::vector<T> data_;
};

using ValueFunction = StateTable<double>;
using Policy = StateTable<Action>;

template <typename T>
void require_shape(const MdpModel& m, const StateTable<T>& t, const char* what) {
  if (!t.same_shape(m)) {
    throw std::invalid_argument(std::string(what) + " does not match the model's state space");
  }
}

inline bool respects_forced(const MdpModel& m, const Policy& pi) {
  for (const auto& s : enumerate_states(m)) {
    if (is_forced(m, s) && pi[s] != forced_action(m, s)) return false;
  }
  return true;
}

// Count of states on which two policies agree.
inline std::size_t agreement(const Policy& a, const Policy& b) {
  if (a.size() != b.size()) throw std::invalid_argument("agreement: policy shapes differ");
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a.flat(i) == b.flat(i) ? 1 : 0;
  return n;
}

}  // namespace d2dtoken
