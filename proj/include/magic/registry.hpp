// Modality registry: fixed, ordered list of modality names. Layer assignment
// and on-disk ordering both key off the registry index.
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace magic {

struct ModalityId {
  std::string name;
  int index = -1;
};

class ModalityRegistry {
 public:
  ModalityRegistry() = default;

  explicit ModalityRegistry(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw std::invalid_argument("modality registry must not be empty");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].empty()) throw std::invalid_argument("modality name must not be empty");
      for (std::size_t j = i + 1; j < names_.size(); ++j) {
        if (names_[i] == names_[j]) {
          throw std::invalid_argument("duplicate modality name: " + names_[i]);
        }
      }
    }
  }

  // default four-stream registry
  static const ModalityRegistry& rdel() {
    static const ModalityRegistry r({"rgb", "depth", "event", "lidar"});
    return r;
  }

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int i) const { return names_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::string>& names() const { return names_; }

  int index_of(const std::string& n) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == n) return static_cast<int>(i);
    }
    return -1;
  }

  ModalityId id(int i) const { return ModalityId{name(i), i}; }

  bool operator==(const ModalityRegistry& o) const { return names_ == o.names_; }
  bool operator!=(const ModalityRegistry& o) const { return !(*this == o); }

  std::uint32_t full_mask() const { return (1u << names_.size()) - 1u; }

  // Display letters for subset labels: uppercase initials when unique,
  // otherwise full names.
  std::string subset_label(std::uint32_t mask) const {
    std::string out;
    bool initials = initials_unique();
    for (int i = 0; i < size(); ++i) {
      if (!(mask & (1u << i))) continue;
      if (!out.empty()) out += '+';
      if (initials) {
        out += static_cast<char>(std::toupper(static_cast<unsigned char>(names_[i][0])));
      } else {
        out += names_[i];
      }
    }
    return out;
  }

  // Accepts "R+D", "rgb+depth" or a mix; throws on unknown tokens or an
  // empty subset.
  std::uint32_t parse_subset(const std::string& s) const {
    std::uint32_t mask = 0;
    std::string token;
    auto flush = [&]() {
      if (token.empty()) return;
      int idx = index_of_token(token);
      if (idx < 0) throw std::invalid_argument("unknown modality token: " + token);
      mask |= 1u << idx;
      token.clear();
    };
    for (char c : s) {
      if (c == '+') {
        flush();
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        token += c;
      }
    }
    flush();
    if (mask == 0) throw std::invalid_argument("empty modality subset: '" + s + "'");
    return mask;
  }

 private:
  bool initials_unique() const {
    for (int i = 0; i < size(); ++i) {
      for (int j = i + 1; j < size(); ++j) {
        if (std::tolower(static_cast<unsigned char>(names_[i][0])) ==
            std::tolower(static_cast<unsigned char>(names_[j][0]))) {
          return false;
        }
      }
    }
    return true;
  }

  int index_of_token(const std::string& token) const {
    std::string lower;
    for (char c : token) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    int idx = index_of(lower);
    if (idx >= 0) return idx;
    if (lower.size() == 1 && initials_unique()) {
      for (int i = 0; i < size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(names_[i][0])) == lower[0]) return i;
      }
    }
    return -1;
  }

  std::vector<std::string> names_;
};

inline int popcount_mask(std::uint32_t m) {
  int c = 0;
  while (m) {
    c += static_cast<int>(m & 1u);
    m >>= 1;
  }
  return c;
}

}  // namespace magic
