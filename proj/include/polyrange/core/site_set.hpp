#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

#include "polyrange/core/lattice.hpp"

namespace polyrange {

// Open-addressing set of packed keys. Key 0 marks an empty slot; packed
// sites are never 0 because every biased field is positive.
class PackedKeySet {
 public:
  explicit PackedKeySet(std::size_t expected = 64) { rehash(capacity_for(expected)); }

  bool insert(std::uint64_t key) {
    if ((size_ + 1) * 2 > slots_.size()) rehash(slots_.size() * 2);
    std::size_t i = slot_of(key);
    while (slots_[i] != 0) {
      if (slots_[i] == key) return false;
      i = (i + 1) & mask_;
    }
    slots_[i] = key;
    used_.push_back(static_cast<std::uint32_t>(i));
    ++size_;
    return true;
  }

  bool contains(std::uint64_t key) const {
    std::size_t i = slot_of(key);
    while (slots_[i] != 0) {
      if (slots_[i] == key) return true;
      i = (i + 1) & mask_;
    }
    return false;
  }

  // Clearing touches only occupied slots, so reuse across walks stays cheap.
  void clear() {
    for (std::uint32_t i : used_) slots_[i] = 0;
    used_.clear();
    size_ = 0;
  }

  std::size_t size() const { return size_; }

  template <class F>
  void for_each(F&& f) const {
    for (std::uint32_t i : used_) f(slots_[i]);
  }

 private:
  static std::size_t capacity_for(std::size_t n) {
    std::size_t c = 16;
    while (c < 2 * n + 2) c <<= 1;
    return c;
  }
  std::size_t slot_of(std::uint64_t key) const {
    return static_cast<std::size_t>((key * 0x9E3779B97F4A7C15ULL) >> shift_);
  }
  void rehash(std::size_t cap) {
    std::vector<std::uint64_t> old;
    old.reserve(size_);
    for (std::uint32_t i : used_) old.push_back(slots_[i]);
    slots_.assign(cap, 0);
    mask_ = cap - 1;
    shift_ = 64;
    for (std::size_t c = cap; c > 1; c >>= 1) --shift_;
    used_.clear();
    size_ = 0;
    for (std::uint64_t k : old) {
      std::size_t i = slot_of(k);
      while (slots_[i] != 0) i = (i + 1) & mask_;
      slots_[i] = k;
      used_.push_back(static_cast<std::uint32_t>(i));
      ++size_;
    }
  }

  std::vector<std::uint64_t> slots_;
  std::vector<std::uint32_t> used_;
  std::size_t size_ = 0;
  std::size_t mask_ = 0;
  int shift_ = 64;
};

// Set of lattice sites. Packed keys for d <= 3, a node-based set otherwise.
class SiteSet {
 public:
  explicit SiteSet(int d = 2, std::size_t expected = 64) : d_(d), packed_(d <= kMaxPackedDim ? expected : 1) {}

  int dim() const { return d_; }

  bool insert(const int* x) {
    if (d_ <= kMaxPackedDim) return packed_.insert(pack_site(x, d_));
    return generic_.insert(Site(x, x + d_)).second;
  }
  bool insert(const Site& x) { return insert(x.data()); }

  bool contains(const int* x) const {
    if (d_ <= kMaxPackedDim) return packed_.contains(pack_site(x, d_));
    return generic_.count(Site(x, x + d_)) != 0;
  }
  bool contains(const Site& x) const { return contains(x.data()); }

  std::size_t size() const { return d_ <= kMaxPackedDim ? packed_.size() : generic_.size(); }

  void clear() {
    packed_.clear();
    generic_.clear();
  }

  // Sites in first-insertion order for d <= 3, unspecified order otherwise.
  std::vector<Site> sites() const {
    std::vector<Site> out;
    out.reserve(size());
    if (d_ <= kMaxPackedDim) {
      packed_.for_each([&](std::uint64_t k) { out.push_back(unpack_site(k, d_)); });
    } else {
      out.assign(generic_.begin(), generic_.end());
    }
    return out;
  }

 private:
  int d_;
  PackedKeySet packed_;
  std::unordered_set<Site, SiteHash> generic_;
};

}  // namespace polyrange
