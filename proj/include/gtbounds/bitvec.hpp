// Copyright 2026 The gtbounds Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "gtbounds/errors.hpp"

namespace gtbounds {

/// Packed bit vector. Bit i lives in word i/64 at position i%64; the hex
/// encoding packs bits LSB-first into bytes, two lowercase hex digits per
/// byte, trailing pad bits zero.
class BitVec {
 public:
  BitVec() = default;
  explicit BitVec(std::size_t nbits)
      : nbits_(nbits), words_((nbits + 63) / 64, 0) {}

  std::size_t size() const { return nbits_; }

  bool get(std::size_t i) const {
    return (words_[i >> 6] >> (i & 63)) & 1ULL;
  }

  void set(std::size_t i, bool v = true) {
    if (v)
      words_[i >> 6] |= 1ULL << (i & 63);
    else
      words_[i >> 6] &= ~(1ULL << (i & 63));
  }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  /// Invoke fn(index) for every set bit, in ascending index order.
  template <typename Fn>
  void for_each_set(Fn&& fn) const {
    for (std::size_t wi = 0; wi < words_.size(); ++wi) {
      std::uint64_t w = words_[wi];
      while (w != 0) {
        const int b = std::countr_zero(w);
        fn(wi * 64 + static_cast<std::size_t>(b));
        w &= w - 1;
      }
    }
  }

  std::string to_hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out;
    const std::size_t nbytes = (nbits_ + 7) / 8;
    out.reserve(nbytes * 2);
    for (std::size_t bi = 0; bi < nbytes; ++bi) {
      const unsigned byte =
          static_cast<unsigned>((words_[bi >> 3] >> ((bi & 7) * 8)) & 0xffULL);
      out.push_back(digits[byte >> 4]);
      out.push_back(digits[byte & 0xf]);
    }
    return out;
  }

  static BitVec from_hex(const std::string& hex, std::size_t nbits) {
    if (hex.size() != ((nbits + 7) / 8) * 2)
      throw InvalidConfigError("hex string length does not match bit count");
    BitVec v(nbits);
    for (std::size_t bi = 0; bi * 2 < hex.size(); ++bi) {
      const unsigned byte = static_cast<unsigned>(
          std::stoul(hex.substr(bi * 2, 2), nullptr, 16));
      v.words_[bi >> 3] |= static_cast<std::uint64_t>(byte) << ((bi & 7) * 8);
    }
    return v;
  }

  friend bool operator==(const BitVec& a, const BitVec& b) {
    return a.nbits_ == b.nbits_ && a.words_ == b.words_;
  }

 private:
  std::size_t nbits_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace gtbounds
