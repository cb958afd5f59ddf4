/*
 * Copyright 2026 The sesgp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "sesgp/eigenexpansion.hpp"

#include <cstdlib>
#include <thread>

namespace sesgp {

int worker_count() {
  if (const char* env = std::getenv("SESGP_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

DesignSpec DesignSpec::make(int dim, double xi, bool unsafe) {
  if (dim < 1) throw DomainError("DesignSpec: dim must be >= 1");
  if (!(xi > 0)) throw DomainError("DesignSpec: xi must be positive");
  if (!unsafe && !(xi * xi > 2.0 / std::exp(1.0))) {
    throw DomainError("DesignSpec: xi^2 must exceed 2/e (pass unsafe to override)");
  }
  return {dim, xi};
}

SparsityPattern SparsityPattern::full(int dim) {
  SparsityPattern p(dim);
  for (int i = 0; i < dim; ++i) p.set(i);
  return p;
}

SparsityPattern SparsityPattern::from_indices(int dim, std::span<const int> indices) {
  SparsityPattern p(dim);
  for (int i : indices) {
    if (i < 0 || i >= dim) throw DomainError("SparsityPattern: index out of range");
    p.set(i);
  }
  return p;
}

SparsityPattern SparsityPattern::from_bits(std::string_view bits) {
  SparsityPattern p(static_cast<int>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      p.set(static_cast<int>(i));
    } else if (bits[i] != '0') {
      throw DomainError("SparsityPattern: bit string may only contain 0 and 1");
    }
  }
  return p;
}

SparsityPattern SparsityPattern::from_hex(std::string_view hex, int dim) {
  SparsityPattern p(dim);
  const int nibbles = static_cast<int>(hex.size());
  for (int n = 0; n < nibbles; ++n) {
    const char ch = hex[static_cast<std::size_t>(nibbles - 1 - n)];
    int v = 0;
    if (ch >= '0' && ch <= '9') {
      v = ch - '0';
    } else if (ch >= 'a' && ch <= 'f') {
      v = ch - 'a' + 10;
    } else if (ch >= 'A' && ch <= 'F') {
      v = ch - 'A' + 10;
    } else {
      throw DomainError("SparsityPattern: invalid hex digit");
    }
    for (int b = 0; b < 4; ++b) {
      if ((v >> b) & 1) {
        const int i = 4 * n + b;
        if (i >= dim) throw DomainError("SparsityPattern: hex value exceeds dimension");
        p.set(i);
      }
    }
  }
  return p;
}

void SparsityPattern::set(int i, bool on) {
  auto ref = bits_.at(static_cast<std::size_t>(i));
  if (ref != on) {
    cardinality_ += on ? 1 : -1;
    ref = on;
  }
}

std::vector<int> SparsityPattern::indices() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(cardinality_));
  for (int i = 0; i < dim(); ++i)
    if (test(i)) out.push_back(i);
  return out;
}

bool SparsityPattern::is_subset_of(const SparsityPattern& other) const {
  if (other.dim() != dim()) return false;
  for (int i = 0; i < dim(); ++i)
    if (test(i) && !other.test(i)) return false;
  return true;
}

std::string SparsityPattern::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  const int nibbles = std::max(1, (dim() + 3) / 4);
  std::string out(static_cast<std::size_t>(nibbles), '0');
  for (int n = 0; n < nibbles; ++n) {
    int v = 0;
    for (int b = 0; b < 4; ++b) {
      const int i = 4 * n + b;
      if (i < dim() && test(i)) v |= 1 << b;
    }
    out[static_cast<std::size_t>(nibbles - 1 - n)] = kDigits[v];
  }
  return out;
}

std::string SparsityPattern::to_bits() const {
  std::string out;
  out.reserve(bits_.size());
  for (bool b : bits_) out.push_back(b ? '1' : '0');
  return out;
}

}  // namespace sesgp
