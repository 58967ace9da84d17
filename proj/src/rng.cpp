// Copyright 2026 The cpsize Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cpsize/rng.hpp"

#include <bit>

namespace cpsize {

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = splitmix64(base ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t step : path) {
    state = splitmix64(state ^ splitmix64(step + 0x3c6ef372fe94f82bULL));
  }
  return state;
}

std::uint64_t seed_key(double value) {
  // -0.0 and 0.0 must map to the same stream.
  if (value == 0.0) value = 0.0;
  return std::bit_cast<std::uint64_t>(value);
}

}  // namespace cpsize
