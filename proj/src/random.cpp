/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================
*/

#include "sdews/random.hpp"

namespace sdews {

namespace {

std::uint64_t join(std::uint32_t hi, std::uint32_t lo) {
  return (std::uint64_t{hi} << 32) | lo;
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream) {
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed),
                            static_cast<std::uint32_t>(seed >> 32)};
  const auto lo = static_cast<std::uint32_t>(stream);
  const auto hi = static_cast<std::uint32_t>(stream >> 32);
  const auto a = Philox4x32::apply({lo, hi, 0u, 0x5344u}, key);
  const auto b = Philox4x32::apply({lo, hi, 1u, 0x5344u}, key);
  s_ = {join(a[0], a[1]), join(a[2], a[3]), join(b[0], b[1]), join(b[2], b[3])};
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // xoshiro forbids 0
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed),
                            static_cast<std::uint32_t>(seed >> 32)};
  const auto out = Philox4x32::apply(
      {static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32),
       0u, 0x726f77u},
      key);
  return join(out[0], out[1]);
}

}  // namespace sdews
