// Copyright 2026 the mlvc authors
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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mlvc {

// Exit-code conventions shared with the CLI: 0 ok, 2 usage, 3 data, 4 model.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

// xor-fold a 64-bit hash down to 16 bits (payload/table checksums)
inline uint16_t fold16(uint64_t h) {
    h ^= h >> 32;
    h ^= h >> 16;
    return static_cast<uint16_t>(h & 0xFFFF);
}

// The four rate points models are trained for.
inline constexpr std::array<int, 4> kLambdaSet{16, 24, 40, 64};

} // namespace mlvc
