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

#include <cstdint>
#include <vector>

#include "mlvc/bitio.hpp"

namespace mlvc {

// 32-bit range coder, carry propagation handled LZMA-style through a byte
// cache. Frequencies are cumulative counts on a power-of-two total (16-bit
// precision for model-coded symbols, arbitrary log2 totals for bypass bits).
// Encoder and decoder must see identical (cum, freq, total) sequences; the
// payload is then recovered bit-exactly on any platform.

class RangeEncoder {
public:
    // encode symbol occupying [cum, cum+freq) out of total 2^tot_log2
    void encode(uint32_t cum, uint32_t freq, unsigned tot_log2) {
        range_ >>= tot_log2;
        low_ += static_cast<uint64_t>(cum) * range_;
        range_ *= freq;
        while (range_ < kTop) {
            shift_low();
            range_ <<= 8;
        }
    }

    // nbits raw bits (uniform model), most significant first
    void encode_bypass(uint32_t value, unsigned nbits) {
        while (nbits > 16) {
            nbits -= 16;
            encode((value >> nbits) & 0xFFFF, 1, 16);
        }
        if (nbits > 0) encode(value & ((1u << nbits) - 1), 1, nbits);
    }

    // order-0 exp-Golomb over bypass bits, for out-of-table escapes
    void encode_eg0(uint32_t k) {
        uint32_t n = k + 1;
        unsigned nbits = 0;
        while ((n >> nbits) > 1) ++nbits;
        for (unsigned i = 0; i < nbits; ++i) encode_bypass(0, 1);
        encode_bypass(1, 1);
        if (nbits > 0) encode_bypass(n & ((1u << nbits) - 1), nbits);
    }

    // flush; afterwards the encoder must not be reused
    std::vector<uint8_t> finish() {
        for (int i = 0; i < 5; ++i) shift_low();
        return std::move(out_);
    }

private:
    static constexpr uint32_t kTop = 1u << 24;

    void shift_low() {
        if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
            uint8_t carry = static_cast<uint8_t>(low_ >> 32);
            out_.push_back(static_cast<uint8_t>(cache_ + carry));
            while (pending_ > 0) {
                out_.push_back(static_cast<uint8_t>(0xFF + carry));
                --pending_;
            }
            cache_ = static_cast<uint8_t>(low_ >> 24);
        } else {
            ++pending_;
        }
        low_ = (low_ & 0x00FFFFFFull) << 8;
    }

    uint64_t low_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
    uint8_t cache_ = 0;
    uint64_t pending_ = 0;
    std::vector<uint8_t> out_;
};

class RangeDecoder {
public:
    explicit RangeDecoder(ByteReader& in) : in_(in) {
        // mirror of the encoder's initial cache byte plus 4 code bytes
        code_ = 0;
        for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
        code_ &= 0xFFFFFFFFull;
    }

    // returns the cumulative-frequency slot of the next symbol; caller maps
    // it to a symbol via its CDF and confirms with decode_update
    uint32_t decode_freq(unsigned tot_log2) {
        range_ >>= tot_log2;
        uint64_t f = code_ / range_;
        uint32_t max = (1u << tot_log2) - 1;
        return f > max ? max : static_cast<uint32_t>(f);
    }

    void decode_update(uint32_t cum, uint32_t freq) {
        code_ -= static_cast<uint64_t>(cum) * range_;
        range_ *= freq;
        while (range_ < kTop) {
            code_ = ((code_ << 8) | next_byte()) & 0xFFFFFFFFull;
            range_ <<= 8;
        }
    }

    uint32_t decode_bypass(unsigned nbits) {
        uint32_t v = 0;
        while (nbits > 16) {
            nbits -= 16;
            uint32_t part = decode_freq(16);
            decode_update(part, 1);
            v = (v << 16) | part;
        }
        if (nbits > 0) {
            uint32_t part = decode_freq(nbits);
            decode_update(part, 1);
            v = (v << nbits) | part;
        }
        return v;
    }

    uint32_t decode_eg0() {
        unsigned nbits = 0;
        while (decode_bypass(1) == 0) {
            if (++nbits > 31) throw DataError("corrupt exp-golomb code");
        }
        uint32_t n = 1u << nbits;
        if (nbits > 0) n |= decode_bypass(nbits);
        return n - 1;
    }

private:
    static constexpr uint32_t kTop = 1u << 24;

    uint8_t next_byte() { return in_.u8(); }

    ByteReader& in_;
    uint64_t code_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
};

} // namespace mlvc
