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

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "mlvc/bitio.hpp"
#include "mlvc/common.hpp"

namespace mlvc {

// ---- quantization -----------------------------------------------------------

enum class QuantMode { kNoise, kRound };

// kRound: nearest integer, ties to even. kNoise: + U(-0.5, 0.5), the training
// relaxation of rounding.
torch::Tensor quantize(const torch::Tensor& x, QuantMode mode);

// max(x, bound) whose gradient also passes when pushing x back up across the
// bound (keeps bounded parameters trainable).
torch::Tensor lower_bound(const torch::Tensor& x, double bound);

// Differentiable rate estimate sum(-log2 p) with likelihoods clamped at
// 2^-32; underflow_count (optional) receives the number of clamped entries.
torch::Tensor rate_bits(const torch::Tensor& likelihood, int64_t* underflow_count = nullptr);

inline constexpr double kLikelihoodFloor = 2.3283064365386963e-10; // 2^-32

// ---- frozen CDF tables ------------------------------------------------------

// One coding context: 16-bit-quantized CDF over symbols [vmin, vmax] plus a
// trailing escape slot (escapes carry a sign bit and an exp-Golomb offset).
struct CdfTable {
    int32_t vmin = 0;
    int32_t vmax = 0;
    std::vector<uint32_t> cum; // size nsym()+2, cum.front()==0, cum.back()==65536
    int32_t nsym() const { return vmax - vmin + 1; }
};

class CdfSet {
public:
    std::vector<CdfTable> tables;

    uint16_t checksum() const;
    void serialize(ByteWriter& w) const;
    static CdfSet deserialize(ByteReader& r);

    // exact bits the range coder spends on v (escape cost included),
    // excluding stream framing
    double symbol_bits(int32_t v, int32_t ctx) const;
    double total_bits(const torch::Tensor& values, const torch::Tensor& ctx) const;

    bool empty() const { return tables.empty(); }
};

// ---- payload coding ---------------------------------------------------------
// layout: [u16 table-checksum][varint symbol-count][range-coder bytes]

std::vector<uint8_t> encode_symbols(const torch::Tensor& values, const torch::Tensor& ctx,
                                    const CdfSet& cdfs);
torch::Tensor decode_symbols(ByteReader& payload, const torch::Tensor& ctx, const CdfSet& cdfs,
                             torch::IntArrayRef shape);

// ---- learned priors ---------------------------------------------------------

// Per-channel nonparametric density: a stack of monotone 1-D maps ending in a
// sigmoid, as in the factorized-prior entropy model. Default filters 3-3-3
// plus the final width-1 stage.
class FactorizedPriorImpl : public torch::nn::Module {
public:
    explicit FactorizedPriorImpl(int64_t channels, std::vector<int64_t> filters = {3, 3, 3});

    // x: (N, C, H, W), typically noise-quantized or rounded
    torch::Tensor likelihood(const torch::Tensor& x);

    // integer-symbol CDF tables quantized to 16 bits; one context per channel
    CdfSet freeze();

    int64_t channels() const { return channels_; }
    torch::Tensor cdf_logits(const torch::Tensor& u); // u: (C, 1, M)

private:
    int64_t channels_;
    std::vector<int64_t> dims_;
    std::vector<torch::Tensor> matrices_, biases_, factors_;
};
TORCH_MODULE(FactorizedPrior);

// Zero-mean Gaussian conditional with scale lower bound and a shared
// geometric scale table for frozen coding.
class GaussianConditional {
public:
    static constexpr int kBins = 64;
    static constexpr double kMaxScale = 64.0;

    static torch::Tensor likelihood(const torch::Tensor& x, const torch::Tensor& scales,
                                    double sigma_min);
    static std::vector<double> scale_table(double sigma_min);
    // per-element coding context: index of the smallest table scale >= sigma
    static torch::Tensor bin_index(const torch::Tensor& scales, double sigma_min);
    static CdfSet freeze(double sigma_min);
};

} // namespace mlvc
