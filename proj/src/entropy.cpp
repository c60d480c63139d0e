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

#include "mlvc/entropy.hpp"

#include <algorithm>
#include <cmath>

#include "mlvc/range_coder.hpp"

namespace mlvc {

namespace {

using torch::Tensor;
using torch::autograd::AutogradContext;
using torch::autograd::tensor_list;

constexpr int32_t kAlphabetBound = 32768; // |symbol| <= 2^15
constexpr uint32_t kTotal = 1u << 16;

struct LowerBoundFunction : public torch::autograd::Function<LowerBoundFunction> {
    static Tensor forward(AutogradContext* ctx, Tensor x, double bound) {
        ctx->save_for_backward({x});
        ctx->saved_data["bound"] = bound;
        return torch::clamp_min(x, bound);
    }
    static tensor_list backward(AutogradContext* ctx, tensor_list grads) {
        auto x = ctx->get_saved_variables()[0];
        double bound = ctx->saved_data["bound"].toDouble();
        auto pass = (x >= bound) | (grads[0] < 0);
        return {grads[0] * pass.to(grads[0].dtype()), Tensor()};
    }
};

double eg0_bits(uint32_t k) {
    uint32_t n = k + 1;
    unsigned b = 0;
    while ((n >> b) > 1) ++b;
    return 2.0 * b + 1.0;
}

// scale a pmf (plus escape tail) to integer counts summing to 65536 with
// every slot >= 1
std::vector<uint32_t> quantize_pmf(const std::vector<double>& pmf, double tail) {
    const size_t n = pmf.size() + 1;
    std::vector<uint32_t> counts(n);
    int64_t sum = 0;
    for (size_t i = 0; i < pmf.size(); ++i) {
        counts[i] = static_cast<uint32_t>(
            std::max<int64_t>(1, std::llround(pmf[i] * static_cast<double>(kTotal))));
        sum += counts[i];
    }
    counts[n - 1] = static_cast<uint32_t>(
        std::max<int64_t>(1, std::llround(tail * static_cast<double>(kTotal))));
    sum += counts[n - 1];

    int64_t diff = static_cast<int64_t>(kTotal) - sum;
    while (diff != 0) {
        if (diff > 0) {
            auto it = std::max_element(counts.begin(), counts.end());
            *it += static_cast<uint32_t>(diff);
            diff = 0;
        } else {
            // shave the largest slot, never below 1
            auto it = std::max_element(counts.begin(), counts.end());
            int64_t room = static_cast<int64_t>(*it) - 1;
            int64_t take = std::min(room, -diff);
            *it -= static_cast<uint32_t>(take);
            diff += take;
            if (take == 0) throw DataError("cdf quantization cannot reach total");
        }
    }
    return counts;
}

CdfTable table_from_pmf(int32_t vmin, const std::vector<double>& pmf, double tail) {
    CdfTable t;
    t.vmin = vmin;
    t.vmax = vmin + static_cast<int32_t>(pmf.size()) - 1;
    auto counts = quantize_pmf(pmf, tail);
    t.cum.resize(counts.size() + 1);
    t.cum[0] = 0;
    for (size_t i = 0; i < counts.size(); ++i) t.cum[i + 1] = t.cum[i] + counts[i];
    return t;
}

} // namespace

Tensor quantize(const Tensor& x, QuantMode mode) {
    if (mode == QuantMode::kRound) return torch::round(x);
    return x + (torch::rand_like(x) - 0.5f);
}

Tensor lower_bound(const Tensor& x, double bound) {
    return LowerBoundFunction::apply(x, bound);
}

Tensor rate_bits(const Tensor& likelihood, int64_t* underflow_count) {
    if (underflow_count)
        *underflow_count = (likelihood < kLikelihoodFloor).sum().item<int64_t>();
    auto p = torch::clamp_min(likelihood, kLikelihoodFloor);
    return -p.log2().sum();
}

// ---- CdfSet -----------------------------------------------------------------

void CdfSet::serialize(ByteWriter& w) const {
    w.varint(tables.size());
    for (const auto& t : tables) {
        // zigzag vmin
        uint64_t zz = (static_cast<int64_t>(t.vmin) << 1) ^ (static_cast<int64_t>(t.vmin) >> 63);
        w.varint(zz);
        w.varint(static_cast<uint64_t>(t.nsym()));
        for (size_t i = 1; i < t.cum.size(); ++i)
            w.u16(static_cast<uint16_t>(t.cum[i] - t.cum[i - 1]));
    }
}

CdfSet CdfSet::deserialize(ByteReader& r) {
    CdfSet s;
    uint64_t n = r.varint();
    s.tables.resize(n);
    for (auto& t : s.tables) {
        uint64_t zz = r.varint();
        t.vmin = static_cast<int32_t>((zz >> 1) ^ (~(zz & 1) + 1));
        int32_t nsym = static_cast<int32_t>(r.varint());
        t.vmax = t.vmin + nsym - 1;
        t.cum.resize(nsym + 2);
        t.cum[0] = 0;
        for (int32_t i = 0; i < nsym + 1; ++i) {
            uint32_t d = r.u16();
            if (d == 0) d = kTotal; // single-slot table would wrap; not produced, guard anyway
            t.cum[i + 1] = t.cum[i] + d;
        }
        if (t.cum.back() != kTotal) throw DataError("corrupt cdf table");
    }
    return s;
}

uint16_t CdfSet::checksum() const {
    ByteWriter w;
    serialize(w);
    return fold16(fnv1a64(w.data().data(), w.size()));
}

double CdfSet::symbol_bits(int32_t v, int32_t ctx) const {
    const auto& t = tables.at(ctx);
    const double log2_total = 16.0;
    if (v >= t.vmin && v <= t.vmax) {
        int32_t i = v - t.vmin;
        return log2_total - std::log2(static_cast<double>(t.cum[i + 1] - t.cum[i]));
    }
    int32_t k = v < t.vmin ? t.vmin - v - 1 : v - t.vmax - 1;
    double esc = log2_total -
                 std::log2(static_cast<double>(t.cum[t.nsym() + 1] - t.cum[t.nsym()]));
    return esc + 1.0 + eg0_bits(static_cast<uint32_t>(k));
}

double CdfSet::total_bits(const Tensor& values, const Tensor& ctx) const {
    auto v = values.to(torch::kInt32).contiguous();
    auto c = ctx.to(torch::kInt32).contiguous();
    TORCH_CHECK(v.numel() == c.numel(), "values/ctx size mismatch");
    const int32_t* vp = v.data_ptr<int32_t>();
    const int32_t* cp = c.data_ptr<int32_t>();
    double bits = 0.0;
    for (int64_t i = 0; i < v.numel(); ++i) bits += symbol_bits(vp[i], cp[i]);
    return bits;
}

// ---- payload coding ---------------------------------------------------------

std::vector<uint8_t> encode_symbols(const Tensor& values, const Tensor& ctx, const CdfSet& cdfs) {
    auto v = values.to(torch::kInt32).contiguous();
    auto c = ctx.to(torch::kInt32).contiguous();
    TORCH_CHECK(v.numel() == c.numel(), "values/ctx size mismatch");
    const int32_t* vp = v.data_ptr<int32_t>();
    const int32_t* cp = c.data_ptr<int32_t>();
    const int64_t n = v.numel();

    ByteWriter out;
    out.u16(cdfs.checksum());
    out.varint(static_cast<uint64_t>(n));

    RangeEncoder enc;
    for (int64_t i = 0; i < n; ++i) {
        int32_t val = vp[i];
        if (val < -kAlphabetBound || val > kAlphabetBound)
            throw DataError("symbol outside alphabet bound");
        const auto& t = cdfs.tables.at(cp[i]);
        const int32_t nsym = t.nsym();
        if (val >= t.vmin && val <= t.vmax) {
            int32_t s = val - t.vmin;
            enc.encode(t.cum[s], t.cum[s + 1] - t.cum[s], 16);
        } else {
            enc.encode(t.cum[nsym], t.cum[nsym + 1] - t.cum[nsym], 16);
            if (val < t.vmin) {
                enc.encode_bypass(0, 1);
                enc.encode_eg0(static_cast<uint32_t>(t.vmin - val - 1));
            } else {
                enc.encode_bypass(1, 1);
                enc.encode_eg0(static_cast<uint32_t>(val - t.vmax - 1));
            }
        }
    }
    auto coder = enc.finish();
    out.bytes(coder.data(), coder.size());
    return out.take();
}

Tensor decode_symbols(ByteReader& payload, const Tensor& ctx, const CdfSet& cdfs,
                      torch::IntArrayRef shape) {
    uint16_t csum = payload.u16();
    if (csum != cdfs.checksum()) throw ModelError("cdf table checksum mismatch");
    uint64_t count = payload.varint();

    auto c = ctx.to(torch::kInt32).contiguous();
    int64_t n = c.numel();
    if (count != static_cast<uint64_t>(n)) throw DataError("payload symbol count mismatch");

    auto out = torch::empty({n}, torch::kInt32);
    int32_t* op = out.data_ptr<int32_t>();
    const int32_t* cp = c.data_ptr<int32_t>();

    RangeDecoder dec(payload);
    for (int64_t i = 0; i < n; ++i) {
        const auto& t = cdfs.tables.at(cp[i]);
        const int32_t nsym = t.nsym();
        uint32_t f = dec.decode_freq(16);
        // cum is strictly increasing; find slot with cum[s] <= f < cum[s+1]
        auto it = std::upper_bound(t.cum.begin(), t.cum.end(), f);
        int32_t s = static_cast<int32_t>(it - t.cum.begin()) - 1;
        dec.decode_update(t.cum[s], t.cum[s + 1] - t.cum[s]);
        if (s < nsym) {
            op[i] = t.vmin + s;
        } else {
            uint32_t side = dec.decode_bypass(1);
            uint32_t k = dec.decode_eg0();
            op[i] = side ? t.vmax + 1 + static_cast<int32_t>(k)
                         : t.vmin - 1 - static_cast<int32_t>(k);
        }
    }
    return out.view(shape);
}

// ---- factorized prior -------------------------------------------------------

FactorizedPriorImpl::FactorizedPriorImpl(int64_t channels, std::vector<int64_t> filters)
    : channels_(channels) {
    dims_.push_back(1);
    for (auto f : filters) dims_.push_back(f);
    dims_.push_back(1);

    const int64_t layers = static_cast<int64_t>(dims_.size()) - 1;
    const double init_scale = 10.0;
    const double scale = std::pow(init_scale, 1.0 / static_cast<double>(layers));
    for (int64_t k = 0; k < layers; ++k) {
        double init = std::log(std::expm1(1.0 / scale / static_cast<double>(dims_[k + 1])));
        auto m = torch::full({channels, dims_[k + 1], dims_[k]}, static_cast<float>(init));
        matrices_.push_back(register_parameter("matrix_" + std::to_string(k), m));
        auto b = torch::empty({channels, dims_[k + 1], 1}).uniform_(-0.5, 0.5);
        biases_.push_back(register_parameter("bias_" + std::to_string(k), b));
        if (k < layers - 1) {
            auto a = torch::zeros({channels, dims_[k + 1], 1});
            factors_.push_back(register_parameter("factor_" + std::to_string(k), a));
        }
    }
}

Tensor FactorizedPriorImpl::cdf_logits(const Tensor& u) {
    auto x = u;
    const int64_t layers = static_cast<int64_t>(dims_.size()) - 1;
    for (int64_t k = 0; k < layers; ++k) {
        x = torch::bmm(torch::softplus(matrices_[k]), x) + biases_[k];
        if (k < layers - 1) x = x + torch::tanh(factors_[k]) * torch::tanh(x);
    }
    return x;
}

Tensor FactorizedPriorImpl::likelihood(const Tensor& x) {
    TORCH_CHECK(x.dim() == 4 && x.size(1) == channels_, "latent shape mismatch");
    const int64_t N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
    auto u = x.permute({1, 0, 2, 3}).reshape({C, 1, N * H * W});
    auto lo = cdf_logits(u - 0.5f);
    auto hi = cdf_logits(u + 0.5f);
    // evaluate the sigmoid difference on the side with better conditioning
    auto sign = -torch::sign(lo + hi).detach();
    auto p = torch::abs(torch::sigmoid(sign * hi) - torch::sigmoid(sign * lo));
    return p.reshape({C, N, H, W}).permute({1, 0, 2, 3});
}

CdfSet FactorizedPriorImpl::freeze() {
    torch::NoGradGuard ng;
    const double tail = 1e-6; // per-side mass left to escapes

    int64_t bound = 64;
    torch::Tensor cdf; // (C, 2*bound+2) cdf at half-integer grid points
    while (true) {
        auto grid =
            torch::arange(-static_cast<double>(bound) - 0.5, static_cast<double>(bound) + 0.51,
                          1.0, torch::kFloat32);
        const int64_t m = grid.numel();
        auto u = grid.view({1, 1, m}).expand({channels_, 1, m}).contiguous();
        cdf = torch::sigmoid(cdf_logits(u)).squeeze(1).to(torch::kFloat64); // (C, m)
        bool ok = (cdf.index({torch::indexing::Slice(), 0}) <= tail).all().item<bool>() &&
                  (cdf.index({torch::indexing::Slice(), m - 1}) >= 1.0 - tail).all().item<bool>();
        if (ok || bound >= 8192) break;
        bound *= 2;
    }

    CdfSet set;
    auto acc = cdf.accessor<double, 2>();
    const int64_t m = cdf.size(1);
    for (int64_t c = 0; c < channels_; ++c) {
        // minimal [vmin, vmax] holding all but `tail` mass per side
        int64_t lo = 0;
        while (lo + 1 < m - 1 && acc[c][lo + 1] <= tail) ++lo;
        int64_t hi = m - 2;
        while (hi - 1 > lo && acc[c][hi - 1] >= 1.0 - tail) --hi;
        // symbols v = -bound + j for grid cell j = [g_j, g_{j+1}]
        std::vector<double> pmf;
        pmf.reserve(hi - lo + 1);
        for (int64_t j = lo; j <= hi; ++j)
            pmf.push_back(std::max(0.0, acc[c][j + 1] - acc[c][j]));
        double tail_mass = std::max(0.0, acc[c][lo]) + std::max(0.0, 1.0 - acc[c][hi + 1]);
        set.tables.push_back(
            table_from_pmf(static_cast<int32_t>(lo - bound), pmf, tail_mass));
    }
    return set;
}

// ---- gaussian conditional ---------------------------------------------------

namespace {
inline Tensor std_normal_sf(const Tensor& z) {
    // survival function 1 - Phi(z), stable in the tails
    return 0.5 * torch::erfc(z * static_cast<float>(M_SQRT1_2));
}
} // namespace

Tensor GaussianConditional::likelihood(const Tensor& x, const Tensor& scales, double sigma_min) {
    auto s = lower_bound(scales, sigma_min);
    auto v = torch::abs(x);
    auto upper = std_normal_sf((v - 0.5f) / s);
    auto lower = std_normal_sf((v + 0.5f) / s);
    return upper - lower;
}

std::vector<double> GaussianConditional::scale_table(double sigma_min) {
    std::vector<double> t(kBins);
    const double lo = std::log(sigma_min), hi = std::log(kMaxScale);
    for (int i = 0; i < kBins; ++i)
        t[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / (kBins - 1));
    return t;
}

Tensor GaussianConditional::bin_index(const Tensor& scales, double sigma_min) {
    auto table = scale_table(sigma_min);
    auto boundaries = torch::tensor(std::vector<double>(table.begin(), table.end() - 1),
                                    torch::kFloat64);
    auto s = scales.detach().to(torch::kFloat64);
    // number of boundaries strictly below sigma == smallest i with table[i] >= sigma
    auto idx = torch::searchsorted(boundaries, s.contiguous(), /*out_int32=*/true,
                                   /*right=*/false);
    return idx.to(torch::kInt32);
}

CdfSet GaussianConditional::freeze(double sigma_min) {
    CdfSet set;
    for (double sigma : scale_table(sigma_min)) {
        int32_t vmax = static_cast<int32_t>(std::min(32767.0, std::max(1.0, std::ceil(sigma * 8))));
        std::vector<double> pmf;
        pmf.reserve(2 * vmax + 1);
        auto sf = [&](double z) { return 0.5 * std::erfc(z * M_SQRT1_2); };
        for (int32_t v = -vmax; v <= vmax; ++v) {
            double p = sf((v - 0.5) / sigma) - sf((v + 0.5) / sigma);
            pmf.push_back(std::max(0.0, p));
        }
        double tail = 2.0 * sf((vmax + 0.5) / sigma);
        set.tables.push_back(table_from_pmf(-vmax, pmf, tail));
    }
    return set;
}

} // namespace mlvc
