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

#include "mlvc/warp.hpp"

#include <ATen/Parallel.h>

#include "mlvc/common.hpp"

namespace mlvc {

namespace {

using torch::Tensor;
using torch::autograd::AutogradContext;
using torch::autograd::tensor_list;

struct WarpFunction : public torch::autograd::Function<WarpFunction> {
    static Tensor forward(AutogradContext* ctx, Tensor data, Tensor flow) {
        TORCH_CHECK(data.dim() == 4 && flow.dim() == 4, "warp expects NCHW tensors");
        TORCH_CHECK(flow.size(1) == 2, "flow must have 2 channels");
        TORCH_CHECK(data.size(0) == flow.size(0) && data.size(2) == flow.size(2) &&
                        data.size(3) == flow.size(3),
                    "warp shape mismatch");
        TORCH_CHECK(data.scalar_type() == torch::kFloat32 &&
                        flow.scalar_type() == torch::kFloat32,
                    "warp expects float32");

        auto d = data.contiguous();
        auto f = flow.contiguous();
        const int64_t N = d.size(0), C = d.size(1), H = d.size(2), W = d.size(3);
        auto out = torch::empty_like(d);

        const float* dp = d.data_ptr<float>();
        const float* fp = f.data_ptr<float>();
        float* op = out.data_ptr<float>();

        at::parallel_for(0, N * C, 1, [&](int64_t begin, int64_t end) {
            for (int64_t nc = begin; nc < end; ++nc) {
                const int64_t n = nc / C;
                const float* src = dp + nc * H * W;
                const float* fx = fp + (n * 2 + 0) * H * W;
                const float* fy = fp + (n * 2 + 1) * H * W;
                float* dst = op + nc * H * W;
                for (int64_t y = 0; y < H; ++y) {
                    for (int64_t x = 0; x < W; ++x) {
                        const int64_t i = y * W + x;
                        float sx = static_cast<float>(x) + fx[i];
                        float sy = static_cast<float>(y) + fy[i];
                        if (sx < 0.f) sx = 0.f;
                        if (sx > W - 1) sx = static_cast<float>(W - 1);
                        if (sy < 0.f) sy = 0.f;
                        if (sy > H - 1) sy = static_cast<float>(H - 1);
                        const int64_t x0 = static_cast<int64_t>(sx);
                        const int64_t y0 = static_cast<int64_t>(sy);
                        const int64_t x1 = std::min(x0 + 1, W - 1);
                        const int64_t y1 = std::min(y0 + 1, H - 1);
                        const float ax = sx - static_cast<float>(x0);
                        const float ay = sy - static_cast<float>(y0);
                        const float v00 = src[y0 * W + x0], v01 = src[y0 * W + x1];
                        const float v10 = src[y1 * W + x0], v11 = src[y1 * W + x1];
                        const float top = v00 + ax * (v01 - v00);
                        const float bot = v10 + ax * (v11 - v10);
                        dst[i] = top + ay * (bot - top);
                    }
                }
            }
        });

        ctx->save_for_backward({d, f});
        return out;
    }

    static tensor_list backward(AutogradContext* ctx, tensor_list grad_outputs) {
        auto saved = ctx->get_saved_variables();
        auto d = saved[0];
        auto f = saved[1];
        auto go = grad_outputs[0].contiguous();
        const int64_t N = d.size(0), C = d.size(1), H = d.size(2), W = d.size(3);

        auto grad_data = torch::zeros_like(d);
        auto grad_flow = torch::zeros_like(f);

        const float* dp = d.data_ptr<float>();
        const float* fp = f.data_ptr<float>();
        const float* gp = go.data_ptr<float>();
        float* gdp = grad_data.data_ptr<float>();
        float* gfp = grad_flow.data_ptr<float>();

        // one batch item per task: scatter accumulation stays deterministic
        at::parallel_for(0, N, 1, [&](int64_t begin, int64_t end) {
            for (int64_t n = begin; n < end; ++n) {
                const float* fx = fp + (n * 2 + 0) * H * W;
                const float* fy = fp + (n * 2 + 1) * H * W;
                float* gfx = gfp + (n * 2 + 0) * H * W;
                float* gfy = gfp + (n * 2 + 1) * H * W;
                for (int64_t y = 0; y < H; ++y) {
                    for (int64_t x = 0; x < W; ++x) {
                        const int64_t i = y * W + x;
                        const float rx = static_cast<float>(x) + fx[i];
                        const float ry = static_cast<float>(y) + fy[i];
                        const bool inx = rx > 0.f && rx < W - 1;
                        const bool iny = ry > 0.f && ry < H - 1;
                        float sx = rx < 0.f ? 0.f : (rx > W - 1 ? static_cast<float>(W - 1) : rx);
                        float sy = ry < 0.f ? 0.f : (ry > H - 1 ? static_cast<float>(H - 1) : ry);
                        const int64_t x0 = static_cast<int64_t>(sx);
                        const int64_t y0 = static_cast<int64_t>(sy);
                        const int64_t x1 = std::min(x0 + 1, W - 1);
                        const int64_t y1 = std::min(y0 + 1, H - 1);
                        const float ax = sx - static_cast<float>(x0);
                        const float ay = sy - static_cast<float>(y0);
                        float gu = 0.f, gv = 0.f;
                        for (int64_t c = 0; c < C; ++c) {
                            const float* src = dp + (n * C + c) * H * W;
                            float* gd = gdp + (n * C + c) * H * W;
                            const float g = gp[(n * C + c) * H * W + i];
                            gd[y0 * W + x0] += g * (1 - ax) * (1 - ay);
                            gd[y0 * W + x1] += g * ax * (1 - ay);
                            gd[y1 * W + x0] += g * (1 - ax) * ay;
                            gd[y1 * W + x1] += g * ax * ay;
                            const float v00 = src[y0 * W + x0], v01 = src[y0 * W + x1];
                            const float v10 = src[y1 * W + x0], v11 = src[y1 * W + x1];
                            if (inx) gu += g * ((1 - ay) * (v01 - v00) + ay * (v11 - v10));
                            if (iny) gv += g * ((1 - ax) * (v10 - v00) + ax * (v11 - v01));
                        }
                        gfx[i] = gu;
                        gfy[i] = gv;
                    }
                }
            }
        });

        return {grad_data, grad_flow};
    }
};

} // namespace

torch::Tensor bilinear_warp(const torch::Tensor& data, const torch::Tensor& flow) {
    return WarpFunction::apply(data, flow);
}

torch::Tensor compose_chain(const torch::Tensor& base,
                            const std::vector<torch::Tensor>& prior_warped) {
    auto out = base;
    for (const auto& p : prior_warped) {
        TORCH_CHECK(p.sizes() == base.sizes(), "compose_chain shape mismatch");
        out = out + p;
    }
    return out;
}

std::vector<torch::Tensor> chain_flows(const torch::Tensor& base,
                                       const std::vector<torch::Tensor>& mv_buffer, int count) {
    std::vector<torch::Tensor> flows;
    flows.reserve(count);
    auto acc = base;
    flows.push_back(acc);
    for (int k = 1; k < count; ++k) {
        TORCH_CHECK(k - 1 < static_cast<int>(mv_buffer.size()), "chain_flows: buffer too short");
        auto warped = bilinear_warp(mv_buffer[k - 1], acc);
        acc = compose_chain(acc, {warped});
        flows.push_back(acc);
    }
    return flows;
}

torch::Tensor halve2x(const torch::Tensor& x) {
    using torch::indexing::None;
    using torch::indexing::Slice;
    TORCH_CHECK(x.size(-1) % 2 == 0 && x.size(-2) % 2 == 0, "halve2x needs even sizes");
    auto rows = (x.index({Slice(), Slice(), Slice(0, None, 2), Slice()}) +
                 x.index({Slice(), Slice(), Slice(1, None, 2), Slice()})) *
                0.5f;
    auto out = (rows.index({Slice(), Slice(), Slice(), Slice(0, None, 2)}) +
                rows.index({Slice(), Slice(), Slice(), Slice(1, None, 2)})) *
               0.5f;
    return out;
}

namespace {

// 1-D bilinear x2 along `dim` (2 or 3) with half-pixel centres; lerp form so
// constants survive bit-exactly
torch::Tensor up1d(const torch::Tensor& x, int64_t dim) {
    using torch::indexing::None;
    using torch::indexing::Slice;
    const int64_t n = x.size(dim);
    auto idx = [&](int64_t a, c10::optional<int64_t> b) {
        std::vector<torch::indexing::TensorIndex> ix(4, Slice());
        ix[dim] = b ? Slice(a, *b) : Slice(a, None);
        return ix;
    };
    auto head = x.index(idx(0, 1));
    auto tail = x.index(idx(n - 1, c10::nullopt));
    auto lo = x.index(idx(0, n - 1));        // in[i], i = 0..n-2
    auto hi = x.index(idx(1, c10::nullopt)); // in[i+1]
    // out[2i+1] = lerp(in[i], in[i+1], 0.25), out[2i+2] = lerp(.., 0.75);
    // out[0] and out[2n-1] clamp to the ends
    auto odd = lo + 0.25f * (hi - lo);
    auto even = lo + 0.75f * (hi - lo);
    auto mid = torch::stack({odd, even}, dim + 1);
    std::vector<int64_t> shape(x.sizes().begin(), x.sizes().end());
    shape[dim] = 2 * (n - 1);
    return torch::cat({head, mid.reshape(shape), tail}, dim);
}

} // namespace

torch::Tensor upsample2x(const torch::Tensor& x) {
    TORCH_CHECK(x.dim() == 4, "upsample2x expects NCHW");
    return up1d(up1d(x, 2), 3);
}

torch::Tensor downsample_flow(const torch::Tensor& flow, int levels) {
    auto out = flow;
    for (int i = 0; i < levels; ++i) out = halve2x(out) * 0.5f;
    return out;
}

torch::Tensor upsample_flow_2x(const torch::Tensor& flow) { return upsample2x(flow) * 2.0f; }

std::vector<torch::Tensor> image_pyramid(const torch::Tensor& img, int levels) {
    std::vector<torch::Tensor> pyr;
    pyr.reserve(levels);
    pyr.push_back(img);
    for (int l = 1; l < levels; ++l) pyr.push_back(halve2x(pyr.back()));
    return pyr;
}

} // namespace mlvc
