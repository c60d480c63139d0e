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

#include <cmath>
#include <random>

#include "mlvc/media.hpp"
#include "mlvc/warp.hpp"

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

using namespace mlvc;
using torch::indexing::Slice;

namespace {

// independent scalar bilinear sampler with clamped coordinates
torch::Tensor warp_oracle(const torch::Tensor& data, const torch::Tensor& flow) {
    auto d = data.contiguous();
    auto f = flow.contiguous();
    const int64_t N = d.size(0), C = d.size(1), H = d.size(2), W = d.size(3);
    auto out = torch::empty_like(d);
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t y = 0; y < H; ++y)
                for (int64_t x = 0; x < W; ++x) {
                    double sx = x + f[n][0][y][x].item<float>();
                    double sy = y + f[n][1][y][x].item<float>();
                    sx = std::min(std::max(sx, 0.0), static_cast<double>(W - 1));
                    sy = std::min(std::max(sy, 0.0), static_cast<double>(H - 1));
                    int64_t x0 = static_cast<int64_t>(std::floor(sx));
                    int64_t y0 = static_cast<int64_t>(std::floor(sy));
                    int64_t x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
                    double ax = sx - x0, ay = sy - y0;
                    double v = (1 - ay) * ((1 - ax) * d[n][c][y0][x0].item<float>() +
                                           ax * d[n][c][y0][x1].item<float>()) +
                               ay * ((1 - ax) * d[n][c][y1][x0].item<float>() +
                                     ax * d[n][c][y1][x1].item<float>());
                    out[n][c][y][x] = static_cast<float>(v);
                }
    return out;
}

// flows whose fractional parts stay away from the integer lattice, so central
// differences with step 1e-3 do not straddle a bilinear kink
torch::Tensor generic_flow(int64_t n, int64_t h, int64_t w, std::mt19937& rng, double mag) {
    auto f = torch::empty({n, 2, h, w});
    std::uniform_int_distribution<int> whole(-static_cast<int>(mag), static_cast<int>(mag));
    std::uniform_real_distribution<double> frac(0.15, 0.85);
    auto acc = f.accessor<float, 4>();
    for (int64_t i = 0; i < n; ++i)
        for (int64_t c = 0; c < 2; ++c)
            for (int64_t y = 0; y < h; ++y)
                for (int64_t x = 0; x < w; ++x)
                    acc[i][c][y][x] = static_cast<float>(whole(rng) + frac(rng));
    return f;
}

} // namespace

TEST_CASE("zero flow is the identity") {
    auto data = torch::rand({2, 3, 9, 7});
    auto flow = torch::zeros({2, 2, 9, 7});
    CHECK(torch::equal(bilinear_warp(data, flow), data));
}

TEST_CASE("constant (1,0) flow shifts a horizontal ramp by one column") {
    const int w = 8, h = 4;
    auto ramp = torch::arange(0, w, torch::kFloat32).repeat({1, 1, h, 1});
    auto flow = torch::zeros({1, 2, h, w});
    flow.index_put_({Slice(), 0}, 1.0f);
    auto out = bilinear_warp(ramp, flow);
    // interior: out(x) = ramp(x+1)
    for (int x = 0; x < w - 1; ++x)
        CHECK(out[0][0][2][x].item<float>() == doctest::Approx(x + 1.0f));
    // border column clamps
    CHECK(out[0][0][2][w - 1].item<float>() == doctest::Approx(w - 1.0f));
}

TEST_CASE("matches the scalar oracle on random instances") {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 25; ++trial) {
        auto data = torch::rand({1, 2, 7, 5});
        auto flow = torch::rand({1, 2, 7, 5}) * 4.0f - 2.0f;
        auto got = bilinear_warp(data, flow);
        auto want = warp_oracle(data, flow);
        CHECK((got - want).abs().max().item<float>() < 1e-6f);
    }
}

TEST_CASE("warp is linear in data") {
    auto x = torch::rand({1, 3, 8, 8});
    auto y = torch::rand({1, 3, 8, 8});
    auto flow = torch::rand({1, 2, 8, 8}) * 3.0f - 1.5f;
    float a = 0.7f, b = -1.3f;
    auto lhs = bilinear_warp(a * x + b * y, flow);
    auto rhs = a * bilinear_warp(x, flow) + b * bilinear_warp(y, flow);
    CHECK((lhs - rhs).abs().max().item<float>() < 1e-6f);
}

namespace {

// weighted-sum warp loss evaluated in double precision end to end, so central
// differences at step 1e-3 are not drowned by float32 forward noise
double warp_loss_double(const std::vector<double>& d, const std::vector<double>& f,
                        const std::vector<double>& w, int64_t H, int64_t W) {
    double loss = 0.0;
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            const int64_t i = y * W + x;
            double sx = x + f[i];
            double sy = y + f[H * W + i];
            sx = std::min(std::max(sx, 0.0), static_cast<double>(W - 1));
            sy = std::min(std::max(sy, 0.0), static_cast<double>(H - 1));
            int64_t x0 = static_cast<int64_t>(std::floor(sx));
            int64_t y0 = static_cast<int64_t>(std::floor(sy));
            int64_t x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
            double ax = sx - x0, ay = sy - y0;
            double v = (1 - ay) * ((1 - ax) * d[y0 * W + x0] + ax * d[y0 * W + x1]) +
                       ay * ((1 - ax) * d[y1 * W + x0] + ax * d[y1 * W + x1]);
            loss += v * w[i];
        }
    return loss;
}

} // namespace

TEST_CASE("gradients match central finite differences") {
    std::mt19937 rng(7);
    const double eps = 1e-3;
    const int64_t H = 8, W = 8;
    for (int trial = 0; trial < 5; ++trial) {
        auto data = torch::rand({1, 1, H, W}, torch::requires_grad());
        auto flow = generic_flow(1, H, W, rng, 2).set_requires_grad(true);
        auto weights = torch::rand({1, 1, H, W});

        auto loss = (bilinear_warp(data, flow) * weights).sum();
        loss.backward();

        auto to_vec = [](const torch::Tensor& t) {
            auto d = t.detach().to(torch::kFloat64).contiguous();
            return std::vector<double>(d.data_ptr<double>(), d.data_ptr<double>() + d.numel());
        };
        auto dv = to_vec(data), fv = to_vec(flow), wv = to_vec(weights);

        auto probe_fd = [&](std::vector<double>& vec, int64_t i) {
            double orig = vec[i];
            vec[i] = orig + eps;
            double up = warp_loss_double(dv, fv, wv, H, W);
            vec[i] = orig - eps;
            double dn = warp_loss_double(dv, fv, wv, H, W);
            vec[i] = orig;
            return (up - dn) / (2 * eps);
        };

        for (int probe = 0; probe < 12; ++probe) {
            int64_t i = rng() % dv.size();
            double analytic = data.grad().view(-1)[i].item<float>();
            double numeric = probe_fd(dv, i);
            CHECK(std::abs(analytic - numeric) <= 1e-4 * std::max(1.0, std::abs(numeric)));
        }
        for (int probe = 0; probe < 12; ++probe) {
            int64_t i = rng() % fv.size();
            double analytic = flow.grad().view(-1)[i].item<float>();
            double numeric = probe_fd(fv, i);
            CHECK(std::abs(analytic - numeric) <= 1e-4 * std::max(1.0, std::abs(numeric)));
        }
    }
}

TEST_CASE("compose_chain basics") {
    auto base = torch::full({1, 2, 6, 6}, 0.5f);
    CHECK(torch::equal(compose_chain(base, {}), base));

    auto c2 = torch::full({1, 2, 6, 6}, 1.25f);
    auto sum = compose_chain(base, {c2});
    CHECK(sum.mean().item<float>() == doctest::Approx(1.75f));

    auto zero = torch::zeros({1, 2, 6, 6});
    auto z = compose_chain(zero, {zero, zero});
    CHECK(z.abs().max().item<float>() == 0.0f);
}

TEST_CASE("chain accumulates (k,0) on a constant-shift clip") {
    auto clip = synth_clip(SynthPattern::kShift, 6, 64, 21, {1.0, 0.0});
    // per-step true backward flow is (1,0); buffered MVs are all that field
    auto v = clip.gt_flow[0].unsqueeze(0);
    auto flows = chain_flows(v, {v, v, v}, 4);
    REQUIRE(flows.size() == 4);
    for (int k = 0; k < 4; ++k) {
        auto interior = flows[k].index({Slice(), Slice(), Slice(8, 56), Slice(8, 56)});
        auto fx = interior.index({Slice(), 0});
        auto fy = interior.index({Slice(), 1});
        CHECK((fx - static_cast<float>(k + 1)).abs().max().item<float>() < 0.05f);
        CHECK(fy.abs().max().item<float>() < 0.05f);
    }
}

TEST_CASE("downsample_flow halves sizes and magnitudes") {
    auto zero = torch::zeros({1, 2, 16, 16});
    CHECK(downsample_flow(zero, 2).abs().max().item<float>() == 0.0f);

    auto c = torch::cat({torch::full({1, 1, 16, 16}, 4.0f), torch::full({1, 1, 16, 16}, 2.0f)}, 1);
    auto down = downsample_flow(c, 1);
    CHECK(down.size(2) == 8);
    CHECK(torch::equal(down.index({Slice(), 0}), torch::full({1, 8, 8}, 2.0f)));
    CHECK(torch::equal(down.index({Slice(), 1}), torch::full({1, 8, 8}, 1.0f)));
}

TEST_CASE("downsampled warp agrees with full-resolution warp on a smooth field") {
    // smooth flow, magnitude ~2px
    const int n = 64;
    auto ys = torch::arange(0, n, torch::kFloat32).view({1, 1, n, 1}).expand({1, 1, n, n});
    auto xs = torch::arange(0, n, torch::kFloat32).view({1, 1, 1, n}).expand({1, 1, n, n});
    auto u = 1.5f * torch::sin(xs * (2 * M_PI / n)) * torch::cos(ys * (2 * M_PI / n));
    auto v = -1.0f * torch::cos(xs * (2 * M_PI / n));
    auto flow = torch::cat({u, v}, 1);

    auto down2 = downsample_flow(flow, 2);
    // sample positions on the coarse grid map to 4x coarser pixels; compare
    // the implied full-res displacement at aligned points
    auto up_back = upsample_flow_2x(upsample_flow_2x(down2));
    auto err = (up_back - flow).norm(2, 1); // per-pixel endpoint error
    auto interior = err.index({Slice(), Slice(4, n - 4), Slice(4, n - 4)});
    CHECK(interior.max().item<float>() < 0.1f);
}

TEST_CASE("upsample_flow_2x doubles sizes and magnitudes, exact on constants") {
    auto c = torch::cat({torch::full({1, 1, 8, 8}, 2.0f), torch::full({1, 1, 8, 8}, 1.0f)}, 1);
    auto up = upsample_flow_2x(c);
    CHECK(up.size(3) == 16);
    CHECK(torch::equal(up.index({Slice(), 0}), torch::full({1, 16, 16}, 4.0f)));
    CHECK(torch::equal(up.index({Slice(), 1}), torch::full({1, 16, 16}, 2.0f)));

    // down then up on a constant field returns the identical constant
    auto down = downsample_flow(c, 1);
    CHECK(torch::equal(upsample_flow_2x(down), c));
}

TEST_CASE("sinusoidal field round-trips down/up within 0.05 px RMS") {
    const int n = 64;
    auto xs = torch::arange(0, n, torch::kFloat32).view({1, 1, 1, n}).expand({1, 1, n, n});
    auto ys = torch::arange(0, n, torch::kFloat32).view({1, 1, n, 1}).expand({1, 1, n, n});
    auto u = torch::sin(xs * (2 * M_PI / n)) * 2.0f;
    auto v = torch::cos(ys * (2 * M_PI / n)) * 2.0f;
    auto flow = torch::cat({u, v}, 1);
    auto rt = upsample_flow_2x(downsample_flow(flow, 1));
    auto rms = (rt - flow).pow(2).mean().sqrt().item<float>();
    CHECK(rms < 0.05f);
}

TEST_CASE("pyramid helpers: constant preservation and level sizes") {
    auto img = torch::rand({1, 3, 64, 64});
    auto pyr = image_pyramid(img, 5);
    REQUIRE(pyr.size() == 5);
    CHECK(pyr[4].size(3) == 4);
    auto flat = torch::full({1, 1, 32, 32}, 0.1f);
    CHECK(torch::equal(halve2x(flat), torch::full({1, 1, 16, 16}, 0.1f)));
    CHECK(torch::equal(upsample2x(flat), torch::full({1, 1, 64, 64}, 0.1f)));
}
