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

#include "mlvc/media.hpp"
#include "mlvc/metrics.hpp"

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

using namespace mlvc;

namespace {

// scalar-loop reference, double precision end to end
double psnr_oracle(const torch::Tensor& a, const torch::Tensor& b) {
    auto aa = a.contiguous();
    auto bb = b.contiguous();
    const float* ap = aa.data_ptr<float>();
    const float* bp = bb.data_ptr<float>();
    double acc = 0.0;
    for (int64_t i = 0; i < aa.numel(); ++i) {
        double d = static_cast<double>(ap[i]) - static_cast<double>(bp[i]);
        acc += d * d;
    }
    double mse = acc / static_cast<double>(aa.numel());
    if (mse <= 0) return 99.0;
    return 10.0 * std::log10(1.0 / mse);
}

} // namespace

TEST_CASE("psnr: identical frames cap at 99 dB") {
    auto a = torch::rand({3, 32, 32});
    CHECK(psnr(a, a) == doctest::Approx(99.0));
}

TEST_CASE("psnr: uniform error 0.1 gives exactly 20 dB") {
    auto a = torch::full({3, 16, 16}, 0.5f);
    auto b = torch::full({3, 16, 16}, 0.6f);
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-6));
}

TEST_CASE("psnr matches the scalar oracle to 1e-9") {
    torch::manual_seed(5);
    for (int i = 0; i < 20; ++i) {
        auto a = torch::rand({3, 24, 17});
        auto b = torch::rand({3, 24, 17});
        CHECK(std::abs(psnr(a, b) - psnr_oracle(a, b)) < 1e-9);
    }
    auto a = torch::rand({3, 8, 8});
    auto b = torch::rand({3, 8, 9});
    CHECK_THROWS_AS(psnr(a, b), DataError);
}

TEST_CASE("ms-ssim: identical frames score 1.0") {
    auto clip = synth_clip(SynthPattern::kNoise, 5, 192, 3);
    auto a = clip.frames[0].pixels;
    CHECK(msssim(a, a) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("ms-ssim is symmetric") {
    auto clip = synth_clip(SynthPattern::kNoise, 5, 192, 9);
    auto a = clip.frames[0].pixels;
    auto b = clip.frames[1].pixels;
    CHECK(std::abs(msssim(a, b) - msssim(b, a)) < 1e-9);
}

TEST_CASE("ms-ssim: inverted texture scores below 0.5") {
    auto clip = synth_clip(SynthPattern::kNoise, 5, 192, 13);
    auto a = clip.frames[0].pixels;
    auto b = 1.0f - a;
    CHECK(msssim(a, b) < 0.5);
}

TEST_CASE("ms-ssim rejects frames below the 5-scale minimum") {
    auto a = torch::rand({3, 128, 200});
    CHECK_THROWS_AS(msssim(a, a), DataError);
}

TEST_CASE("luma conversion weights") {
    auto rgb = torch::zeros({3, 4, 4});
    rgb.index_put_({0}, 1.0f);
    CHECK(rgb_to_luma(rgb).mean().item<float>() == doctest::Approx(0.299f));
}
