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

#include "mlvc/metrics.hpp"

#include <cmath>
#include <vector>

#include "mlvc/common.hpp"

namespace mlvc {

namespace {

void check_pair(const torch::Tensor& a, const torch::Tensor& b) {
    if (a.sizes() != b.sizes()) throw DataError("metric inputs differ in shape");
}

// 11-tap Gaussian, sigma 1.5, normalized (shrinks near small scales)
std::vector<double> gauss_window(int taps) {
    std::vector<double> w(taps);
    const double sigma = 1.5;
    const double c = (taps - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < taps; ++i) {
        w[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

struct ScaleStats {
    double luminance = 0.0;
    double contrast_structure = 0.0;
};

// Mean luminance / contrast-structure SSIM terms over one channel plane
// ('valid' windows only, as in the reference formulation).
ScaleStats ssim_plane(const std::vector<double>& x, const std::vector<double>& y, int h, int w,
                      int taps) {
    const double C1 = 0.01 * 0.01; // L = 1 in normalized domain
    const double C2 = 0.03 * 0.03;
    auto win = gauss_window(taps);

    ScaleStats s;
    int64_t count = 0;
    for (int by = 0; by + taps <= h; ++by) {
        for (int bx = 0; bx + taps <= w; ++bx) {
            double mx = 0, my = 0;
            for (int i = 0; i < taps; ++i)
                for (int j = 0; j < taps; ++j) {
                    double wij = win[i] * win[j];
                    mx += wij * x[(by + i) * w + (bx + j)];
                    my += wij * y[(by + i) * w + (bx + j)];
                }
            double vx = 0, vy = 0, cov = 0;
            for (int i = 0; i < taps; ++i)
                for (int j = 0; j < taps; ++j) {
                    double wij = win[i] * win[j];
                    double dx = x[(by + i) * w + (bx + j)] - mx;
                    double dy = y[(by + i) * w + (bx + j)] - my;
                    vx += wij * dx * dx;
                    vy += wij * dy * dy;
                    cov += wij * dx * dy;
                }
            s.luminance += (2 * mx * my + C1) / (mx * mx + my * my + C1);
            s.contrast_structure += (2 * cov + C2) / (vx + vy + C2);
            ++count;
        }
    }
    if (count > 0) {
        s.luminance /= static_cast<double>(count);
        s.contrast_structure /= static_cast<double>(count);
    }
    return s;
}

std::vector<double> halve_plane(const std::vector<double>& x, int h, int w) {
    std::vector<double> out((h / 2) * static_cast<size_t>(w / 2));
    for (int y = 0; y < h / 2; ++y)
        for (int xx = 0; xx < w / 2; ++xx)
            out[y * (w / 2) + xx] = 0.25 * (x[(2 * y) * w + 2 * xx] + x[(2 * y) * w + 2 * xx + 1] +
                                            x[(2 * y + 1) * w + 2 * xx] +
                                            x[(2 * y + 1) * w + 2 * xx + 1]);
    return out;
}

} // namespace

double psnr(const torch::Tensor& a, const torch::Tensor& b) {
    check_pair(a, b);
    auto diff = (a.to(torch::kFloat64) - b.to(torch::kFloat64));
    double mse = diff.pow(2).mean().item<double>();
    if (mse <= 0.0) return kPsnrCap;
    double v = 10.0 * std::log10(1.0 / mse);
    return std::min(v, kPsnrCap);
}

double msssim(const torch::Tensor& a, const torch::Tensor& b) {
    check_pair(a, b);
    const int64_t C = a.size(0);
    int h = static_cast<int>(a.size(1));
    int w = static_cast<int>(a.size(2));
    if (std::min(h, w) < 160) throw DataError("frame too small for 5-scale ms-ssim");

    static const double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

    double result = 0.0;
    auto ad = a.to(torch::kFloat64).contiguous();
    auto bd = b.to(torch::kFloat64).contiguous();
    for (int64_t c = 0; c < C; ++c) {
        const double* ap = ad[c].data_ptr<double>();
        const double* bp = bd[c].data_ptr<double>();
        std::vector<double> x(ap, ap + static_cast<size_t>(h) * w);
        std::vector<double> y(bp, bp + static_cast<size_t>(h) * w);

        int ch = h, cw = w;
        double value = 1.0;
        for (int scale = 0; scale < 5; ++scale) {
            int taps = std::min(11, std::min(ch, cw));
            auto s = ssim_plane(x, y, ch, cw, taps);
            double cs = std::max(s.contrast_structure, 0.0);
            if (scale < 4) {
                value *= std::pow(cs, kWeights[scale]);
                x = halve_plane(x, ch, cw);
                y = halve_plane(y, ch, cw);
                ch /= 2;
                cw /= 2;
            } else {
                double l = std::max(s.luminance, 0.0);
                value *= std::pow(l * cs, kWeights[scale]);
            }
        }
        result += value;
    }
    return result / static_cast<double>(C);
}

torch::Tensor rgb_to_luma(const torch::Tensor& rgb) {
    auto r = rgb.index({0});
    auto g = rgb.index({1});
    auto b = rgb.index({2});
    return (0.299f * r + 0.587f * g + 0.114f * b).unsqueeze(0);
}

} // namespace mlvc
