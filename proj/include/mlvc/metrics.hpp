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

namespace mlvc {

// PSNR over all channels in the normalized [0,1] domain; equal inputs report
// the 99 dB cap instead of infinity.
double psnr(const torch::Tensor& a, const torch::Tensor& b);

// 5-scale MS-SSIM with the standard per-scale weights
// (0.0448, 0.2856, 0.3001, 0.2363, 0.1333), averaged over channels.
// Requires min(H, W) >= 160.
double msssim(const torch::Tensor& a, const torch::Tensor& b);

// BT.601 full-range luma from an RGB (3,H,W) tensor -> (1,H,W)
torch::Tensor rgb_to_luma(const torch::Tensor& rgb);

inline constexpr double kPsnrCap = 99.0;

} // namespace mlvc
