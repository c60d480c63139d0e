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

#include <vector>

namespace mlvc {

// Motion fields are (N, 2, H, W) float tensors in pixel units of their own
// grid, channel 0 horizontal, channel 1 vertical, backward convention:
// warp(reference, flow) predicts the current frame.

// Bilinear sampling of `data` (N,C,H,W) at p + flow(p). Out-of-bounds
// coordinates are clamped to the border. Differentiable in both arguments.
torch::Tensor bilinear_warp(const torch::Tensor& data, const torch::Tensor& flow);

// Elementwise sum base + sum(prior_warped): the accumulated sampling flow for
// the next-older reference in a warp chain.
torch::Tensor compose_chain(const torch::Tensor& base,
                            const std::vector<torch::Tensor>& prior_warped);

// Sampling flows for successively older references. Entry i warps the
// (i+1)-frames-old reference towards the current frame:
//   flows[0] = base
//   flows[i] = base + sum_{k=1..i} warp(mv_buffer[k-1], flows[k-1])
// mv_buffer is ordered newest first. `count` entries are produced.
std::vector<torch::Tensor> chain_flows(const torch::Tensor& base,
                                       const std::vector<torch::Tensor>& mv_buffer, int count);

// Pairwise 2x2 averaging; one call halves H and W. Preserves constant fields
// bit-exactly. Requires even spatial sizes.
torch::Tensor halve2x(const torch::Tensor& x);

// Bilinear 2x upsampling (half-pixel-centre convention), exact on constants.
torch::Tensor upsample2x(const torch::Tensor& x);

// Flow pyramids: vector magnitudes follow the grid (x0.5 per level down,
// x2 per level up).
torch::Tensor downsample_flow(const torch::Tensor& flow, int levels);
torch::Tensor upsample_flow_2x(const torch::Tensor& flow);

// avg-pooled image pyramid, levels entries, level 0 is the input
std::vector<torch::Tensor> image_pyramid(const torch::Tensor& img, int levels);

} // namespace mlvc
