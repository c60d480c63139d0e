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

#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mlvc/common.hpp"

namespace mlvc {

enum class FrameKind : uint8_t { I = 0, P = 1 };

// One picture in normalized RGB, shape (3, H, W), values in [0, 1].
struct Frame {
    torch::Tensor pixels;
    int64_t index = 0;
    FrameKind kind = FrameKind::P;

    int64_t height() const { return pixels.size(1); }
    int64_t width() const { return pixels.size(2); }
};

struct ClipSpec {
    int crop_h = 192;
    int crop_w = 192;
    int length = 16;
};

struct YuvGeometry {
    int width = 0;
    int height = 0;
    double fps = 30.0;
};

struct OriginalSize {
    int64_t height = 0;
    int64_t width = 0;
};

// 8-bit <-> normalized float; denormalize(normalize(v)) == v for all v in 0..255
inline float normalize_u8(uint8_t v) { return static_cast<float>(v) / 255.0f; }
inline uint8_t denormalize_u8(float x) {
    float v = std::round(x * 255.0f);
    if (v < 0.0f) v = 0.0f;
    if (v > 255.0f) v = 255.0f;
    return static_cast<uint8_t>(v);
}

// Directory of image files (sorted lexicographically) or a raw .yuv file
// (planar 8-bit 4:2:0, BT.601 full range; geometry must be supplied).
std::vector<Frame> load_sequence(const std::filesystem::path& path,
                                 std::optional<int64_t> limit = std::nullopt,
                                 std::optional<YuvGeometry> yuv = std::nullopt);

void save_frame_png(const Frame& frame, const std::filesystem::path& file);
void save_sequence(const std::vector<Frame>& frames, const std::filesystem::path& dir);

// Pads bottom/right with edge replication so H and W become multiples of
// `multiple`; unpad crops back to the recorded size, bit-exactly.
std::pair<Frame, OriginalSize> pad_to_multiple(const Frame& frame, int64_t multiple);
Frame unpad(const Frame& frame, OriginalSize size);

// Random same-window crops of `spec.length` consecutive frames. Windows start
// every `stride` frames; the spatial crop is drawn once per clip.
std::vector<std::vector<Frame>> extract_training_clips(const std::vector<Frame>& sequence,
                                                       const ClipSpec& spec, int stride,
                                                       std::mt19937& rng);

enum class SynthPattern { kShift, kRotate, kNoise };

struct SynthClip {
    std::vector<Frame> frames;
    // backward flow from frame t to frame t-1 at full resolution, (T-1, 2, H, W);
    // empty for temporally independent patterns
    torch::Tensor gt_flow;
};

// Deterministic synthetic clips with known ground-truth motion. `velocity`
// applies to kShift (pixels/frame, may be fractional); kRotate turns
// `deg_per_frame` degrees per frame about the centre.
SynthClip synth_clip(SynthPattern pattern, int length, int size, uint32_t seed = 1,
                     std::pair<double, double> velocity = {1.0, 0.0},
                     double deg_per_frame = 1.0);

// Stack frames into a (T, 3, H, W) tensor (training corpus form).
torch::Tensor stack_frames(const std::vector<Frame>& frames);

} // namespace mlvc
