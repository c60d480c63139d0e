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

#include "mlvc/media.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mlvc {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".ppm";
}

torch::Tensor mat_to_tensor(const cv::Mat& bgr) {
    CV_Assert(bgr.isContinuous() && bgr.type() == CV_8UC3);
    auto t = torch::from_blob(bgr.data, {bgr.rows, bgr.cols, 3}, torch::kUInt8).clone();
    t = t.permute({2, 0, 1}); // BGR, CHW
    t = t.index({torch::tensor({2, 1, 0})});
    return t.to(torch::kFloat32).div_(255.0f).contiguous();
}

std::vector<Frame> load_yuv(const fs::path& path, const YuvGeometry& geom,
                            std::optional<int64_t> limit) {
    const int w = geom.width, h = geom.height;
    if (w <= 0 || h <= 0) throw DataError("yuv input requires --width and --height");
    const size_t frame_bytes = static_cast<size_t>(w) * h * 3 / 2;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());

    std::vector<Frame> frames;
    std::vector<uint8_t> buf(frame_bytes);
    while (!(limit && static_cast<int64_t>(frames.size()) >= *limit)) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(frame_bytes));
        if (in.gcount() == 0) break;
        if (in.gcount() != static_cast<std::streamsize>(frame_bytes))
            throw DataError("truncated yuv frame in " + path.string());

        auto rgb = torch::empty({3, h, w}, torch::kFloat32);
        auto acc = rgb.accessor<float, 3>();
        const uint8_t* yp = buf.data();
        const uint8_t* up = yp + static_cast<size_t>(w) * h;
        const uint8_t* vp = up + static_cast<size_t>(w / 2) * (h / 2);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                // BT.601 full range
                float Y = yp[y * w + x];
                float U = up[(y / 2) * (w / 2) + x / 2] - 128.0f;
                float V = vp[(y / 2) * (w / 2) + x / 2] - 128.0f;
                float r = Y + 1.402f * V;
                float g = Y - 0.344136f * U - 0.714136f * V;
                float b = Y + 1.772f * U;
                acc[0][y][x] = std::clamp(r / 255.0f, 0.0f, 1.0f);
                acc[1][y][x] = std::clamp(g / 255.0f, 0.0f, 1.0f);
                acc[2][y][x] = std::clamp(b / 255.0f, 0.0f, 1.0f);
            }
        }
        Frame f;
        f.pixels = rgb;
        f.index = static_cast<int64_t>(frames.size());
        f.kind = frames.empty() ? FrameKind::I : FrameKind::P;
        frames.push_back(std::move(f));
    }
    if (frames.empty()) throw DataError("no frames in " + path.string());
    return frames;
}

// smooth textured image in [0.1, 0.9]; deterministic in the seed
torch::Tensor make_texture(int h, int w, uint32_t seed) {
    torch::Tensor noise;
    {
        std::mt19937 rng(seed);
        noise = torch::empty({3, h, w}, torch::kFloat32);
        auto* p = noise.data_ptr<float>();
        std::uniform_real_distribution<float> dist(0.0f, 1.0f);
        for (int64_t i = 0; i < noise.numel(); ++i) p[i] = dist(rng);
    }
    auto blur = [](const torch::Tensor& x, int k) {
        namespace F = torch::nn::functional;
        auto t = x.unsqueeze(0);
        t = F::avg_pool2d(t, F::AvgPool2dFuncOptions(k).stride(1).padding(k / 2)
                                 .count_include_pad(false));
        return t.squeeze(0);
    };
    auto smooth = blur(blur(noise, 9), 9);
    auto detail = blur(noise, 3);
    auto tex = 0.65f * smooth + 0.35f * detail;
    auto lo = tex.min();
    auto hi = tex.max();
    tex = (tex - lo) / torch::clamp_min(hi - lo, 1e-6f);
    return tex * 0.8f + 0.1f;
}

} // namespace

std::vector<Frame> load_sequence(const fs::path& path, std::optional<int64_t> limit,
                                 std::optional<YuvGeometry> yuv) {
    if (!fs::exists(path)) throw DataError("no such path: " + path.string());

    if (fs::is_regular_file(path)) {
        if (path.extension() == ".yuv") {
            if (!yuv) throw DataError("yuv input requires --width and --height");
            return load_yuv(path, *yuv, limit);
        }
        throw DataError("unsupported input file (expected directory or .yuv): " + path.string());
    }

    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path))
        if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no image files in " + path.string());

    std::vector<Frame> frames;
    for (const auto& f : files) {
        if (limit && static_cast<int64_t>(frames.size()) >= *limit) break;
        cv::Mat img = cv::imread(f.string(), cv::IMREAD_COLOR);
        if (img.empty()) throw DataError("cannot read image " + f.string());
        Frame fr;
        fr.pixels = mat_to_tensor(img);
        fr.index = static_cast<int64_t>(frames.size());
        fr.kind = frames.empty() ? FrameKind::I : FrameKind::P;
        if (!frames.empty() && (fr.height() != frames[0].height() || fr.width() != frames[0].width()))
            throw DataError("inconsistent resolutions in " + path.string());
        frames.push_back(std::move(fr));
    }
    return frames;
}

void save_frame_png(const Frame& frame, const fs::path& file) {
    auto t = frame.pixels.mul(255.0f).round().clamp(0.0f, 255.0f).to(torch::kUInt8);
    t = t.index({torch::tensor({2, 1, 0})});   // RGB -> BGR
    t = t.permute({1, 2, 0}).contiguous();     // HWC
    cv::Mat bgr(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), CV_8UC3, t.data_ptr());
    if (!cv::imwrite(file.string(), bgr)) throw DataError("cannot write " + file.string());
}

void save_sequence(const std::vector<Frame>& frames, const fs::path& dir) {
    fs::create_directories(dir);
    char name[32];
    for (const auto& f : frames) {
        std::snprintf(name, sizeof(name), "frame_%05lld.png", static_cast<long long>(f.index));
        save_frame_png(f, dir / name);
    }
}

std::pair<Frame, OriginalSize> pad_to_multiple(const Frame& frame, int64_t multiple) {
    if (multiple < 1) throw DataError("pad multiple must be >= 1");
    OriginalSize orig{frame.height(), frame.width()};
    int64_t ph = (frame.height() + multiple - 1) / multiple * multiple;
    int64_t pw = (frame.width() + multiple - 1) / multiple * multiple;
    if (ph == frame.height() && pw == frame.width()) return {frame, orig};

    namespace F = torch::nn::functional;
    auto padded = F::pad(frame.pixels.unsqueeze(0),
                         F::PadFuncOptions({0, pw - frame.width(), 0, ph - frame.height()})
                             .mode(torch::kReplicate))
                      .squeeze(0);
    Frame out = frame;
    out.pixels = padded;
    return {out, orig};
}

Frame unpad(const Frame& frame, OriginalSize size) {
    Frame out = frame;
    out.pixels = frame.pixels.index({torch::indexing::Slice(),
                                     torch::indexing::Slice(0, size.height),
                                     torch::indexing::Slice(0, size.width)});
    return out;
}

std::vector<std::vector<Frame>> extract_training_clips(const std::vector<Frame>& sequence,
                                                       const ClipSpec& spec, int stride,
                                                       std::mt19937& rng) {
    if (static_cast<int>(sequence.size()) < spec.length)
        throw DataError("sequence shorter than clip length");
    const int64_t h = sequence[0].height(), w = sequence[0].width();
    if (h < spec.crop_h || w < spec.crop_w) throw DataError("frames smaller than crop window");

    std::vector<std::vector<Frame>> clips;
    for (size_t start = 0; start + spec.length <= sequence.size();
         start += static_cast<size_t>(std::max(1, stride))) {
        std::uniform_int_distribution<int64_t> dy(0, h - spec.crop_h);
        std::uniform_int_distribution<int64_t> dx(0, w - spec.crop_w);
        int64_t y0 = dy(rng), x0 = dx(rng);
        std::vector<Frame> clip;
        clip.reserve(spec.length);
        for (int i = 0; i < spec.length; ++i) {
            const Frame& src = sequence[start + i];
            Frame f;
            f.pixels = src.pixels
                           .index({torch::indexing::Slice(),
                                   torch::indexing::Slice(y0, y0 + spec.crop_h),
                                   torch::indexing::Slice(x0, x0 + spec.crop_w)})
                           .contiguous();
            f.index = i;
            f.kind = i == 0 ? FrameKind::I : FrameKind::P;
            clip.push_back(std::move(f));
        }
        clips.push_back(std::move(clip));
    }
    return clips;
}

SynthClip synth_clip(SynthPattern pattern, int length, int size, uint32_t seed,
                     std::pair<double, double> velocity, double deg_per_frame) {
    if (length < 5) throw DataError("synthetic clips need length >= 5");
    SynthClip clip;

    auto push = [&](torch::Tensor px, int i) {
        Frame f;
        f.pixels = px.contiguous();
        f.index = i;
        f.kind = i == 0 ? FrameKind::I : FrameKind::P;
        clip.frames.push_back(std::move(f));
    };

    if (pattern == SynthPattern::kNoise) {
        for (int i = 0; i < length; ++i) {
            auto tex = make_texture(size, size, seed + 977u * static_cast<uint32_t>(i));
            push(tex, i);
        }
        return clip;
    }

    // margin so every frame's crop stays inside the master texture
    const double vx = velocity.first, vy = velocity.second;
    int margin = 8 + static_cast<int>(std::ceil(std::max(std::abs(vx), std::abs(vy)) * length));
    if (pattern == SynthPattern::kRotate) margin = 8 + size / 2;
    const int big = size + 2 * margin;
    auto tex = make_texture(big, big, seed);

    clip.gt_flow = torch::zeros({length - 1, 2, size, size}, torch::kFloat32);

    auto sample_window = [&](double ox, double oy) {
        // bilinear sample of the big texture at offset (ox, oy)
        auto out = torch::empty({3, size, size}, torch::kFloat32);
        auto o = out.accessor<float, 3>();
        auto tacc = tex.accessor<float, 3>();
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                double sx = ox + x, sy = oy + y;
                int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
                double fx = sx - x0, fy = sy - y0;
                int x1 = std::min(x0 + 1, big - 1), y1 = std::min(y0 + 1, big - 1);
                for (int c = 0; c < 3; ++c) {
                    double v00 = tacc[c][y0][x0], v01 = tacc[c][y0][x1];
                    double v10 = tacc[c][y1][x0], v11 = tacc[c][y1][x1];
                    o[c][y][x] = static_cast<float>((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                                    fy * ((1 - fx) * v10 + fx * v11));
                }
            }
        }
        return out;
    };

    if (pattern == SynthPattern::kShift) {
        // frame t shows the window at origin + t*velocity; backward flow from
        // frame t to t-1 is exactly the velocity vector
        for (int i = 0; i < length; ++i)
            push(sample_window(margin + vx * i, margin + vy * i), i);
        for (int i = 0; i + 1 < length; ++i) {
            clip.gt_flow[i][0].fill_(static_cast<float>(vx));
            clip.gt_flow[i][1].fill_(static_cast<float>(vy));
        }
        return clip;
    }

    // kRotate: sample the master texture under a rotation of i*deg about the
    // window centre
    const double cx = (size - 1) / 2.0, cy = (size - 1) / 2.0;
    for (int i = 0; i < length; ++i) {
        double a = deg_per_frame * i * M_PI / 180.0;
        double ca = std::cos(a), sa = std::sin(a);
        auto out = torch::empty({3, size, size}, torch::kFloat32);
        auto o = out.accessor<float, 3>();
        auto tacc = tex.accessor<float, 3>();
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                double rx = ca * (x - cx) - sa * (y - cy) + cx;
                double ry = sa * (x - cx) + ca * (y - cy) + cy;
                double sx = rx + margin, sy = ry + margin;
                int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
                double fx = sx - x0, fy = sy - y0;
                int x1 = std::min(x0 + 1, big - 1), y1 = std::min(y0 + 1, big - 1);
                for (int c = 0; c < 3; ++c) {
                    double v00 = tacc[c][y0][x0], v01 = tacc[c][y0][x1];
                    double v10 = tacc[c][y1][x0], v11 = tacc[c][y1][x1];
                    o[c][y][x] = static_cast<float>((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                                    fy * ((1 - fx) * v10 + fx * v11));
                }
            }
        }
        push(out, i);
    }
    // backward flow t -> t-1: the matching point of p lies one frame-delta
    // further along the rotation, q - c = R(+deg) (p - c)
    const double a = deg_per_frame * M_PI / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);
    for (int i = 0; i + 1 < length; ++i) {
        auto f = clip.gt_flow[i];
        auto facc = f.accessor<float, 3>();
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                double px = ca * (x - cx) - sa * (y - cy) + cx;
                double py = sa * (x - cx) + ca * (y - cy) + cy;
                facc[0][y][x] = static_cast<float>(px - x);
                facc[1][y][x] = static_cast<float>(py - y);
            }
    }
    return clip;
}

torch::Tensor stack_frames(const std::vector<Frame>& frames) {
    std::vector<torch::Tensor> ts;
    ts.reserve(frames.size());
    for (const auto& f : frames) ts.push_back(f.pixels);
    return torch::stack(ts, 0);
}

} // namespace mlvc
