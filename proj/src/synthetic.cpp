// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#include "haarpilot/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace haarpilot::synthetic {
namespace fs = std::filesystem;

namespace {

// 6x6 cells; every code keeps a dark outer ring so patch borders look alike.
using BlockCode = std::array<const char*, 6>;

BlockCode block_code(GestureLabel label) {
    switch (label) {
        case GestureLabel::Fist: return {"......", "......", "..##..", "..##..", "......", "......"};
        case GestureLabel::Palm: return {"......", ".#.#..", ".#.#..", ".#.#..", ".#.#..", "......"};
        case GestureLabel::GS: return {"......", ".##...", ".##...", "...##.", "...##.", "......"};
        case GestureLabel::VS: return {"......", ".####.", "......", ".####.", "......", "......"};
        case GestureLabel::LF: return {"......", "..#...", ".####.", "..#...", "..#...", "......"};
        case GestureLabel::None: break;
    }
    throw InputError("no pattern for the None label");
}

std::uint8_t clamp_pixel(double v) { return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0)); }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw IoError("cannot write " + path.string());
}

std::string numbered(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%05zu.pgm", prefix, i);
    return buf;
}

SceneTag random_tag(Rng& rng, Distance d) {
    return {uniform_index(rng, 2) == 0 ? Illumination::DL : Illumination::WL,
            uniform_index(rng, 2) == 0 ? Background::CTB : Background::CLB, d};
}

GestureLabel other_gesture(GestureLabel label, Rng& rng) {
    std::vector<GestureLabel> others;
    for (GestureLabel g : kGestures) {
        if (g != label) others.push_back(g);
    }
    return others[uniform_index(rng, others.size())];
}

std::string rect_fields(const Rect& r) {
    return std::to_string(r.x) + ' ' + std::to_string(r.y) + ' ' + std::to_string(r.w) + ' ' + std::to_string(r.h);
}

// Annotators are not pixel exact: shift by up to 8% of the side and rescale
// by up to 8%, staying inside the frame.
Rect jitter(const Rect& r, int frame_side, Rng& rng) {
    const int side = std::clamp(static_cast<int>(std::lround(r.w * uniform_real(rng, 0.92, 1.08))), 1, frame_side);
    const int reach = std::max(1, r.w * 8 / 100);
    const int cx = r.x + r.w / 2 + uniform_int(rng, -reach, reach);
    const int cy = r.y + r.h / 2 + uniform_int(rng, -reach, reach);
    return {std::clamp(cx - side / 2, 0, frame_side - side), std::clamp(cy - side / 2, 0, frame_side - side), side, side};
}

}  // namespace

GrayImage noise_image(int w, int h, Rng& rng) {
    GrayImage img(h, w);
    for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<std::uint8_t>(uniform_index(rng, 256));
    return img;
}

GrayImage edge_patch(int side, Rng& rng) {
    if (side < 2) throw InputError("edge patch needs a side of at least 2");
    const double bright = uniform_real(rng, 150.0, 230.0);
    const double dark = uniform_real(rng, 20.0, 100.0);
    const int split = static_cast<int>(std::lround(side * uniform_real(rng, 0.45, 0.55)));
    GrayImage img(side, side);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) img(y, x) = clamp_pixel((x < split ? bright : dark) + 20.0 * approx_normal(rng));
    }
    return img;
}

GrayImage gesture_patch(GestureLabel label, int side, Rng& rng) {
    const BlockCode code = block_code(label);
    if (side < 6) throw InputError("gesture patch needs a side of at least 6");
    const double gain = uniform_real(rng, 0.8, 1.2);
    const double bright = 200.0 * gain;
    const double dark = 55.0 * gain;
    GrayImage img(side, side);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            const bool on = code[static_cast<std::size_t>(y * 6 / side)][x * 6 / side] == '#';
            img(y, x) = clamp_pixel((on ? bright : dark) + 20.0 * approx_normal(rng));
        }
    }
    return img;
}

GrayImage background(int w, int h, Background kind, Rng& rng) {
    GrayImage img(h, w);
    if (kind == Background::CLB) {
        const double base = uniform_real(rng, 90.0, 170.0);
        const double gx = uniform_real(rng, -40.0, 40.0) / std::max(1, w);
        const double gy = uniform_real(rng, -40.0, 40.0) / std::max(1, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) img(y, x) = clamp_pixel(base + gx * x + gy * y + 4.0 * approx_normal(rng));
        }
        return img;
    }
    img.setConstant(static_cast<std::uint8_t>(uniform_int(rng, 60, 190)));
    for (int i = 0; i < 25; ++i) {
        const int rw = uniform_int(rng, 4, std::max(4, w * 2 / 5));
        const int rh = uniform_int(rng, 4, std::max(4, h * 2 / 5));
        const int x0 = uniform_int(rng, -rw / 2, w - rw / 2);
        const int y0 = uniform_int(rng, -rh / 2, h - rh / 2);
        const auto value = static_cast<std::uint8_t>(uniform_index(rng, 256));
        for (int y = std::max(0, y0); y < std::min(h, y0 + rh); ++y) {
            for (int x = std::max(0, x0); x < std::min(w, x0 + rw); ++x) img(y, x) = value;
        }
    }
    for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = clamp_pixel(img.data()[i] + 6.0 * approx_normal(rng));
    return img;
}

void paste(GrayImage& dst, const GrayImage& src, Point at) {
    if (at.x < 0 || at.y < 0 || at.x + width(src) > width(dst) || at.y + height(src) > height(dst)) {
        throw BoundsError("pasted patch leaves the destination image");
    }
    dst.block(at.y, at.x, height(src), width(src)) = src;
}

void scale_brightness(GrayImage& img, double gain) {
    for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = clamp_pixel(img.data()[i] * gain);
}

std::pair<int, int> gesture_side_range(Distance d) { return d == Distance::LT3 ? std::pair{36, 60} : std::pair{14, 26}; }

Scene scene(GestureLabel label, const SceneTag& tag, Rng& rng, int frame_side) {
    auto [lo, hi] = gesture_side_range(tag.distance);
    hi = std::min(hi, frame_side);
    lo = std::min(lo, hi);
    Scene s;
    s.label = label;
    s.tag = tag;
    s.frame = background(frame_side, frame_side, tag.background, rng);
    const int side = uniform_int(rng, lo, hi);
    s.truth = {uniform_int(rng, 0, frame_side - side), uniform_int(rng, 0, frame_side - side), side, side};
    if (tag.distance == Distance::MT3) {
        // A far gesture is a near one seen smaller: render large, then downscale.
        const int near_side = std::min(frame_side, 3 * side);
        paste(s.frame, resize_area(gesture_patch(label, near_side, rng), side, side), {s.truth.x, s.truth.y});
    } else {
        paste(s.frame, gesture_patch(label, side, rng), {s.truth.x, s.truth.y});
    }
    if (tag.illumination == Illumination::DL) scale_brightness(s.frame, kDimGain);
    return s;
}

TrainingSet gesture_training_set(GestureLabel label, std::size_t positives, std::size_t pool_frames,
                                 const WindowSpec& spec, Rng& rng) {
    validate(spec);
    TrainingSet out;
    out.positives.reserve(positives);
    for (std::size_t i = 0; i < positives; ++i) {
        const Scene s = scene(label, random_tag(rng, Distance::LT3), rng);
        out.positives.push_back(resample_area(integral(s.frame), jitter(s.truth, kFrameSide, rng), spec.size, spec.size));
    }
    for (std::size_t i = 0; i < pool_frames; ++i) {
        if (i % 5 == 0) {
            GrayImage bg = background(kFrameSide, kFrameSide, uniform_index(rng, 2) ? Background::CTB : Background::CLB, rng);
            if (uniform_index(rng, 2)) scale_brightness(bg, kDimGain);
            out.negative_pool.push_back(std::move(bg));
        } else if (i % 5 == 1) {
            const Distance d = uniform_index(rng, 2) ? Distance::LT3 : Distance::MT3;
            out.negative_pool.push_back(scene(other_gesture(label, rng), random_tag(rng, d), rng).frame);
        } else {
            // Close crops of another gesture, so mining sees its parts as well as the whole.
            const Scene s = scene(other_gesture(label, rng), random_tag(rng, Distance::LT3), rng);
            const int margin = s.truth.w / 4;
            const int x0 = std::max(0, s.truth.x - uniform_int(rng, 0, margin));
            const int y0 = std::max(0, s.truth.y - uniform_int(rng, 0, margin));
            const int x1 = std::min(kFrameSide, s.truth.x + s.truth.w + uniform_int(rng, 0, margin));
            const int y1 = std::min(kFrameSide, s.truth.y + s.truth.h + uniform_int(rng, 0, margin));
            out.negative_pool.push_back(s.frame.block(y0, x0, y1 - y0, x1 - x0));
        }
    }
    return out;
}

EdgeSet edge_set(std::size_t positives, std::size_t negatives, const WindowSpec& spec, Rng& rng) {
    validate(spec);
    EdgeSet out;
    for (std::size_t i = 0; i < positives; ++i) out.positives.push_back(edge_patch(spec.size, rng));
    for (std::size_t i = 0; i < negatives; ++i) out.negatives.push_back(noise_image(spec.size, spec.size, rng));
    return out;
}

std::vector<Scene> degradation_suite(std::size_t per_cell, Rng& rng) {
    std::vector<Scene> out;
    for (const SceneTag& tag : all_scene_tags()) {
        for (GestureLabel g : kGestures) {
            for (std::size_t i = 0; i < per_cell; ++i) out.push_back(scene(g, tag, rng));
        }
    }
    return out;
}

WrittenDataset write_dataset(const fs::path& root, const DatasetOptions& options, Rng& rng) {
    WrittenDataset out;
    const WindowSpec spec;

    const fs::path edge = root / "edge";
    fs::create_directories(edge / "pos");
    fs::create_directories(edge / "neg");
    std::string annotations;
    for (std::size_t i = 0; i < options.positives; ++i) {
        GrayImage frame = noise_image(2 * spec.size, 2 * spec.size, rng);
        const int side = uniform_int(rng, spec.size, 2 * spec.size);
        const Rect r{uniform_int(rng, 0, 2 * spec.size - side), uniform_int(rng, 0, 2 * spec.size - side), side, side};
        paste(frame, edge_patch(side, rng), {r.x, r.y});
        const std::string name = numbered("pos/p", i);
        write_pgm(frame, edge / name);
        annotations += name + " 1 " + rect_fields(r) + '\n';
    }
    std::string list;
    for (std::size_t i = 0; i < options.negatives; ++i) {
        const std::string name = numbered("neg/n", i);
        write_pgm(noise_image(uniform_int(rng, spec.size, 3 * spec.size), uniform_int(rng, spec.size, 3 * spec.size), rng),
                  edge / name);
        list += name + '\n';
    }
    out.edge_annotations = edge / "positives.txt";
    out.edge_negatives = edge / "negatives.txt";
    write_text(out.edge_annotations, annotations);
    write_text(out.edge_negatives, list);

    for (GestureLabel g : kGestures) {
        const fs::path dir = root / "gestures" / std::string(to_string(g));
        fs::create_directories(dir / "pos");
        fs::create_directories(dir / "neg");
        annotations.clear();
        list.clear();
        for (std::size_t i = 0; i < options.positives; ++i) {
            const Scene s = scene(g, random_tag(rng, Distance::LT3), rng);
            const std::string name = numbered("pos/p", i);
            write_pgm(s.frame, dir / name);
            annotations += name + " 1 " + rect_fields(s.truth) + '\n';
        }
        for (std::size_t i = 0; i < options.negatives; ++i) {
            GrayImage frame =
                i % 2 == 0 ? background(kFrameSide, kFrameSide, uniform_index(rng, 2) ? Background::CTB : Background::CLB, rng)
                           : scene(other_gesture(g, rng), random_tag(rng, Distance::LT3), rng).frame;
            const std::string name = numbered("neg/n", i);
            write_pgm(frame, dir / name);
            list += name + '\n';
        }
        GestureSetFiles files{g, dir / "positives.txt", dir / "negatives.txt"};
        write_text(files.annotations, annotations);
        write_text(files.negatives, list);
        out.gesture_sets.push_back(files);
    }

    const fs::path eval = root / "eval";
    fs::create_directories(eval / "frames");
    std::string manifest = "path,label,illumination,background,distance\n";
    std::size_t i = 0;
    for (const Scene& s : degradation_suite(options.per_cell, rng)) {
        const std::string name = numbered("frames/f", i++);
        write_pgm(s.frame, eval / name);
        manifest += name + ',' + std::string(to_string(s.label)) + ',' + std::string(to_string(s.tag.illumination)) +
                    ',' + std::string(to_string(s.tag.background)) + ',' + std::string(to_string(s.tag.distance)) + '\n';
    }
    out.manifest = eval / "manifest.csv";
    write_text(out.manifest, manifest);
    return out;
}

}  // namespace haarpilot::synthetic
