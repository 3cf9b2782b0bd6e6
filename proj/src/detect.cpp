// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#include "haarpilot/detect.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "haarpilot/parallel.hpp"

namespace haarpilot {
namespace {

std::vector<Detection> scan_integral(const IntegralImage& ii, const Cascade& cascade, const ScanConfig& cfg) {
    const std::vector<double> scales = scan_scales(cfg, cascade.window.size, ii.width(), ii.height());
    std::vector<std::vector<Detection>> per_scale(scales.size());
    parallel_chunks(scales.size(), worker_count(), [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) {
            const double scale = scales[s];
            const int side = scaled_extent(cascade.window.size, scale);
            const int step = std::max(1, static_cast<int>(std::floor(cfg.step_fraction * side)));
            for (int y = 0; y + side <= ii.height(); y += step) {
                for (int x = 0; x + side <= ii.width(); x += step) {
                    const WindowResult r = evaluate_window(cascade, ii, {x, y}, scale);
                    if (r.accepted) per_scale[s].push_back({{x, y, side, side}, r.score, scale});
                }
            }
        }
    });
    std::vector<Detection> out;
    for (auto& v : per_scale) out.insert(out.end(), v.begin(), v.end());
    return out;
}

// Union-find with path halving; the smaller root wins so class ids follow
// first appearance.
int find_root(std::vector<int>& parent, int i) {
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

bool similar(const Rect& a, const Rect& b, double eps) {
    const double delta = eps * (std::min(a.w, b.w) + std::min(a.h, b.h)) * 0.5;
    return std::abs(a.x - b.x) <= delta && std::abs(a.y - b.y) <= delta &&
           std::abs(a.x + a.w - b.x - b.w) <= delta && std::abs(a.y + a.h - b.y - b.h) <= delta;
}

int rounded_mean(long long sum, long long n) {
    return static_cast<int>(std::floor(static_cast<double>(sum) / static_cast<double>(n) + 0.5));
}

}  // namespace

void validate(const ScanConfig& cfg) {
    if (!(cfg.scale_factor > 1.0)) throw InputError("scale factor must exceed 1");
    if (!(cfg.step_fraction >= 0.0)) throw InputError("step fraction must be non-negative");
    if (cfg.min_size < 0 || cfg.max_size < 0) throw InputError("window size limits must be non-negative");
    if (cfg.min_neighbors < 0) throw InputError("min_neighbors must be non-negative");
    if (!(cfg.group_eps >= 0.0)) throw InputError("group eps must be non-negative");
    if (cfg.working_size < 0) throw InputError("working size must be non-negative");
}

std::vector<double> scan_scales(const ScanConfig& cfg, int base, int frame_width, int frame_height) {
    validate(cfg);
    const int min_side = cfg.min_size == 0 ? base : cfg.min_size;
    if (min_side < base) {
        throw InputError("minimum window " + std::to_string(min_side) + " is below the " + std::to_string(base) +
                         "px cascade window");
    }
    const int frame_side = std::min(frame_width, frame_height);
    const int max_side = cfg.max_size == 0 ? frame_side : std::min(cfg.max_size, frame_side);
    std::vector<double> scales;
    for (double scale = static_cast<double>(min_side) / base; scaled_extent(base, scale) <= max_side;
         scale *= cfg.scale_factor) {
        scales.push_back(scale);
    }
    return scales;
}

std::vector<Detection> scan(const GrayImage& frame, const Cascade& cascade, const ScanConfig& cfg) {
    validate(cfg);
    const int base = cascade.window.size;
    if (width(frame) < base || height(frame) < base) {
        throw InputError("frame " + std::to_string(width(frame)) + "x" + std::to_string(height(frame)) +
                         " is smaller than the " + std::to_string(base) + "px window");
    }
    const int longest = std::max(width(frame), height(frame));
    if (cfg.working_size == 0 || longest <= cfg.working_size) return scan_integral(integral(frame), cascade, cfg);

    const double f = static_cast<double>(cfg.working_size) / longest;
    const int w = std::max(base, static_cast<int>(std::lround(width(frame) * f)));
    const int h = std::max(base, static_cast<int>(std::lround(height(frame) * f)));
    const double fx = static_cast<double>(width(frame)) / w;
    const double fy = static_cast<double>(height(frame)) / h;
    std::vector<Detection> dets = scan_integral(integral(resize_area(frame, w, h)), cascade, cfg);
    for (Detection& d : dets) {
        const int x0 = static_cast<int>(std::floor(d.rect.x * fx));
        const int y0 = static_cast<int>(std::floor(d.rect.y * fy));
        const int x1 = std::min(width(frame), static_cast<int>(std::floor((d.rect.x + d.rect.w) * fx)));
        const int y1 = std::min(height(frame), static_cast<int>(std::floor((d.rect.y + d.rect.h) * fy)));
        d.rect = {x0, y0, std::max(1, x1 - x0), std::max(1, y1 - y0)};
        d.scale *= fx;
    }
    return dets;
}

std::vector<Detection> group_rects(std::span<const Detection> detections, int min_neighbors, double eps) {
    const int n = static_cast<int>(detections.size());
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (!similar(detections[i].rect, detections[j].rect, eps)) continue;
            const int a = find_root(parent, i);
            const int b = find_root(parent, j);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    }

    struct Acc {
        long long x = 0, y = 0, w = 0, h = 0;
        double scale = 0.0;
        double score = 0.0;
        int count = 0;
    };
    std::vector<Acc> acc(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Acc& a = acc[static_cast<std::size_t>(find_root(parent, i))];
        const Detection& d = detections[i];
        a.x += d.rect.x;
        a.y += d.rect.y;
        a.w += d.rect.w;
        a.h += d.rect.h;
        a.scale += d.scale;
        a.score = a.count == 0 ? d.score : std::max(a.score, d.score);
        ++a.count;
    }

    std::vector<Detection> out;
    for (int i = 0; i < n; ++i) {
        const Acc& a = acc[static_cast<std::size_t>(i)];
        if (a.count == 0 || a.count < min_neighbors) continue;
        out.push_back({{rounded_mean(a.x, a.count), rounded_mean(a.y, a.count), rounded_mean(a.w, a.count),
                        rounded_mean(a.h, a.count)},
                       a.score,
                       a.scale / a.count});
    }
    return out;
}

void check_cascade_set(std::span<const Cascade> cascades) {
    std::array<bool, 6> seen{};
    for (const Cascade& c : cascades) {
        if (c.label == GestureLabel::None) throw ConfigError("cascade without a gesture label");
        auto& flag = seen[static_cast<std::size_t>(c.label)];
        if (flag) throw ConfigError("two cascades detect " + std::string(to_string(c.label)));
        flag = true;
    }
}

Classification classify_gesture(const GrayImage& frame, std::span<const Cascade> cascades, const ScanConfig& cfg) {
    check_cascade_set(cascades);
    Classification out;
    out.grouped.reserve(cascades.size());
    for (const Cascade& c : cascades) out.grouped.push_back(group_rects(scan(frame, c, cfg), cfg.min_neighbors, cfg.group_eps));

    for (GestureLabel label : kGestures) {
        for (std::size_t i = 0; i < cascades.size(); ++i) {
            if (cascades[i].label != label) continue;
            for (const Detection& d : out.grouped[i]) {
                if (!out.best || d.score > out.best->score) {
                    out.best = d;
                    out.label = label;
                }
            }
        }
    }
    return out;
}

double estimate_distance(double bbox_width_px, const DistanceCalibration& calib) {
    if (!(bbox_width_px > 0.0) || !std::isfinite(bbox_width_px)) throw InputError("bounding box width must be positive");
    if (!(calib.reference_distance_ft > 0.0) || !(calib.reference_width_px > 0.0) ||
        !std::isfinite(calib.reference_distance_ft) || !std::isfinite(calib.reference_width_px)) {
        throw InputError("distance calibration must be positive");
    }
    return calib.reference_distance_ft * calib.reference_width_px / bbox_width_px;
}

std::string detection_csv_row(const std::string& frame, GestureLabel label, const Detection& d) {
    char buf[160];
    std::snprintf(buf, sizeof buf, ",%s,%d,%d,%d,%d,%.6f,%.6f", std::string(to_string(label)).c_str(), d.rect.x,
                  d.rect.y, d.rect.w, d.rect.h, d.score, d.scale);
    return frame + buf;
}

}  // namespace haarpilot
