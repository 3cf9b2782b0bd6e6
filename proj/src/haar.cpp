// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#include "haarpilot/haar.hpp"

#include <cmath>

namespace haarpilot {
namespace {

std::uint64_t pack(const HaarFeature& f) {
    return (static_cast<std::uint64_t>(f.kind) << 48) | (static_cast<std::uint64_t>(f.x & 0xfff) << 36) |
           (static_cast<std::uint64_t>(f.y & 0xfff) << 24) | (static_cast<std::uint64_t>(f.w & 0xfff) << 12) |
           static_cast<std::uint64_t>(f.h & 0xfff);
}

// Per-cell weights in row-major cell order.
std::span<const int> cell_weights(HaarKind kind) {
    static constexpr int two[] = {1, -1};
    static constexpr int three[] = {1, -2, 1};
    static constexpr int four[] = {1, -1, -1, 1};
    switch (kind) {
        case HaarKind::TwoH:
        case HaarKind::TwoV:
            return two;
        case HaarKind::ThreeH:
        case HaarKind::ThreeV:
            return three;
        case HaarKind::FourDiag:
            return four;
    }
    return {};
}

}  // namespace

std::string_view to_string(HaarKind kind) {
    switch (kind) {
        case HaarKind::TwoH: return "TwoH";
        case HaarKind::TwoV: return "TwoV";
        case HaarKind::ThreeH: return "ThreeH";
        case HaarKind::ThreeV: return "ThreeV";
        case HaarKind::FourDiag: return "FourDiag";
    }
    return "?";
}

HaarKind parse_haar_kind(std::string_view token) {
    for (HaarKind k : kHaarKinds) {
        if (to_string(k) == token) return k;
    }
    throw InputError("unknown haar kind '" + std::string(token) + "'");
}

CellGrid cell_grid(HaarKind kind) {
    switch (kind) {
        case HaarKind::TwoH: return {2, 1};
        case HaarKind::TwoV: return {1, 2};
        case HaarKind::ThreeH: return {3, 1};
        case HaarKind::ThreeV: return {1, 3};
        case HaarKind::FourDiag: return {2, 2};
    }
    return {};
}

void validate(const WindowSpec& spec) {
    if (spec.size < 4) throw InputError("window size must be at least 4, got " + std::to_string(spec.size));
}

std::vector<HaarFeature> enumerate_features(int base_size) {
    std::vector<HaarFeature> out;
    for (HaarKind kind : kHaarKinds) {
        const CellGrid g = cell_grid(kind);
        for (int y = 0; y < base_size; ++y) {
            for (int x = 0; x < base_size; ++x) {
                for (int h = 1; y + g.rows * h <= base_size; ++h) {
                    for (int w = 1; x + g.cols * w <= base_size; ++w) {
                        out.push_back({kind, x, y, w, h});
                    }
                }
            }
        }
    }
    return out;
}

std::vector<HaarFeature> enumerate_features(const WindowSpec& spec) {
    return enumerate_features(spec.size);
}

std::string serialize(const HaarFeature& f) {
    return std::string(to_string(f.kind)) + " " + std::to_string(f.x) + " " + std::to_string(f.y) + " " +
           std::to_string(f.w) + " " + std::to_string(f.h);
}

int scaled_extent(int v, double scale) {
    // The epsilon keeps exact products such as 3 * (4/3) from flooring down.
    return static_cast<int>(std::floor(v * scale + 1e-9));
}

PlacedFeature place(const HaarFeature& f, Point origin, double scale) {
    const CellGrid g = cell_grid(f.kind);
    const int cw = std::max(1, scaled_extent(f.w, scale));
    const int ch = std::max(1, scaled_extent(f.h, scale));
    const int ox = origin.x + scaled_extent(f.x, scale);
    const int oy = origin.y + scaled_extent(f.y, scale);
    const auto weights = cell_weights(f.kind);

    PlacedFeature p;
    p.box = {ox, oy, cw * g.cols, ch * g.rows};
    for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) {
            const int i = r * g.cols + c;
            p.cells[i] = {{ox + c * cw, oy + r * ch, cw, ch}, weights[i]};
        }
    }
    p.cell_count = g.rows * g.cols;
    return p;
}

std::int64_t feature_sum(const IntegralImage& ii, const HaarFeature& f, Point origin, double scale) {
    const PlacedFeature p = place(f, origin, scale);
    check_bounds(ii, p.box);
    std::int64_t acc = 0;
    for (int i = 0; i < p.cell_count; ++i) acc += p.cells[i].weight * corner_sum(ii.sum, p.cells[i].rect);
    return acc;
}

double eval_feature(const IntegralImage& ii, const HaarFeature& f, Point origin, double scale,
                    double inv_stddev) {
    const PlacedFeature p = place(f, origin, scale);
    check_bounds(ii, p.box);
    std::int64_t acc = 0;
    for (int i = 0; i < p.cell_count; ++i) acc += p.cells[i].weight * corner_sum(ii.sum, p.cells[i].rect);
    return static_cast<double>(acc) * inv_stddev / static_cast<double>(p.box.area());
}

FeatureBank::FeatureBank(WindowSpec spec) : spec_(spec), features_(enumerate_features(spec)) {
    validate(spec);
    lookup_.reserve(features_.size());
    for (std::size_t i = 0; i < features_.size(); ++i) lookup_.emplace(pack(features_[i]), i);
}

std::optional<std::size_t> FeatureBank::index_of(const HaarFeature& f) const {
    if (f.x < 0 || f.y < 0 || f.w < 1 || f.h < 1) return std::nullopt;
    auto it = lookup_.find(pack(f));
    if (it == lookup_.end() || !(features_[it->second] == f)) return std::nullopt;
    return it->second;
}

}  // namespace haarpilot
