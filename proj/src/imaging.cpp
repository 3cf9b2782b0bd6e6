// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#include "haarpilot/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace haarpilot {
namespace {

std::uint8_t round_to_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

// Continuous integral of the piecewise-constant image: bilinear within each
// pixel cell, so differences give exact area-weighted sums over real rects.
double integral_at(const Plane<std::int64_t>& table, double y, double x) {
    const int max_y = static_cast<int>(table.rows()) - 2;
    const int max_x = static_cast<int>(table.cols()) - 2;
    const int y0 = std::min(static_cast<int>(std::floor(y)), max_y);
    const int x0 = std::min(static_cast<int>(std::floor(x)), max_x);
    const double fy = y - y0;
    const double fx = x - x0;
    const double a = static_cast<double>(table(y0, x0));
    const double b = static_cast<double>(table(y0, x0 + 1));
    const double c = static_cast<double>(table(y0 + 1, x0));
    const double d = static_cast<double>(table(y0 + 1, x0 + 1));
    return a + (b - a) * fx + (c - a) * fy + (a - b - c + d) * fx * fy;
}

}  // namespace

double iou(const Rect& a, const Rect& b) {
    const int ix = std::max(0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const int iy = std::max(0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = static_cast<double>(ix) * iy;
    const double uni = static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

GrayImage make_image(int width, int height, std::uint8_t fill) {
    if (width < 1 || height < 1) {
        throw InputError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                         std::to_string(height));
    }
    return GrayImage::Constant(height, width, fill);
}

GrayImage to_grayscale(std::span<const std::uint8_t> rgb, int width, int height) {
    if (width < 1 || height < 1) throw InputError("rgb frame dimensions must be positive");
    const auto expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
    if (rgb.size() != expected) {
        throw InputError("rgb buffer holds " + std::to_string(rgb.size()) + " bytes, expected " +
                         std::to_string(expected));
    }
    GrayImage out(height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const auto* p = rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
            out(y, x) = round_to_byte(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]);
        }
    }
    return out;
}

IntegralImage integral(const GrayImage& img) {
    const Eigen::Index h = img.rows();
    const Eigen::Index w = img.cols();
    IntegralImage ii;
    ii.sum = Plane<std::int64_t>::Zero(h + 1, w + 1);
    ii.sqsum = Plane<std::int64_t>::Zero(h + 1, w + 1);
    for (Eigen::Index y = 0; y < h; ++y) {
        std::int64_t row = 0;
        std::int64_t row_sq = 0;
        for (Eigen::Index x = 0; x < w; ++x) {
            const std::int64_t v = img(y, x);
            row += v;
            row_sq += v * v;
            ii.sum(y + 1, x + 1) = ii.sum(y, x + 1) + row;
            ii.sqsum(y + 1, x + 1) = ii.sqsum(y, x + 1) + row_sq;
        }
    }
    return ii;
}

bool contains(const IntegralImage& ii, const Rect& r) {
    return r.x >= 0 && r.y >= 0 && r.w >= 1 && r.h >= 1 &&
           static_cast<std::int64_t>(r.x) + r.w <= ii.width() &&
           static_cast<std::int64_t>(r.y) + r.h <= ii.height();
}

void check_bounds(const IntegralImage& ii, const Rect& r) {
    if (!contains(ii, r)) {
        throw BoundsError("rect (" + std::to_string(r.x) + "," + std::to_string(r.y) + "," +
                          std::to_string(r.w) + "," + std::to_string(r.h) + ") outside " +
                          std::to_string(ii.width()) + "x" + std::to_string(ii.height()) + " image");
    }
}

std::int64_t rect_sum(const IntegralImage& ii, const Rect& r) {
    check_bounds(ii, r);
    return corner_sum(ii.sum, r);
}

std::int64_t rect_sq_sum(const IntegralImage& ii, const Rect& r) {
    check_bounds(ii, r);
    return corner_sum(ii.sqsum, r);
}

WindowStats window_stats(const IntegralImage& ii, const Rect& r) {
    check_bounds(ii, r);
    const double area = static_cast<double>(r.area());
    const double mean = static_cast<double>(corner_sum(ii.sum, r)) / area;
    const double variance =
        std::max(0.0, static_cast<double>(corner_sum(ii.sqsum, r)) / area - mean * mean);
    const double stddev = std::sqrt(variance);
    return {mean, stddev < 1.0 ? 1.0 : stddev};
}

GrayImage crop(const GrayImage& img, const Rect& r) {
    if (r.x < 0 || r.y < 0 || r.w < 1 || r.h < 1 || r.x + r.w > width(img) ||
        r.y + r.h > height(img)) {
        throw BoundsError("crop rect outside image");
    }
    return img.block(r.y, r.x, r.h, r.w);
}

GrayImage resample_area(const IntegralImage& ii, const Rect& src, int out_width, int out_height) {
    check_bounds(ii, src);
    if (out_width < 1 || out_height < 1) throw InputError("resample target must be positive");
    GrayImage out(out_height, out_width);
    const double sx = static_cast<double>(src.w) / out_width;
    const double sy = static_cast<double>(src.h) / out_height;
    const double cell = sx * sy;
    for (int oy = 0; oy < out_height; ++oy) {
        const double y0 = src.y + oy * sy;
        const double y1 = oy + 1 == out_height ? static_cast<double>(src.y + src.h) : src.y + (oy + 1) * sy;
        for (int ox = 0; ox < out_width; ++ox) {
            const double x0 = src.x + ox * sx;
            const double x1 = ox + 1 == out_width ? static_cast<double>(src.x + src.w) : src.x + (ox + 1) * sx;
            const double mass = integral_at(ii.sum, y1, x1) - integral_at(ii.sum, y0, x1) -
                                integral_at(ii.sum, y1, x0) + integral_at(ii.sum, y0, x0);
            out(oy, ox) = round_to_byte(mass / cell);
        }
    }
    return out;
}

GrayImage resize_area(const GrayImage& img, int out_width, int out_height) {
    if (out_width < 1 || out_height < 1) throw InputError("resize target must be positive");
    if (out_width == width(img) && out_height == height(img)) return img;
    return resample_area(integral(img), {0, 0, width(img), height(img)}, out_width, out_height);
}

GrayImage resize_nearest(const GrayImage& img, int out_width, int out_height) {
    if (out_width < 1 || out_height < 1) throw InputError("resize target must be positive");
    GrayImage out(out_height, out_width);
    for (int y = 0; y < out_height; ++y) {
        const auto sy = static_cast<Eigen::Index>(static_cast<std::int64_t>(y) * height(img) / out_height);
        for (int x = 0; x < out_width; ++x) {
            const auto sx = static_cast<Eigen::Index>(static_cast<std::int64_t>(x) * width(img) / out_width);
            out(y, x) = img(sy, sx);
        }
    }
    return out;
}

void draw_rect(GrayImage& img, const Rect& r, std::uint8_t value) {
    const int x0 = std::max(0, r.x);
    const int y0 = std::max(0, r.y);
    const int x1 = std::min(width(img) - 1, r.x + r.w - 1);
    const int y1 = std::min(height(img) - 1, r.y + r.h - 1);
    if (x0 > x1 || y0 > y1) return;
    for (int x = x0; x <= x1; ++x) {
        if (r.y >= 0) img(r.y, x) = value;
        if (r.y + r.h - 1 < height(img)) img(r.y + r.h - 1, x) = value;
    }
    for (int y = y0; y <= y1; ++y) {
        if (r.x >= 0) img(y, r.x) = value;
        if (r.x + r.w - 1 < width(img)) img(y, r.x + r.w - 1) = value;
    }
}

}  // namespace haarpilot
