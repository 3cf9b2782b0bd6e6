// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "haarpilot/errors.hpp"

namespace haarpilot {

/// Row-major 2-D plane; row index is y, column index is x.
template <typename Scalar>
using Plane = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// 8-bit intensity image. Rows are image rows, so `img(y, x)`.
using GrayImage = Plane<std::uint8_t>;

struct Point {
    int x = 0;
    int y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

struct Rect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    std::int64_t area() const { return static_cast<std::int64_t>(w) * h; }
    friend bool operator==(const Rect&, const Rect&) = default;
};

/// Intersection over union of two rects (0 when either is empty).
double iou(const Rect& a, const Rect& b);

/// Summed-area tables with a zero top row and left column:
/// `sum(y, x)` is the sum of all pixels with row < y and column < x.
struct IntegralImage {
    Plane<std::int64_t> sum;
    Plane<std::int64_t> sqsum;

    int width() const { return static_cast<int>(sum.cols()) - 1; }
    int height() const { return static_cast<int>(sum.rows()) - 1; }
};

struct WindowStats {
    double mean = 0.0;
    double stddev = 1.0;
};

inline int width(const GrayImage& img) { return static_cast<int>(img.cols()); }
inline int height(const GrayImage& img) { return static_cast<int>(img.rows()); }

GrayImage make_image(int width, int height, std::uint8_t fill = 0);

/// Luma conversion of interleaved RGB, rounding half up.
GrayImage to_grayscale(std::span<const std::uint8_t> rgb, int width, int height);

IntegralImage integral(const GrayImage& img);

/// Four-lookup rectangle sum over any table indexable as `table(y, x)`.
/// Callers are responsible for bounds.
template <typename Table>
auto corner_sum(const Table& table, const Rect& r) {
    const int x1 = r.x + r.w;
    const int y1 = r.y + r.h;
    return table(y1, x1) - table(r.y, x1) - table(y1, r.x) + table(r.y, r.x);
}

bool contains(const IntegralImage& ii, const Rect& r);
void check_bounds(const IntegralImage& ii, const Rect& r);

std::int64_t rect_sum(const IntegralImage& ii, const Rect& r);
std::int64_t rect_sq_sum(const IntegralImage& ii, const Rect& r);

/// Mean and standard deviation of the pixels in `r`. The deviation is
/// floored at 1 so flat windows normalize to bounded feature values.
WindowStats window_stats(const IntegralImage& ii, const Rect& r);

GrayImage crop(const GrayImage& img, const Rect& r);

/// Box-filter resampling: every output pixel is the coverage-weighted mean of
/// the source pixels under it. Same-size resampling is the identity.
GrayImage resize_area(const GrayImage& img, int out_width, int out_height);

/// Box-filter resampling of the region `src` of the image behind `ii`.
GrayImage resample_area(const IntegralImage& ii, const Rect& src, int out_width, int out_height);

GrayImage resize_nearest(const GrayImage& img, int out_width, int out_height);

/// Sets the one-pixel outline of `r` (clipped to the image) to `value`.
void draw_rect(GrayImage& img, const Rect& r, std::uint8_t value = 255);

}  // namespace haarpilot
