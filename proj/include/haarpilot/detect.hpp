// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "haarpilot/boost.hpp"
#include "haarpilot/gesture.hpp"
#include "haarpilot/imaging.hpp"

namespace haarpilot {

struct Detection {
    Rect rect;
    double score = 0.0;
    double scale = 1.0;
    friend bool operator==(const Detection&, const Detection&) = default;
};

struct ScanConfig {
    double scale_factor = 1.25;
    /// Stride as a fraction of the window side, at least one pixel.
    double step_fraction = 0.05;
    /// Smallest and largest window sides; 0 selects the cascade window and
    /// the frame's smaller dimension respectively.
    int min_size = 0;
    int max_size = 0;
    int min_neighbors = 3;
    double group_eps = 0.2;
    /// When positive, frames whose larger side exceeds this are area-downscaled
    /// before scanning and detections are mapped back to frame coordinates.
    int working_size = 0;
};

void validate(const ScanConfig& cfg);

/// Window sides visited for a frame, smallest first.
std::vector<double> scan_scales(const ScanConfig& cfg, int base, int frame_width, int frame_height);

/// All accepted windows, ordered by scale, then row, then column.
std::vector<Detection> scan(const GrayImage& frame, const Cascade& cascade, const ScanConfig& cfg);

/// Merges similar rects (corners within eps of the smaller extents) into
/// classes; classes with fewer than `min_neighbors` members are dropped and
/// each remaining class yields its mean rect and best score. Output follows
/// the first appearance of each class in the input.
std::vector<Detection> group_rects(std::span<const Detection> detections, int min_neighbors, double eps);

struct Classification {
    GestureLabel label = GestureLabel::None;
    std::optional<Detection> best;
    /// Grouped detections per cascade, in the order the cascades were given.
    std::vector<std::vector<Detection>> grouped;
};

/// Scans with every cascade and picks the label whose best grouped detection
/// scores highest; equal scores resolve in GestureLabel declaration order.
Classification classify_gesture(const GrayImage& frame, std::span<const Cascade> cascades, const ScanConfig& cfg);

/// Throws ConfigError on duplicate or `None` labels.
void check_cascade_set(std::span<const Cascade> cascades);

struct DistanceCalibration {
    double reference_distance_ft = 3.0;
    double reference_width_px = 80.0;
};

/// Pinhole range estimate: apparent width is inversely proportional to range.
double estimate_distance(double bbox_width_px, const DistanceCalibration& calib = {});

inline constexpr const char* kDetectionCsvHeader = "frame,label,x,y,w,h,score,scale";
std::string detection_csv_row(const std::string& frame, GestureLabel label, const Detection& d);

}  // namespace haarpilot
