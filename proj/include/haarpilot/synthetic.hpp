// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "haarpilot/dataset.hpp"
#include "haarpilot/gesture.hpp"
#include "haarpilot/imaging.hpp"
#include "haarpilot/random.hpp"

// Seeded image generators for fixtures, demos and the condition harness.
namespace haarpilot::synthetic {

GrayImage noise_image(int width, int height, Rng& rng);

/// Bright left half, dark right half, with pixel noise.
GrayImage edge_patch(int side, Rng& rng);

/// A 6x6 block code per gesture inside a dark ring (Fist is a central blob), with pixel noise
/// and a random gain. Throws InputError for None.
GrayImage gesture_patch(GestureLabel label, int side, Rng& rng);

/// CLB: smooth gradient with light noise. CTB: overlapping random rectangles.
GrayImage background(int width, int height, Background kind, Rng& rng);

void paste(GrayImage& dst, const GrayImage& src, Point at);

/// Multiplies every pixel by `gain`, rounding half up and saturating.
void scale_brightness(GrayImage& img, double gain);

inline constexpr int kFrameSide = 96;
inline constexpr double kDimGain = 0.4;

/// Inclusive range of gesture sides for a distance class in a kFrameSide frame.
std::pair<int, int> gesture_side_range(Distance d);

struct Scene {
    GrayImage frame;
    Rect truth;
    GestureLabel label = GestureLabel::None;
    SceneTag tag;
};

/// One gesture on a tagged background. MT-3 gestures are rendered at three
/// times their side and area-downscaled; DL frames are dimmed after composition.
Scene scene(GestureLabel label, const SceneTag& tag, Rng& rng, int frame_side = kFrameSide);

struct TrainingSet {
    std::vector<GrayImage> positives;
    std::vector<GrayImage> negative_pool;
};

/// Positives are base-window crops of near-range scenes under every lighting
/// and background; the negative pool mixes bare backgrounds, scenes that show
/// the other gestures and close crops of them.
TrainingSet gesture_training_set(GestureLabel label, std::size_t positives, std::size_t pool_frames,
                                 const WindowSpec& spec, Rng& rng);

struct EdgeSet {
    std::vector<GrayImage> positives;
    std::vector<GrayImage> negatives;
};

/// Base-window edge positives and uniform-noise negatives.
EdgeSet edge_set(std::size_t positives, std::size_t negatives, const WindowSpec& spec, Rng& rng);

/// `per_cell` scenes for every (SceneTag, gesture) combination, in
/// all_scene_tags() order then gesture order.
std::vector<Scene> degradation_suite(std::size_t per_cell, Rng& rng);

struct WrittenDataset {
    std::vector<GestureSetFiles> gesture_sets;
    std::filesystem::path edge_annotations;
    std::filesystem::path edge_negatives;
    std::filesystem::path manifest;
};

struct DatasetOptions {
    std::size_t positives = 200;
    std::size_t negatives = 100;
    std::size_t per_cell = 4;
};

/// Writes PGM files plus annotation, list and manifest files under `root`.
WrittenDataset write_dataset(const std::filesystem::path& root, const DatasetOptions& options, Rng& rng);

}  // namespace haarpilot::synthetic
