// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "haarpilot/boost.hpp"
#include "haarpilot/detect.hpp"
#include "haarpilot/gesture.hpp"
#include "haarpilot/imaging.hpp"

namespace haarpilot {

// ---------------------------------------------------------------------------
// PGM (P5, maxval 255)

GrayImage read_pgm(std::istream& in);
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& img, std::ostream& out);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Annotations: `path N x1 y1 w1 h1 ... xN yN wN hN`

struct Annotation {
    std::filesystem::path image;
    std::vector<Rect> rects;
    std::size_t line = 0;
};

/// Relative image paths are resolved against `base_dir`.
std::vector<Annotation> parse_annotations(std::istream& in, const std::filesystem::path& base_dir);
std::vector<Annotation> parse_annotations(const std::filesystem::path& path);

/// One path per non-empty line, `#` comments allowed, resolved like annotations.
std::vector<std::filesystem::path> read_path_list(const std::filesystem::path& path);

struct SampleFailure {
    std::filesystem::path image;
    Rect rect;
    std::string reason;
};

struct SampleBatch {
    std::vector<GrayImage> samples;
    std::vector<SampleFailure> failures;
};

/// Crops every annotated rect and area-resamples it to the base window.
/// Bad rects and unreadable images are recorded as failures; the batch goes on.
SampleBatch extract_samples(std::span<const Annotation> annotations, const WindowSpec& spec);
SampleBatch extract_samples(const GrayImage& image, std::span<const Rect> rects, const WindowSpec& spec,
                            const std::filesystem::path& name = {});

struct NegativeDraw {
    std::vector<GrayImage> samples;
    std::vector<Rect> windows;
    std::vector<std::size_t> sources;
    /// Set when more samples were requested than the pool has distinct windows.
    std::string warning;
};

NegativeDraw sample_negatives(std::span<const GrayImage> pool, const WindowSpec& spec, std::size_t count,
                              std::uint64_t seed);
NegativeDraw sample_negatives(std::span<const std::filesystem::path> pool, const WindowSpec& spec,
                              std::size_t count, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Scene conditions and evaluation

enum class Illumination : std::uint8_t { DL, WL };
enum class Background : std::uint8_t { CTB, CLB };
enum class Distance : std::uint8_t { LT3, MT3 };

struct SceneTag {
    Illumination illumination = Illumination::WL;
    Background background = Background::CLB;
    Distance distance = Distance::LT3;
    auto operator<=>(const SceneTag&) const = default;
};

std::string_view to_string(Illumination v);
std::string_view to_string(Background v);
std::string_view to_string(Distance v);
Illumination parse_illumination(std::string_view token);
Background parse_background(std::string_view token);
/// Accepts `LT3`/`LT-3` and `MT3`/`MT-3`.
Distance parse_distance(std::string_view token);

/// All eight condition combinations, dim-lit first, then cluttered, then near.
std::array<SceneTag, 8> all_scene_tags();

struct ManifestEntry {
    std::filesystem::path image;
    GestureLabel label = GestureLabel::None;
    SceneTag tag;
    std::size_t line = 0;
};

/// CSV with header `path,label,illumination,background,distance`.
std::vector<ManifestEntry> parse_manifest(std::istream& in, const std::filesystem::path& base_dir);
std::vector<ManifestEntry> parse_manifest(const std::filesystem::path& path);

struct CellCount {
    std::size_t correct = 0;
    std::size_t total = 0;
    std::optional<double> accuracy() const;
    friend bool operator==(const CellCount&, const CellCount&) = default;
};

/// Wildcard-able selector over cells; empty fields match everything.
struct CellFilter {
    std::optional<Illumination> illumination;
    std::optional<Background> background;
    std::optional<Distance> distance;
    std::optional<GestureLabel> gesture;
};

struct AxisGap {
    std::string axis;
    double gap = 0.0;
};

/// Accuracy per (condition, gesture) cell. Marginals are arithmetic means of
/// the accuracies of the non-empty cells they cover.
class EvalReport {
public:
    void record(const SceneTag& tag, GestureLabel truth, bool correct);
    void set_counts(const SceneTag& tag, GestureLabel gesture, std::size_t correct, std::size_t total);

    CellCount cell(const SceneTag& tag, GestureLabel gesture) const;
    std::optional<double> marginal(const CellFilter& filter) const;
    std::size_t cell_count() const { return cells_.size(); }

    /// Condition axes ordered by the gap between their two marginal means,
    /// largest first.
    std::vector<AxisGap> significance() const;

    /// `kind,illumination,background,distance,gesture,correct,total,accuracy`
    /// with CELL rows followed by AVG rows (`*` marks an averaged-over axis).
    std::string to_csv() const;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;

private:
    std::map<std::pair<SceneTag, GestureLabel>, CellCount> cells_;
};

struct Prediction {
    ManifestEntry entry;
    GestureLabel predicted = GestureLabel::None;
};

struct EvalResult {
    EvalReport report;
    std::vector<Prediction> predictions;
};

/// Classifies every manifest image; a prediction counts as correct iff it
/// equals the manifest label.
EvalResult evaluate(std::span<const ManifestEntry> manifest, std::span<const Cascade> cascades,
                    const ScanConfig& cfg);

/// Same as evaluate, with frames already in memory (parallel to `manifest`).
EvalResult evaluate(std::span<const ManifestEntry> manifest, std::span<const GrayImage> frames,
                    std::span<const Cascade> cascades, const ScanConfig& cfg);

// ---------------------------------------------------------------------------
// Dataset summary

struct GestureSetFiles {
    GestureLabel label = GestureLabel::None;
    std::filesystem::path annotations;
    std::filesystem::path negatives;
};

struct GestureSetSummary {
    GestureLabel label = GestureLabel::None;
    std::size_t positive_images = 0;
    std::size_t positive_rects = 0;
    std::size_t negative_images = 0;
};

struct DatasetSummary {
    std::vector<GestureSetSummary> sets;
    /// Distinct image paths across every positive and negative list.
    std::size_t total_images = 0;
};

DatasetSummary summarize_dataset(std::span<const GestureSetFiles> sets);

}  // namespace haarpilot
