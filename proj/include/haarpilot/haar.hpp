// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "haarpilot/imaging.hpp"

namespace haarpilot {

/// Upright rectangle-feature layouts. Cells are listed left-to-right, then
/// top-to-bottom:
///   TwoH     [+|-]          TwoV     [+ / -]
///   ThreeH   [+|-2|+]       ThreeV   [+ / -2 / +]
///   FourDiag [+|- / -|+]
enum class HaarKind : std::uint8_t { TwoH, TwoV, ThreeH, ThreeV, FourDiag };

inline constexpr std::array<HaarKind, 5> kHaarKinds = {
    HaarKind::TwoH, HaarKind::TwoV, HaarKind::ThreeH, HaarKind::ThreeV, HaarKind::FourDiag};

std::string_view to_string(HaarKind kind);
HaarKind parse_haar_kind(std::string_view token);

/// Number of cells along x and y.
struct CellGrid {
    int cols = 1;
    int rows = 1;
};
CellGrid cell_grid(HaarKind kind);

/// Geometry in base-window coordinates; (w, h) is the extent of one cell.
struct HaarFeature {
    HaarKind kind = HaarKind::TwoH;
    int x = 0;
    int y = 0;
    int w = 1;
    int h = 1;

    int span_w() const { return cell_grid(kind).cols * w; }
    int span_h() const { return cell_grid(kind).rows * h; }
    friend bool operator==(const HaarFeature&, const HaarFeature&) = default;
};

struct WindowSpec {
    int size = 20;
    friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

/// Throws InputError unless the base size is at least 4.
void validate(const WindowSpec& spec);

/// Every legal feature inside a `base_size` square, ordered kind-major then
/// by y, x, h, w ascending. Indices into this list are stable identifiers.
std::vector<HaarFeature> enumerate_features(int base_size);
std::vector<HaarFeature> enumerate_features(const WindowSpec& spec);

/// `kind x y w h`
std::string serialize(const HaarFeature& f);

struct WeightedCell {
    Rect rect;
    int weight = 0;
};

/// A feature placed in frame coordinates: cells are exactly adjacent and of
/// equal size, so weights sum to zero over equal areas.
struct PlacedFeature {
    std::array<WeightedCell, 4> cells{};
    int cell_count = 0;
    Rect box;
};

/// Integer pixel extent of `v` base pixels at `scale`.
int scaled_extent(int v, double scale);

PlacedFeature place(const HaarFeature& f, Point origin, double scale);

/// Weighted cell-sum difference, exact.
std::int64_t feature_sum(const IntegralImage& ii, const HaarFeature& f, Point origin, double scale);

/// Normalized response: weighted difference times `inv_stddev` divided by the
/// placed footprint area.
double eval_feature(const IntegralImage& ii, const HaarFeature& f, Point origin, double scale,
                    double inv_stddev);

/// Enumerated features plus a reverse lookup from geometry to index.
class FeatureBank {
public:
    explicit FeatureBank(WindowSpec spec);

    const WindowSpec& spec() const { return spec_; }
    std::span<const HaarFeature> features() const { return features_; }
    std::size_t size() const { return features_.size(); }
    const HaarFeature& operator[](std::size_t i) const { return features_[i]; }
    std::optional<std::size_t> index_of(const HaarFeature& f) const;

private:
    WindowSpec spec_;
    std::vector<HaarFeature> features_;
    std::unordered_map<std::uint64_t, std::size_t> lookup_;
};

}  // namespace haarpilot
