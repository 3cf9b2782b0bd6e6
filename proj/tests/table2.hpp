// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

// Published per-condition accuracies of the original study, one row per
// condition, columns in the order the study prints them.

#pragma once

#include <array>

#include "haarpilot/dataset.hpp"

namespace table2 {

using haarpilot::Background;
using haarpilot::Distance;
using haarpilot::GestureLabel;
using haarpilot::Illumination;
using haarpilot::SceneTag;

inline constexpr std::array<GestureLabel, 5> kColumns = {GestureLabel::Palm, GestureLabel::Fist, GestureLabel::GS,
                                                         GestureLabel::VS, GestureLabel::LF};

struct Row {
    SceneTag tag;
    std::array<int, 5> percent;
};

inline const std::array<Row, 8> kRows = {{
    {{Illumination::DL, Background::CTB, Distance::LT3}, {92, 89, 86, 84, 86}},
    {{Illumination::DL, Background::CTB, Distance::MT3}, {66, 70, 60, 65, 69}},
    {{Illumination::DL, Background::CLB, Distance::LT3}, {97, 91, 87, 90, 88}},
    {{Illumination::DL, Background::CLB, Distance::MT3}, {70, 74, 69, 65, 59}},
    {{Illumination::WL, Background::CTB, Distance::LT3}, {90, 89, 91, 86, 81}},
    {{Illumination::WL, Background::CTB, Distance::MT3}, {69, 81, 73, 66, 70}},
    {{Illumination::WL, Background::CLB, Distance::LT3}, {99, 99, 96, 95, 90}},
    {{Illumination::WL, Background::CLB, Distance::MT3}, {84, 81, 80, 80, 76}},
}};

/// Each published accuracy as `percent` correct out of 100 trials.
inline haarpilot::EvalReport report() {
    haarpilot::EvalReport r;
    for (const Row& row : kRows) {
        for (std::size_t g = 0; g < kColumns.size(); ++g) {
            r.set_counts(row.tag, kColumns[g], static_cast<std::size_t>(row.percent[g]), 100);
        }
    }
    return r;
}

}  // namespace table2
