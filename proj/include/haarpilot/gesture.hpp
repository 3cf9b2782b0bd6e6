// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace haarpilot {

/// Declaration order is the arbitration tie-break order.
enum class GestureLabel : std::uint8_t { Fist, Palm, GS, VS, LF, None };

inline constexpr std::array<GestureLabel, 5> kGestures = {GestureLabel::Fist, GestureLabel::Palm,
                                                          GestureLabel::GS, GestureLabel::VS,
                                                          GestureLabel::LF};

std::string_view to_string(GestureLabel label);

/// Accepts the canonical tokens (`Fist`, `Palm`, `GS`, `VS`, `LF`, `None`),
/// case-insensitively. Throws InputError otherwise.
GestureLabel parse_gesture(std::string_view token);

}  // namespace haarpilot
