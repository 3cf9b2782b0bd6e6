// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#include "haarpilot/gesture.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "haarpilot/errors.hpp"

namespace haarpilot {

std::string_view to_string(GestureLabel label) {
    switch (label) {
        case GestureLabel::Fist: return "Fist";
        case GestureLabel::Palm: return "Palm";
        case GestureLabel::GS: return "GS";
        case GestureLabel::VS: return "VS";
        case GestureLabel::LF: return "LF";
        case GestureLabel::None: return "None";
    }
    return "None";
}

GestureLabel parse_gesture(std::string_view token) {
    const auto same = [](std::string_view a, std::string_view b) {
        return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
                   return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
               });
    };
    for (auto label : {GestureLabel::Fist, GestureLabel::Palm, GestureLabel::GS, GestureLabel::VS, GestureLabel::LF,
                       GestureLabel::None}) {
        if (same(token, to_string(label))) return label;
    }
    throw InputError("unknown gesture label '" + std::string(token) + "'");
}

}  // namespace haarpilot
