// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

// Randomized flight simulations for the clearance property.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "haarpilot/pilot.hpp"
#include "haarpilot/random.hpp"

namespace safety {

using namespace haarpilot;

struct Stats {
    std::size_t simulations = 0;
    std::size_t ticks = 0;
    std::size_t move_ticks = 0;
    std::size_t refusals = 0;
    std::size_t violations = 0;
    double closest_margin = std::numeric_limits<double>::infinity();
};

inline double clearance_margin(const Vec3& p, const World& w) {
    double m = std::numeric_limits<double>::infinity();
    if (w.operator_position) m = std::min(m, (p - *w.operator_position).norm() - w.clearance);
    for (const Box& b : w.obstacles) m = std::min(m, distance(p, b) - w.clearance);
    return m;
}

/// Operator and obstacles scattered around the take-off point, never within
/// the clearance of it.
inline World random_world(Rng& rng) {
    World w;
    w.clearance = uniform_int(rng, 0, 3) == 0 ? uniform_real(rng, 0.5, 5.0) : 3.0;
    if (uniform_int(rng, 0, 4) != 0) {
        Vec3 op;
        do {
            op = {uniform_real(rng, -8, 8), uniform_real(rng, -8, 8), uniform_real(rng, 0, 6)};
        } while (op.norm() < w.clearance);
        w.operator_position = op;
    }
    const int n = uniform_int(rng, 0, 5);
    for (int i = 0; i < n; ++i) {
        Box b;
        do {
            b.min = {uniform_real(rng, -10, 8), uniform_real(rng, -10, 8), uniform_real(rng, 0, 5)};
            b.size = {uniform_real(rng, 0, 3), uniform_real(rng, 0, 3), uniform_real(rng, 0, 3)};
        } while (distance(Vec3::Zero(), b) < w.clearance);
        w.obstacles.push_back(b);
    }
    return w;
}

inline void record(Stats& s, const DroneState& state, const World& w) {
    ++s.ticks;
    const double m = clearance_margin(state.position, w);
    s.closest_margin = std::min(s.closest_margin, m);
    // Sub-nanometre slack covers the rounding of summed tick displacements.
    if (m < -1e-9) ++s.violations;
}

/// Drives plan/control_ticks/step directly with uniformly random commands.
inline void run_planner(Rng& rng, Stats& s) {
    const World w = random_world(rng);
    const FlightLimits lim;
    DroneState state;
    const int commands = uniform_int(rng, 10, 60);
    for (int i = 0; i < commands; ++i) {
        // Bias towards flight so the drone actually gets around.
        Command cmd = kCommands[uniform_index(rng, kCommands.size())];
        if (!state.airborne() && uniform_int(rng, 0, 1)) cmd = Command::TakeOff;
        double est = operator_distance(state, w);
        if (std::isfinite(est)) est *= uniform_real(rng, 0.8, 1.2);
        const PlanResult r = plan(cmd, state, w, est, lim);
        if (std::holds_alternative<Refusal>(r)) {
            ++s.refusals;
            continue;
        }
        const PlannedAction& a = std::get<PlannedAction>(r);
        for (const PlannedAction& tick : control_ticks(a, state, lim)) {
            if (tick.velocity.head<2>().norm() > 0) ++s.move_ticks;
            state = step(state, tick, lim.tick, lim);
            record(s, state, w);
        }
    }
    ++s.simulations;
}

/// Feeds random label streams through the full frame loop.
inline void run_pilot(Rng& rng, Stats& s) {
    const World w = random_world(rng);
    GestureMap map;
    for (auto& c : map.commands) c = kCommands[uniform_index(rng, kCommands.size())];
    map.commands[1] = Command::TakeOff;
    map.debounce = uniform_int(rng, 1, 3);
    map.cooldown = uniform_int(rng, 0, 4);
    Pilot pilot(map, w);
    pilot.set_tick_sink([&](const PlannedAction& tick, const DroneState&) {
        if (tick.velocity.head<2>().norm() > 0) ++s.move_ticks;
    });
    const int frames = uniform_int(rng, 20, 120);
    GestureLabel label = GestureLabel::Palm;
    for (int f = 0; f < frames; ++f) {
        if (uniform_int(rng, 0, 3) == 0) label = static_cast<GestureLabel>(uniform_int(rng, 0, 5));
        const FrameRecord rec = pilot.on_frame(label);
        if (rec.refusal) ++s.refusals;
        record(s, rec.state, w);
    }
    ++s.simulations;
}

inline Stats run(std::size_t simulations, std::uint64_t seed) {
    Rng rng(seed);
    Stats s;
    for (std::size_t i = 0; i < simulations; ++i) {
        if (i % 2 == 0) {
            run_planner(rng, s);
        } else {
            run_pilot(rng, s);
        }
    }
    return s;
}

}  // namespace safety
