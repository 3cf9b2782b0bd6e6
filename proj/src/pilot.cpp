// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#include "haarpilot/pilot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

#include "haarpilot/errors.hpp"

namespace haarpilot {
namespace {

constexpr double kSettle = 1e-6;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool finite(const Vec3& v) { return v.allFinite(); }

Vec3 direction(Command c) {
    switch (c) {
        case Command::MoveLeft: return {-1.0, 0.0, 0.0};
        case Command::MoveRight: return {1.0, 0.0, 0.0};
        case Command::MoveForward: return {0.0, 1.0, 0.0};
        case Command::MoveBackward: return {0.0, -1.0, 0.0};
        default: return Vec3::Zero();
    }
}

bool is_move(Command c) { return direction(c) != Vec3::Zero(); }

DroneState climb(DroneState s, double dt, const FlightLimits& lim) {
    s.mode = FlightMode::TakingOff;
    s.velocity = {0.0, 0.0, lim.max_speed};
    s.position.z() += lim.max_speed * dt;
    if (s.position.z() >= lim.hover_altitude - kSettle) {
        s.position.z() = lim.hover_altitude;
        s.mode = FlightMode::Hovering;
        s.velocity.setZero();
    }
    return s;
}

DroneState descend(DroneState s, double dt, const FlightLimits& lim) {
    s.mode = FlightMode::Landing;
    s.velocity = {0.0, 0.0, -lim.max_speed};
    s.position.z() -= lim.max_speed * dt;
    if (s.position.z() <= kSettle) {
        s.position.z() = 0.0;
        s.mode = FlightMode::Landed;
        s.velocity.setZero();
    }
    return s;
}

std::optional<Refusal> check_sweep(const Vec3& from, const Vec3& to, const World& world) {
    if (world.operator_position) {
        const double d = segment_distance(from, to, *world.operator_position);
        if (d < world.clearance) {
            return Refusal{RefusalReason::OperatorClearance,
                           "path passes " + format_number(d) + " ft from the operator"};
        }
    }
    for (std::size_t i = 0; i < world.obstacles.size(); ++i) {
        const double d = segment_distance(from, to, world.obstacles[i]);
        if (d < world.clearance) {
            return Refusal{RefusalReason::ObstacleClearance,
                           "path passes " + format_number(d) + " ft from obstacle " + std::to_string(i + 1)};
        }
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(Command c) {
    switch (c) {
        case Command::TakeOff: return "TakeOff";
        case Command::Land: return "Land";
        case Command::MoveLeft: return "MoveLeft";
        case Command::MoveRight: return "MoveRight";
        case Command::MoveForward: return "MoveForward";
        case Command::MoveBackward: return "MoveBackward";
        case Command::Hover: return "Hover";
        case Command::TakePicture: return "TakePicture";
    }
    return "?";
}

Command parse_command(std::string_view token) {
    for (Command c : kCommands) {
        if (to_string(c) == token) return c;
    }
    throw InputError("unknown command '" + std::string(token) + "'");
}

Command GestureMap::command_for(GestureLabel label) const {
    if (label == GestureLabel::None) throw InputError("None has no command");
    return commands[static_cast<std::size_t>(label)];
}

void validate(const GestureMap& map) {
    if (map.debounce < 1) throw ConfigError("debounce length must be at least 1");
    if (map.cooldown < 0) throw ConfigError("cooldown must be non-negative");
}

GestureMap parse_gesture_map(std::istream& in) {
    GestureMap map;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto fail = [&](const std::string& what) {
            throw ParseError("gesture map line " + std::to_string(line_no) + ": " + what, line_no);
        };
        const auto eq = t.find('=');
        if (eq == std::string::npos) fail("expected key=value");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));
        if (key == "debounce" || key == "cooldown") {
            int v = 0;
            auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
            if (ec != std::errc() || p != value.data() + value.size() || v < 0) fail("bad count '" + value + "'");
            (key == "debounce" ? map.debounce : map.cooldown) = v;
            continue;
        }
        try {
            const GestureLabel g = parse_gesture(key);
            if (g == GestureLabel::None) fail("None cannot be mapped");
            map.commands[static_cast<std::size_t>(g)] = parse_command(value);
        } catch (const InputError& e) {
            fail(e.what());
        }
    }
    try {
        validate(map);
    } catch (const ConfigError& e) {
        throw ParseError(std::string("gesture map: ") + e.what(), line_no);
    }
    return map;
}

GestureMap load_gesture_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open gesture map " + path.string());
    return parse_gesture_map(in);
}

Debouncer::Debouncer(const GestureMap& map) : map_(map) { validate(map_); }

std::optional<Command> Debouncer::push(GestureLabel label) {
    if (cooling_ > 0) {
        --cooling_;
        return std::nullopt;
    }
    if (label == GestureLabel::None) {
        current_ = GestureLabel::None;
        run_ = 0;
        return std::nullopt;
    }
    run_ = label == current_ ? run_ + 1 : 1;
    current_ = label;
    if (run_ < map_.debounce) return std::nullopt;
    current_ = GestureLabel::None;
    run_ = 0;
    cooling_ = map_.cooldown;
    return map_.command_for(label);
}

std::vector<Emission> debounce(std::span<const GestureLabel> labels, const GestureMap& map) {
    Debouncer d(map);
    std::vector<Emission> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (auto c = d.push(labels[i])) out.push_back({i + 1, *c});
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(FlightMode m) {
    switch (m) {
        case FlightMode::Landed: return "Landed";
        case FlightMode::TakingOff: return "TakingOff";
        case FlightMode::Hovering: return "Hovering";
        case FlightMode::Moving: return "Moving";
        case FlightMode::Landing: return "Landing";
    }
    return "?";
}

FlightMode parse_flight_mode(std::string_view token) {
    for (FlightMode m : {FlightMode::Landed, FlightMode::TakingOff, FlightMode::Hovering, FlightMode::Moving,
                         FlightMode::Landing}) {
        if (to_string(m) == token) return m;
    }
    throw InputError("unknown flight mode '" + std::string(token) + "'");
}

void validate(const FlightLimits& lim) {
    if (!(lim.max_speed > 0.0) || !(lim.hover_altitude > 0.0) || !(lim.move_distance > 0.0) || !(lim.tick > 0.0) ||
        !std::isfinite(lim.max_speed) || !std::isfinite(lim.hover_altitude) || !std::isfinite(lim.move_distance) ||
        !std::isfinite(lim.tick)) {
        throw InputError("flight limits must be positive and finite");
    }
}

double distance(const Vec3& p, const Box& b) {
    const Vec3 lo = b.min;
    const Vec3 hi = b.min + b.size;
    const Vec3 gap = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
    return gap.norm();
}

double segment_distance(const Vec3& a, const Vec3& b, const Box& box) {
    // Distance to a convex set is convex along the segment.
    double lo = 0.0;
    double hi = 1.0;
    const auto f = [&](double t) { return distance(a + t * (b - a), box); };
    for (int i = 0; i < 100; ++i) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (f(m1) <= f(m2)) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    return std::min({f(0.0), f(1.0), f(0.5 * (lo + hi))});
}

double segment_distance(const Vec3& a, const Vec3& b, const Vec3& point) {
    const Vec3 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((point - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (a + t * ab - point).norm();
}

void validate(const World& world) {
    if (!(world.clearance > 0.0) || !std::isfinite(world.clearance)) throw InputError("clearance must be positive");
    if (world.operator_position && !finite(*world.operator_position)) {
        throw InputError("operator position must be finite");
    }
    for (const Box& b : world.obstacles) {
        if (!finite(b.min) || !finite(b.size) || (b.size.array() < 0.0).any()) {
            throw InputError("obstacle boxes need finite corners and non-negative extents");
        }
    }
}

World parse_world(std::istream& in) {
    World world;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::vector<std::string> t;
        for (std::string tok; ss >> tok;) t.push_back(tok);
        if (t.empty() || t[0][0] == '#') continue;
        const auto fail = [&](const std::string& what) -> void {
            throw ParseError("world line " + std::to_string(line_no) + ": " + what, line_no);
        };
        const auto real = [&](const std::string& s) {
            double v = 0.0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) fail("bad number '" + s + "'");
            return v;
        };
        if (t[0] == "operator") {
            if (t.size() != 4) fail("expected 'operator x y z'");
            if (world.operator_position) fail("operator given twice");
            world.operator_position = Vec3(real(t[1]), real(t[2]), real(t[3]));
        } else if (t[0] == "obstacle") {
            if (t.size() != 7) fail("expected 'obstacle x y z w h d'");
            Box b;
            b.min = {real(t[1]), real(t[2]), real(t[3])};
            b.size = {real(t[4]), real(t[6]), real(t[5])};
            if ((b.size.array() < 0.0).any()) fail("obstacle extents must be non-negative");
            world.obstacles.push_back(b);
        } else if (t[0] == "clearance") {
            if (t.size() != 2) fail("expected 'clearance c'");
            world.clearance = real(t[1]);
            if (!(world.clearance > 0.0)) fail("clearance must be positive");
        } else {
            fail("unknown keyword '" + t[0] + "'");
        }
    }
    return world;
}

World load_world(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open world file " + path.string());
    return parse_world(in);
}

double operator_distance(const DroneState& state, const World& world) {
    if (!world.operator_position) return std::numeric_limits<double>::infinity();
    return (state.position - *world.operator_position).norm();
}

// ---------------------------------------------------------------------------

std::string_view to_string(RefusalReason r) {
    switch (r) {
        case RefusalReason::ObstacleClearance: return "obstacle-clearance";
        case RefusalReason::OperatorClearance: return "operator-clearance";
        case RefusalReason::OperatorProximity: return "operator-proximity";
        case RefusalReason::NotAirborne: return "not-airborne";
        case RefusalReason::NoOp: return "no-op";
        case RefusalReason::Busy: return "busy";
    }
    return "?";
}

PlanResult plan(Command cmd, const DroneState& state, const World& world, double est_operator_distance,
                const FlightLimits& limits) {
    validate(limits);
    validate(world);
    if (!finite(state.position) || !finite(state.velocity) || std::isnan(est_operator_distance)) {
        throw InputError("drone state and operator distance must be numbers");
    }
    const FlightMode mode = state.mode;
    const bool transitional = mode == FlightMode::TakingOff || mode == FlightMode::Landing;

    if (cmd == Command::TakePicture) return PlannedAction{cmd, Vec3::Zero(), 0.0};
    if (cmd == Command::TakeOff && state.airborne()) return Refusal{RefusalReason::NoOp, "already airborne"};
    if ((cmd == Command::Land || cmd == Command::Hover) && !state.airborne()) {
        return Refusal{RefusalReason::NoOp, "already landed"};
    }
    if (is_move(cmd) && !state.airborne()) return Refusal{RefusalReason::NotAirborne, "cannot move while landed"};
    if (transitional && cmd != Command::TakeOff) {
        return Refusal{RefusalReason::Busy, std::string("drone is ") + std::string(to_string(mode))};
    }
    if (cmd == Command::MoveForward && est_operator_distance < world.clearance) {
        return Refusal{RefusalReason::OperatorProximity,
                       "operator estimated " + format_number(est_operator_distance) + " ft away"};
    }

    PlannedAction action{cmd, Vec3::Zero(), 0.0};
    Vec3 target = state.position;
    if (cmd == Command::TakeOff) {
        target.z() = limits.hover_altitude;
        action.velocity = {0.0, 0.0, limits.max_speed};
        action.duration = std::max(0.0, limits.hover_altitude - state.position.z()) / limits.max_speed;
    } else if (cmd == Command::Land) {
        target.z() = 0.0;
        action.velocity = {0.0, 0.0, -limits.max_speed};
        action.duration = state.position.z() / limits.max_speed;
    } else if (cmd == Command::Hover) {
        action.duration = limits.tick;
    } else {
        action.velocity = direction(cmd) * limits.max_speed;
        action.duration = limits.move_distance / limits.max_speed;
        target = state.position + direction(cmd) * limits.move_distance;
    }
    if (auto refusal = check_sweep(state.position, target, world)) return *refusal;
    return action;
}

DroneState step(const DroneState& state, const PlannedAction& action, double dt, const FlightLimits& limits) {
    if (!(dt > 0.0)) throw InputError("time step must be positive");
    DroneState s = state;
    const FlightMode mode = state.mode;
    if (action.command == Command::TakePicture) {
        ++s.pictures_taken;
        return s;
    }
    if (mode == FlightMode::TakingOff) return climb(s, dt, limits);
    if (mode == FlightMode::Landing) return descend(s, dt, limits);
    if (mode == FlightMode::Landed) return action.command == Command::TakeOff ? climb(s, dt, limits) : s;

    switch (action.command) {
        case Command::Land: return descend(s, dt, limits);
        case Command::TakeOff:
        case Command::Hover:
            s.mode = FlightMode::Hovering;
            s.velocity.setZero();
            return s;
        default: break;
    }
    Vec3 v = action.velocity;
    if (v.norm() > limits.max_speed) v *= limits.max_speed / v.norm();
    s.mode = FlightMode::Moving;
    s.velocity = v;
    s.position += v * dt;
    return s;
}

std::vector<PlannedAction> control_ticks(const PlannedAction& action, const DroneState& state,
                                         const FlightLimits& limits) {
    validate(limits);
    const double dt = limits.tick;
    std::vector<PlannedAction> out;
    if (is_move(action.command)) {
        const auto n = std::max<long long>(1, std::llround(action.duration / dt));
        out.assign(static_cast<std::size_t>(n), {action.command, action.velocity, dt});
        out.push_back({Command::Hover, Vec3::Zero(), dt});
        return out;
    }
    if (action.command == Command::TakeOff || action.command == Command::Land) {
        const PlannedAction tick{action.command, action.velocity, dt};
        const FlightMode settled = action.command == Command::TakeOff ? FlightMode::Hovering : FlightMode::Landed;
        DroneState s = state;
        do {
            out.push_back(tick);
            s = step(s, tick, dt, limits);
        } while (s.mode != settled && out.size() < 1000000);
        return out;
    }
    out.push_back({action.command, Vec3::Zero(), dt});
    return out;
}

// ---------------------------------------------------------------------------

std::string format_number(double v) {
    if (v == 0.0) return "0";
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string trace_csv_row(const FrameRecord& r) {
    char t[32];
    std::snprintf(t, sizeof t, "%.3f", r.t);
    std::string row = std::string(t) + ',' + std::string(to_string(r.state.mode)) + ',' +
                      format_number(r.state.position.x()) + ',' + format_number(r.state.position.y()) + ',' +
                      format_number(r.state.position.z()) + ',';
    if (r.command) row += to_string(*r.command);
    row += ',';
    if (r.refusal) row += to_string(*r.refusal);
    return row;
}

Pilot::Pilot(GestureMap map, World world, FlightLimits limits, DroneState start)
    : debouncer_(map), world_(std::move(world)), limits_(limits), state_(start) {
    validate(world_);
    validate(limits_);
}

void Pilot::run_tick(const PlannedAction& tick) {
    if (sink_) sink_(tick, state_);
    state_ = step(state_, tick, limits_.tick, limits_);
    ++ticks_;
}

FrameRecord Pilot::on_frame(GestureLabel label, std::optional<double> est_operator_distance) {
    FrameRecord rec;
    const PlannedAction idle{Command::Hover, Vec3::Zero(), limits_.tick};
    if (auto cmd = debouncer_.push(label)) {
        // A takeoff gesture while flying means "hold position".
        if (*cmd == Command::TakeOff && state_.airborne()) cmd = Command::Hover;
        rec.command = *cmd;
        const double est = est_operator_distance.value_or(operator_distance(state_, world_));
        const PlanResult r = plan(*cmd, state_, world_, est, limits_);
        if (const auto* refusal = std::get_if<Refusal>(&r)) {
            rec.refusal = refusal->reason;
            run_tick(idle);
        } else {
            for (const PlannedAction& tick : control_ticks(std::get<PlannedAction>(r), state_, limits_)) run_tick(tick);
        }
    } else {
        run_tick(idle);
    }
    rec.t = time();
    rec.state = state_;
    return rec;
}

}  // namespace haarpilot
