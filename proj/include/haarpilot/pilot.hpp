// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "haarpilot/errors.hpp"
#include "haarpilot/gesture.hpp"

namespace haarpilot {

enum class Command : std::uint8_t { TakeOff, Land, MoveLeft, MoveRight, MoveForward, MoveBackward, Hover, TakePicture };

inline constexpr std::array<Command, 8> kCommands = {Command::TakeOff,     Command::Land,         Command::MoveLeft,
                                                     Command::MoveRight,   Command::MoveForward,  Command::MoveBackward,
                                                     Command::Hover,       Command::TakePicture};

std::string_view to_string(Command c);
Command parse_command(std::string_view token);

// ---------------------------------------------------------------------------
// Gesture mapping and debouncing

struct GestureMap {
    /// Indexed by GestureLabel (None excluded).
    std::array<Command, 5> commands = {Command::Land, Command::TakeOff, Command::MoveLeft, Command::MoveForward,
                                       Command::TakePicture};
    int debounce = 3;
    int cooldown = 10;

    Command command_for(GestureLabel label) const;
};

void validate(const GestureMap& map);

/// `gesture=command`, `debounce=K` and `cooldown=N` lines over the defaults;
/// blank lines and `#` comments are skipped.
GestureMap parse_gesture_map(std::istream& in);
GestureMap load_gesture_map(const std::filesystem::path& path);

/// Emits a command once the same label has been seen `debounce` frames in a
/// row. The `cooldown` frames after an emission are ignored entirely and the
/// run starts over afterwards. None breaks the run.
class Debouncer {
public:
    explicit Debouncer(const GestureMap& map);
    std::optional<Command> push(GestureLabel label);

private:
    GestureMap map_;
    GestureLabel current_ = GestureLabel::None;
    int run_ = 0;
    int cooling_ = 0;
};

struct Emission {
    /// 1-based frame number.
    std::size_t frame = 0;
    Command command = Command::Hover;
    friend bool operator==(const Emission&, const Emission&) = default;
};

std::vector<Emission> debounce(std::span<const GestureLabel> labels, const GestureMap& map);

// ---------------------------------------------------------------------------
// Drone model. x is lateral (right positive), y points forward, z is up; feet.

using Vec3 = Eigen::Vector3d;

enum class FlightMode : std::uint8_t { Landed, TakingOff, Hovering, Moving, Landing };

std::string_view to_string(FlightMode m);
FlightMode parse_flight_mode(std::string_view token);

struct DroneState {
    FlightMode mode = FlightMode::Landed;
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    double heading = 0.0;
    std::size_t pictures_taken = 0;

    bool airborne() const { return mode != FlightMode::Landed; }
    friend bool operator==(const DroneState&, const DroneState&) = default;
};

struct FlightLimits {
    double max_speed = 3.0;
    double hover_altitude = 3.0;
    double move_distance = 1.5;
    /// Control period; every action is executed as a whole number of ticks.
    double tick = 0.05;
};

void validate(const FlightLimits& limits);

/// Axis-aligned box from `min` spanning `size` along x, y and z.
struct Box {
    Vec3 min = Vec3::Zero();
    Vec3 size = Vec3::Zero();
    friend bool operator==(const Box&, const Box&) = default;
};

double distance(const Vec3& p, const Box& b);

/// Smallest distance between the segment [a, b] and the box or point.
double segment_distance(const Vec3& a, const Vec3& b, const Box& box);
double segment_distance(const Vec3& a, const Vec3& b, const Vec3& point);

struct World {
    std::optional<Vec3> operator_position;
    std::vector<Box> obstacles;
    double clearance = 3.0;
};

void validate(const World& world);

/// `operator x y z` (at most once), `obstacle x y z w h d` with (x, y, z) the
/// min corner, w along x, h along z and d along y; `clearance c`; `#` comments.
World parse_world(std::istream& in);
World load_world(const std::filesystem::path& path);

/// Distance from the drone to the operator, infinite when the world has none.
double operator_distance(const DroneState& state, const World& world);

// ---------------------------------------------------------------------------
// Planning and kinematics

struct PlannedAction {
    Command command = Command::Hover;
    Vec3 velocity = Vec3::Zero();
    double duration = 0.0;
    friend bool operator==(const PlannedAction&, const PlannedAction&) = default;
};

enum class RefusalReason : std::uint8_t {
    ObstacleClearance,
    OperatorClearance,
    OperatorProximity,
    NotAirborne,
    NoOp,
    Busy,
};

std::string_view to_string(RefusalReason r);

struct Refusal {
    RefusalReason reason = RefusalReason::NoOp;
    std::string detail;
};

using PlanResult = std::variant<PlannedAction, Refusal>;

/// Checks, in order: TakeOff while airborne or Land/Hover while landed (no-op),
/// a move while landed, anything but TakePicture during takeoff or landing,
/// MoveForward with the operator estimated nearer than the clearance, and the
/// whole swept path against the clearance around the operator and obstacles.
PlanResult plan(Command cmd, const DroneState& state, const World& world, double est_operator_distance,
                const FlightLimits& limits = {});

/// First-order kinematics for one interval. Hover during takeoff or landing
/// continues the vertical manoeuvre; the climb and descent stop exactly at
/// the hover altitude and the ground.
DroneState step(const DroneState& state, const PlannedAction& action, double dt, const FlightLimits& limits = {});

/// Splits an action into control ticks: moves become their velocity ticks
/// followed by one Hover tick; takeoff and landing run until the mode
/// settles; Hover and TakePicture take one tick.
std::vector<PlannedAction> control_ticks(const PlannedAction& action, const DroneState& state,
                                         const FlightLimits& limits = {});

// ---------------------------------------------------------------------------
// Frame loop

struct FrameRecord {
    double t = 0.0;
    DroneState state;
    std::optional<Command> command;
    std::optional<RefusalReason> refusal;
};

inline constexpr const char* kTraceCsvHeader = "t,mode,x,y,z,command,refusal_reason";
std::string trace_csv_row(const FrameRecord& r);
/// Shortest round-trip decimal form.
std::string format_number(double v);

/// Label in, debounced, planned and flown. Every frame advances one tick:
/// frames without a command hover, commanded actions run to completion.
/// `on_tick` sees each executed control tick before it is applied.
class Pilot {
public:
    using TickSink = std::function<void(const PlannedAction& tick, const DroneState& before)>;

    Pilot(GestureMap map, World world, FlightLimits limits = {}, DroneState start = {});

    /// `est_operator_distance` defaults to the world geometry.
    FrameRecord on_frame(GestureLabel label, std::optional<double> est_operator_distance = std::nullopt);

    void set_tick_sink(TickSink sink) { sink_ = std::move(sink); }
    const DroneState& state() const { return state_; }
    const World& world() const { return world_; }
    double time() const { return static_cast<double>(ticks_) * limits_.tick; }

private:
    void run_tick(const PlannedAction& tick);

    Debouncer debouncer_;
    World world_;
    FlightLimits limits_;
    DroneState state_;
    std::uint64_t ticks_ = 0;
    TickSink sink_;
};

}  // namespace haarpilot
