// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>
#include <sstream>

#include "haarpilot/pilot.hpp"
#include "safety.hpp"

using namespace haarpilot;

namespace {

std::vector<GestureLabel> repeat(GestureLabel g, int n) { return std::vector<GestureLabel>(static_cast<std::size_t>(n), g); }

DroneState hovering(Vec3 at = {0, 0, 3}) {
    DroneState s;
    s.mode = FlightMode::Hovering;
    s.position = at;
    return s;
}

DroneState fly(DroneState s, const PlannedAction& a) {
    for (const auto& tick : control_ticks(a, s)) s = step(s, tick, 0.05);
    return s;
}

PlannedAction planned(const PlanResult& r) {
    REQUIRE(std::holds_alternative<PlannedAction>(r));
    return std::get<PlannedAction>(r);
}

RefusalReason refused(const PlanResult& r) {
    REQUIRE(std::holds_alternative<Refusal>(r));
    return std::get<Refusal>(r).reason;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("debounce examples") {
    const GestureMap map;
    const std::vector<GestureLabel> gs = {GestureLabel::GS, GestureLabel::GS, GestureLabel::GS};
    CHECK(debounce(gs, map) == std::vector<Emission>{{3, Command::MoveLeft}});

    const std::vector<GestureLabel> broken = {GestureLabel::GS, GestureLabel::VS, GestureLabel::GS, GestureLabel::GS};
    CHECK(debounce(broken, map).empty());

    // Three to emit, ten ignored, three more to emit again.
    const auto palms = repeat(GestureLabel::Palm, 16);
    CHECK(debounce(palms, map) == std::vector<Emission>{{3, Command::TakeOff}, {16, Command::TakeOff}});

    std::vector<GestureLabel> with_none = {GestureLabel::Fist, GestureLabel::Fist, GestureLabel::None, GestureLabel::Fist,
                                           GestureLabel::Fist, GestureLabel::Fist};
    CHECK(debounce(with_none, map) == std::vector<Emission>{{6, Command::Land}});
}

TEST_CASE("emissions are separated by more than the cooldown") {
    Rng rng(51);
    for (int trial = 0; trial < 300; ++trial) {
        GestureMap map;
        map.debounce = uniform_int(rng, 1, 5);
        map.cooldown = uniform_int(rng, 0, 12);
        std::vector<GestureLabel> labels;
        GestureLabel g = GestureLabel::None;
        for (int i = 0; i < 200; ++i) {
            if (uniform_int(rng, 0, 4) == 0) g = static_cast<GestureLabel>(uniform_int(rng, 0, 5));
            labels.push_back(g);
        }
        const auto e = debounce(labels, map);
        for (std::size_t i = 1; i < e.size(); ++i) {
            REQUIRE(e[i].frame - e[i - 1].frame > static_cast<std::size_t>(map.cooldown));
        }
        for (const auto& em : e) {
            const std::size_t f = em.frame - 1;
            REQUIRE(f + 1 >= static_cast<std::size_t>(map.debounce));
            for (std::size_t k = f + 1 - static_cast<std::size_t>(map.debounce); k <= f; ++k) {
                REQUIRE(labels[k] == labels[f]);
            }
            REQUIRE(map.command_for(labels[f]) == em.command);
        }
    }
}

TEST_CASE("gesture map files") {
    std::istringstream in("# remap\nGS = MoveRight\nlf=MoveBackward\n\ndebounce=5\ncooldown=0\n");
    const GestureMap m = parse_gesture_map(in);
    CHECK(m.command_for(GestureLabel::GS) == Command::MoveRight);
    CHECK(m.command_for(GestureLabel::LF) == Command::MoveBackward);
    CHECK(m.command_for(GestureLabel::Palm) == Command::TakeOff);
    CHECK(m.debounce == 5);
    CHECK(m.cooldown == 0);

    auto error_line = [](const std::string& text) -> std::size_t {
        std::istringstream s(text);
        try {
            parse_gesture_map(s);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(error_line("GS=MoveLeft\nVS=Jump\n") == 2);
    CHECK(error_line("None=Land\n") == 1);
    CHECK(error_line("Thumb=Land\n") == 1);
    CHECK(error_line("debounce=0\n") == 1);
    CHECK(error_line("noequals\n") == 1);
    CHECK_THROWS_AS(GestureMap{}.command_for(GestureLabel::None), InputError);
    CHECK_THROWS_AS(load_gesture_map("/nonexistent/map.txt"), IoError);
}

TEST_CASE("world files") {
    std::istringstream in("operator 0 6 0\nobstacle 1 2 0 4 5 6\n# comment\nclearance 2.5\n");
    const World w = parse_world(in);
    REQUIRE(w.operator_position.has_value());
    CHECK(*w.operator_position == Vec3(0, 6, 0));
    REQUIRE(w.obstacles.size() == 1);
    CHECK(w.obstacles[0].min == Vec3(1, 2, 0));
    CHECK(w.obstacles[0].size == Vec3(4, 6, 5));
    CHECK(w.clearance == 2.5);

    std::istringstream twice("operator 0 0 0\noperator 1 1 1\n");
    CHECK_THROWS_AS(parse_world(twice), ParseError);
    std::istringstream bad("obstacle 0 0 0 1 1\n");
    CHECK_THROWS_AS(parse_world(bad), ParseError);
    std::istringstream neg("clearance -1\n");
    CHECK_THROWS_AS(parse_world(neg), ParseError);
    CHECK(operator_distance(DroneState{}, World{}) == kInf);
}

TEST_CASE("geometry helpers") {
    const Box b{{0, 0, 0}, {2, 2, 2}};
    CHECK(distance(Vec3(1, 1, 1), b) == 0.0);
    CHECK(distance(Vec3(5, 1, 1), b) == 3.0);
    CHECK(distance(Vec3(5, 6, 1), b) == 5.0);
    CHECK(segment_distance(Vec3(-5, 4, 1), Vec3(5, 4, 1), b) == doctest::Approx(2.0));
    CHECK(segment_distance(Vec3(-5, 4, 1), Vec3(-3, 4, 1), b) == doctest::Approx(std::sqrt(9.0 + 4.0)));
    CHECK(segment_distance(Vec3(-1, 0, 0), Vec3(1, 0, 0), Vec3(0, 2, 0)) == 2.0);
    CHECK(segment_distance(Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(3, 4, 0)) == 5.0);
}

TEST_CASE("planning examples") {
    World w;
    w.operator_position = Vec3(0, 5, 3);
    CHECK(refused(plan(Command::MoveForward, hovering(), w, 2.0)) == RefusalReason::OperatorProximity);
    CHECK(refused(plan(Command::Land, DroneState{}, World{}, kInf)) == RefusalReason::NoOp);
    CHECK(refused(plan(Command::TakeOff, hovering(), World{}, kInf)) == RefusalReason::NoOp);
    CHECK(refused(plan(Command::MoveLeft, DroneState{}, World{}, kInf)) == RefusalReason::NotAirborne);

    const PlannedAction left = planned(plan(Command::MoveLeft, hovering(), World{}, kInf));
    CHECK(left.velocity == Vec3(-3, 0, 0));
    CHECK(left.duration == 0.5);
    const DroneState after = fly(hovering(), left);
    CHECK(after.position.x() == doctest::Approx(-1.5));
    CHECK(after.mode == FlightMode::Hovering);

    DroneState busy;
    busy.mode = FlightMode::TakingOff;
    busy.position = {0, 0, 1};
    CHECK(refused(plan(Command::MoveLeft, busy, World{}, kInf)) == RefusalReason::Busy);
    CHECK(std::holds_alternative<PlannedAction>(plan(Command::TakePicture, DroneState{}, World{}, kInf)));

    CHECK_THROWS_AS(plan(Command::Hover, hovering(), World{}, NAN), InputError);
    DroneState nan_state = hovering();
    nan_state.position.x() = NAN;
    CHECK_THROWS_AS(plan(Command::Hover, nan_state, World{}, kInf), InputError);
}

TEST_CASE("swept paths keep their clearance") {
    World w;
    w.obstacles.push_back({{-1, 3.5, 0}, {2, 1, 6}});  // y in [3.5, 4.5]
    DroneState s = hovering({0, 0, 3});
    CHECK(std::holds_alternative<PlannedAction>(plan(Command::MoveBackward, s, w, kInf)));
    // Ending 1.5 ft ahead leaves 2 ft to the obstacle.
    CHECK(refused(plan(Command::MoveForward, s, w, kInf)) == RefusalReason::ObstacleClearance);

    World op;
    op.operator_position = Vec3(-4.4, 0, 3);
    CHECK(refused(plan(Command::MoveLeft, s, op, 4.4)) == RefusalReason::OperatorClearance);
    CHECK(std::holds_alternative<PlannedAction>(plan(Command::MoveRight, s, op, 4.4)));

    World beside;
    beside.obstacles.push_back({{-5, 10, 0}, {10, 1, 10}});
    // Far enough that the path never nears the obstacle.
    CHECK(std::holds_alternative<PlannedAction>(plan(Command::MoveForward, s, beside, kInf)));
}

TEST_CASE("kinematics") {
    const DroneState h = hovering({1, 2, 3});
    CHECK(step(h, {Command::Hover, Vec3::Zero(), 0.05}, 0.05).position == h.position);

    DroneState s;
    const PlannedAction up = planned(plan(Command::TakeOff, s, World{}, kInf));
    s = fly(s, up);
    CHECK(s.mode == FlightMode::Hovering);
    CHECK(s.position.z() == 3.0);

    DroneState m = step(h, {Command::MoveLeft, Vec3(-3, 0, 0), 0.5}, 0.5);
    CHECK(m.position.x() == doctest::Approx(1 - 1.5));
    CHECK(m.mode == FlightMode::Moving);

    DroneState fast = step(h, {Command::MoveLeft, Vec3(-30, 0, 0), 0.1}, 0.1);
    CHECK(fast.velocity.norm() == doctest::Approx(3.0));

    const DroneState pic = step(h, {Command::TakePicture, Vec3::Zero(), 0.0}, 0.05);
    CHECK(pic.pictures_taken == 1);
    CHECK(pic.position == h.position);

    const PlannedAction down = planned(plan(Command::Land, h, World{}, kInf));
    const DroneState landed = fly(h, down);
    CHECK(landed.mode == FlightMode::Landed);
    CHECK(landed.position.z() == 0.0);
    CHECK(landed.velocity == Vec3::Zero());

    CHECK_THROWS_AS(step(h, {}, 0.0), InputError);
}

TEST_CASE("control ticks") {
    const PlannedAction move{Command::MoveLeft, Vec3(-3, 0, 0), 0.5};
    const auto ticks = control_ticks(move, hovering());
    REQUIRE(ticks.size() == 11);
    CHECK(ticks.back().command == Command::Hover);
    CHECK(ticks.front().duration == 0.05);
    CHECK(control_ticks({Command::Hover, Vec3::Zero(), 0.05}, hovering()).size() == 1);
    const auto up = control_ticks({Command::TakeOff, Vec3(0, 0, 3), 1.0}, DroneState{});
    CHECK(up.size() == 20);
}

TEST_CASE("mode transitions stay on the flight graph") {
    const std::set<std::pair<FlightMode, FlightMode>> allowed = {
        {FlightMode::Landed, FlightMode::TakingOff},  {FlightMode::TakingOff, FlightMode::Hovering},
        {FlightMode::Hovering, FlightMode::Moving},   {FlightMode::Moving, FlightMode::Hovering},
        {FlightMode::Hovering, FlightMode::Landing},  {FlightMode::Moving, FlightMode::Landing},
        {FlightMode::Landing, FlightMode::Landed},
    };
    Rng rng(52);
    for (int sim = 0; sim < 300; ++sim) {
        DroneState s;
        for (int i = 0; i < 40; ++i) {
            const Command c = kCommands[uniform_index(rng, kCommands.size())];
            const PlanResult r = plan(c, s, World{}, kInf);
            if (!std::holds_alternative<PlannedAction>(r)) continue;
            for (const auto& tick : control_ticks(std::get<PlannedAction>(r), s)) {
                const DroneState next = step(s, tick, 0.05);
                if (next.mode != s.mode) REQUIRE(allowed.count({s.mode, next.mode}) == 1);
                REQUIRE(next.position.z() >= 0.0);
                REQUIRE((next.position.z() == 0.0) == (next.mode == FlightMode::Landed));
                REQUIRE(next.velocity.norm() <= 3.0 + 1e-12);
                s = next;
            }
        }
    }
}

TEST_CASE("pilot frame loop") {
    GestureMap map;
    map.cooldown = 0;
    World w;
    w.operator_position = Vec3(0, 10, 0);
    Pilot p(map, w);
    std::vector<FrameRecord> recs;
    for (GestureLabel g : {GestureLabel::Palm, GestureLabel::Palm, GestureLabel::Palm}) recs.push_back(p.on_frame(g));
    CHECK(recs[2].command == Command::TakeOff);
    CHECK(p.state().mode == FlightMode::Hovering);
    CHECK(p.state().position.z() == 3.0);

    // Palm while airborne resolves to hover.
    for (int i = 0; i < 3; ++i) recs.push_back(p.on_frame(GestureLabel::Palm));
    CHECK(recs.back().command == Command::Hover);
    CHECK_FALSE(recs.back().refusal.has_value());

    for (int i = 0; i < 3; ++i) recs.push_back(p.on_frame(GestureLabel::VS, 2.0));
    CHECK(recs.back().refusal == RefusalReason::OperatorProximity);
    const Vec3 before = p.state().position;
    CHECK(p.state().position == before);

    for (int i = 0; i < 3; ++i) recs.push_back(p.on_frame(GestureLabel::VS));
    CHECK(recs.back().command == Command::MoveForward);
    CHECK(p.state().position.y() == doctest::Approx(1.5));

    // Sustained None keeps hovering.
    for (int i = 0; i < 50; ++i) p.on_frame(GestureLabel::None);
    CHECK(p.state().mode == FlightMode::Hovering);
    CHECK(p.state().position.z() == 3.0);

    FrameRecord r{1.15, p.state(), Command::Land, std::nullopt};
    r.state.position = {0, 1.5, 3};
    CHECK(trace_csv_row(r) == "1.150,Hovering,0,1.5,3,Land,");
    r.command.reset();
    r.refusal = RefusalReason::Busy;
    CHECK(trace_csv_row(r) == "1.150,Hovering,0,1.5,3,,busy");
    CHECK(format_number(0.1 + 0.2) == "0.30000000000000004");
    CHECK(format_number(-0.0) == "0");
}

TEST_CASE("randomized worlds never breach the clearance") {
    const safety::Stats s = safety::run(1000, 53);
    CHECK(s.violations == 0);
    CHECK(s.move_ticks > 1000);
    CHECK(s.refusals > 0);
    CHECK(s.closest_margin >= -1e-9);
}
