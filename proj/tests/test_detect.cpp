// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "haarpilot/detect.hpp"
#include "haarpilot/synthetic.hpp"
#include "oracles.hpp"

using namespace haarpilot;

namespace {

// One stage, one TwoH stump over the whole 8x8 window: fires on a strong
// bright-left/dark-right edge.
Cascade edge_cascade(GestureLabel label = GestureLabel::Palm, double threshold = 0.5) {
    const WindowSpec spec{8};
    const HaarFeature f{HaarKind::TwoH, 0, 0, 4, 8};
    const std::size_t idx = *FeatureBank(spec).index_of(f);
    return {spec, label, {Stage{{Stump{idx, f, threshold, 1, 1.0}}, 0.5}}};
}

Cascade never_cascade(GestureLabel label) { return edge_cascade(label, 1e9); }

GrayImage planted_frame(Rng& rng, Rect at, int max_noise = 255) {
    GrayImage frame = oracle::random_image(160, 160, rng, max_noise);
    GrayImage patch = make_image(at.w, at.h, 20);
    patch.leftCols(at.w / 2).setConstant(230);
    synthetic::paste(frame, patch, {at.x, at.y});
    return frame;
}

bool near(const Rect& a, const Rect& b, int tol) {
    return std::abs(a.x - b.x) <= tol && std::abs(a.y - b.y) <= tol && std::abs(a.w - b.w) <= tol &&
           std::abs(a.h - b.h) <= tol;
}

}  // namespace

TEST_CASE("blank frames produce nothing") {
    const GrayImage blank = make_image(64, 48, 90);
    CHECK(scan(blank, edge_cascade(), ScanConfig{}).empty());
    const std::vector<Cascade> cascades = {edge_cascade(GestureLabel::Fist), edge_cascade(GestureLabel::LF)};
    const Classification c = classify_gesture(blank, cascades, ScanConfig{});
    CHECK(c.label == GestureLabel::None);
    CHECK_FALSE(c.best.has_value());
}

TEST_CASE("scale schedule") {
    ScanConfig cfg;
    const auto scales = scan_scales(cfg, 20, 160, 120);
    REQUIRE_FALSE(scales.empty());
    CHECK(scales.front() == 1.0);
    for (std::size_t i = 1; i < scales.size(); ++i) CHECK(scales[i] == doctest::Approx(scales[i - 1] * 1.25));
    CHECK(scaled_extent(20, scales.back()) <= 120);
    CHECK(scaled_extent(20, scales.back() * 1.25) > 120);

    cfg.min_size = 10;
    CHECK_THROWS_AS(scan_scales(cfg, 20, 160, 120), InputError);
    cfg = {};
    cfg.scale_factor = 1.0;
    CHECK_THROWS_AS(validate(cfg), InputError);
    CHECK_THROWS_AS(scan(make_image(7, 30), edge_cascade(), ScanConfig{}), InputError);
}

TEST_CASE("planted pattern is found") {
    Rng rng(31);
    const Rect truth{40, 60, 40, 40};
    const GrayImage frame = planted_frame(rng, truth, 120);
    const auto raw = scan(frame, edge_cascade(), ScanConfig{});
    double best = 0.0;
    for (const auto& d : raw) {
        best = std::max(best, iou(d.rect, truth));
        CHECK(d.score >= 0.0);
        CHECK(d.rect.x + d.rect.w <= 160);
        CHECK(d.rect.y + d.rect.h <= 160);
    }
    CHECK(best >= 0.5);

    // Output order is scale-major, then row, then column.
    for (std::size_t i = 1; i < raw.size(); ++i) {
        const auto& a = raw[i - 1];
        const auto& b = raw[i];
        const bool ordered = a.scale < b.scale || (a.scale == b.scale && (a.rect.y < b.rect.y ||
                                                                          (a.rect.y == b.rect.y && a.rect.x < b.rect.x)));
        REQUIRE(ordered);
    }
    CHECK(scan(frame, edge_cascade(), ScanConfig{}) == raw);
}

TEST_CASE("working size maps detections back to the frame") {
    Rng rng(32);
    const Rect truth{40, 60, 40, 40};
    const GrayImage frame = planted_frame(rng, truth, 120);
    ScanConfig cfg;
    cfg.working_size = 80;
    const auto raw = scan(frame, edge_cascade(), cfg);
    REQUIRE_FALSE(raw.empty());
    double best = 0.0;
    for (const auto& d : raw) {
        best = std::max(best, iou(d.rect, truth));
        CHECK(d.rect.x + d.rect.w <= 160);
    }
    CHECK(best >= 0.5);
}

TEST_CASE("detections correspond across a 2x upscale") {
    Rng rng(33);
    const GrayImage frame = planted_frame(rng, {30, 20, 32, 32}, 100);
    const GrayImage big = resize_nearest(frame, 320, 320);
    ScanConfig cfg;
    cfg.scale_factor = 2.0;
    cfg.step_fraction = 0.0;
    const auto small_dets = scan(frame, edge_cascade(), cfg);
    const auto big_dets = scan(big, edge_cascade(), cfg);
    REQUIRE_FALSE(small_dets.empty());
    for (const auto& d : small_dets) {
        const Rect want{2 * d.rect.x, 2 * d.rect.y, 2 * d.rect.w, 2 * d.rect.h};
        const bool found = std::any_of(big_dets.begin(), big_dets.end(), [&](const Detection& b) { return near(b.rect, want, 1); });
        REQUIRE(found);
    }
    for (const auto& b : big_dets) {
        if (b.rect.w < 16 || b.rect.x % 2 || b.rect.y % 2) continue;
        const Rect want{b.rect.x / 2, b.rect.y / 2, b.rect.w / 2, b.rect.h / 2};
        const bool found = std::any_of(small_dets.begin(), small_dets.end(), [&](const Detection& d) { return near(d.rect, want, 1); });
        REQUIRE(found);
    }
}

TEST_CASE("affine intensity changes do not move detections") {
    Rng rng(34);
    const GrayImage frame = planted_frame(rng, {50, 50, 48, 48}, 100);
    GrayImage dim = frame;
    for (Eigen::Index i = 0; i < dim.size(); ++i) dim.data()[i] = std::min<int>(dim.data()[i], 100);
    GrayImage bright = dim;
    for (Eigen::Index i = 0; i < bright.size(); ++i) bright.data()[i] = static_cast<std::uint8_t>(2 * dim.data()[i] + 10);
    const auto a = scan(dim, edge_cascade(GestureLabel::Palm, 0.3), ScanConfig{});
    const auto b = scan(bright, edge_cascade(GestureLabel::Palm, 0.3), ScanConfig{});
    REQUIRE_FALSE(a.empty());
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].rect == b[i].rect);
        CHECK(a[i].score == doctest::Approx(b[i].score));
    }
}

TEST_CASE("rectangle grouping") {
    const std::vector<Detection> three = {{{10, 10, 40, 40}, 1.0, 1.0}, {{11, 10, 40, 40}, 3.0, 1.0}, {{10, 12, 41, 40}, 2.0, 1.0}};
    auto g = group_rects(three, 3, 0.2);
    REQUIRE(g.size() == 1);
    CHECK(g[0].score == 3.0);
    CHECK(g[0].rect == Rect{10, 11, 40, 40});

    CHECK(group_rects(std::span(three).first(2), 3, 0.2).empty());

    std::vector<Detection> two_clusters = three;
    for (const auto& d : three) two_clusters.push_back({{d.rect.x + 100, d.rect.y + 100, d.rect.w, d.rect.h}, d.score, 1.0});
    g = group_rects(two_clusters, 3, 0.2);
    REQUIRE(g.size() == 2);
    CHECK(g[1].rect.x == g[0].rect.x + 100);
    CHECK(group_rects({}, 1, 0.2).empty());
}

TEST_CASE("grouped centers lie inside their members' hull") {
    Rng rng(35);
    const GrayImage frame = planted_frame(rng, {40, 60, 40, 40}, 120);
    const auto raw = scan(frame, edge_cascade(), ScanConfig{});
    for (const auto& g : group_rects(raw, 3, 0.2)) {
        int x0 = 1 << 30, y0 = 1 << 30, x1 = 0, y1 = 0;
        for (const auto& d : raw) {
            const double delta = 0.2 * (std::min(d.rect.w, g.rect.w) + std::min(d.rect.h, g.rect.h)) * 0.5 + 2;
            if (std::abs(d.rect.x - g.rect.x) > 3 * delta || std::abs(d.rect.y - g.rect.y) > 3 * delta) continue;
            x0 = std::min(x0, d.rect.x);
            y0 = std::min(y0, d.rect.y);
            x1 = std::max(x1, d.rect.x + d.rect.w);
            y1 = std::max(y1, d.rect.y + d.rect.h);
        }
        const double cx = g.rect.x + g.rect.w / 2.0;
        const double cy = g.rect.y + g.rect.h / 2.0;
        CHECK(cx >= x0);
        CHECK(cx <= x1);
        CHECK(cy >= y0);
        CHECK(cy <= y1);
    }
}

TEST_CASE("gesture arbitration") {
    Rng rng(36);
    const GrayImage frame = planted_frame(rng, {40, 60, 40, 40}, 120);

    std::vector<Cascade> only_palm = {never_cascade(GestureLabel::Fist), edge_cascade(GestureLabel::Palm),
                                      never_cascade(GestureLabel::GS), never_cascade(GestureLabel::VS),
                                      never_cascade(GestureLabel::LF)};
    Classification c = classify_gesture(frame, only_palm, ScanConfig{});
    CHECK(c.label == GestureLabel::Palm);
    REQUIRE(c.best.has_value());
    CHECK_FALSE(c.grouped[1].empty());
    CHECK(c.grouped[0].empty());

    std::vector<Cascade> tie = {edge_cascade(GestureLabel::VS), edge_cascade(GestureLabel::Fist)};
    c = classify_gesture(frame, tie, ScanConfig{});
    CHECK(c.label == GestureLabel::Fist);

    std::vector<Cascade> dup = {edge_cascade(GestureLabel::VS), edge_cascade(GestureLabel::VS)};
    CHECK_THROWS_AS(classify_gesture(frame, dup, ScanConfig{}), ConfigError);
    std::vector<Cascade> none = {edge_cascade(GestureLabel::None)};
    CHECK_THROWS_AS(check_cascade_set(none), ConfigError);
}

TEST_CASE("pinhole distance") {
    CHECK(estimate_distance(80.0) == 3.0);
    CHECK(estimate_distance(120.0) == 2.0);
    Rng rng(37);
    for (int i = 0; i < 100; ++i) {
        const DistanceCalibration calib{uniform_real(rng, 0.5, 10.0), uniform_real(rng, 10.0, 300.0)};
        const double w = uniform_real(rng, 1.0, 500.0);
        CHECK(estimate_distance(2 * w, calib) == doctest::Approx(estimate_distance(w, calib) / 2));
    }
    CHECK_THROWS_AS(estimate_distance(0.0), InputError);
    CHECK_THROWS_AS(estimate_distance(-5.0), InputError);
    CHECK_THROWS_AS(estimate_distance(10.0, {0.0, 80.0}), InputError);
}

TEST_CASE("detection csv") {
    const Detection d{{1, 2, 30, 40}, 0.25, 1.5};
    CHECK(detection_csv_row("f.pgm", GestureLabel::GS, d) == "f.pgm,GS,1,2,30,40,0.250000,1.500000");
    CHECK(std::string(kDetectionCsvHeader) == "frame,label,x,y,w,h,score,scale");
}
