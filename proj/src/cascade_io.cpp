// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "haarpilot/boost.hpp"

namespace haarpilot {
namespace {

constexpr std::string_view kMagic = "HAARPILOT-CASCADE";
constexpr int kVersion = 1;
// Loading enumerates the whole feature bank, which grows with the fourth power of the side.
constexpr long long kMaxWindow = 32;

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17e", v);
    return buf;
}

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    // Next non-empty line split on whitespace; fails at end of input.
    std::vector<std::string> next(std::string_view expecting) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::istringstream ss(line);
            std::vector<std::string> tokens;
            for (std::string t; ss >> t;) tokens.push_back(t);
            if (!tokens.empty()) return tokens;
        }
        throw ParseError("unexpected end of model file, expected " + std::string(expecting), line_no_ + 1);
    }

    bool at_end() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (line.find_first_not_of(" \t\r") != std::string::npos) return false;
        }
        return true;
    }

    std::size_t line() const { return line_no_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("model line " + std::to_string(line_no_) + ": " + what, line_no_);
    }

    void expect(const std::vector<std::string>& tokens, std::size_t count, std::string_view keyword) const {
        if (tokens.size() != count || tokens[0] != keyword) {
            fail("expected '" + std::string(keyword) + "' with " + std::to_string(count - 1) + " fields");
        }
    }

    long long integer(const std::string& token) const {
        long long v = 0;
        auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (ec != std::errc() || p != token.data() + token.size()) fail("bad integer '" + token + "'");
        return v;
    }

    double real(const std::string& token) const {
        double v = 0.0;
        auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (ec != std::errc() || p != token.data() + token.size() || !std::isfinite(v)) {
            fail("bad real '" + token + "'");
        }
        return v;
    }

private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

}  // namespace

void save_cascade(const Cascade& cascade, std::ostream& out) {
    out << kMagic << ' ' << kVersion << '\n';
    out << "window " << cascade.window.size << '\n';
    out << "label " << to_string(cascade.label) << '\n';
    out << "stages " << cascade.stages.size() << '\n';
    for (std::size_t k = 0; k < cascade.stages.size(); ++k) {
        const Stage& stage = cascade.stages[k];
        out << "stage " << k + 1 << " threshold " << format_real(stage.threshold) << " stumps "
            << stage.stumps.size() << '\n';
        for (const Stump& s : stage.stumps) {
            out << "stump " << serialize(s.feature) << ' ' << format_real(s.threshold) << ' ' << s.polarity << ' '
                << format_real(s.alpha) << '\n';
        }
    }
}

void save_cascade(const Cascade& cascade, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model file " + path.string());
    save_cascade(cascade, out);
    out.flush();
    if (!out) throw IoError("failed writing model file " + path.string());
}

Cascade load_cascade(std::istream& in) {
    LineReader r(in);
    auto t = r.next("header");
    if (t.size() != 2 || t[0] != kMagic) r.fail("not a cascade model file");
    if (r.integer(t[1]) != kVersion) {
        throw VersionError("unsupported cascade model version " + t[1] + " (expected " + std::to_string(kVersion) +
                           ")");
    }

    Cascade c;
    t = r.next("window");
    r.expect(t, 2, "window");
    const long long side = r.integer(t[1]);
    if (side < 4 || side > kMaxWindow) r.fail("window size out of range");
    c.window.size = static_cast<int>(side);
    const FeatureBank bank(c.window);

    t = r.next("label");
    r.expect(t, 2, "label");
    try {
        c.label = parse_gesture(t[1]);
    } catch (const InputError& e) {
        r.fail(e.what());
    }

    t = r.next("stages");
    r.expect(t, 2, "stages");
    const long long stages = r.integer(t[1]);
    if (stages < 1) r.fail("a model needs at least one stage");

    for (long long k = 1; k <= stages; ++k) {
        t = r.next("stage");
        r.expect(t, 6, "stage");
        if (r.integer(t[1]) != k || t[2] != "threshold" || t[4] != "stumps") r.fail("malformed stage header");
        Stage stage;
        stage.threshold = r.real(t[3]);
        const long long stumps = r.integer(t[5]);
        if (stumps < 1) r.fail("a stage needs at least one stump");
        for (long long m = 0; m < stumps; ++m) {
            t = r.next("stump");
            r.expect(t, 9, "stump");
            Stump s;
            try {
                s.feature.kind = parse_haar_kind(t[1]);
            } catch (const InputError& e) {
                r.fail(e.what());
            }
            s.feature.x = static_cast<int>(r.integer(t[2]));
            s.feature.y = static_cast<int>(r.integer(t[3]));
            s.feature.w = static_cast<int>(r.integer(t[4]));
            s.feature.h = static_cast<int>(r.integer(t[5]));
            const auto index = bank.index_of(s.feature);
            if (!index) r.fail("feature does not fit the " + std::to_string(side) + "px window");
            s.feature_index = *index;
            s.threshold = r.real(t[6]);
            const long long polarity = r.integer(t[7]);
            if (polarity != 1 && polarity != -1) r.fail("polarity must be 1 or -1");
            s.polarity = static_cast<int>(polarity);
            s.alpha = r.real(t[8]);
            if (!(s.alpha > 0.0)) r.fail("alpha must be positive");
            stage.stumps.push_back(s);
        }
        c.stages.push_back(std::move(stage));
    }
    if (!r.at_end()) r.fail("trailing content after the last stage");
    return c;
}

Cascade load_cascade(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file " + path.string());
    return load_cascade(in);
}

}  // namespace haarpilot
