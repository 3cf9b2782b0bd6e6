// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "haarpilot/boost.hpp"
#include "haarpilot/cli.hpp"
#include "haarpilot/haar.hpp"
#include "haarpilot/synthetic.hpp"
#include "haarpilot/wire.hpp"
#include "oracles.hpp"
#include "table2.hpp"

using namespace haarpilot;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

std::string read_text(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> f;
        std::size_t start = 0;
        for (std::size_t comma; (comma = line.find(',', start)) != std::string::npos; start = comma + 1) {
            f.push_back(line.substr(start, comma - start));
        }
        f.push_back(line.substr(start));
        rows.push_back(std::move(f));
    }
    return rows;
}

// Commands and refusals of a fly-sim trace, in order, header skipped.
std::vector<std::pair<std::string, std::string>> commands(const std::string& trace) {
    std::vector<std::pair<std::string, std::string>> out;
    const auto rows = csv_rows(trace);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        REQUIRE(rows[i].size() == 7);
        if (!rows[i][5].empty()) out.emplace_back(rows[i][5], rows[i][6]);
    }
    return out;
}

std::string line_starting(const std::string& text, const std::string& prefix) {
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (line.rfind(prefix, 0) == 0) return line;
    }
    return {};
}

Cascade edge_cascade() {
    const WindowSpec spec{8};
    const HaarFeature f{HaarKind::TwoH, 0, 0, 4, 8};
    const std::size_t idx = *FeatureBank(spec).index_of(f);
    return {spec, GestureLabel::Palm, {Stage{{Stump{idx, f, 0.5, 1, 1.0}}, 0.5}}};
}

std::string table2_counts() {
    std::string text = "illumination,background,distance,gesture,correct,total\n";
    for (const auto& row : table2::kRows) {
        for (std::size_t g = 0; g < table2::kColumns.size(); ++g) {
            text += std::string(to_string(row.tag.illumination)) + ',' + std::string(to_string(row.tag.background)) +
                    ',' + std::string(to_string(row.tag.distance)) + ',' +
                    std::string(to_string(table2::kColumns[g])) + ',' + std::to_string(row.percent[g]) + ",100\n";
        }
    }
    return text;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(run({}).code == cli::kUsage);
    CHECK(run({"bogus"}).code == cli::kUsage);
    CHECK(run({"train", "--label", "Palm"}).code == cli::kUsage);
    CHECK(run({"--help"}).code == cli::kOk);
}

TEST_CASE("missing inputs are data errors naming the path") {
    oracle::TempDir tmp("cli_missing");
    const std::string missing = (tmp / "nope.txt").string();
    const Result r = run({"train", "--positives", missing, "--negatives", missing, "--label", "Palm", "--out",
                          (tmp / "m.cascade").string()});
    CHECK(r.code == cli::kDataError);
    CHECK(r.err.find(missing) != std::string::npos);

    const Result s = run({"summary", (tmp / "absent").string()});
    CHECK(s.code == cli::kDataError);
}

TEST_CASE("evaluate aggregates published counts") {
    oracle::TempDir tmp("cli_eval");
    write_text(tmp / "counts.csv", table2_counts());
    const Result r = run({"evaluate", "--counts", (tmp / "counts.csv").string()});
    REQUIRE(r.code == cli::kOk);
    CHECK(line_starting(r.err, "average_MT-3,") == "average_MT-3,0.7135");
    CHECK(line_starting(r.err, "average_LT-3,") == "average_LT-3,0.9030");
    CHECK(line_starting(r.err, "significance,").rfind("significance,distance=0.1895,", 0) == 0);
    CHECK(r.out.rfind("kind,illumination,background,distance,gesture,correct,total,accuracy\n", 0) == 0);

    SUBCASE("a single cell is its own marginal") {
        write_text(tmp / "one.csv", "illumination,background,distance,gesture,correct,total\nWL,CLB,LT-3,Palm,87,100\n");
        const Result one = run({"evaluate", "--counts", (tmp / "one.csv").string()});
        REQUIRE(one.code == cli::kOk);
        CHECK(line_starting(one.err, "average_LT-3,") == "average_LT-3,0.8700");
        CHECK(line_starting(one.err, "average_all,") == "average_all,0.8700");
        CHECK(line_starting(one.err, "average_MT-3,") == "average_MT-3,empty");
    }

    SUBCASE("a bad manifest tag reports its line") {
        write_text(tmp / "manifest.csv",
                   "path,label,illumination,background,distance\na.pgm,Palm,WL,CLB,LT-3\nb.pgm,Palm,XL,CLB,LT-3\n");
        const Result bad = run({"evaluate", (tmp / "manifest.csv").string()});
        CHECK(bad.code == cli::kDataError);
        CHECK(bad.err.find("3") != std::string::npos);
        CHECK(bad.err.find("XL") != std::string::npos);
    }

    SUBCASE("a bad counts row reports its line") {
        write_text(tmp / "bad.csv", "illumination,background,distance,gesture,correct,total\nWL,CLB,LT-3,Wave,1,2\n");
        const Result bad = run({"evaluate", "--counts", (tmp / "bad.csv").string()});
        CHECK(bad.code == cli::kDataError);
        CHECK(bad.err.find("line 2") != std::string::npos);
    }
}

TEST_CASE("fly-sim follows a gesture script") {
    oracle::TempDir tmp("cli_fly");
    write_text(tmp / "script.txt", "Palm*3 VS*3\nFist*3  # land\n");
    const std::string script = (tmp / "script.txt").string();

    const Result r = run({"fly-sim", "--script", script, "--cooldown", "0"});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.rfind("t,mode,x,y,z,command,refusal_reason\n", 0) == 0);
    const auto cmds = commands(r.out);
    REQUIRE(cmds.size() == 3);
    CHECK(cmds[0] == std::pair<std::string, std::string>{"TakeOff", ""});
    CHECK(cmds[1] == std::pair<std::string, std::string>{"MoveForward", ""});
    CHECK(cmds[2] == std::pair<std::string, std::string>{"Land", ""});
    CHECK(line_starting(r.err, "final,").rfind("final,Landed,", 0) == 0);

    SUBCASE("the default cooldown swallows the later gestures") {
        const Result d = run({"fly-sim", "--script", script});
        REQUIRE(d.code == cli::kOk);
        const auto c = commands(d.out);
        REQUIRE(c.size() == 1);
        CHECK(c[0].first == "TakeOff");
    }

    SUBCASE("an obstacle past the move endpoint refuses the move") {
        write_text(tmp / "world.txt", "# wall ahead\nobstacle -2 3.5 0 4 6 1\n");
        const Result w = run({"fly-sim", "--script", script, "--cooldown", "0", "--world", (tmp / "world.txt").string()});
        REQUIRE(w.code == cli::kOk);
        const auto c = commands(w.out);
        REQUIRE(c.size() == 3);
        CHECK(c[0] == std::pair<std::string, std::string>{"TakeOff", ""});
        CHECK(c[1] == std::pair<std::string, std::string>{"MoveForward", "obstacle-clearance"});
        CHECK(c[2] == std::pair<std::string, std::string>{"Land", ""});
        const auto rows = csv_rows(w.out);
        for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][3]) == 0.0);
    }

    SUBCASE("an obstacle two feet ahead keeps the drone on the ground") {
        write_text(tmp / "wall.txt", "obstacle -2 2 0 4 6 1\n");
        const Result w = run({"fly-sim", "--script", script, "--cooldown", "0", "--world", (tmp / "wall.txt").string()});
        REQUIRE(w.code == cli::kOk);
        const auto c = commands(w.out);
        REQUIRE(c.size() == 3);
        CHECK(c[0].second == "obstacle-clearance");
        CHECK(c[1] == std::pair<std::string, std::string>{"MoveForward", "not-airborne"});
        CHECK(line_starting(w.err, "final,") == "final,Landed,0,0,0,pictures=0");
    }

    SUBCASE("malformed inputs are data errors") {
        write_text(tmp / "bad_world.txt", "obstacle 1 2 3\n");
        CHECK(run({"fly-sim", "--script", script, "--world", (tmp / "bad_world.txt").string()}).code ==
              cli::kDataError);
        write_text(tmp / "bad_script.txt", "Palm*3\nWave\n");
        const Result b = run({"fly-sim", "--script", (tmp / "bad_script.txt").string()});
        CHECK(b.code == cli::kDataError);
        CHECK(b.err.find("line 2") != std::string::npos);
        CHECK(run({"fly-sim"}).code == cli::kDataError);
    }
}

TEST_CASE("fly-sim over the wire ends where the simulation ends") {
    oracle::TempDir tmp("cli_wire");
    write_text(tmp / "script.txt", "Palm*3 VS*3 LF*3 Fist*3\n");
    const std::string script = (tmp / "script.txt").string();
    const Result local = run({"fly-sim", "--script", script, "--cooldown", "0"});
    REQUIRE(local.code == cli::kOk);

    SimDroneEndpoint endpoint;
    const std::uint16_t port = endpoint.start({"127.0.0.1", 0});
    const Result r = run({"fly-sim", "--script", script, "--cooldown", "0", "--wire", "127.0.0.1:" + std::to_string(port)});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out == local.out);

    const std::string final_line = line_starting(r.err, "final,");
    const auto seq_at = final_line.find(",seq_last=");
    REQUIRE(seq_at != std::string::npos);
    const auto seq_last = static_cast<std::uint32_t>(std::stoul(final_line.substr(seq_at + 10)));
    REQUIRE(endpoint.wait_for_seq(seq_last, std::chrono::seconds(5)));
    endpoint.stop();
    const EndpointSnapshot s = endpoint.snapshot();
    CHECK(s.seq_last == seq_last);
    CHECK(s.malformed == 0);
    CHECK(s.state.pictures_taken == 0);  // pictures are not carried over the wire
    const std::string row = endpoint_csv_row(s);
    CHECK(final_line == "final," + row.substr(0, row.rfind(',')) + ",pictures=1,seq_last=" + std::to_string(seq_last));
    CHECK(line_starting(local.err, "final,") + ",seq_last=" + std::to_string(seq_last) == final_line);
}

TEST_CASE("detect writes one row per grouped detection") {
    oracle::TempDir tmp("cli_detect");
    save_cascade(edge_cascade(), tmp / "palm.cascade");
    fs::create_directories(tmp / "frames");
    write_pgm(make_image(64, 48, 90), tmp / "frames" / "a_blank.pgm");

    GrayImage planted = make_image(96, 96, 128);
    GrayImage patch = make_image(32, 32, 20);
    patch.leftCols(16).setConstant(230);
    synthetic::paste(planted, patch, {30, 40});
    write_pgm(planted, tmp / "frames" / "b_planted.pgm");

    const Result blank = run({"detect", (tmp / "frames" / "a_blank.pgm").string(), "--model",
                              (tmp / "palm.cascade").string()});
    REQUIRE(blank.code == cli::kOk);
    CHECK(csv_rows(blank.out).size() == 1);
    CHECK(blank.err.find("Palm=0,label=None") != std::string::npos);

    const Result all = run({"detect", (tmp / "frames").string(), "--models", tmp.path().string(), "--annotate",
                            (tmp / "annotated").string()});
    REQUIRE(all.code == cli::kOk);
    const auto rows = csv_rows(all.out);
    REQUIRE(rows.size() >= 2);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][0].find("b_planted.pgm") != std::string::npos);
    CHECK(all.err.find("b_planted.pgm,Palm=") != std::string::npos);
    CHECK(all.err.find("label=Palm") != std::string::npos);
    CHECK(fs::exists(tmp / "annotated" / "b_planted.pgm"));
    // The blank frame comes first: files are visited in name order.
    CHECK(all.err.find("a_blank.pgm") < all.err.find("b_planted.pgm"));

    write_text(tmp / "broken.cascade", "not a model\n");
    CHECK(run({"detect", (tmp / "frames").string(), "--model", (tmp / "broken.cascade").string()}).code ==
          cli::kDataError);
}

TEST_CASE("synth, summary and train work together") {
    oracle::TempDir tmp("cli_train");
    const fs::path root = tmp / "data";
    const Result s = run({"synth", root.string(), "--positives", "40", "--negatives", "10", "--per-cell", "1"});
    REQUIRE(s.code == cli::kOk);
    CHECK(line_starting(s.out, "manifest,") == "manifest," + (root / "eval" / "manifest.csv").string());

    const Result sum = run({"summary", (root / "gestures").string()});
    REQUIRE(sum.code == cli::kOk);
    CHECK(line_starting(sum.out, "Palm,") == "Palm,40,40,10");
    CHECK(line_starting(sum.out, "total_images,") == "total_images,250");

    const auto train = [&](const std::string& name) {
        return run({"train", "--positives", (root / "edge" / "positives.txt").string(), "--negatives",
                    (root / "edge" / "negatives.txt").string(), "--label", "Palm", "--window", "12", "--max-stages", "3",
                    "--seed", "7", "--out", (tmp / name).string(), "--report", (tmp / (name + ".csv")).string()});
    };
    const Result a = train("a.cascade");
    const Result b = train("b.cascade");
    REQUIRE(a.code == cli::kOk);
    REQUIRE(b.code == cli::kOk);
    CHECK(read_text(tmp / "a.cascade") == read_text(tmp / "b.cascade"));
    CHECK(a.out == b.out);
    CHECK(line_starting(a.err, "wall_seconds,") != "");
    CHECK(line_starting(a.out, "positives,") == "positives,40");
    CHECK(a.out.find("stage,stumps,detection_rate,false_positive_rate,positives,negatives,warning\n") !=
          std::string::npos);
    CHECK(read_text(tmp / "a.cascade.csv") == a.out);
    const Cascade model = load_cascade(tmp / "a.cascade");
    CHECK(model.label == GestureLabel::Palm);
    CHECK(model.window.size == 12);
    CHECK(!model.stages.empty());

    SUBCASE("too few positives collapse with the stage named") {
        write_text(tmp / "few.txt", "");
        {
            std::ifstream in(root / "edge" / "positives.txt");
            std::ofstream few(tmp / "few.txt");
            std::string line;
            for (int i = 0; i < 3 && std::getline(in, line); ++i) few << (root / "edge" / line).string() << '\n';
        }
        const Result c = run({"train", "--positives", (tmp / "few.txt").string(), "--negatives",
                              (root / "edge" / "negatives.txt").string(), "--label", "Palm", "--window", "12", "--out",
                              (tmp / "c.cascade").string()});
        CHECK(c.code == cli::kRuntimeFailure);
        CHECK(c.err.find("stage 1") != std::string::npos);
    }
}

TEST_CASE("the installed binary matches the in-process entry point") {
    oracle::TempDir tmp("cli_binary");
    write_text(tmp / "script.txt", "Palm*3 VS*3 Fist*3\n");
    const std::string cmd = std::string("\"") + HAARPILOT_CLI_PATH + "\" fly-sim --cooldown 0 --script \"" +
                            (tmp / "script.txt").string() + "\" > \"" + (tmp / "out.csv").string() + "\" 2> \"" +
                            (tmp / "err.txt").string() + "\"";
    REQUIRE(std::system(cmd.c_str()) == 0);
    const Result r = run({"fly-sim", "--cooldown", "0", "--script", (tmp / "script.txt").string()});
    CHECK(read_text(tmp / "out.csv") == r.out);
    CHECK(read_text(tmp / "err.txt") == r.err);

    const std::string bad = std::string("\"") + HAARPILOT_CLI_PATH + "\" frobnicate > /dev/null 2>&1";
    const int status = std::system(bad.c_str());
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == cli::kUsage);
}
