// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#include "haarpilot/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#ifdef HAARPILOT_HAVE_PNG
#include <png.h>
#endif

#include "haarpilot/boost.hpp"
#include "haarpilot/dataset.hpp"
#include "haarpilot/detect.hpp"
#include "haarpilot/errors.hpp"
#include "haarpilot/pilot.hpp"
#include "haarpilot/synthetic.hpp"
#include "haarpilot/wire.hpp"

namespace haarpilot::cli {
namespace fs = std::filesystem;

namespace {

struct ScanFlags {
    double scale_factor = 1.25;
    int min_neighbors = 3;
    int working_size = 0;

    void add(CLI::App* app) {
        app->add_option("--scale-factor", scale_factor, "Scale step between window sizes")->capture_default_str();
        app->add_option("--min-neighbors", min_neighbors, "Raw detections needed per group")->capture_default_str();
        app->add_option("--working-size", working_size, "Downscale frames whose larger side exceeds this (0: off)");
    }

    ScanConfig config() const {
        ScanConfig c;
        c.scale_factor = scale_factor;
        c.min_neighbors = min_neighbors;
        c.working_size = working_size;
        validate(c);
        return c;
    }
};

/// Writes to `path`, or to `fallback` when the path is empty.
class Output {
public:
    Output(const std::string& path, std::ostream& fallback) : path_(path) {
        if (path.empty()) {
            stream_ = &fallback;
        } else {
            file_.open(path, std::ios::binary);
            if (!file_) throw IoError("cannot write " + path);
            stream_ = &file_;
        }
    }

    std::ostream& operator*() { return *stream_; }

    void close() {
        stream_->flush();
        if (!*stream_) throw IoError("failed writing " + (path_.empty() ? std::string("output") : path_));
    }

private:
    std::string path_;
    std::ofstream file_;
    std::ostream* stream_ = nullptr;
};

void require_file(const std::string& path, const char* what) {
    if (!fs::is_regular_file(path)) throw IoError(std::string(what) + " not found: " + path);
}

std::vector<fs::path> pgm_files(const fs::path& input) {
    if (fs::is_regular_file(input)) return {input};
    if (!fs::is_directory(input)) throw IoError("input not found: " + input.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(input)) {
        if (e.is_regular_file() && e.path().extension() == ".pgm") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Cascade> load_models(const std::string& dir, const std::vector<std::string>& files) {
    std::vector<fs::path> paths(files.begin(), files.end());
    if (!dir.empty()) {
        if (!fs::is_directory(dir)) throw IoError("model directory not found: " + dir);
        std::vector<fs::path> found;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_regular_file() && e.path().extension() == ".cascade") found.push_back(e.path());
        }
        std::sort(found.begin(), found.end());
        paths.insert(paths.end(), found.begin(), found.end());
    }
    if (paths.empty()) throw InputError("no models given (use --models <dir> or --model <file>)");
    std::vector<Cascade> out;
    for (const fs::path& p : paths) {
        try {
            out.push_back(load_cascade(p));
        } catch (const ParseError& e) {
            throw ParseError(p.string() + ": " + e.what(), e.line(), e.offset());
        } catch (const VersionError& e) {
            throw VersionError(p.string() + ": " + e.what());
        }
    }
    check_cascade_set(out);
    return out;
}

std::vector<GestureLabel> parse_script(std::istream& in) {
    std::vector<GestureLabel> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = line.substr(0, line.find('#'));
        std::istringstream ss(line);
        for (std::string tok; ss >> tok;) {
            std::size_t repeat = 1;
            const auto star = tok.find('*');
            try {
                if (star != std::string::npos) {
                    std::size_t used = 0;
                    const std::string count = tok.substr(star + 1);
                    repeat = std::stoul(count, &used);
                    if (used != count.size() || repeat == 0 || repeat > 1000000) throw InputError("bad repeat count");
                    tok.resize(star);
                }
                const GestureLabel g = parse_gesture(tok);
                out.insert(out.end(), repeat, g);
            } catch (const std::exception& e) {
                throw ParseError("script line " + std::to_string(line_no) + ": " + e.what(), line_no);
            }
        }
    }
    return out;
}

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string positives;
    std::string negatives;
    std::string label;
    std::string out;
    std::string report;
    std::uint64_t seed = 42;
    TrainConfig config;
    int window = 20;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    require_file(a.positives, "annotation file");
    require_file(a.negatives, "negative list");
    const GestureLabel label = parse_gesture(a.label);
    if (label == GestureLabel::None) throw InputError("cannot train a cascade for None");
    const WindowSpec spec{a.window};
    validate(spec);
    TrainConfig config = a.config;
    config.seed = a.seed;
    validate(config);

    const SampleBatch batch = extract_samples(parse_annotations(a.positives), spec);
    for (const SampleFailure& f : batch.failures) {
        err << "warning: skipped " << f.image.string() << " rect " << f.rect.x << ' ' << f.rect.y << ' ' << f.rect.w
            << ' ' << f.rect.h << ": " << f.reason << '\n';
    }
    std::vector<GrayImage> pool;
    for (const fs::path& p : read_path_list(a.negatives)) {
        GrayImage img = read_pgm(p);
        if (width(img) < spec.size || height(img) < spec.size) {
            throw InputError("negative image " + p.string() + " is smaller than the " + std::to_string(spec.size) +
                             "px window");
        }
        pool.push_back(std::move(img));
    }

    TrainResult result;
    try {
        result = train_cascade(batch.samples, pool, label, config, spec);
    } catch (const TrainingCollapse& e) {
        err << "training failed at stage " << e.stage() << ": " << e.what() << '\n';
        return kRuntimeFailure;
    }
    save_cascade(result.cascade, fs::path(a.out));

    std::ostringstream report;
    report << "label," << to_string(label) << '\n'
           << "positives," << batch.samples.size() << '\n'
           << "negative_images," << pool.size() << '\n'
           << "stage,stumps,detection_rate,false_positive_rate,positives,negatives,warning\n";
    for (std::size_t k = 0; k < result.report.stages.size(); ++k) {
        const StageReport& s = result.report.stages[k];
        report << k + 1 << ',' << s.stumps << ',' << fixed4(s.detection_rate) << ',' << fixed4(s.false_positive_rate)
               << ',' << s.positives << ',' << s.negatives << ',' << s.warning << '\n';
    }
    report << "stop," << result.report.stop_reason << '\n';
    out << report.str();
    if (!a.report.empty()) {
        Output r(a.report, out);
        *r << report.str();
        r.close();
    }
    // Timing is the only run-dependent output, so it goes with the diagnostics.
    err << "wall_seconds," << fixed4(result.report.seconds) << '\n';
    return kOk;
}

struct DetectArgs {
    std::string input;
    std::string models;
    std::vector<std::string> model_files;
    std::string out;
    std::string annotate;
    ScanFlags scan;
};

int cmd_detect(const DetectArgs& a, std::ostream& out, std::ostream& err) {
    const std::vector<Cascade> cascades = load_models(a.models, a.model_files);
    const ScanConfig cfg = a.scan.config();
    const std::vector<fs::path> frames = pgm_files(a.input);
    if (!a.annotate.empty()) fs::create_directories(a.annotate);

    Output csv(a.out, out);
    *csv << kDetectionCsvHeader << '\n';
    for (const fs::path& path : frames) {
        GrayImage frame = read_pgm(path);
        const Classification c = classify_gesture(frame, cascades, cfg);
        err << "summary," << path.string();
        for (std::size_t i = 0; i < cascades.size(); ++i) {
            for (const Detection& d : c.grouped[i]) {
                *csv << detection_csv_row(path.string(), cascades[i].label, d) << '\n';
                if (!a.annotate.empty()) draw_rect(frame, d.rect, 255);
            }
            err << ',' << to_string(cascades[i].label) << '=' << c.grouped[i].size();
        }
        err << ",label=" << to_string(c.label) << '\n';
        if (!a.annotate.empty()) write_pgm(frame, fs::path(a.annotate) / path.filename());
    }
    csv.close();
    return kOk;
}

struct EvaluateArgs {
    std::string manifest;
    std::string counts;
    std::string models;
    std::vector<std::string> model_files;
    std::string out;
    ScanFlags scan;
};

EvalReport read_counts(const std::string& path) {
    require_file(path, "counts file");
    std::ifstream in(path);
    EvalReport report;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header) {
            if (line != "illumination,background,distance,gesture,correct,total") {
                throw ParseError("counts line 1: expected header illumination,background,distance,gesture,correct,total",
                                 line_no);
            }
            header = true;
            continue;
        }
        std::vector<std::string> f;
        std::istringstream ss(line);
        for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
        try {
            if (f.size() != 6) throw InputError("expected 6 fields");
            const SceneTag tag{parse_illumination(f[0]), parse_background(f[1]), parse_distance(f[2])};
            const GestureLabel g = parse_gesture(f[3]);
            std::size_t used = 0;
            const auto correct = std::stoull(f[4], &used);
            if (used != f[4].size()) throw InputError("bad count");
            const auto total = std::stoull(f[5], &used);
            if (used != f[5].size()) throw InputError("bad count");
            report.set_counts(tag, g, correct, total);
        } catch (const std::exception& e) {
            throw ParseError("counts line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
    }
    return report;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
    EvalReport report;
    if (!a.counts.empty()) {
        report = read_counts(a.counts);
    } else {
        if (a.manifest.empty()) throw InputError("evaluate needs a manifest or --counts");
        require_file(a.manifest, "manifest");
        const auto manifest = parse_manifest(a.manifest);
        const auto cascades = load_models(a.models, a.model_files);
        report = evaluate(manifest, cascades, a.scan.config()).report;
    }
    Output csv(a.out, out);
    *csv << report.to_csv();
    csv.close();

    const auto show = [&](const char* name, const CellFilter& f) {
        const auto m = report.marginal(f);
        err << name << ',' << (m ? fixed4(*m) : std::string("empty")) << '\n';
    };
    CellFilter lt;
    lt.distance = Distance::LT3;
    CellFilter mt;
    mt.distance = Distance::MT3;
    show("average_LT-3", lt);
    show("average_MT-3", mt);
    show("average_all", CellFilter{});
    err << "significance";
    for (const AxisGap& g : report.significance()) err << ',' << g.axis << '=' << fixed4(g.gap);
    err << '\n';
    return kOk;
}

struct FlyArgs {
    std::string script;
    std::string frames;
    std::string models;
    std::vector<std::string> model_files;
    std::string world;
    std::string map;
    std::string wire;
    std::string out;
    std::optional<int> cooldown;
    std::optional<int> debounce;
    ScanFlags scan;
};

int cmd_fly_sim(const FlyArgs& a, std::ostream& out, std::ostream& err) {
    if (a.script.empty() == a.frames.empty()) throw InputError("give exactly one of --script or --frames");
    World world;
    if (!a.world.empty()) world = load_world(a.world);
    GestureMap map;
    if (!a.map.empty()) map = load_gesture_map(a.map);
    if (a.cooldown) map.cooldown = *a.cooldown;
    if (a.debounce) map.debounce = *a.debounce;
    validate(map);

    // Labels, with an optional operator-distance estimate per frame.
    std::vector<std::pair<GestureLabel, std::optional<double>>> inputs;
    if (!a.script.empty()) {
        require_file(a.script, "label script");
        std::ifstream in(a.script);
        for (GestureLabel g : parse_script(in)) inputs.emplace_back(g, std::nullopt);
    } else {
        const auto cascades = load_models(a.models, a.model_files);
        const ScanConfig cfg = a.scan.config();
        for (const fs::path& p : pgm_files(a.frames)) {
            const Classification c = classify_gesture(read_pgm(p), cascades, cfg);
            std::optional<double> est;
            if (c.best) est = estimate_distance(c.best->rect.w);
            inputs.emplace_back(c.label, est);
        }
    }

    std::unique_ptr<UdpTransport> transport;
    std::unique_ptr<Session> session;
    Pilot pilot(map, world);
    if (!a.wire.empty()) {
        transport = std::make_unique<UdpTransport>(parse_address(a.wire));
        session = std::make_unique<Session>(*transport);
        pilot.set_tick_sink([&](const PlannedAction& tick, const DroneState&) { session->send_tick(tick); });
    }

    Output trace(a.out, out);
    *trace << kTraceCsvHeader << '\n';
    for (const auto& [label, est] : inputs) *trace << trace_csv_row(pilot.on_frame(label, est)) << '\n';
    trace.close();

    const DroneState& s = pilot.state();
    err << "final," << to_string(s.mode) << ',' << format_number(s.position.x()) << ','
        << format_number(s.position.y()) << ',' << format_number(s.position.z()) << ",pictures=" << s.pictures_taken;
    if (session) err << ",seq_last=" << session->next_seq() - 1;
    err << '\n';
    return kOk;
}

struct EndpointArgs {
    std::string bind = "127.0.0.1:5556";
    double duration = 10.0;
    std::string out;
};

int cmd_endpoint(const EndpointArgs& a, std::ostream& out, std::ostream& err) {
    if (!(a.duration > 0.0)) throw InputError("duration must be positive");
    SimDroneEndpoint endpoint;
    Address bind = parse_address(a.bind);
    const std::uint16_t port = endpoint.start(bind);
    err << "listening," << bind.host << ':' << port << std::endl;
    std::this_thread::sleep_for(std::chrono::duration<double>(a.duration));
    endpoint.stop();
    const EndpointSnapshot s = endpoint.snapshot();
    for (const std::string& line : s.log) err << "log," << line << '\n';
    Output csv(a.out, out);
    *csv << kEndpointCsvHeader << '\n' << endpoint_csv_row(s) << '\n';
    csv.close();
    return kOk;
}

int cmd_summary(const std::string& root, std::ostream& out) {
    if (!fs::is_directory(root)) throw IoError("dataset directory not found: " + root);
    std::vector<GestureSetFiles> sets;
    for (GestureLabel g : kGestures) {
        const fs::path dir = fs::path(root) / std::string(to_string(g));
        if (!fs::is_directory(dir)) continue;
        sets.push_back({g, dir / "positives.txt", dir / "negatives.txt"});
    }
    if (sets.empty()) throw InputError("no gesture directories under " + root);
    const DatasetSummary s = summarize_dataset(sets);
    out << "gesture,positive_images,positive_rects,negative_images\n";
    for (const GestureSetSummary& g : s.sets) {
        out << to_string(g.label) << ',' << g.positive_images << ',' << g.positive_rects << ',' << g.negative_images
            << '\n';
    }
    out << "total_images," << s.total_images << '\n';
    return kOk;
}

struct SynthArgs {
    std::string out;
    std::uint64_t seed = 42;
    synthetic::DatasetOptions options;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    Rng rng(a.seed);
    const auto written = synthetic::write_dataset(a.out, a.options, rng);
    out << "edge_positives," << written.edge_annotations.string() << '\n'
        << "edge_negatives," << written.edge_negatives.string() << '\n';
    for (const GestureSetFiles& g : written.gesture_sets) {
        out << to_string(g.label) << "_positives," << g.annotations.string() << '\n'
            << to_string(g.label) << "_negatives," << g.negatives.string() << '\n';
    }
    out << "manifest," << written.manifest.string() << '\n';
    return kOk;
}

int cmd_convert(const std::string& input, const std::string& output) {
#ifdef HAARPILOT_HAVE_PNG
    require_file(input, "PNG file");
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, input.c_str())) {
        throw ParseError(input + ": " + image.message, 0);
    }
    image.format = PNG_FORMAT_GRAY;
    GrayImage img(static_cast<Eigen::Index>(image.height), static_cast<Eigen::Index>(image.width));
    if (!png_image_finish_read(&image, nullptr, img.data(), static_cast<png_int_32>(image.width), nullptr)) {
        const std::string why = image.message;
        png_image_free(&image);
        throw ParseError(input + ": " + why, 0);
    }
    write_pgm(img, fs::path(output));
    return kOk;
#else
    (void)input;
    (void)output;
    throw InputError("this build has no PNG support");
#endif
}

int classify_failure(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const IoError*>(&e) ||
        dynamic_cast<const InputError*>(&e) || dynamic_cast<const VersionError*>(&e) ||
        dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const BoundsError*>(&e) ||
        dynamic_cast<const DegenerateDataError*>(&e)) {
        return kDataError;
    }
    return kRuntimeFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hand-gesture cascade training, detection and drone control"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train one gesture cascade");
    t->add_option("--positives", train.positives, "Annotation file")->required();
    t->add_option("--negatives", train.negatives, "List of background images")->required();
    t->add_option("--label", train.label, "Gesture the cascade detects")->required();
    t->add_option("--out", train.out, "Model file to write")->required();
    t->add_option("--report", train.report, "Also write the training report here");
    t->add_option("--seed", train.seed, "Random seed")->capture_default_str();
    t->add_option("--window", train.window, "Base window side")->capture_default_str();
    t->add_option("--max-stages", train.config.max_stages)->capture_default_str();
    t->add_option("--min-detection", train.config.min_detection_rate)->capture_default_str();
    t->add_option("--max-false-positive", train.config.max_false_positive_rate)->capture_default_str();
    t->add_option("--max-stumps", train.config.max_stumps)->capture_default_str();

    DetectArgs detect;
    auto* d = app.add_subcommand("detect", "Detect gestures in an image or a directory of PGM images");
    d->add_option("input", detect.input, "PGM image or directory")->required();
    d->add_option("--models", detect.models, "Directory of .cascade files");
    d->add_option("--model", detect.model_files, "Model file (repeatable)");
    d->add_option("--out", detect.out, "Detections CSV (default: stdout)");
    d->add_option("--annotate", detect.annotate, "Directory for images with boxes drawn");
    detect.scan.add(d);

    EvaluateArgs evaluate_args;
    auto* e = app.add_subcommand("evaluate", "Per-condition accuracy over a tagged manifest");
    e->add_option("manifest", evaluate_args.manifest, "Manifest CSV");
    e->add_option("--counts", evaluate_args.counts, "Aggregate precomputed per-cell counts instead");
    e->add_option("--models", evaluate_args.models, "Directory of .cascade files");
    e->add_option("--model", evaluate_args.model_files, "Model file (repeatable)");
    e->add_option("--out", evaluate_args.out, "Report CSV (default: stdout)");
    evaluate_args.scan.add(e);

    FlyArgs fly;
    auto* f = app.add_subcommand("fly-sim", "Drive the simulated drone from gestures");
    f->add_option("--script", fly.script, "Text file of gesture labels (Label or Label*N)");
    f->add_option("--frames", fly.frames, "Directory of PGM frames");
    f->add_option("--models", fly.models, "Directory of .cascade files");
    f->add_option("--model", fly.model_files, "Model file (repeatable)");
    f->add_option("--world", fly.world, "World file");
    f->add_option("--map", fly.map, "Gesture map file");
    f->add_option("--wire", fly.wire, "Also send every control tick to host:port");
    f->add_option("--out", fly.out, "Trace CSV (default: stdout)");
    f->add_option("--cooldown", fly.cooldown, "Frames ignored after a command");
    f->add_option("--debounce", fly.debounce, "Consecutive frames needed for a command");
    fly.scan.add(f);

    EndpointArgs endpoint;
    auto* p = app.add_subcommand("endpoint", "Run the simulated drone endpoint");
    p->add_option("--bind", endpoint.bind, "host:port to listen on")->capture_default_str();
    p->add_option("--duration", endpoint.duration, "Seconds to run")->capture_default_str();
    p->add_option("--out", endpoint.out, "Final state CSV (default: stdout)");

    std::string summary_root;
    auto* s = app.add_subcommand("summary", "Count images per gesture set");
    s->add_option("root", summary_root, "Directory holding <Gesture>/positives.txt and negatives.txt")->required();

    SynthArgs synth;
    auto* y = app.add_subcommand("synth", "Write a synthetic dataset");
    y->add_option("out", synth.out, "Output directory")->required();
    y->add_option("--seed", synth.seed)->capture_default_str();
    y->add_option("--positives", synth.options.positives)->capture_default_str();
    y->add_option("--negatives", synth.options.negatives)->capture_default_str();
    y->add_option("--per-cell", synth.options.per_cell)->capture_default_str();

    std::string convert_in;
    std::string convert_out;
    auto* c = app.add_subcommand("convert", "Convert a PNG image to 8-bit PGM");
    c->add_option("input", convert_in)->required();
    c->add_option("output", convert_out)->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (t->parsed()) return cmd_train(train, out, err);
        if (d->parsed()) return cmd_detect(detect, out, err);
        if (e->parsed()) return cmd_evaluate(evaluate_args, out, err);
        if (f->parsed()) return cmd_fly_sim(fly, out, err);
        if (p->parsed()) return cmd_endpoint(endpoint, out, err);
        if (s->parsed()) return cmd_summary(summary_root, out);
        if (y->parsed()) return cmd_synth(synth, out);
        if (c->parsed()) return cmd_convert(convert_in, convert_out);
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return classify_failure(ex);
    }
    return kUsage;
}

}  // namespace haarpilot::cli
