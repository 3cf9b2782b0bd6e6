// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#include "haarpilot/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "haarpilot/parallel.hpp"

namespace haarpilot {
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// PGM header scanning

class PgmScanner {
public:
    explicit PgmScanner(std::istream& in) : in_(in) {}

    int get() {
        const int c = in_.get();
        if (c != std::char_traits<char>::eof()) ++offset_;
        return c;
    }

    void skip_space_and_comments() {
        for (;;) {
            const int c = in_.peek();
            if (c == '#') {
                while (true) {
                    const int d = get();
                    if (d == '\n' || d == std::char_traits<char>::eof()) break;
                }
            } else if (c != std::char_traits<char>::eof() && std::isspace(c)) {
                get();
            } else {
                return;
            }
        }
    }

    long long number(const char* what) {
        skip_space_and_comments();
        long long v = 0;
        int digits = 0;
        while (std::isdigit(in_.peek())) {
            v = v * 10 + (get() - '0');
            if (++digits > 9) fail(std::string(what) + " is too large");
        }
        if (digits == 0) fail(std::string("expected ") + what);
        return v;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("pgm byte " + std::to_string(offset_) + ": " + what, 0, offset_);
    }

    std::size_t offset() const { return offset_; }
    std::istream& stream() { return in_; }
    void advance(std::size_t n) { offset_ += n; }

private:
    std::istream& in_;
    std::size_t offset_ = 0;
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

fs::path resolve(const fs::path& base_dir, const fs::path& p) {
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

std::string fmt_accuracy(std::optional<double> v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

CellFilter only(Illumination v) {
    CellFilter f;
    f.illumination = v;
    return f;
}
CellFilter only(Background v) {
    CellFilter f;
    f.background = v;
    return f;
}
CellFilter only(Distance v) {
    CellFilter f;
    f.distance = v;
    return f;
}
CellFilter only(GestureLabel v) {
    CellFilter f;
    f.gesture = v;
    return f;
}

bool matches(const CellFilter& f, const SceneTag& tag, GestureLabel g) {
    return (!f.illumination || *f.illumination == tag.illumination) &&
           (!f.background || *f.background == tag.background) && (!f.distance || *f.distance == tag.distance) &&
           (!f.gesture || *f.gesture == g);
}

}  // namespace

// ---------------------------------------------------------------------------

GrayImage read_pgm(std::istream& in) {
    PgmScanner s(in);
    if (s.get() != 'P' || s.get() != '5') s.fail("not a binary PGM (expected P5 magic)");
    const long long w = s.number("width");
    const long long h = s.number("height");
    const long long maxval = s.number("maxval");
    if (w < 1 || h < 1) s.fail("image dimensions must be positive");
    if (maxval != 255) s.fail("unsupported maxval " + std::to_string(maxval) + " (only 255 is supported)");
    const int sep = s.get();
    if (sep == std::char_traits<char>::eof() || !std::isspace(sep)) s.fail("expected whitespace before pixel data");

    GrayImage img(h, w);
    const auto bytes = static_cast<std::streamsize>(w * h);
    s.stream().read(reinterpret_cast<char*>(img.data()), bytes);
    const auto got = s.stream().gcount();
    s.advance(static_cast<std::size_t>(got));
    if (got != bytes) s.fail("short pixel payload: " + std::to_string(got) + " of " + std::to_string(bytes) + " bytes");
    return img;
}

GrayImage read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image " + path.string());
    try {
        return read_pgm(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line(), e.offset());
    }
}

void write_pgm(const GrayImage& img, std::ostream& out) {
    out << "P5\n" << width(img) << ' ' << height(img) << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
}

void write_pgm(const GrayImage& img, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image " + path.string());
    write_pgm(img, out);
    out.flush();
    if (!out) throw IoError("failed writing image " + path.string());
}

// ---------------------------------------------------------------------------

std::vector<Annotation> parse_annotations(std::istream& in, const fs::path& base_dir) {
    std::vector<Annotation> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::vector<std::string> t;
        for (std::string tok; ss >> tok;) t.push_back(tok);
        if (t.empty() || t[0][0] == '#') continue;
        const auto fail = [&](const std::string& what) -> void {
            throw ParseError("annotation line " + std::to_string(line_no) + ": " + what, line_no);
        };
        const auto as_int = [&](const std::string& s) {
            std::size_t used = 0;
            long long v = 0;
            try {
                v = std::stoll(s, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != s.size() || v < 0 || v > (1 << 30)) fail("bad number '" + s + "'");
            return static_cast<int>(v);
        };
        if (t.size() < 2) fail("missing rect count");
        const int count = as_int(t[1]);
        if (t.size() != 2 + static_cast<std::size_t>(count) * 4) {
            fail("promises " + std::to_string(count) + " rects but provides " + std::to_string(t.size() - 2) +
                 " numbers");
        }
        Annotation a{resolve(base_dir, t[0]), {}, line_no};
        for (int i = 0; i < count; ++i) {
            const Rect r{as_int(t[2 + 4 * i]), as_int(t[3 + 4 * i]), as_int(t[4 + 4 * i]), as_int(t[5 + 4 * i])};
            if (r.w < 1 || r.h < 1) fail("rect extents must be positive");
            a.rects.push_back(r);
        }
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<Annotation> parse_annotations(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open annotation file " + path.string());
    return parse_annotations(in, path.parent_path());
}

std::vector<fs::path> read_path_list(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open list file " + path.string());
    std::vector<fs::path> out;
    for (std::string line; std::getline(in, line);) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        out.push_back(resolve(path.parent_path(), t));
    }
    return out;
}

SampleBatch extract_samples(const GrayImage& image, std::span<const Rect> rects, const WindowSpec& spec,
                            const fs::path& name) {
    validate(spec);
    SampleBatch batch;
    const IntegralImage ii = integral(image);
    for (const Rect& r : rects) {
        if (!contains(ii, r)) {
            batch.failures.push_back({name, r, "rect outside the " + std::to_string(width(image)) + "x" +
                                                   std::to_string(height(image)) + " image"});
            continue;
        }
        batch.samples.push_back(resample_area(ii, r, spec.size, spec.size));
    }
    return batch;
}

SampleBatch extract_samples(std::span<const Annotation> annotations, const WindowSpec& spec) {
    validate(spec);
    SampleBatch batch;
    for (const Annotation& a : annotations) {
        GrayImage img;
        try {
            img = read_pgm(a.image);
        } catch (const Error& e) {
            for (const Rect& r : a.rects) batch.failures.push_back({a.image, r, e.what()});
            continue;
        }
        SampleBatch one = extract_samples(img, a.rects, spec, a.image);
        for (auto& s : one.samples) batch.samples.push_back(std::move(s));
        for (auto& f : one.failures) batch.failures.push_back(std::move(f));
    }
    return batch;
}

NegativeDraw sample_negatives(std::span<const GrayImage> pool, const WindowSpec& spec, std::size_t count,
                              std::uint64_t seed) {
    validate(spec);
    if (pool.empty()) throw InputError("negative pool is empty");
    double distinct = 0.0;
    for (const GrayImage& img : pool) {
        for (int side = spec.size; side <= std::min(width(img), height(img)); ++side) {
            distinct += static_cast<double>(width(img) - side + 1) * (height(img) - side + 1);
        }
    }
    const NegativePool sampler(pool);
    Rng rng(seed);
    NegativeDraw out;
    out.samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rect where;
        std::size_t source = 0;
        out.samples.push_back(sampler.draw(spec.size, rng, &where, &source));
        out.windows.push_back(where);
        out.sources.push_back(source);
    }
    if (static_cast<double>(count) > distinct) {
        out.warning = "requested " + std::to_string(count) + " negatives from a pool with only " +
                      std::to_string(static_cast<long long>(distinct)) + " distinct windows";
    }
    return out;
}

NegativeDraw sample_negatives(std::span<const fs::path> pool, const WindowSpec& spec, std::size_t count,
                              std::uint64_t seed) {
    std::vector<GrayImage> images;
    images.reserve(pool.size());
    for (const fs::path& p : pool) images.push_back(read_pgm(p));
    return sample_negatives(images, spec, count, seed);
}

// ---------------------------------------------------------------------------

std::string_view to_string(Illumination v) { return v == Illumination::DL ? "DL" : "WL"; }
std::string_view to_string(Background v) { return v == Background::CTB ? "CTB" : "CLB"; }
std::string_view to_string(Distance v) { return v == Distance::LT3 ? "LT-3" : "MT-3"; }

Illumination parse_illumination(std::string_view token) {
    if (token == "DL") return Illumination::DL;
    if (token == "WL") return Illumination::WL;
    throw InputError("unknown illumination tag '" + std::string(token) + "'");
}

Background parse_background(std::string_view token) {
    if (token == "CTB") return Background::CTB;
    if (token == "CLB") return Background::CLB;
    throw InputError("unknown background tag '" + std::string(token) + "'");
}

Distance parse_distance(std::string_view token) {
    if (token == "LT3" || token == "LT-3") return Distance::LT3;
    if (token == "MT3" || token == "MT-3") return Distance::MT3;
    throw InputError("unknown distance tag '" + std::string(token) + "'");
}

std::array<SceneTag, 8> all_scene_tags() {
    std::array<SceneTag, 8> tags{};
    std::size_t i = 0;
    for (auto il : {Illumination::DL, Illumination::WL}) {
        for (auto bg : {Background::CTB, Background::CLB}) {
            for (auto d : {Distance::LT3, Distance::MT3}) tags[i++] = {il, bg, d};
        }
    }
    return tags;
}

std::vector<ManifestEntry> parse_manifest(std::istream& in, const fs::path& base_dir) {
    std::vector<ManifestEntry> out;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv(trim(line));
        if (!header) {
            const std::vector<std::string> expected = {"path", "label", "illumination", "background", "distance"};
            if (fields != expected) {
                throw ParseError("manifest line " + std::to_string(line_no) +
                                     ": expected header path,label,illumination,background,distance",
                                 line_no);
            }
            header = true;
            continue;
        }
        if (fields.size() != 5 || fields[0].empty()) {
            throw ParseError("manifest line " + std::to_string(line_no) + ": expected 5 fields", line_no);
        }
        try {
            out.push_back({resolve(base_dir, fields[0]), parse_gesture(fields[1]),
                           {parse_illumination(fields[2]), parse_background(fields[3]), parse_distance(fields[4])},
                           line_no});
        } catch (const InputError& e) {
            throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
    }
    if (!header) throw ParseError("manifest is empty", 1);
    return out;
}

std::vector<ManifestEntry> parse_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    return parse_manifest(in, path.parent_path());
}

std::optional<double> CellCount::accuracy() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(total);
}

void EvalReport::record(const SceneTag& tag, GestureLabel truth, bool correct) {
    CellCount& c = cells_[{tag, truth}];
    ++c.total;
    if (correct) ++c.correct;
}

void EvalReport::set_counts(const SceneTag& tag, GestureLabel gesture, std::size_t correct, std::size_t total) {
    if (correct > total) throw InputError("correct count exceeds total");
    cells_[{tag, gesture}] = {correct, total};
}

CellCount EvalReport::cell(const SceneTag& tag, GestureLabel gesture) const {
    auto it = cells_.find({tag, gesture});
    return it == cells_.end() ? CellCount{} : it->second;
}

std::optional<double> EvalReport::marginal(const CellFilter& filter) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [key, count] : cells_) {
        if (!matches(filter, key.first, key.second)) continue;
        if (auto a = count.accuracy()) {
            sum += *a;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::vector<AxisGap> EvalReport::significance() const {
    std::vector<AxisGap> gaps;
    const auto gap = [&](const char* name, const CellFilter& a, const CellFilter& b) {
        const auto ma = marginal(a);
        const auto mb = marginal(b);
        if (ma && mb) gaps.push_back({name, std::abs(*ma - *mb)});
    };
    gap("distance", only(Distance::LT3), only(Distance::MT3));
    gap("background", only(Background::CTB), only(Background::CLB));
    gap("illumination", only(Illumination::DL), only(Illumination::WL));
    std::stable_sort(gaps.begin(), gaps.end(), [](const AxisGap& a, const AxisGap& b) { return a.gap > b.gap; });
    return gaps;
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "kind,illumination,background,distance,gesture,correct,total,accuracy\n";
    for (const auto& [key, count] : cells_) {
        out << "CELL," << to_string(key.first.illumination) << ',' << to_string(key.first.background) << ','
            << to_string(key.first.distance) << ',' << to_string(key.second) << ',' << count.correct << ','
            << count.total << ',' << fmt_accuracy(count.accuracy()) << '\n';
    }

    const auto avg_row = [&](const CellFilter& f) {
        const auto m = marginal(f);
        if (!m) return;
        std::size_t correct = 0;
        std::size_t total = 0;
        for (const auto& [key, count] : cells_) {
            if (matches(f, key.first, key.second) && count.total > 0) {
                correct += count.correct;
                total += count.total;
            }
        }
        const auto tok = [](auto opt) { return opt ? std::string(to_string(*opt)) : std::string("*"); };
        out << "AVG," << tok(f.illumination) << ',' << tok(f.background) << ',' << tok(f.distance) << ','
            << tok(f.gesture) << ',' << correct << ',' << total << ',' << fmt_accuracy(m) << '\n';
    };

    for (const SceneTag& t : all_scene_tags()) avg_row({t.illumination, t.background, t.distance, std::nullopt});
    for (auto g : {GestureLabel::Fist, GestureLabel::Palm, GestureLabel::GS, GestureLabel::VS, GestureLabel::LF,
                   GestureLabel::None}) {
        avg_row(only(g));
    }
    avg_row(only(Illumination::DL));
    avg_row(only(Illumination::WL));
    avg_row(only(Background::CTB));
    avg_row(only(Background::CLB));
    avg_row(only(Distance::LT3));
    avg_row(only(Distance::MT3));
    avg_row(CellFilter{});
    return out.str();
}

EvalResult evaluate(std::span<const ManifestEntry> manifest, std::span<const GrayImage> frames,
                    std::span<const Cascade> cascades, const ScanConfig& cfg) {
    if (manifest.empty()) throw InputError("manifest is empty");
    if (frames.size() != manifest.size()) throw InputError("frame count differs from manifest");
    check_cascade_set(cascades);
    std::vector<GestureLabel> predicted(manifest.size(), GestureLabel::None);
    parallel_chunks(manifest.size(), worker_count(), [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) predicted[i] = classify_gesture(frames[i], cascades, cfg).label;
    });
    EvalResult out;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        out.report.record(manifest[i].tag, manifest[i].label, predicted[i] == manifest[i].label);
        out.predictions.push_back({manifest[i], predicted[i]});
    }
    return out;
}

EvalResult evaluate(std::span<const ManifestEntry> manifest, std::span<const Cascade> cascades,
                    const ScanConfig& cfg) {
    if (manifest.empty()) throw InputError("manifest is empty");
    check_cascade_set(cascades);
    std::vector<GestureLabel> predicted(manifest.size(), GestureLabel::None);
    parallel_chunks(manifest.size(), worker_count(), [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            predicted[i] = classify_gesture(read_pgm(manifest[i].image), cascades, cfg).label;
        }
    });
    EvalResult out;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        out.report.record(manifest[i].tag, manifest[i].label, predicted[i] == manifest[i].label);
        out.predictions.push_back({manifest[i], predicted[i]});
    }
    return out;
}

DatasetSummary summarize_dataset(std::span<const GestureSetFiles> sets) {
    DatasetSummary out;
    std::set<std::string> all;
    for (const GestureSetFiles& s : sets) {
        GestureSetSummary g;
        g.label = s.label;
        std::set<std::string> positives;
        for (const Annotation& a : parse_annotations(s.annotations)) {
            positives.insert(a.image.lexically_normal().string());
            g.positive_rects += a.rects.size();
        }
        g.positive_images = positives.size();
        const auto negatives = read_path_list(s.negatives);
        std::set<std::string> neg;
        for (const auto& p : negatives) neg.insert(p.lexically_normal().string());
        g.negative_images = neg.size();
        all.insert(positives.begin(), positives.end());
        all.insert(neg.begin(), neg.end());
        out.sets.push_back(g);
    }
    out.total_images = all.size();
    return out;
}

}  // namespace haarpilot
