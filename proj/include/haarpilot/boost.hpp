// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "haarpilot/gesture.hpp"
#include "haarpilot/haar.hpp"
#include "haarpilot/imaging.hpp"
#include "haarpilot/random.hpp"

namespace haarpilot {

/// Vote weight used when a round classifies every sample correctly.
inline const double kAlphaCap = std::log(1e10);

/// Single-feature threshold classifier. With polarity +1 it votes for the
/// object when the feature value is above the threshold; with -1, below.
struct Stump {
    std::size_t feature_index = 0;
    HaarFeature feature;
    double threshold = 0.0;
    int polarity = 1;
    double alpha = 0.0;

    bool fires(double value) const { return polarity > 0 ? value > threshold : value < threshold; }
    friend bool operator==(const Stump&, const Stump&) = default;
};

/// Passes a window iff the alpha-weighted vote reaches `threshold`.
struct Stage {
    std::vector<Stump> stumps;
    double threshold = 0.0;
    friend bool operator==(const Stage&, const Stage&) = default;
};

struct Cascade {
    WindowSpec window;
    GestureLabel label = GestureLabel::None;
    std::vector<Stage> stages;
    friend bool operator==(const Cascade&, const Cascade&) = default;
};

struct TrainConfig {
    std::size_t max_stages = 20;
    double min_detection_rate = 0.995;
    double max_false_positive_rate = 0.5;
    std::size_t max_stumps = 200;
    std::uint64_t seed = 42;
    /// Draws attempted per requested negative before the pool counts as exhausted.
    std::size_t mining_attempts_per_sample = 1000;
};

void validate(const TrainConfig& config);

// ---------------------------------------------------------------------------
// Weak learner

/// Labels are +1 (object) / -1 (background).
using LabelVector = Eigen::VectorXi;

struct StumpFit {
    double threshold = 0.0;
    int polarity = 1;
    double error = 0.5;
};

/// Minimum weighted-error threshold and polarity for one feature. Candidate
/// thresholds are one below the smallest value and the midpoints between
/// adjacent distinct sorted values; ties go to the smaller threshold, then to
/// polarity +1.
StumpFit train_stump(const Eigen::Ref<const Eigen::VectorXd>& values, const LabelVector& labels,
                     const Eigen::Ref<const Eigen::VectorXd>& weights);

struct StumpCandidate {
    std::size_t feature_index = 0;
    StumpFit fit;
};

/// `samples` holds one row per sample and one column per feature. Ties on
/// error go to the lowest feature index.
StumpCandidate select_best_stump(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                 const LabelVector& labels,
                                 const Eigen::Ref<const Eigen::VectorXd>& weights);

struct BoostUpdate {
    Eigen::VectorXd weights;
    double alpha = 0.0;
};

/// Scales correctly classified samples by err/(1-err) and renormalizes.
/// `mistakes` is 1 where the weak learner was wrong. err == 0 leaves the
/// weights unchanged and returns kAlphaCap.
BoostUpdate adaboost_update(const Eigen::Ref<const Eigen::VectorXd>& weights,
                            const Eigen::Ref<const Eigen::VectorXi>& mistakes, double err);

// ---------------------------------------------------------------------------
// Training data

/// Integral tables of equally sized samples laid out entry-major so that a
/// feature's response over every sample is a handful of row operations.
class SampleTable {
public:
    SampleTable(std::span<const GrayImage> samples, WindowSpec spec);

    std::size_t size() const { return static_cast<std::size_t>(inv_stddev_.size()); }
    const WindowSpec& spec() const { return spec_; }
    const Eigen::VectorXd& inv_stddev() const { return inv_stddev_; }

    /// Same values, bit for bit, as eval_feature at origin (0,0) and scale 1.
    Eigen::VectorXd feature_values(const HaarFeature& f) const;

private:
    WindowSpec spec_;
    Plane<double> sums_;
    Eigen::VectorXd inv_stddev_;
};

/// Round-by-round stump search over a whole feature bank for a fixed sample
/// set. Each feature's sample ordering is computed once.
class StumpSearch {
public:
    StumpSearch(const SampleTable& table, const FeatureBank& bank, const LabelVector& labels,
                std::size_t presort_budget_bytes = std::size_t{2} << 30);

    StumpCandidate best(const Eigen::Ref<const Eigen::VectorXd>& weights) const;

private:
    const SampleTable& table_;
    const FeatureBank& bank_;
    LabelVector labels_;
    bool presorted_ = false;
    std::vector<std::uint32_t> order_;
    std::vector<std::uint8_t> breaks_;
};

// ---------------------------------------------------------------------------
// Stages and cascades

struct StageOutcome {
    Stage stage;
    double detection_rate = 0.0;
    double false_positive_rate = 1.0;
    bool met_target = false;
    std::string warning;
    /// Error of the stage's weighted vote at the AdaBoost half-sum threshold,
    /// and the product-of-normalizers bound on it, after each round.
    std::vector<double> round_training_error;
    std::vector<double> round_error_bound;
};

StageOutcome train_stage(std::span<const GrayImage> positives, std::span<const GrayImage> negatives,
                         const FeatureBank& bank, const TrainConfig& config);

struct WindowResult {
    bool accepted = false;
    double score = 0.0;
    std::size_t stages_evaluated = 0;
};

/// Runs the cascade on the window of side floor(base * scale) at `origin`,
/// stopping at the first failing stage. The score sums (vote - threshold)
/// over the stages passed.
WindowResult evaluate_window(const Cascade& cascade, const IntegralImage& ii, Point origin, double scale);

/// Same as evaluate_window on an image exactly the cascade's window size.
WindowResult evaluate_sample(const Cascade& cascade, const GrayImage& sample);

struct StageReport {
    std::size_t stumps = 0;
    double detection_rate = 0.0;
    double false_positive_rate = 1.0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::string warning;
};

struct CascadeReport {
    std::vector<StageReport> stages;
    std::string stop_reason;
    double seconds = 0.0;
};

struct TrainResult {
    Cascade cascade;
    CascadeReport report;
};

/// Source of background windows: a random pool image, then a square
/// sub-window (side >= base) drawn uniformly from all of its square
/// sub-windows, area-resampled to the base size. Integral tables are
/// cached unless the pool would exceed `cache_budget_bytes`.
class NegativePool {
public:
    explicit NegativePool(std::span<const GrayImage> images,
                          std::size_t cache_budget_bytes = std::size_t{1} << 30);

    std::size_t size() const { return images_.size(); }
    GrayImage draw(int base, Rng& rng, Rect* where = nullptr, std::size_t* image_index = nullptr) const;

private:
    std::span<const GrayImage> images_;
    std::vector<IntegralImage> tables_;
};

/// Trains stages until `max_stages`, or until hard-negative mining cannot fill
/// the per-stage negative quota (equal to the surviving positive count).
TrainResult train_cascade(std::span<const GrayImage> positives, std::span<const GrayImage> negative_pool,
                          GestureLabel label, const TrainConfig& config, WindowSpec spec = {});

// ---------------------------------------------------------------------------
// Model files

void save_cascade(const Cascade& cascade, std::ostream& out);
void save_cascade(const Cascade& cascade, const std::filesystem::path& path);
Cascade load_cascade(std::istream& in);
Cascade load_cascade(const std::filesystem::path& path);

}  // namespace haarpilot
