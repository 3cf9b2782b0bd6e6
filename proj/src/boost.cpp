// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#include "haarpilot/boost.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "haarpilot/parallel.hpp"

namespace haarpilot {
namespace {

struct Sweep {
    std::size_t position = 0;
    int polarity = 1;
    double error = 0.5;
};

// Position k means the threshold sits just below sorted sample k, so samples
// [0, k) are below it. `distinct(k)` tells whether sorted sample k differs
// from sample k-1; only those boundaries are candidates.
template <typename Distinct>
Sweep sweep_sorted(const std::uint32_t* order, std::size_t n, Distinct&& distinct, const int* labels,
                   const double* weights, double w_pos, double w_neg) {
    Sweep best{0, 1, w_neg};
    if (w_pos < best.error) best = {0, -1, w_pos};
    double below_pos = 0.0;
    double below_neg = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        const std::uint32_t i = order[k - 1];
        if (labels[i] > 0) {
            below_pos += weights[i];
        } else {
            below_neg += weights[i];
        }
        if (!distinct(k)) continue;
        const double err_plus = below_pos + (w_neg - below_neg);
        const double err_minus = below_neg + (w_pos - below_pos);
        if (err_plus < best.error) best = {k, 1, err_plus};
        if (err_minus < best.error) best = {k, -1, err_minus};
    }
    return best;
}

void sort_by_value(const Eigen::Ref<const Eigen::VectorXd>& values, std::vector<std::uint32_t>& order) {
    // Sorting (value, index) pairs in place is much faster than an indirect sort.
    thread_local std::vector<std::pair<double, std::uint32_t>> keyed;
    const auto n = static_cast<std::size_t>(values.size());
    keyed.resize(n);
    for (std::size_t i = 0; i < n; ++i) keyed[i] = {values[static_cast<Eigen::Index>(i)], static_cast<std::uint32_t>(i)};
    std::sort(keyed.begin(), keyed.end());
    order.resize(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = keyed[i].second;
}

double threshold_at(const Eigen::Ref<const Eigen::VectorXd>& values, const std::uint32_t* order,
                    std::size_t position) {
    if (position == 0) return values[order[0]] - 1.0;
    return 0.5 * (values[order[position - 1]] + values[order[position]]);
}

struct ClassTotals {
    double pos = 0.0;
    double neg = 0.0;
};

ClassTotals class_totals(const LabelVector& labels, const Eigen::Ref<const Eigen::VectorXd>& weights) {
    ClassTotals t;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (labels[i] > 0) {
            t.pos += weights[i];
        } else {
            t.neg += weights[i];
        }
    }
    return t;
}

void validate_problem(Eigen::Index n, const LabelVector& labels, const Eigen::Ref<const Eigen::VectorXd>& weights) {
    if (labels.size() != n || weights.size() != n) throw InputError("values, labels and weights differ in length");
    if (n < 2) throw DegenerateDataError("stump training needs at least two samples");
    bool has_pos = false;
    bool has_neg = false;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (labels[i] == 1) {
            has_pos = true;
        } else if (labels[i] == -1) {
            has_neg = true;
        } else {
            throw InputError("labels must be +1 or -1");
        }
        if (!(weights[i] >= 0.0)) throw InputError("weights must be non-negative");
        total += weights[i];
    }
    if (!has_pos || !has_neg) throw DegenerateDataError("stump training needs both labels present");
    if (std::abs(total - 1.0) > 1e-9) throw InputError("weights must sum to 1");
}

StumpFit fit_sorted(const Eigen::Ref<const Eigen::VectorXd>& values, const std::vector<std::uint32_t>& order,
                    const LabelVector& labels, const Eigen::Ref<const Eigen::VectorXd>& weights,
                    const ClassTotals& totals) {
    const auto distinct = [&](std::size_t k) { return values[order[k - 1]] < values[order[k]]; };
    const Sweep s = sweep_sorted(order.data(), order.size(), distinct, labels.data(), weights.data(), totals.pos,
                                 totals.neg);
    return {threshold_at(values, order.data(), s.position), s.polarity, s.error};
}

// Lowest error wins; equal errors keep the earlier (lower-index) candidate.
void keep_better(StumpCandidate& best, bool& have, const StumpCandidate& c) {
    if (!have || c.fit.error < best.fit.error) {
        best = c;
        have = true;
    }
}

std::size_t required_positives(double rate, std::size_t count) {
    const auto k = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(count) - 1e-9));
    return std::clamp<std::size_t>(k, 1, count);
}

}  // namespace

void validate(const TrainConfig& config) {
    if (!(config.max_false_positive_rate > 0.0 && config.max_false_positive_rate < 1.0)) {
        throw InputError("max false-positive rate must lie in (0, 1)");
    }
    if (!(config.min_detection_rate > 0.0 && config.min_detection_rate <= 1.0)) {
        throw InputError("min detection rate must lie in (0, 1]");
    }
    if (config.max_stages < 1) throw InputError("max_stages must be at least 1");
    if (config.max_stumps < 1) throw InputError("max_stumps must be at least 1");
    if (config.mining_attempts_per_sample < 1) throw InputError("mining attempts must be at least 1");
}

StumpFit train_stump(const Eigen::Ref<const Eigen::VectorXd>& values, const LabelVector& labels,
                     const Eigen::Ref<const Eigen::VectorXd>& weights) {
    validate_problem(values.size(), labels, weights);
    if (!values.allFinite()) throw InputError("feature values must be finite");
    std::vector<std::uint32_t> order;
    sort_by_value(values, order);
    return fit_sorted(values, order, labels, weights, class_totals(labels, weights));
}

StumpCandidate select_best_stump(const Eigen::Ref<const Eigen::MatrixXd>& samples, const LabelVector& labels,
                                 const Eigen::Ref<const Eigen::VectorXd>& weights) {
    validate_problem(samples.rows(), labels, weights);
    if (samples.cols() < 1) throw InputError("feature matrix has no columns");
    if (!samples.allFinite()) throw InputError("feature values must be finite");
    const ClassTotals totals = class_totals(labels, weights);
    const auto features = static_cast<std::size_t>(samples.cols());
    const std::size_t chunks = worker_count();
    std::vector<StumpCandidate> chunk_best(chunks);
    std::vector<char> chunk_have(chunks, 0);
    parallel_chunks(features, chunks, [&](std::size_t c, std::size_t begin, std::size_t end) {
        std::vector<std::uint32_t> order;
        bool have = false;
        for (std::size_t j = begin; j < end; ++j) {
            const auto col = samples.col(static_cast<Eigen::Index>(j));
            sort_by_value(col, order);
            keep_better(chunk_best[c], have, {j, fit_sorted(col, order, labels, weights, totals)});
        }
        chunk_have[c] = have;
    });
    StumpCandidate best;
    bool have = false;
    for (std::size_t c = 0; c < chunks; ++c) {
        if (chunk_have[c]) keep_better(best, have, chunk_best[c]);
    }
    return best;
}

BoostUpdate adaboost_update(const Eigen::Ref<const Eigen::VectorXd>& weights,
                            const Eigen::Ref<const Eigen::VectorXi>& mistakes, double err) {
    if (weights.size() != mistakes.size()) throw InputError("weights and mistakes differ in length");
    if (!(err >= 0.0)) throw InputError("weighted error must be a non-negative number");
    if (err >= 0.5) throw BoostingStall("weak learner error " + std::to_string(err) + " is not below 0.5");
    if (err == 0.0) return {weights, kAlphaCap};
    const double beta = err / (1.0 - err);
    Eigen::VectorXd next = weights;
    for (Eigen::Index i = 0; i < next.size(); ++i) {
        if (mistakes[i] == 0) next[i] *= beta;
    }
    next /= next.sum();
    return {std::move(next), std::log(1.0 / beta)};
}

// ---------------------------------------------------------------------------

SampleTable::SampleTable(std::span<const GrayImage> samples, WindowSpec spec) : spec_(spec) {
    validate(spec);
    const int side = spec.size;
    const Eigen::Index entries = static_cast<Eigen::Index>(side + 1) * (side + 1);
    const auto n = static_cast<Eigen::Index>(samples.size());
    sums_.resize(entries, n);
    inv_stddev_.resize(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        const GrayImage& img = samples[static_cast<std::size_t>(s)];
        if (width(img) != side || height(img) != side) {
            throw InputError("training sample " + std::to_string(s) + " is " + std::to_string(width(img)) + "x" +
                             std::to_string(height(img)) + ", expected " + std::to_string(side));
        }
        const IntegralImage ii = integral(img);
        sums_.col(s) = Eigen::Map<const Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>>(ii.sum.data(), entries)
                           .cast<double>();
        inv_stddev_[s] = 1.0 / window_stats(ii, {0, 0, side, side}).stddev;
    }
}

Eigen::VectorXd SampleTable::feature_values(const HaarFeature& f) const {
    const PlacedFeature p = place(f, {0, 0}, 1.0);
    const int stride = spec_.size + 1;
    if (p.box.x + p.box.w > spec_.size || p.box.y + p.box.h > spec_.size) {
        throw BoundsError("feature " + serialize(f) + " exceeds the training window");
    }
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(sums_.cols());
    const auto row = [&](int y, int x) { return sums_.row(static_cast<Eigen::Index>(y) * stride + x).transpose(); };
    for (int i = 0; i < p.cell_count; ++i) {
        const Rect& r = p.cells[i].rect;
        acc += static_cast<double>(p.cells[i].weight) *
               (row(r.y + r.h, r.x + r.w) - row(r.y, r.x + r.w) - row(r.y + r.h, r.x) + row(r.y, r.x));
    }
    return acc.cwiseProduct(inv_stddev_) / static_cast<double>(p.box.area());
}

StumpSearch::StumpSearch(const SampleTable& table, const FeatureBank& bank, const LabelVector& labels,
                         std::size_t presort_budget_bytes)
    : table_(table), bank_(bank), labels_(labels) {
    if (static_cast<std::size_t>(labels.size()) != table.size()) throw InputError("label count differs from samples");
    if (!(bank.spec() == table.spec())) throw InputError("feature bank and sample table use different windows");
    const std::size_t n = table.size();
    const std::size_t f = bank.size();
    presorted_ = f * n * (sizeof(std::uint32_t) + 1) <= presort_budget_bytes;
    if (!presorted_) return;
    order_.resize(f * n);
    breaks_.resize(f * n);
    parallel_chunks(f, worker_count(), [&](std::size_t, std::size_t begin, std::size_t end) {
        std::vector<std::uint32_t> order;
        for (std::size_t j = begin; j < end; ++j) {
            const Eigen::VectorXd v = table_.feature_values(bank_[j]);
            sort_by_value(v, order);
            std::copy(order.begin(), order.end(), order_.begin() + static_cast<std::ptrdiff_t>(j * n));
            std::uint8_t* br = breaks_.data() + j * n;
            br[0] = 1;
            for (std::size_t k = 1; k < n; ++k) br[k] = v[order[k - 1]] < v[order[k]] ? 1 : 0;
        }
    });
}

StumpCandidate StumpSearch::best(const Eigen::Ref<const Eigen::VectorXd>& weights) const {
    validate_problem(labels_.size(), labels_, weights);
    const ClassTotals totals = class_totals(labels_, weights);
    const std::size_t n = table_.size();
    const std::size_t chunks = worker_count();
    std::vector<StumpCandidate> chunk_best(chunks);
    std::vector<char> chunk_have(chunks, 0);
    std::vector<std::size_t> chunk_pos(chunks, 0);

    parallel_chunks(bank_.size(), chunks, [&](std::size_t c, std::size_t begin, std::size_t end) {
        std::vector<std::uint32_t> scratch;
        bool have = false;
        for (std::size_t j = begin; j < end; ++j) {
            Sweep s;
            if (presorted_) {
                const std::uint8_t* br = breaks_.data() + j * n;
                s = sweep_sorted(order_.data() + j * n, n, [br](std::size_t k) { return br[k] != 0; },
                                 labels_.data(), weights.data(), totals.pos, totals.neg);
            } else {
                const Eigen::VectorXd v = table_.feature_values(bank_[j]);
                sort_by_value(v, scratch);
                s = sweep_sorted(scratch.data(), n, [&](std::size_t k) { return v[scratch[k - 1]] < v[scratch[k]]; },
                                 labels_.data(), weights.data(), totals.pos, totals.neg);
            }
            const StumpCandidate cand{j, {0.0, s.polarity, s.error}};
            const bool improves = !have || cand.fit.error < chunk_best[c].fit.error;
            keep_better(chunk_best[c], have, cand);
            if (improves) chunk_pos[c] = s.position;
        }
        chunk_have[c] = have;
    });

    StumpCandidate best;
    std::size_t position = 0;
    bool have = false;
    for (std::size_t c = 0; c < chunks; ++c) {
        if (!chunk_have[c]) continue;
        if (!have || chunk_best[c].fit.error < best.fit.error) {
            best = chunk_best[c];
            position = chunk_pos[c];
            have = true;
        }
    }
    const Eigen::VectorXd v = table_.feature_values(bank_[best.feature_index]);
    if (presorted_) {
        best.fit.threshold = threshold_at(v, order_.data() + best.feature_index * n, position);
    } else {
        std::vector<std::uint32_t> order;
        sort_by_value(v, order);
        best.fit.threshold = threshold_at(v, order.data(), position);
    }
    return best;
}

// ---------------------------------------------------------------------------

StageOutcome train_stage(std::span<const GrayImage> positives, std::span<const GrayImage> negatives,
                         const FeatureBank& bank, const TrainConfig& config) {
    validate(config);
    if (positives.size() < 10 || negatives.size() < 10) {
        throw InputError("stage training needs at least 10 positives and 10 negatives, got " +
                         std::to_string(positives.size()) + "/" + std::to_string(negatives.size()));
    }
    std::vector<GrayImage> samples;
    samples.reserve(positives.size() + negatives.size());
    samples.insert(samples.end(), positives.begin(), positives.end());
    samples.insert(samples.end(), negatives.begin(), negatives.end());
    const SampleTable table(samples, bank.spec());

    const auto n_pos = static_cast<Eigen::Index>(positives.size());
    const auto n = static_cast<Eigen::Index>(samples.size());
    LabelVector labels(n);
    labels.head(n_pos).setConstant(1);
    labels.tail(n - n_pos).setConstant(-1);
    Eigen::VectorXd initial(n);
    initial.head(n_pos).setConstant(0.5 / static_cast<double>(n_pos));
    initial.tail(n - n_pos).setConstant(0.5 / static_cast<double>(n - n_pos));
    Eigen::VectorXd weights = initial;

    const StumpSearch search(table, bank, labels);
    const std::size_t keep = required_positives(config.min_detection_rate, positives.size());

    StageOutcome out;
    Eigen::VectorXd scores = Eigen::VectorXd::Zero(n);
    Eigen::VectorXi mistakes(n);
    std::vector<double> pos_scores(static_cast<std::size_t>(n_pos));
    double alpha_total = 0.0;
    double bound = 1.0;

    for (std::size_t round = 0; round < config.max_stumps; ++round) {
        const StumpCandidate cand = search.best(weights);
        const double err = cand.fit.error;
        if (err >= 0.5) {
            if (out.stage.stumps.empty()) throw BoostingStall("no feature separates the stage's samples");
            out.warning = "boosting stalled after " + std::to_string(round) + " stumps";
            break;
        }

        Stump stump{cand.feature_index, bank[cand.feature_index], cand.fit.threshold, cand.fit.polarity, 0.0};
        const Eigen::VectorXd values = table.feature_values(stump.feature);
        for (Eigen::Index i = 0; i < n; ++i) mistakes[i] = stump.fires(values[i]) != (labels[i] > 0) ? 1 : 0;

        if (err == 0.0) {
            stump.alpha = kAlphaCap;
        } else {
            BoostUpdate upd = adaboost_update(weights, mistakes, err);
            weights = std::move(upd.weights);
            stump.alpha = upd.alpha;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            if (stump.fires(values[i])) scores[i] += stump.alpha;
        }
        out.stage.stumps.push_back(stump);

        alpha_total += stump.alpha;
        bound *= 2.0 * std::sqrt(err * (1.0 - err));
        double strong_err = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if ((scores[i] >= 0.5 * alpha_total) != (labels[i] > 0)) strong_err += initial[i];
        }
        out.round_training_error.push_back(strong_err);
        out.round_error_bound.push_back(bound);

        for (Eigen::Index i = 0; i < n_pos; ++i) pos_scores[static_cast<std::size_t>(i)] = scores[i];
        std::nth_element(pos_scores.begin(), pos_scores.begin() + static_cast<std::ptrdiff_t>(keep - 1),
                         pos_scores.end(), std::greater<>());
        out.stage.threshold = pos_scores[keep - 1];

        std::size_t tp = 0;
        std::size_t fp = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (scores[i] >= out.stage.threshold) (labels[i] > 0 ? tp : fp) += 1;
        }
        out.detection_rate = static_cast<double>(tp) / static_cast<double>(n_pos);
        out.false_positive_rate = static_cast<double>(fp) / static_cast<double>(n - n_pos);
        out.met_target = out.false_positive_rate <= config.max_false_positive_rate;
        if (out.met_target || err == 0.0) break;
    }
    if (!out.met_target && out.warning.empty()) {
        out.warning = "stump budget reached with false-positive rate " + std::to_string(out.false_positive_rate);
    }
    return out;
}

WindowResult evaluate_window(const Cascade& cascade, const IntegralImage& ii, Point origin, double scale) {
    const int side = scaled_extent(cascade.window.size, scale);
    const Rect window{origin.x, origin.y, side, side};
    check_bounds(ii, window);
    const double inv_stddev = 1.0 / window_stats(ii, window).stddev;

    WindowResult res;
    for (const Stage& stage : cascade.stages) {
        ++res.stages_evaluated;
        double vote = 0.0;
        for (const Stump& stump : stage.stumps) {
            if (stump.fires(eval_feature(ii, stump.feature, origin, scale, inv_stddev))) vote += stump.alpha;
        }
        if (vote < stage.threshold) return res;
        res.score += vote - stage.threshold;
    }
    res.accepted = true;
    return res;
}

WindowResult evaluate_sample(const Cascade& cascade, const GrayImage& sample) {
    if (width(sample) != cascade.window.size || height(sample) != cascade.window.size) {
        throw InputError("sample size differs from the cascade window");
    }
    return evaluate_window(cascade, integral(sample), {0, 0}, 1.0);
}

NegativePool::NegativePool(std::span<const GrayImage> images, std::size_t cache_budget_bytes) : images_(images) {
    std::size_t bytes = 0;
    for (const GrayImage& img : images) {
        bytes += static_cast<std::size_t>(img.size() + img.rows() + img.cols() + 1) * 2 * sizeof(std::int64_t);
    }
    if (bytes > cache_budget_bytes) return;
    tables_.reserve(images.size());
    for (const GrayImage& img : images) tables_.push_back(integral(img));
}

GrayImage NegativePool::draw(int base, Rng& rng, Rect* where, std::size_t* image_index) const {
    if (images_.empty()) throw InputError("negative pool is empty");
    const std::size_t i = uniform_index(rng, images_.size());
    const GrayImage& img = images_[i];
    const int max_side = std::min(width(img), height(img));
    if (max_side < base) {
        throw InputError("negative image " + std::to_string(i) + " is smaller than the " + std::to_string(base) +
                         "px window");
    }
    // Uniform over every square sub-window, so small sides get the weight
    // they have in a sliding-window scan.
    const auto positions = [&](int s) {
        return static_cast<std::uint64_t>(width(img) - s + 1) * static_cast<std::uint64_t>(height(img) - s + 1);
    };
    std::uint64_t total = 0;
    for (int s = base; s <= max_side; ++s) total += positions(s);
    std::uint64_t pick = uniform_index(rng, total);
    int side = base;
    while (pick >= positions(side)) pick -= positions(side++);
    const Rect r{uniform_int(rng, 0, width(img) - side), uniform_int(rng, 0, height(img) - side), side, side};
    if (where) *where = r;
    if (image_index) *image_index = i;
    if (!tables_.empty()) return resample_area(tables_[i], r, base, base);
    return resample_area(integral(img), r, base, base);
}

TrainResult train_cascade(std::span<const GrayImage> positives, std::span<const GrayImage> negative_pool,
                          GestureLabel label, const TrainConfig& config, WindowSpec spec) {
    const auto started = std::chrono::steady_clock::now();
    validate(config);
    validate(spec);
    if (negative_pool.empty()) throw InputError("negative pool is empty");

    const FeatureBank bank(spec);
    const NegativePool pool(negative_pool);
    Rng rng(config.seed);
    TrainResult result;
    result.cascade = {spec, label, {}};
    result.report.stop_reason = "reached max_stages";

    for (std::size_t k = 1; k <= config.max_stages; ++k) {
        std::vector<GrayImage> active;
        for (const GrayImage& p : positives) {
            if (evaluate_sample(result.cascade, p).accepted) active.push_back(p);
        }
        if (active.size() < 10) {
            throw TrainingCollapse("stage " + std::to_string(k) + ": only " + std::to_string(active.size()) +
                                       " positives remain",
                                   k);
        }

        const std::size_t quota = active.size();
        const std::size_t budget = quota * config.mining_attempts_per_sample;
        std::vector<GrayImage> negatives;
        negatives.reserve(quota);
        for (std::size_t attempt = 0; attempt < budget && negatives.size() < quota; ++attempt) {
            GrayImage s = pool.draw(spec.size, rng);
            if (evaluate_sample(result.cascade, s).accepted) negatives.push_back(std::move(s));
        }
        if (negatives.size() < quota) {
            result.report.stop_reason = "negative pool exhausted before stage " + std::to_string(k) + " (" +
                                        std::to_string(negatives.size()) + "/" + std::to_string(quota) + ")";
            break;
        }

        StageOutcome outcome;
        try {
            outcome = train_stage(active, negatives, bank, config);
        } catch (const BoostingStall& e) {
            if (result.cascade.stages.empty()) throw;
            result.report.stop_reason = std::string("boosting stalled at stage ") + std::to_string(k);
            break;
        }
        result.report.stages.push_back({outcome.stage.stumps.size(), outcome.detection_rate,
                                        outcome.false_positive_rate, active.size(), negatives.size(),
                                        outcome.warning});
        result.cascade.stages.push_back(std::move(outcome.stage));
    }
    if (result.cascade.stages.empty()) throw TrainingCollapse("no stage could be trained", 1);
    result.report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace haarpilot
