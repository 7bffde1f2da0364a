#pragma once

#include "accdoa/codec.hpp"
#include "accdoa/events_io.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace accdoa {

/// Row/column pairs of an assignment.
using Assignment = std::vector<std::pair<int, int>>;

/// Minimum-cost assignment on an n x m cost matrix; returns min(n, m) pairs.
using Matcher = std::function<Assignment(const Eigen::MatrixXd& cost)>;

/// Kuhn-Munkres with row/column potentials, O(n^2 m). Rectangular inputs are
/// handled by transposing so rows never outnumber columns.
Assignment hungarian(const Eigen::MatrixXd& cost);

struct FrameEntry {
    int class_idx = 0;
    Doa doa = Doa::Zero();
};

/// Per-frame sets of (class, DOA).
using FrameTable = std::vector<std::vector<FrameEntry>>;

FrameTable rows_to_table(const std::vector<LabelRow>& rows, int frames);
FrameTable track_to_table(const EventLabelTrack& labels);

struct MatchedPair {
    int class_idx = 0;
    double distance_deg = 0.0;
};

struct FrameMatch {
    std::vector<MatchedPair> pairs;
    int unmatched_predictions = 0;
    int unmatched_references = 0;
    int references = 0;
    int predictions = 0;
};

/// Class-gated matching: within each class, predictions and references are
/// paired by minimum total angular distance.
FrameMatch match_frame(const std::vector<FrameEntry>& preds, const std::vector<FrameEntry>& refs,
                       const Matcher& matcher = hungarian);

struct LocalizationScores {
    double le_cd = 0.0;
    double lr_cd = 0.0;
    bool le_defined = true;
};

/// Sentinel reported for LE when there are no matched pairs.
constexpr double kUndefinedLocalizationError = 180.0;

LocalizationScores compute_le_lr(const std::vector<FrameMatch>& matches);

struct DetectionCounts {
    long tp = 0, fp = 0, fn = 0;
    long substitutions = 0, deletions = 0, insertions = 0;
    long references = 0;
};

struct DetectionScores {
    double er = 0.0;
    double f = 0.0;
    DetectionCounts counts;
};

constexpr double kSpatialThresholdDeg = 20.0;
constexpr int kSegmentFrames = 10; // 1 s of 100 ms frames

/// Location-dependent ER/F. Pairs closer than the threshold are true
/// positives; farther pairs count as both a false positive and a false
/// negative. S/D/I are resolved per segment of `segment_frames` frames.
/// `file_boundaries` lists frame indices where a new file begins so segments
/// never straddle two files.
DetectionScores compute_er_f(const std::vector<FrameMatch>& matches, double threshold_deg = kSpatialThresholdDeg,
                             int segment_frames = kSegmentFrames, const std::vector<std::size_t>& file_boundaries = {});

struct SeldReport {
    double le_cd = 0.0;
    double lr_cd = 0.0;
    double er_20 = 0.0;
    double f_20 = 0.0;
    DetectionCounts counts;
    long matched_pairs = 0;
    long predictions = 0;
    bool le_defined = true;
    bool degenerate = false; // no references at all

    /// "LE LR ER F" in that order.
    std::string table_line() const;
    std::string key_values() const;
    static std::string csv_header();
    std::string csv_row() const;
};

struct EvalOptions {
    double threshold_deg = kSpatialThresholdDeg;
    int segment_frames = kSegmentFrames; // 1 for frame-level aggregation
    Matcher matcher = hungarian;
};

/// Aggregates over several (prediction, reference) file pairs.
SeldReport evaluate_tables(const std::vector<std::pair<FrameTable, FrameTable>>& files, const EvalOptions& opts = {});

SeldReport evaluate(const std::vector<LabelRow>& preds, const std::vector<LabelRow>& refs,
                    const EvalOptions& opts = {});

SeldReport evaluate_files(const std::filesystem::path& pred_csv, const std::filesystem::path& ref_csv,
                          const EvalOptions& opts = {});

} // namespace accdoa
