#pragma once

#include "accdoa/config.hpp"
#include "accdoa/metrics.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace accdoa {

/// Held-out scenes, seeded independently of the training stream.
std::vector<SceneInstance> make_test_set(const CompareConfig& cfg);

/// Decoded predictions for a clip at the 100 ms label rate.
EventLabelTrack predict_labels(const SegmentPredictor& predictor, const FoaClip& clip, int label_frames,
                               const InferConfig& cfg);

/// Evaluates a predictor over a set of scenes.
SeldReport evaluate_scenes(const SegmentPredictor& predictor, const std::vector<SceneInstance>& scenes,
                           const InferConfig& cfg);

struct VariantResult {
    LossVariant loss = LossVariant::accdoa;
    std::int64_t parameters = 0;
    std::int64_t head_parameters = 0;
    std::uint64_t trunk_hash = 0;  // hash of the trunk part of the config
    std::uint64_t config_hash = 0; // hash of the full per-variant config
    double final_loss = 0.0;
    SeldReport plain;
    SeldReport tta;
    Parameters<float> params;
    std::vector<LossRecord> history;
};

struct CompareReport {
    std::vector<VariantResult> variants;
    int tta_rotations = 0;

    const VariantResult* find(LossVariant v) const;
    bool trunks_match() const;
    /// Fixed-width table for stdout.
    std::string table() const;
    std::string csv() const;
};

/// Trains every variant on the same seeded data stream, then evaluates each
/// on the same held-out scenes with and without rotation TTA. When `out_dir`
/// is given, writes one sub-directory per variant (config.json,
/// checkpoint.bin, loss_history.csv) plus report.txt and report.csv.
CompareReport run_compare(const CompareConfig& cfg, const std::optional<std::filesystem::path>& out_dir = {},
                          std::ostream* log = nullptr);

/// Per-variant run config derived from the shared one.
RunConfig variant_config(const CompareConfig& cfg, LossVariant v);

std::string loss_history_csv(const std::vector<LossRecord>& history);

} // namespace accdoa
