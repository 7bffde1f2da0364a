#pragma once

#include "accdoa/augment.hpp"
#include "accdoa/model.hpp"
#include "accdoa/optimizer.hpp"
#include "accdoa/scene.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace accdoa {

enum class LossVariant { accdoa, seldnet, two_stage };

std::string to_string(LossVariant v);
LossVariant loss_variant_from_string(const std::string& s);
HeadVariant head_for(LossVariant v);

struct TrainConfig {
    int batch_size = 32;
    double lr = 1e-3;
    double lr_decay = 0.9;
    long decay_interval = 2000;
    double weight_decay = 1e-6;
    long max_iters = 1000;
    LossVariant loss = LossVariant::accdoa;
    double loss_weight = kSeldnetLossWeight;
    std::uint64_t seed = 0;
    /// Number of distinct training scenes cycled through; 0 draws a fresh
    /// scene for every sample.
    int scene_pool = 0;
    /// Fraction of iterations spent in the SED stage of the two-stage variant.
    double two_stage_split = 0.5;
    AugmentConfig augment;

    void validate() const;
};

struct InferConfig {
    int segment_frames = 128;
    int shift_frames = 20;
    double threshold = kDefaultThreshold;
    /// Indices into rotation_catalog(); {0} is the identity only.
    std::vector<int> tta_rotations{0};

    void validate() const;
};

struct LossRecord {
    long iteration = 0;
    double loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    Parameters<float> params;
    std::vector<LossRecord> history;
};

struct TrainingSample {
    FeatureTensor features;
    EventLabelTrack targets; // at the network frame rate
};

/// Number of samples needed for `frames` STFT frames.
Eigen::Index samples_for_frames(int frames);

/// The scene spec actually used for training: the given spec cut to one
/// network input segment.
SceneSpec training_scene_spec(const ModelConfig& model, const SceneSpec& spec);

/// Rendered pool scenes keyed by seed. Rendering is deterministic, so a
/// cache changes speed only, never the samples.
using SceneCache = std::map<std::uint64_t, std::shared_ptr<const SceneInstance>>;

/// Deterministic sample for (iteration, slot): scene -> EMDA -> rotation ->
/// features -> SpecAugment, plus targets resampled to network frames.
TrainingSample make_training_sample(const ModelConfig& model, const TrainConfig& train, const SceneSpec& spec,
                                    long iteration, int slot, SceneCache* cache = nullptr);

using TrainObserver = std::function<void(const LossRecord&)>;

/// Adam with decoupled weight decay and step-decay learning rate. Throws
/// NonFiniteLoss with a diagnostic if a batch loss is not finite.
TrainResult train(const ModelConfig& model, const TrainConfig& train, const SceneSpec& spec,
                  const TrainObserver& observer = {});

/// Same as train() but starting from the given parameters.
TrainResult train_from(const ModelConfig& model, const TrainConfig& train, const SceneSpec& spec,
                       Parameters<float> init, const TrainObserver& observer = {});

/// Maps one input segment (segment_frames feature frames) to network-rate
/// ACCDOA vectors.
using SegmentPredictor = std::function<AccdoaGrid(const FeatureTensor&)>;

SegmentPredictor make_predictor(const Model<float>& model, const Parameters<float>& params);

/// Sliding-window inference over a whole feature tensor. Returns one vector
/// per feature frame (10 ms): each window's outputs are held over the frames
/// they cover and overlapping windows are averaged with equal weights. The
/// last window is aligned to the end. Inputs shorter than one segment are
/// zero-padded and the output trimmed.
AccdoaGrid infer_features(const SegmentPredictor& predictor, const FeatureTensor& x, int segment_frames,
                          int shift_frames);

AccdoaGrid infer_clip(const SegmentPredictor& predictor, const FoaClip& clip, const InferConfig& cfg);

/// Rotate input, infer, rotate vectors back, average over cfg.tta_rotations.
AccdoaGrid infer_with_tta(const SegmentPredictor& predictor, const FoaClip& clip, const InferConfig& cfg);

/// Averages 10 ms frame vectors into label frames of `label_hop_s`.
AccdoaGrid pool_to_label_frames(const AccdoaGrid& fine, int label_frames, double label_hop_s = kLabelHopSeconds);

} // namespace accdoa
