#pragma once

#include "accdoa/features.hpp"
#include "accdoa/rng.hpp"
#include "accdoa/scene.hpp"

#include <optional>
#include <vector>

namespace accdoa {

struct SpecAugmentConfig {
    int time_masks = 2;
    int freq_masks = 2;
    int channel_masks = 1;
    int max_time_width = 16;
    int max_freq_width = 12;
};

struct AugmentConfig {
    bool emda_enabled = true;
    bool rotation_enabled = true;
    bool specaug_enabled = true;

    double emda_probability = 0.5;
    double emda_min_gain = 0.25;
    double emda_max_gain = 1.0;
    double emda_max_delay_s = 0.5;
    double emda_max_eq_db = 6.0;
    int emda_retries = 4;

    SpecAugmentConfig specaug;

    void validate() const;
};

/// One EMDA draw: gain and delay applied to the second scene, plus a peaking
/// equaliser (RBJ biquad) whose output is rescaled to the input RMS.
struct EmdaDraw {
    double gain = 1.0;
    int delay_frames = 0; // label hops
    double eq_centre_hz = 1000.0;
    double eq_gain_db = 0.0;
    double eq_q = 1.0;
};

EmdaDraw draw_emda(const AugmentConfig& cfg, Rng& rng);

/// Peaking biquad applied to every row of a clip.
FoaClip peaking_eq(const FoaClip& clip, double centre_hz, double gain_db, double q);

/// Mixes `b` (equalised, delayed, scaled) into `a`. Returns nothing when the
/// label union would put more than max_overlap classes in a frame or overlap
/// a class with itself. A zero gain returns `a` unchanged.
std::optional<SceneInstance> emda_mix(const SceneInstance& a, const SceneInstance& b, const EmdaDraw& draw,
                                      int max_overlap);

/// Up to cfg.emda_retries draws; falls back to `a` if none satisfies the
/// overlap constraint.
SceneInstance emda(const SceneInstance& a, const SceneInstance& b, const AugmentConfig& cfg, int max_overlap,
                   Rng& rng);

/// Rotates audio, stems, labels and event trajectories together.
SceneInstance apply_rotation(const SceneInstance& instance, const CatalogEntry& entry);

/// Applies a uniformly drawn catalog entry; returns the entry index in `drawn`.
SceneInstance random_rotation(const SceneInstance& instance, Rng& rng, int* drawn = nullptr);

/// Cells to mask. Time and frequency strips cover every plane; channel masks
/// cover a whole plane.
struct SpecAugmentMask {
    std::vector<std::pair<int, int>> time_strips; // (start, width)
    std::vector<std::pair<int, int>> freq_strips;
    std::vector<int> channels;

    bool covers(int m, int f, int t) const;
};

SpecAugmentMask draw_specaug_mask(const FeatureTensor& x, const SpecAugmentConfig& cfg, Rng& rng);

/// Masked amplitude cells become 0; masked phase cells get U[0, 2pi) wrapped
/// to [-pi, pi).
FeatureTensor apply_specaug_mask(const FeatureTensor& x, const SpecAugmentMask& mask, Rng& rng);

FeatureTensor spec_augment(const FeatureTensor& x, const SpecAugmentConfig& cfg, Rng& rng);

} // namespace accdoa
