#include "accdoa/augment.hpp"

#include "accdoa/error.hpp"

#include <algorithm>
#include <cmath>

namespace accdoa {

void AugmentConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("train.augment." + field + ": " + why);
    };
    if (!(emda_probability >= 0.0 && emda_probability <= 1.0)) fail("emda_probability", "must be in [0, 1]");
    if (!(emda_min_gain >= 0.0 && emda_min_gain <= emda_max_gain)) fail("emda_min_gain", "must be in [0, max_gain]");
    if (!(emda_max_delay_s >= 0.0)) fail("emda_max_delay_s", "must be non-negative");
    if (!(emda_max_eq_db >= 0.0)) fail("emda_max_eq_db", "must be non-negative");
    if (emda_retries < 1) fail("emda_retries", "must be at least 1");
    if (specaug.time_masks < 0 || specaug.freq_masks < 0 || specaug.channel_masks < 0)
        fail("specaug", "mask counts must be non-negative");
    if (specaug.max_time_width < 0 || specaug.max_freq_width < 0) fail("specaug", "mask widths must be non-negative");
}

EmdaDraw draw_emda(const AugmentConfig& cfg, Rng& rng) {
    EmdaDraw d;
    d.gain = rng.uniform(cfg.emda_min_gain, cfg.emda_max_gain);
    const int max_delay = static_cast<int>(std::floor(cfg.emda_max_delay_s / kLabelHopSeconds + 1e-9));
    d.delay_frames = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_delay + 1)));
    // Log-uniform centre between 100 Hz and 8 kHz.
    d.eq_centre_hz = 100.0 * std::pow(80.0, rng.uniform());
    d.eq_gain_db = rng.uniform(-cfg.emda_max_eq_db, cfg.emda_max_eq_db);
    d.eq_q = rng.uniform(0.5, 2.0);
    return d;
}

FoaClip peaking_eq(const FoaClip& clip, double centre_hz, double gain_db, double q) {
    const double a = std::pow(10.0, gain_db / 40.0);
    const double w0 = 2.0 * kPi * centre_hz / clip.sample_rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double cw = std::cos(w0);
    const double a0 = 1.0 + alpha / a;
    const double b0 = (1.0 + alpha * a) / a0;
    const double b1 = (-2.0 * cw) / a0;
    const double b2 = (1.0 - alpha * a) / a0;
    const double a1 = (-2.0 * cw) / a0;
    const double a2 = (1.0 - alpha / a) / a0;

    FoaClip out = FoaClip::zeros(clip.length(), clip.sample_rate);
    for (int ch = 0; ch < 4; ++ch) {
        double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
        for (Eigen::Index i = 0; i < clip.length(); ++i) {
            const double x = clip.samples(ch, i);
            const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            out.samples(ch, i) = y;
        }
    }
    return out;
}

namespace {

FoaClip delayed(const FoaClip& clip, Eigen::Index delay) {
    FoaClip out = FoaClip::zeros(clip.length(), clip.sample_rate);
    const Eigen::Index keep = std::max<Eigen::Index>(0, clip.length() - delay);
    if (keep > 0) out.samples.rightCols(keep) = clip.samples.leftCols(keep);
    return out;
}

} // namespace

std::optional<SceneInstance> emda_mix(const SceneInstance& a, const SceneInstance& b, const EmdaDraw& draw,
                                      int max_overlap) {
    if (a.clip.length() != b.clip.length() || a.labels.classes != b.labels.classes ||
        a.labels.frames != b.labels.frames)
        throw DimensionError("emda: scenes differ in duration or class count");
    if (draw.gain == 0.0) return a;

    const int frames = a.labels.frames;
    const int classes = a.labels.classes;

    EventLabelTrack labels = a.labels;
    for (int t = 0; t < frames; ++t) {
        const int src = t - draw.delay_frames;
        if (src < 0) continue;
        for (int c = 0; c < classes; ++c) {
            if (!b.labels.active(c, src)) continue;
            if (labels.active(c, t)) return std::nullopt;
            labels.set(c, t, b.labels.direction(c, src));
        }
        if (labels.active_count(t) > max_overlap) return std::nullopt;
    }

    // Equalise, then restore the input energy so the gain alone sets the level.
    FoaClip ev = peaking_eq(b.event_stem, draw.eq_centre_hz, draw.eq_gain_db, draw.eq_q);
    FoaClip nz = peaking_eq(b.noise_stem, draw.eq_centre_hz, draw.eq_gain_db, draw.eq_q);
    const double before = b.clip.samples.squaredNorm();
    const double after = (ev.samples + nz.samples).squaredNorm();
    const double norm = after > 0.0 ? std::sqrt(before / after) : 0.0;

    const Eigen::Index delay = std::llround(draw.delay_frames * kLabelHopSeconds * a.clip.sample_rate);
    ev = delayed(ev, delay);
    nz = delayed(nz, delay);

    SceneInstance out = a;
    out.labels = std::move(labels);
    out.event_stem.samples += (draw.gain * norm) * ev.samples;
    out.noise_stem.samples += (draw.gain * norm) * nz.samples;
    out.clip.samples = out.event_stem.samples + out.noise_stem.samples;

    const double duration = static_cast<double>(a.clip.length()) / a.clip.sample_rate;
    const double shift = draw.delay_frames * kLabelHopSeconds;
    for (SceneEvent e : b.events) {
        e.onset_s += shift;
        e.offset_s = std::min(duration, e.offset_s + shift);
        if (e.onset_s < duration) out.events.push_back(e);
    }
    return out;
}

SceneInstance emda(const SceneInstance& a, const SceneInstance& b, const AugmentConfig& cfg, int max_overlap,
                   Rng& rng) {
    for (int i = 0; i < cfg.emda_retries; ++i) {
        if (auto mixed = emda_mix(a, b, draw_emda(cfg, rng), max_overlap)) return *std::move(mixed);
    }
    return a;
}

SceneInstance apply_rotation(const SceneInstance& instance, const CatalogEntry& entry) {
    SceneInstance out;
    out.clip = rotate_foa(instance.clip, entry.rotation);
    out.event_stem = rotate_foa(instance.event_stem, entry.rotation);
    out.noise_stem = rotate_foa(instance.noise_stem, entry.rotation);
    out.snr_db = instance.snr_db;
    out.labels = instance.labels;
    for (int t = 0; t < out.labels.frames; ++t)
        for (int c = 0; c < out.labels.classes; ++c)
            if (out.labels.active(c, t)) out.labels.direction(c, t) = entry.transform_label(out.labels.direction(c, t));
    out.events = instance.events;
    for (auto& e : out.events) e.trajectory = e.trajectory.transformed(entry.rotation);
    return out;
}

SceneInstance random_rotation(const SceneInstance& instance, Rng& rng, int* drawn) {
    const auto& catalog = rotation_catalog();
    const auto idx = static_cast<int>(rng.uniform_int(catalog.size()));
    if (drawn) *drawn = idx;
    if (idx == 0) return instance;
    return apply_rotation(instance, catalog[static_cast<std::size_t>(idx)]);
}

bool SpecAugmentMask::covers(int m, int f, int t) const {
    if (std::find(channels.begin(), channels.end(), m) != channels.end()) return true;
    for (auto [s, w] : time_strips)
        if (t >= s && t < s + w) return true;
    for (auto [s, w] : freq_strips)
        if (f >= s && f < s + w) return true;
    return false;
}

SpecAugmentMask draw_specaug_mask(const FeatureTensor& x, const SpecAugmentConfig& cfg, Rng& rng) {
    if (cfg.max_time_width > x.frames || cfg.max_freq_width > x.bins || cfg.channel_masks > x.channels)
        throw ConfigError("specaug: mask widths exceed tensor dimensions");
    SpecAugmentMask mask;
    auto strip = [&rng](int max_width, int extent) {
        const int w = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_width + 1)));
        const int s = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(extent - w + 1)));
        return std::pair{s, w};
    };
    for (int i = 0; i < cfg.time_masks; ++i) mask.time_strips.push_back(strip(cfg.max_time_width, x.frames));
    for (int i = 0; i < cfg.freq_masks; ++i) mask.freq_strips.push_back(strip(cfg.max_freq_width, x.bins));
    for (int i = 0; i < cfg.channel_masks; ++i)
        mask.channels.push_back(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(x.channels))));
    return mask;
}

FeatureTensor apply_specaug_mask(const FeatureTensor& x, const SpecAugmentMask& mask, Rng& rng) {
    FeatureTensor out = x;
    for (int m = 0; m < x.channels; ++m) {
        const bool phase = m >= kAmplitudePlanes;
        for (int f = 0; f < x.bins; ++f) {
            for (int t = 0; t < x.frames; ++t) {
                if (!mask.covers(m, f, t)) continue;
                if (!phase) {
                    out(m, f, t) = 0.0;
                } else {
                    double v = rng.uniform(0.0, 2.0 * kPi);
                    if (v >= kPi) v -= 2.0 * kPi;
                    out(m, f, t) = v;
                }
            }
        }
    }
    return out;
}

FeatureTensor spec_augment(const FeatureTensor& x, const SpecAugmentConfig& cfg, Rng& rng) {
    const SpecAugmentMask mask = draw_specaug_mask(x, cfg, rng);
    return apply_specaug_mask(x, mask, rng);
}

} // namespace accdoa
