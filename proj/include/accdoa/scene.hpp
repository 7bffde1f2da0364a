#pragma once

#include "accdoa/codec.hpp"
#include "accdoa/geometry.hpp"
#include "accdoa/rng.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace accdoa {

constexpr double kLabelHopSeconds = 0.100;

/// Parameters of the synthetic scene generator.
struct SceneSpec {
    double duration_s = 5.0;
    int class_count = 3;
    int max_overlap = 2;
    std::array<double, 2> snr_db_range{6.0, 30.0};
    std::vector<double> move_speeds_dps{10.0, 20.0, 40.0};
    std::uint64_t seed = 0;

    double event_rate_hz = 0.6;
    double min_event_s = 0.5;
    double max_event_s = 4.0;
    double elevation_limit_deg = 45.0;
    double moving_probability = 0.5;

    /// Throws ConfigError naming the offending field.
    void validate() const;
    Eigen::Index samples() const;
    int label_frames() const;
};

/// Static (speed 0) or great-circle trajectory at constant angular speed:
/// d(t) = cos(w t) start + sin(w t) axis, with axis orthogonal to start.
struct Trajectory {
    Doa start = Doa::UnitX();
    Doa axis = Doa::Zero();
    double speed_dps = 0.0;

    bool moving() const { return speed_dps != 0.0; }
    Doa at(double t_s) const;
    Trajectory transformed(const Rotation& r) const;
};

struct SceneEvent {
    int class_id = 0;
    double onset_s = 0.0;
    double offset_s = 0.0; // exclusive
    Trajectory trajectory;
    std::uint64_t sample_seed = 0;
};

struct SceneInstance {
    FoaClip clip;
    FoaClip event_stem;
    FoaClip noise_stem;
    EventLabelTrack labels; // at kLabelHopSeconds
    std::vector<SceneEvent> events;
    double snr_db = 0.0;
};

enum class TrajectoryKind { static_source, moving };

/// Class-distinctive mono event: a harmonic stack whose fundamental is set by
/// the class index, under a smoothed random-noise amplitude envelope. Values
/// lie in [-1, 1].
Eigen::VectorXd synth_event_sample(int class_id, int class_count, double duration_s, Rng& rng);

/// Fundamental frequency used for a class.
double class_fundamental_hz(int class_id);

Trajectory random_trajectory(TrajectoryKind kind, double speed_dps, double elevation_limit_deg, Rng& rng);

/// Per-sample DOA track of length round(duration_s * 24 kHz).
DoaTrack synth_trajectory(TrajectoryKind kind, double speed_dps, double duration_s, Rng& rng);
DoaTrack sample_trajectory(const Trajectory& traj, Eigen::Index samples, int sample_rate = kSampleRate);

/// Draws an event list obeying the overlap limits (no same-class overlap).
std::vector<SceneEvent> draw_events(const SceneSpec& spec, Rng& rng);

/// Rasterises events at the label hop; DOAs are taken at frame centres.
EventLabelTrack rasterize_events(const std::vector<SceneEvent>& events, int class_count, int frames,
                                 double hop_s = kLabelHopSeconds);

/// Sum of the FOA-encoded events, no noise.
FoaClip render_event_stem(const SceneSpec& spec, const std::vector<SceneEvent>& events);

/// Unit-variance noise, independent across the four channels.
FoaClip draw_noise(Eigen::Index samples, Rng& rng);

/// Mixes events with `raw_noise` rescaled to the requested SNR, measured on W
/// over the samples where any event is active.
SceneInstance render_events(const SceneSpec& spec, const std::vector<SceneEvent>& events,
                            const FoaClip& raw_noise, double snr_db);

SceneInstance render_scene(const SceneSpec& spec, Rng& rng);
SceneInstance render_scene(const SceneSpec& spec);

/// 10 log10(event energy / noise energy) on W over the event-active samples.
double measured_snr_db(const SceneInstance& scene);

/// Nearest-centre resampling between label grids.
EventLabelTrack resample_labels(const EventLabelTrack& labels, double src_hop_s, double dst_hop_s,
                                int dst_frames);

} // namespace accdoa
