#include "accdoa/scene.hpp"

#include "accdoa/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace accdoa {

namespace {

constexpr double kDeg = kPi / 180.0;
constexpr double kSilentNoiseRms = 1e-2;
constexpr int kHarmonics = 4;
constexpr double kEnvelopeStepS = 0.05;
constexpr double kRampS = 0.01;

Doa random_direction(double elevation_limit_deg, Rng& rng) {
    const double az = rng.uniform(-180.0, 180.0);
    // Uniform on the sphere band |el| <= limit.
    const double zmax = std::sin(elevation_limit_deg * kDeg);
    const double el = std::asin(rng.uniform(-zmax, zmax)) / kDeg;
    return normalized(sph_to_cart(az, el));
}

Doa orthogonal_axis(const Doa& start, Rng& rng) {
    while (true) {
        const Doa g(rng.normal(), rng.normal(), rng.normal());
        const Doa p = g - g.dot(start) * start;
        if (p.norm() > 1e-3) return normalized(p);
    }
}

Eigen::Index seconds_to_samples(double s, int rate) { return std::llround(s * rate); }

std::vector<bool> active_mask(const std::vector<SceneEvent>& events, Eigen::Index n, int rate) {
    std::vector<bool> mask(static_cast<std::size_t>(n), false);
    for (const auto& e : events) {
        const Eigen::Index a = std::clamp<Eigen::Index>(seconds_to_samples(e.onset_s, rate), 0, n);
        const Eigen::Index b = std::clamp<Eigen::Index>(seconds_to_samples(e.offset_s, rate), 0, n);
        for (Eigen::Index i = a; i < b; ++i) mask[static_cast<std::size_t>(i)] = true;
    }
    return mask;
}

double masked_energy(const Eigen::RowVectorXd& x, const std::vector<bool>& mask) {
    double e = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (mask[static_cast<std::size_t>(i)]) e += x[i] * x[i];
    return e;
}

} // namespace

void SceneSpec::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("scene." + field + ": " + why);
    };
    if (!(duration_s > 0.0)) fail("duration_s", "must be positive");
    if (class_count < 1) fail("class_count", "must be at least 1");
    if (max_overlap < 1 || max_overlap > 2) fail("max_overlap", "must be 1 or 2");
    if (!(snr_db_range[0] <= snr_db_range[1])) fail("snr_db_range", "low must not exceed high");
    if (move_speeds_dps.empty()) fail("move_speeds_dps", "must not be empty");
    for (double s : move_speeds_dps)
        if (!(s > 0.0)) fail("move_speeds_dps", "speeds must be positive");
    if (!(event_rate_hz >= 0.0)) fail("event_rate_hz", "must be non-negative");
    if (!(min_event_s > 0.0 && min_event_s <= max_event_s)) fail("min_event_s", "must be in (0, max_event_s]");
    if (!(elevation_limit_deg >= 0.0 && elevation_limit_deg <= 90.0))
        fail("elevation_limit_deg", "must be in [0, 90]");
    if (!(moving_probability >= 0.0 && moving_probability <= 1.0))
        fail("moving_probability", "must be in [0, 1]");
}

Eigen::Index SceneSpec::samples() const { return seconds_to_samples(duration_s, kSampleRate); }

int SceneSpec::label_frames() const {
    return static_cast<int>(std::ceil(duration_s / kLabelHopSeconds - 1e-9));
}

Doa Trajectory::at(double t_s) const {
    if (!moving()) return start;
    const double angle = speed_dps * t_s * kDeg;
    return std::cos(angle) * start + std::sin(angle) * axis;
}

Trajectory Trajectory::transformed(const Rotation& r) const {
    return {r.apply(start), r.apply(axis), speed_dps};
}

double class_fundamental_hz(int class_id) { return 200.0 + 150.0 * class_id; }

Eigen::VectorXd synth_event_sample(int class_id, int class_count, double duration_s, Rng& rng) {
    if (class_id < 0 || class_id >= class_count)
        throw RangeError("class id " + std::to_string(class_id) + " outside [0, " +
                         std::to_string(class_count) + ")");
    const Eigen::Index n = seconds_to_samples(duration_s, kSampleRate);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    if (n == 0) return s;

    const double f0 = class_fundamental_hz(class_id) * rng.uniform(0.98, 1.02);
    std::array<double, kHarmonics> phase{};
    for (auto& p : phase) p = rng.uniform(0.0, 2.0 * kPi);

    // Envelope control points every 50 ms, linearly interpolated.
    const int points = static_cast<int>(std::ceil(duration_s / kEnvelopeStepS)) + 2;
    std::vector<double> ctrl(static_cast<std::size_t>(points));
    for (auto& c : ctrl) c = rng.uniform(0.5, 1.0);

    const Eigen::Index ramp = std::max<Eigen::Index>(1, seconds_to_samples(kRampS, kSampleRate));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        double v = 0.0;
        for (int h = 0; h < kHarmonics; ++h) {
            const double f = f0 * (h + 1);
            if (f >= 0.5 * kSampleRate) break;
            v += std::sin(2.0 * kPi * f * t + phase[h]) / (h + 1);
        }
        const double pos = t / kEnvelopeStepS;
        const auto k = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(k);
        double env = (1.0 - frac) * ctrl[k] + frac * ctrl[k + 1];
        env *= std::min({1.0, static_cast<double>(i + 1) / ramp, static_cast<double>(n - i) / ramp});
        s[i] = env * v;
    }
    const double peak = s.cwiseAbs().maxCoeff();
    if (peak > 0.0) s *= 0.9 / peak;
    return s.cwiseMax(-1.0).cwiseMin(1.0);
}

Trajectory random_trajectory(TrajectoryKind kind, double speed_dps, double elevation_limit_deg, Rng& rng) {
    Trajectory traj;
    traj.start = random_direction(elevation_limit_deg, rng);
    if (kind == TrajectoryKind::moving) {
        traj.axis = orthogonal_axis(traj.start, rng);
        traj.speed_dps = speed_dps;
    }
    return traj;
}

DoaTrack sample_trajectory(const Trajectory& traj, Eigen::Index samples, int sample_rate) {
    DoaTrack track(3, samples);
    for (Eigen::Index i = 0; i < samples; ++i)
        track.col(i) = normalized(traj.at(static_cast<double>(i) / sample_rate));
    return track;
}

DoaTrack synth_trajectory(TrajectoryKind kind, double speed_dps, double duration_s, Rng& rng) {
    const Trajectory traj = random_trajectory(kind, speed_dps, 45.0, rng);
    return sample_trajectory(traj, seconds_to_samples(duration_s, kSampleRate));
}

std::vector<SceneEvent> draw_events(const SceneSpec& spec, Rng& rng) {
    spec.validate();
    const int frames = spec.label_frames();
    // Per-frame occupancy, used to reject events that break the overlap rules.
    std::vector<int> count(static_cast<std::size_t>(frames), 0);
    std::vector<std::vector<bool>> busy(static_cast<std::size_t>(spec.class_count),
                                        std::vector<bool>(static_cast<std::size_t>(frames), false));
    std::vector<SceneEvent> events;
    if (spec.event_rate_hz <= 0.0) return events;

    double t = rng.exponential(spec.event_rate_hz);
    while (t < spec.duration_s) {
        const int on = static_cast<int>(std::floor(t / kLabelHopSeconds));
        const int len = std::max(1, static_cast<int>(std::lround(rng.uniform(spec.min_event_s, spec.max_event_s) /
                                                                 kLabelHopSeconds)));
        const int off = std::min(frames, on + len);
        const int cls = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.class_count)));
        const bool moving = rng.bernoulli(spec.moving_probability);
        const double speed = spec.move_speeds_dps[rng.uniform_int(spec.move_speeds_dps.size())];
        const Trajectory traj = random_trajectory(moving ? TrajectoryKind::moving : TrajectoryKind::static_source,
                                                  speed, spec.elevation_limit_deg, rng);
        const std::uint64_t sample_seed = rng.next();

        bool ok = on < off;
        for (int k = on; ok && k < off; ++k)
            ok = count[static_cast<std::size_t>(k)] < spec.max_overlap && !busy[cls][static_cast<std::size_t>(k)];
        if (ok) {
            for (int k = on; k < off; ++k) {
                ++count[static_cast<std::size_t>(k)];
                busy[cls][static_cast<std::size_t>(k)] = true;
            }
            events.push_back({cls, on * kLabelHopSeconds, std::min(spec.duration_s, off * kLabelHopSeconds), traj,
                              sample_seed});
        }
        t += rng.exponential(spec.event_rate_hz);
    }
    return events;
}

EventLabelTrack rasterize_events(const std::vector<SceneEvent>& events, int class_count, int frames, double hop_s) {
    EventLabelTrack labels = EventLabelTrack::empty(class_count, frames);
    for (const auto& e : events) {
        if (e.class_id < 0 || e.class_id >= class_count) throw RangeError("event class out of range");
        for (int k = 0; k < frames; ++k) {
            const double centre = (k + 0.5) * hop_s;
            if (centre >= e.onset_s && centre < e.offset_s)
                labels.set(e.class_id, k, normalized(e.trajectory.at(centre - e.onset_s)));
        }
    }
    return labels;
}

FoaClip render_event_stem(const SceneSpec& spec, const std::vector<SceneEvent>& events) {
    const Eigen::Index n = spec.samples();
    FoaClip stem = FoaClip::zeros(n);
    for (const auto& e : events) {
        const Eigen::Index a = std::clamp<Eigen::Index>(seconds_to_samples(e.onset_s, kSampleRate), 0, n);
        const Eigen::Index b = std::clamp<Eigen::Index>(seconds_to_samples(e.offset_s, kSampleRate), 0, n);
        if (b <= a) continue;
        Rng rng(e.sample_seed);
        const Eigen::VectorXd mono =
            synth_event_sample(e.class_id, spec.class_count, static_cast<double>(b - a) / kSampleRate, rng);
        const FoaClip enc = foa_encode(mono, sample_trajectory(e.trajectory, b - a));
        stem.samples.middleCols(a, b - a) += enc.samples;
    }
    return stem;
}

FoaClip draw_noise(Eigen::Index samples, Rng& rng) {
    FoaClip noise = FoaClip::zeros(samples);
    for (Eigen::Index i = 0; i < samples; ++i)
        for (int ch = 0; ch < 4; ++ch) noise.samples(ch, i) = rng.normal();
    return noise;
}

SceneInstance render_events(const SceneSpec& spec, const std::vector<SceneEvent>& events,
                            const FoaClip& raw_noise, double snr_db) {
    const Eigen::Index n = spec.samples();
    if (raw_noise.length() != n) throw DimensionError("noise length does not match scene length");

    SceneInstance scene;
    scene.events = events;
    scene.snr_db = snr_db;
    scene.event_stem = render_event_stem(spec, events);

    const auto mask = active_mask(events, n, kSampleRate);
    const double signal = masked_energy(scene.event_stem.samples.row(FoaClip::W), mask);
    const double noise = masked_energy(raw_noise.samples.row(FoaClip::W), mask);
    double gain;
    if (signal > 0.0 && noise > 0.0) {
        gain = std::sqrt(signal / (noise * std::pow(10.0, snr_db / 10.0)));
    } else {
        const double total = raw_noise.samples.row(FoaClip::W).squaredNorm();
        gain = total > 0.0 ? kSilentNoiseRms * std::sqrt(static_cast<double>(n) / total) : 0.0;
    }
    scene.noise_stem.sample_rate = kSampleRate;
    scene.noise_stem.samples = gain * raw_noise.samples;

    scene.clip.sample_rate = kSampleRate;
    scene.clip.samples = scene.event_stem.samples + scene.noise_stem.samples;
    scene.labels = rasterize_events(events, spec.class_count, spec.label_frames());
    return scene;
}

SceneInstance render_scene(const SceneSpec& spec, Rng& rng) {
    spec.validate();
    const std::vector<SceneEvent> events = draw_events(spec, rng);
    const double snr = rng.uniform(spec.snr_db_range[0], spec.snr_db_range[1]);
    Rng noise_rng(rng.next());
    const FoaClip noise = draw_noise(spec.samples(), noise_rng);
    return render_events(spec, events, noise, snr);
}

SceneInstance render_scene(const SceneSpec& spec) {
    Rng rng(spec.seed);
    return render_scene(spec, rng);
}

double measured_snr_db(const SceneInstance& scene) {
    const auto mask = active_mask(scene.events, scene.clip.length(), scene.clip.sample_rate);
    const double s = masked_energy(scene.event_stem.samples.row(FoaClip::W), mask);
    const double n = masked_energy(scene.noise_stem.samples.row(FoaClip::W), mask);
    return 10.0 * std::log10(s / n);
}

EventLabelTrack resample_labels(const EventLabelTrack& labels, double src_hop_s, double dst_hop_s, int dst_frames) {
    EventLabelTrack out = EventLabelTrack::empty(labels.classes, dst_frames);
    for (int t = 0; t < dst_frames; ++t) {
        const int k = static_cast<int>(std::floor((t + 0.5) * dst_hop_s / src_hop_s + 1e-9));
        if (k < 0 || k >= labels.frames) continue;
        for (int c = 0; c < labels.classes; ++c)
            if (labels.active(c, k)) out.set(c, t, labels.direction(c, k));
    }
    return out;
}

} // namespace accdoa
