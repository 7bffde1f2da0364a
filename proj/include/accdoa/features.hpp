#pragma once

#include "accdoa/geometry.hpp"

#include <Eigen/Dense>

#include <array>
#include <filesystem>

namespace accdoa {

constexpr int kWindowLength = 480; // 20 ms at 24 kHz
constexpr int kHopLength = 240;    // 10 ms at 24 kHz
constexpr int kFftSize = 512;
constexpr int kFrequencyBins = kFftSize / 2 + 1;
constexpr int kFeatureChannels = 7;
constexpr int kAmplitudePlanes = 4; // planes before this index are amplitudes
constexpr double kFrameHopSeconds = 0.010;

using RowMajorMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Complex spectrogram per FOA channel, each bins x frames.
struct Spectrogram {
    std::array<Eigen::MatrixXcd, 4> channels;

    Eigen::Index bins() const { return channels[0].rows(); }
    Eigen::Index frames() const { return channels[0].cols(); }
};

/// M x F x T' feature stack, stored channel-major then bin then frame:
/// element (m, f, t) lives at data[(m * F + f) * T + t].
///
/// Planes 0-3 are amplitude spectrograms of W, Y, Z, X; planes 4-6 are the
/// phase differences of Y, Z, X against W.
struct FeatureTensor {
    int channels = 0;
    int bins = 0;
    int frames = 0;
    double frame_hop_s = kFrameHopSeconds;
    Eigen::VectorXd data;

    static FeatureTensor zeros(int channels, int bins, int frames);

    double& operator()(int m, int f, int t) { return data[(static_cast<Eigen::Index>(m) * bins + f) * frames + t]; }
    double operator()(int m, int f, int t) const { return data[(static_cast<Eigen::Index>(m) * bins + f) * frames + t]; }

    Eigen::Map<RowMajorMatrixXd> plane(int m) {
        return {data.data() + static_cast<Eigen::Index>(m) * bins * frames, bins, frames};
    }
    Eigen::Map<const RowMajorMatrixXd> plane(int m) const {
        return {data.data() + static_cast<Eigen::Index>(m) * bins * frames, bins, frames};
    }

    /// Frames [begin, begin + count); frames past the end are zero-filled.
    FeatureTensor slice_frames(int begin, int count) const;
};

/// Periodic Hann window of kWindowLength samples.
const Eigen::VectorXd& analysis_window();

/// Number of STFT frames for a clip of n samples (no centring padding).
int stft_frame_count(Eigen::Index n);

/// Per-channel STFT: 480-sample Hann window zero-padded to 512, 240-sample
/// hop. Coefficients are scaled by 1 / sum(window) so a unit-amplitude
/// sinusoid peaks near 0.5.
Spectrogram stft(const FoaClip& clip);

FeatureTensor extract_features(const FoaClip& clip);
FeatureTensor features_from_spectrogram(const Spectrogram& spec);

/// Network label frames produced from input_frames feature frames.
int frames_to_label_frames(int input_frames, int temporal_pool);

/// Flat dump: 16-byte header of little-endian uint32 (M, F, T', hop_ms)
/// followed by M*F*T' little-endian float32 values in (m, f, t) order.
void write_feature_dump(const std::filesystem::path& path, const FeatureTensor& x);
FeatureTensor read_feature_dump(const std::filesystem::path& path);

} // namespace accdoa
