#include "accdoa/features.hpp"

#include "accdoa/byteio.hpp"
#include "accdoa/error.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <fstream>
#include <vector>

namespace accdoa {

FeatureTensor FeatureTensor::zeros(int channels, int bins, int frames) {
    FeatureTensor x;
    x.channels = channels;
    x.bins = bins;
    x.frames = frames;
    x.data = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(channels) * bins * frames);
    return x;
}

FeatureTensor FeatureTensor::slice_frames(int begin, int count) const {
    FeatureTensor out = zeros(channels, bins, count);
    out.frame_hop_s = frame_hop_s;
    const int avail = std::max(0, std::min(count, frames - begin));
    if (avail == 0) return out;
    for (int m = 0; m < channels; ++m) {
        out.plane(m).leftCols(avail) = plane(m).middleCols(begin, avail);
    }
    return out;
}

const Eigen::VectorXd& analysis_window() {
    static const Eigen::VectorXd window = [] {
        Eigen::VectorXd w(kWindowLength);
        for (int n = 0; n < kWindowLength; ++n)
            w[n] = 0.5 - 0.5 * std::cos(2.0 * kPi * n / kWindowLength);
        return w;
    }();
    return window;
}

int stft_frame_count(Eigen::Index n) {
    if (n < kWindowLength) return 0;
    return static_cast<int>(1 + (n - kWindowLength) / kHopLength);
}

Spectrogram stft(const FoaClip& clip) {
    const int frames = stft_frame_count(clip.length());
    if (frames == 0)
        throw LengthError("clip of " + std::to_string(clip.length()) +
                          " samples is shorter than one analysis window");

    const Eigen::VectorXd& window = analysis_window();
    const double scale = 1.0 / window.sum();

    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<double> buf(kFftSize, 0.0);
    std::vector<std::complex<double>> spectrum;

    Spectrogram spec;
    for (int ch = 0; ch < 4; ++ch) {
        Eigen::MatrixXcd& out = spec.channels[ch];
        out.resize(kFrequencyBins, frames);
        for (int t = 0; t < frames; ++t) {
            const Eigen::Index start = static_cast<Eigen::Index>(t) * kHopLength;
            for (int n = 0; n < kWindowLength; ++n) buf[n] = clip.samples(ch, start + n) * window[n];
            fft.fwd(spectrum, buf);
            for (int k = 0; k < kFrequencyBins; ++k) out(k, t) = spectrum[k] * scale;
        }
    }
    return spec;
}

FeatureTensor features_from_spectrogram(const Spectrogram& spec) {
    const int bins = static_cast<int>(spec.bins());
    const int frames = static_cast<int>(spec.frames());
    FeatureTensor x = FeatureTensor::zeros(kFeatureChannels, bins, frames);

    for (int ch = 0; ch < 4; ++ch) {
        const Eigen::MatrixXcd& s = spec.channels[ch];
        auto amp = x.plane(ch);
        for (int t = 0; t < frames; ++t)
            for (int f = 0; f < bins; ++f) amp(f, t) = std::sqrt(std::norm(s(f, t)));
    }

    const Eigen::MatrixXcd& ref = spec.channels[FoaClip::W];
    for (int i = 0; i < 3; ++i) {
        const Eigen::MatrixXcd& other = spec.channels[FoaClip::Y + i];
        auto ipd = x.plane(4 + i);
        for (int t = 0; t < frames; ++t) {
            for (int f = 0; f < bins; ++f) {
                const std::complex<double> a = other(f, t);
                const std::complex<double> b = ref(f, t);
                // Phase is undefined where either magnitude vanishes; use 0.
                if (a == 0.0 || b == 0.0) continue;
                const std::complex<double> d = a * std::conj(b);
                ipd(f, t) = std::atan2(d.imag(), d.real());
            }
        }
    }
    return x;
}

FeatureTensor extract_features(const FoaClip& clip) {
    return features_from_spectrogram(stft(clip));
}

int frames_to_label_frames(int input_frames, int temporal_pool) {
    if (temporal_pool <= 0) throw ConfigError("temporal_pool must be positive");
    return input_frames / temporal_pool;
}

void write_feature_dump(const std::filesystem::path& path, const FeatureTensor& x) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    byteio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(x.channels));
    byteio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(x.bins));
    byteio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(x.frames));
    byteio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(std::lround(x.frame_hop_s * 1000.0)));
    for (Eigen::Index i = 0; i < x.data.size(); ++i) byteio::put_le<float>(os, static_cast<float>(x.data[i]));
    if (!os) throw IoError("write failed: " + path.string());
}

FeatureTensor read_feature_dump(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    const auto m = byteio::get_le<std::uint32_t>(is);
    const auto f = byteio::get_le<std::uint32_t>(is);
    const auto t = byteio::get_le<std::uint32_t>(is);
    const auto hop_ms = byteio::get_le<std::uint32_t>(is);
    FeatureTensor x = FeatureTensor::zeros(static_cast<int>(m), static_cast<int>(f), static_cast<int>(t));
    x.frame_hop_s = hop_ms / 1000.0;
    for (Eigen::Index i = 0; i < x.data.size(); ++i) x.data[i] = byteio::get_le<float>(is);
    return x;
}

} // namespace accdoa
