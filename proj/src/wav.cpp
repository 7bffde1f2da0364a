#include "accdoa/wav.hpp"

#include "accdoa/byteio.hpp"
#include "accdoa/error.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <vector>

namespace accdoa {

using byteio::get_le;
using byteio::put_le;

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

void put_tag(std::ostream& os, const char (&tag)[5]) { os.write(tag, 4); }

std::array<char, 4> get_tag(std::istream& is) {
    std::array<char, 4> t{};
    if (!is.read(t.data(), 4)) throw IoError("unexpected end of WAV file");
    return t;
}

bool tag_is(const std::array<char, 4>& t, const char (&s)[5]) {
    return t[0] == s[0] && t[1] == s[1] && t[2] == s[2] && t[3] == s[3];
}

} // namespace

void write_foa_wav(const std::filesystem::path& path, const FoaClip& clip) {
    if (!clip.samples.allFinite()) throw InvariantError("clip contains non-finite samples");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());

    const std::uint16_t channels = 4;
    const std::uint16_t bits = 32;
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.length()) * channels * 4;
    const std::uint32_t fmt_bytes = 40;

    put_tag(os, "RIFF");
    put_le<std::uint32_t>(os, 4 + (8 + fmt_bytes) + (8 + data_bytes));
    put_tag(os, "WAVE");

    put_tag(os, "fmt ");
    put_le<std::uint32_t>(os, fmt_bytes);
    put_le<std::uint16_t>(os, kFormatExtensible);
    put_le<std::uint16_t>(os, channels);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(clip.sample_rate));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(clip.sample_rate) * channels * 4);
    put_le<std::uint16_t>(os, channels * 4);
    put_le<std::uint16_t>(os, bits);
    put_le<std::uint16_t>(os, 22);     // cbSize
    put_le<std::uint16_t>(os, bits);   // valid bits
    put_le<std::uint32_t>(os, 0);      // channel mask: not speaker-mapped
    // KSDATAFORMAT_SUBTYPE_IEEE_FLOAT
    put_le<std::uint32_t>(os, 0x00000003);
    put_le<std::uint16_t>(os, 0x0000);
    put_le<std::uint16_t>(os, 0x0010);
    static constexpr std::array<unsigned char, 8> kGuidTail{0x80, 0x00, 0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71};
    os.write(reinterpret_cast<const char*>(kGuidTail.data()), 8);

    put_tag(os, "data");
    put_le<std::uint32_t>(os, data_bytes);
    for (Eigen::Index n = 0; n < clip.length(); ++n) {
        for (int ch = 0; ch < 4; ++ch) put_le<float>(os, static_cast<float>(clip.samples(ch, n)));
    }
    if (!os) throw IoError("write failed: " + path.string());
}

FoaClip read_foa_wav(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());

    if (!tag_is(get_tag(is), "RIFF")) throw IoError("not a RIFF file: " + path.string());
    get_le<std::uint32_t>(is);
    if (!tag_is(get_tag(is), "WAVE")) throw IoError("not a WAVE file: " + path.string());

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;

    while (true) {
        const auto tag = get_tag(is);
        const auto size = get_le<std::uint32_t>(is);
        if (tag_is(tag, "fmt ")) {
            format = get_le<std::uint16_t>(is);
            channels = get_le<std::uint16_t>(is);
            rate = get_le<std::uint32_t>(is);
            get_le<std::uint32_t>(is);
            get_le<std::uint16_t>(is);
            bits = get_le<std::uint16_t>(is);
            std::uint32_t consumed = 16;
            if (format == kFormatExtensible && size >= 40) {
                get_le<std::uint16_t>(is);
                get_le<std::uint16_t>(is);
                get_le<std::uint32_t>(is);
                format = static_cast<std::uint16_t>(get_le<std::uint32_t>(is) & 0xFFFF);
                consumed = 28;
            }
            is.seekg(size - consumed + (size & 1), std::ios::cur);
            have_fmt = true;
        } else if (tag_is(tag, "data")) {
            if (!have_fmt) throw IoError("data chunk before fmt chunk: " + path.string());
            if (channels != 4) throw IoError("expected 4 channels, found " + std::to_string(channels));
            const bool is_float = format == kFormatFloat && bits == 32;
            const bool is_pcm16 = format == kFormatPcm && bits == 16;
            if (!is_float && !is_pcm16) throw IoError("unsupported sample format in " + path.string());
            const std::uint32_t frame_bytes = channels * bits / 8;
            const Eigen::Index n = size / frame_bytes;
            FoaClip clip = FoaClip::zeros(n, static_cast<int>(rate));
            for (Eigen::Index i = 0; i < n; ++i) {
                for (int ch = 0; ch < 4; ++ch) {
                    clip.samples(ch, i) = is_float ? static_cast<double>(get_le<float>(is))
                                                   : get_le<std::int16_t>(is) / 32768.0;
                }
            }
            if (!clip.samples.allFinite()) throw InvariantError("non-finite samples in " + path.string());
            return clip;
        } else {
            is.seekg(size + (size & 1), std::ios::cur);
        }
    }
}

} // namespace accdoa
