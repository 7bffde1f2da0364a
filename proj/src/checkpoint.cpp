#include "accdoa/checkpoint.hpp"

#include "accdoa/byteio.hpp"
#include "accdoa/error.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace accdoa {

namespace {
constexpr std::array<char, 8> kMagic{'A', 'C', 'D', 'O', 'A', 'C', 'K', 'P'};
}

void write_checkpoint(const std::filesystem::path& path, const Parameters<float>& params, std::uint64_t config_hash) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os.write(kMagic.data(), kMagic.size());
    byteio::put_le<std::uint32_t>(os, kCheckpointVersion);
    byteio::put_le<std::uint64_t>(os, config_hash);
    const auto& entries = params.layout().entries();
    byteio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        byteio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        byteio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.rows));
        byteio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.cols));
        const auto m = params.view(e);
        for (Eigen::Index r = 0; r < e.rows; ++r)
            for (Eigen::Index c = 0; c < e.cols; ++c) byteio::put_le<float>(os, m(r, c));
    }
    if (!os) throw IoError("write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path, std::shared_ptr<const ParameterLayout> layout) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    std::array<char, 8> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw IoError("not a checkpoint: " + path.string());
    const auto version = byteio::get_le<std::uint32_t>(is);
    if (version != kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ck;
    ck.config_hash = byteio::get_le<std::uint64_t>(is);
    ck.params = Parameters<float>(layout);
    auto& values = ck.params.mutable_values();

    const auto count = byteio::get_le<std::uint32_t>(is);
    if (count != layout->entries().size())
        throw IoError("checkpoint has " + std::to_string(count) + " tensors, model expects " +
                      std::to_string(layout->entries().size()));
    for (const auto& e : layout->entries()) {
        const auto len = byteio::get_le<std::uint32_t>(is);
        std::string name(len, '\0');
        if (!is.read(name.data(), len)) throw IoError("truncated checkpoint");
        const auto rows = byteio::get_le<std::uint32_t>(is);
        const auto cols = byteio::get_le<std::uint32_t>(is);
        if (name != e.name || rows != e.rows || cols != e.cols)
            throw IoError("checkpoint tensor " + name + " does not match model tensor " + e.name);
        Eigen::Map<MatrixX<float>> m(values.data() + e.offset, e.rows, e.cols);
        for (Eigen::Index r = 0; r < e.rows; ++r)
            for (Eigen::Index c = 0; c < e.cols; ++c) m(r, c) = byteio::get_le<float>(is);
    }
    return ck;
}

} // namespace accdoa
