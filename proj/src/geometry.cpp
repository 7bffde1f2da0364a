#include "accdoa/geometry.hpp"

#include "accdoa/error.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <optional>

namespace accdoa {

namespace {

constexpr double kDeg = kPi / 180.0;

// Row i of a signed permutation has exactly one entry of +-1. Returns the
// source axis and sign per output axis, or nothing for a general matrix.
std::optional<std::array<std::pair<int, double>, 3>> as_signed_permutation(
    const Eigen::Matrix3d& m) {
    std::array<std::pair<int, double>, 3> out{};
    std::array<bool, 3> used{false, false, false};
    for (int i = 0; i < 3; ++i) {
        int hits = 0;
        for (int j = 0; j < 3; ++j) {
            const double v = m(i, j);
            if (v == 0.0) continue;
            if ((v != 1.0 && v != -1.0) || used[j]) return std::nullopt;
            out[i] = {j, v};
            used[j] = true;
            ++hits;
        }
        if (hits != 1) return std::nullopt;
    }
    return out;
}

} // namespace

bool Rotation::is_valid(double tol) const {
    if (!matrix.allFinite()) return false;
    const Eigen::Matrix3d g = matrix.transpose() * matrix;
    if ((g - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(std::abs(matrix.determinant()) - 1.0) <= tol;
}

FoaClip FoaClip::zeros(Eigen::Index n, int sample_rate) {
    FoaClip clip;
    clip.samples = Eigen::Matrix<double, 4, Eigen::Dynamic>::Zero(4, n);
    clip.sample_rate = sample_rate;
    return clip;
}

Doa sph_to_cart(double azimuth_deg, double elevation_deg) {
    if (!(azimuth_deg >= -180.0 && azimuth_deg <= 180.0))
        throw RangeError("azimuth out of [-180, 180]: " + std::to_string(azimuth_deg));
    if (!(elevation_deg >= -90.0 && elevation_deg <= 90.0))
        throw RangeError("elevation out of [-90, 90]: " + std::to_string(elevation_deg));
    const double az = azimuth_deg * kDeg;
    const double el = elevation_deg * kDeg;
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

std::pair<double, double> cart_to_sph(const Doa& d) {
    const double n = d.norm();
    if (!(n > 0.0) || !std::isfinite(n))
        throw DegenerateDirection("cannot take the direction of a zero or non-finite vector");
    const double horiz = std::hypot(d.x(), d.y());
    const double el = std::atan2(d.z(), horiz) / kDeg;
    // Azimuth is undefined on the poles; fix it to 0.
    const double az = horiz <= 1e-12 * n ? 0.0 : std::atan2(d.y(), d.x()) / kDeg;
    return {az, el};
}

double angular_distance(const Doa& a, const Doa& b) {
    return std::atan2(a.cross(b).norm(), a.dot(b)) / kDeg;
}

Doa normalized(const Doa& v) {
    const double n = v.norm();
    if (!(n > 0.0))
        throw DegenerateDirection("cannot normalise a zero vector");
    if (std::abs(n - 1.0) <= 8.0 * std::numeric_limits<double>::epsilon()) return v;
    return v / n;
}

bool is_unit(const Doa& d, double tol) {
    return std::abs(d.norm() - 1.0) <= tol;
}

FoaClip foa_encode(const Eigen::Ref<const Eigen::VectorXd>& mono, const DoaTrack& track) {
    if (track.cols() != mono.size())
        throw DimensionError("direction track has " + std::to_string(track.cols()) +
                             " samples, signal has " + std::to_string(mono.size()));
    for (Eigen::Index i = 0; i < track.cols(); ++i) {
        if (!is_unit(track.col(i)))
            throw InvariantError("direction track sample " + std::to_string(i) + " is not unit norm");
    }
    FoaClip clip;
    clip.samples.resize(4, mono.size());
    clip.samples.row(FoaClip::W) = mono.transpose();
    clip.samples.row(FoaClip::Y) = mono.transpose().cwiseProduct(track.row(1));
    clip.samples.row(FoaClip::Z) = mono.transpose().cwiseProduct(track.row(2));
    clip.samples.row(FoaClip::X) = mono.transpose().cwiseProduct(track.row(0));
    return clip;
}

FoaClip rotate_foa(const FoaClip& clip, const Rotation& r) {
    // Dipole rows in (x, y, z) order.
    static constexpr std::array<int, 3> kAxisRow{FoaClip::X, FoaClip::Y, FoaClip::Z};

    FoaClip out;
    out.sample_rate = clip.sample_rate;
    out.samples.resize(4, clip.length());
    out.samples.row(FoaClip::W) = clip.samples.row(FoaClip::W);

    if (auto perm = as_signed_permutation(r.matrix)) {
        // Exact path: every catalog entry is a signed permutation.
        for (int i = 0; i < 3; ++i) {
            const auto [src, sign] = (*perm)[i];
            if (sign > 0)
                out.samples.row(kAxisRow[i]) = clip.samples.row(kAxisRow[src]);
            else
                out.samples.row(kAxisRow[i]) = -clip.samples.row(kAxisRow[src]);
        }
        return out;
    }

    Eigen::Matrix3Xd xyz(3, clip.length());
    for (int i = 0; i < 3; ++i) xyz.row(i) = clip.samples.row(kAxisRow[i]);
    const Eigen::Matrix3Xd rotated = r.matrix * xyz;
    for (int i = 0; i < 3; ++i) out.samples.row(kAxisRow[i]) = rotated.row(i);
    return out;
}

std::string CatalogEntry::name() const {
    std::string s = "yaw" + std::to_string(90 * yaw_quarters);
    if (mirror) s += "+mirror";
    if (flip) s += "+flip";
    return s;
}

const std::vector<CatalogEntry>& rotation_catalog() {
    static const std::vector<CatalogEntry> catalog = [] {
        std::vector<CatalogEntry> out;
        out.reserve(16);
        // cos/sin of multiples of 90 degrees, kept exact.
        static constexpr std::array<double, 4> kCos{1.0, 0.0, -1.0, 0.0};
        static constexpr std::array<double, 4> kSin{0.0, 1.0, 0.0, -1.0};
        for (int flip = 0; flip < 2; ++flip) {
            for (int mirror = 0; mirror < 2; ++mirror) {
                for (int q = 0; q < 4; ++q) {
                    Eigen::Matrix3d yaw;
                    yaw << kCos[q], -kSin[q], 0.0,
                           kSin[q], kCos[q], 0.0,
                           0.0, 0.0, 1.0;
                    Eigen::Matrix3d m = yaw;
                    if (mirror) m = m * Eigen::Vector3d(1.0, -1.0, 1.0).asDiagonal();
                    if (flip) m = Eigen::Vector3d(1.0, 1.0, -1.0).asDiagonal() * m;
                    out.push_back({Rotation{m}, q, mirror == 1, flip == 1});
                }
            }
        }
        return out;
    }();
    return catalog;
}

} // namespace accdoa
