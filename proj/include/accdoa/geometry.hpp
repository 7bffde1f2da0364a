#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace accdoa {

constexpr int kSampleRate = 24000;
constexpr double kPi = 3.14159265358979323846;

/// Unit direction-of-arrival vector (x, y, z). Active DOAs have unit norm.
using Doa = Eigen::Vector3d;

/// Per-sample direction track, one column per sample.
using DoaTrack = Eigen::Matrix3Xd;

/// Orthogonal 3x3 transform. Proper rotations and reflections are both
/// accepted; reflections only appear in augmentation.
struct Rotation {
    Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();

    static Rotation identity() { return {}; }
    Rotation inverse() const { return {matrix.transpose()}; }
    Doa apply(const Doa& d) const { return matrix * d; }
    bool is_valid(double tol = 1e-9) const;
};

/// First-order ambisonic clip, ACN channel order (W, Y, Z, X), SN3D gains.
struct FoaClip {
    enum Channel : int { W = 0, Y = 1, Z = 2, X = 3 };

    Eigen::Matrix<double, 4, Eigen::Dynamic> samples;
    int sample_rate = kSampleRate;

    Eigen::Index length() const { return samples.cols(); }
    static FoaClip zeros(Eigen::Index n, int sample_rate = kSampleRate);
};

Doa sph_to_cart(double azimuth_deg, double elevation_deg);

/// Inverse of sph_to_cart. Azimuth is 0 at the poles.
std::pair<double, double> cart_to_sph(const Doa& d);

/// Great-circle angle between two unit vectors, in degrees.
/// Computed as atan2(|a x b|, a . b), which is exact for identical and
/// antipodal inputs.
double angular_distance(const Doa& a, const Doa& b);

/// v / |v|, except that vectors already unit to within a few ulps are
/// returned unchanged so that normalisation is idempotent.
Doa normalized(const Doa& v);

bool is_unit(const Doa& d, double tol = 1e-9);

/// Pans a mono signal along a per-sample direction track.
///
/// SN3D/ACN first-order gains for a plane wave from unit direction (x, y, z):
///
///   channel  ACN  gain
///   W        0    1
///   Y        1    y
///   Z        2    z
///   X        3    x
FoaClip foa_encode(const Eigen::Ref<const Eigen::VectorXd>& mono, const DoaTrack& track);

/// Rotates the first-order sound field: W is untouched and the dipole triple
/// (X, Y, Z) is multiplied by the rotation matrix sample by sample.
FoaClip rotate_foa(const FoaClip& clip, const Rotation& r);

/// One of the label-exact FOA transforms used for augmentation and TTA:
/// yaw by a multiple of 90 degrees, optional azimuth mirror (y -> -y), and
/// optional elevation flip (z -> -z). The label transform is d -> R d.
struct CatalogEntry {
    Rotation rotation;
    int yaw_quarters = 0;
    bool mirror = false;
    bool flip = false;

    Doa transform_label(const Doa& d) const { return rotation.apply(d); }
    std::string name() const;
};

/// All 16 entries; index 0 is the identity.
const std::vector<CatalogEntry>& rotation_catalog();

} // namespace accdoa
