#include "accdoa/error.hpp"
#include "accdoa/geometry.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <set>

using namespace accdoa;

TEST_CASE("sph_to_cart axis cases and the diagonal") {
    CHECK((sph_to_cart(0, 0) - Doa(1, 0, 0)).norm() < 1e-15);
    CHECK((sph_to_cart(90, 0) - Doa(0, 1, 0)).norm() < 1e-15);
    const Doa d = sph_to_cart(45, 35.264);
    for (int i = 0; i < 3; ++i) CHECK(d[i] == doctest::Approx(0.5774).epsilon(1e-3));
    CHECK(d.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sph_to_cart rejects out-of-range angles") {
    CHECK_THROWS_AS(sph_to_cart(181, 0), RangeError);
    CHECK_THROWS_AS(sph_to_cart(0, -90.5), RangeError);
    CHECK_NOTHROW(sph_to_cart(-180, 90));
}

TEST_CASE("cart_to_sph poles, axes and inverse") {
    auto [az, el] = cart_to_sph(Doa(0, 0, 1));
    CHECK(az == 0.0);
    CHECK(el == doctest::Approx(90.0));
    std::tie(az, el) = cart_to_sph(Doa(1, 0, 0));
    CHECK(az == 0.0);
    CHECK(el == 0.0);
    std::tie(az, el) = cart_to_sph(Doa(0.5774, 0.5774, 0.5774).normalized());
    CHECK(az == doctest::Approx(45.0).epsilon(1e-4));
    CHECK(std::abs(el - 35.264) < 0.01);
    CHECK_THROWS_AS(cart_to_sph(Doa::Zero()), DegenerateDirection);
}

TEST_CASE("spherical round trip away from the poles") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const double az = rng.uniform(-180, 180);
        const double el = rng.uniform(-89, 89);
        const auto [az2, el2] = cart_to_sph(sph_to_cart(az, el));
        CHECK((sph_to_cart(az2, el2) - sph_to_cart(az, el)).norm() < 1e-6);
    }
}

TEST_CASE("angular_distance examples, symmetry and isometry") {
    const Doa x(1, 0, 0), y(0, 1, 0);
    CHECK(angular_distance(x, x) == 0.0);
    CHECK(angular_distance(x, y) == doctest::Approx(90.0));
    CHECK(angular_distance(x, -x) == doctest::Approx(180.0));
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const Doa a = oracle::random_direction(rng), b = oracle::random_direction(rng);
        const Eigen::Matrix3d r = oracle::random_rotation_matrix(rng);
        const double d = angular_distance(a, b);
        CHECK(d == doctest::Approx(angular_distance(b, a)).epsilon(1e-14));
        CHECK(std::abs(d - angular_distance(r * a, r * b)) < 1e-9);
        // Against the textbook arccos form.
        CHECK(std::abs(d - std::acos(std::clamp(a.dot(b), -1.0, 1.0)) * 180.0 / kPi) < 1e-6);
        CHECK(d >= 0.0);
        CHECK(d <= 180.0);
    }
}

TEST_CASE("foa_encode axis panning") {
    Eigen::VectorXd s(5);
    s << 0.1, -0.2, 0.3, 0.4, -0.5;
    DoaTrack tx = DoaTrack::Zero(3, 5);
    tx.row(0).setOnes();
    FoaClip c = foa_encode(s, tx);
    CHECK(c.samples.row(FoaClip::W).transpose() == s);
    CHECK(c.samples.row(FoaClip::X).transpose() == s);
    CHECK(c.samples.row(FoaClip::Y).isZero());
    CHECK(c.samples.row(FoaClip::Z).isZero());

    DoaTrack tz = DoaTrack::Zero(3, 5);
    tz.row(2).setOnes();
    c = foa_encode(s, tz);
    CHECK(c.samples.row(FoaClip::Z).transpose() == s);
    CHECK(c.samples.row(FoaClip::X).isZero());
}

TEST_CASE("foa_encode validates its track") {
    Eigen::VectorXd s = Eigen::VectorXd::Ones(4);
    DoaTrack bad = DoaTrack::Zero(3, 4);
    bad.row(0).setConstant(2.0);
    CHECK_THROWS_AS(foa_encode(s, bad), InvariantError);
    CHECK_THROWS(foa_encode(s, DoaTrack::Zero(3, 3)));
}

TEST_CASE("rotation catalog") {
    const auto& cat = rotation_catalog();
    REQUIRE(cat.size() == 16);
    CHECK(cat[0].rotation.matrix == Eigen::Matrix3d::Identity());
    std::set<std::string> names;
    for (const auto& e : cat) {
        CHECK(e.rotation.is_valid());
        names.insert(e.name());
        // Signed permutations: every entry is 0 or +-1.
        for (int i = 0; i < 9; ++i) {
            const double v = e.rotation.matrix.data()[i];
            CHECK((v == 0.0 || v == 1.0 || v == -1.0));
        }
    }
    CHECK(names.size() == 16);
}

TEST_CASE("rotate_foa identity is bit-identical and yaw matches direct encoding") {
    Rng rng(3);
    Eigen::VectorXd s(64);
    for (auto& v : s) v = rng.uniform(-1, 1);
    const DoaTrack az0 = sph_to_cart(0, 0).replicate(1, 64);
    const FoaClip c = foa_encode(s, az0);
    CHECK(rotate_foa(c, Rotation::identity()).samples == c.samples);

    Rotation yaw;
    yaw.matrix << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    const FoaClip direct = foa_encode(s, sph_to_cart(90, 0).replicate(1, 64));
    CHECK((rotate_foa(c, yaw).samples - direct.samples).cwiseAbs().maxCoeff() < 1e-9);

    Rotation zflip;
    zflip.matrix = Eigen::Vector3d(1, 1, -1).asDiagonal();
    const FoaClip up = foa_encode(s, sph_to_cart(30, 40).replicate(1, 64));
    const FoaClip down = foa_encode(s, sph_to_cart(30, -40).replicate(1, 64));
    CHECK((rotate_foa(up, zflip).samples - down.samples).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("rotate_foa with a general rotation matches encoding the rotated track") {
    Rng rng(8);
    Eigen::VectorXd s(32);
    for (auto& v : s) v = rng.uniform(-1, 1);
    for (int i = 0; i < 20; ++i) {
        DoaTrack tr(3, 32);
        for (int n = 0; n < 32; ++n) tr.col(n) = oracle::random_direction(rng);
        Rotation r{oracle::random_rotation_matrix(rng)};
        DoaTrack rotated = r.matrix * tr;
        for (int n = 0; n < 32; ++n) rotated.col(n) = normalized(rotated.col(n));
        const FoaClip a = rotate_foa(foa_encode(s, tr), r);
        const FoaClip b = foa_encode(s, rotated);
        CHECK((a.samples - b.samples).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("Rotation::is_valid rejects non-orthogonal matrices") {
    Rotation r;
    r.matrix(0, 1) = 0.1;
    CHECK_FALSE(r.is_valid());
    Rotation s;
    s.matrix = Eigen::Vector3d(-1, 1, 1).asDiagonal();
    CHECK(s.is_valid());
}
