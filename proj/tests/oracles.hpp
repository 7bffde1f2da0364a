#pragma once

// Reference implementations the library is checked against. They share no
// code with the library beyond plain data types.

#include "accdoa/codec.hpp"
#include "accdoa/features.hpp"
#include "accdoa/metrics.hpp"
#include "accdoa/model.hpp"
#include "accdoa/pipeline.hpp"
#include "accdoa/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <vector>

namespace oracle {

/// Gradient agreement rule used throughout: |a - n| <= max(rel * max(|a|, |n|), abs).
struct GradTolerance {
    double rel = 1e-4;
    double abs = 1e-6;

    bool ok(double analytic, double numeric) const {
        return std::abs(analytic - numeric) <= std::max(rel * std::max(std::abs(analytic), std::abs(numeric)), abs);
    }
};

/// Central differences of f at x, one coordinate at a time.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          Eigen::VectorXd x, double h = 1e-6) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// Index of the first coordinate that violates the tolerance, or -1.
inline Eigen::Index first_mismatch(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric,
                                   const GradTolerance& tol = {}) {
    for (Eigen::Index i = 0; i < analytic.size(); ++i)
        if (!tol.ok(analytic[i], numeric[i])) return i;
    return -1;
}

/// Exhaustive minimum-cost assignment; fine for up to about 6 x 6.
inline accdoa::Assignment brute_force_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    if (n == 0 || m == 0) return {};
    const bool flip = n > m;
    const int small = flip ? m : n;
    const int large = flip ? n : m;
    auto at = [&](int i, int j) { return flip ? cost(j, i) : cost(i, j); };

    // Try every ordered choice of `small` distinct columns out of `large`.
    std::vector<int> perm(static_cast<std::size_t>(large));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_cols;
    do {
        double total = 0.0;
        for (int i = 0; i < small; ++i) total += at(i, perm[static_cast<std::size_t>(i)]);
        if (total < best) {
            best = total;
            best_cols.assign(perm.begin(), perm.begin() + small);
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    accdoa::Assignment out;
    for (int i = 0; i < small; ++i) {
        const int j = best_cols[static_cast<std::size_t>(i)];
        out.emplace_back(flip ? j : i, flip ? i : j);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline double assignment_cost(const Eigen::MatrixXd& cost, const accdoa::Assignment& a) {
    double s = 0.0;
    for (const auto& [i, j] : a) s += cost(i, j);
    return s;
}

/// Direct O(N^2) DFT of a real sequence, first n/2 + 1 bins.
inline std::vector<std::complex<double>> naive_rdft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = -2.0 * M_PI * static_cast<double>(k * i % n) / static_cast<double>(n);
            acc += x[i] * std::complex<double>(std::cos(a), std::sin(a));
        }
        out[k] = acc;
    }
    return out;
}

/// One-sample Kolmogorov-Smirnov statistic against U[lo, hi).
inline double ks_uniform(std::vector<double> xs, double lo, double hi) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double cdf = std::clamp((xs[i] - lo) / (hi - lo), 0.0, 1.0);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - cdf, cdf - static_cast<double>(i) / n});
    }
    return d;
}

inline accdoa::AccdoaGrid random_grid(int c, int t, accdoa::Rng& rng, double scale = 1.0) {
    accdoa::AccdoaGrid g = accdoa::AccdoaGrid::zeros(c, t);
    for (Eigen::Index i = 0; i < g.values.size(); ++i) g.values.data()[i] = scale * rng.uniform(-1, 1);
    return g;
}

inline Eigen::VectorXd flat(const accdoa::AccdoaGrid& g) {
    return Eigen::Map<const Eigen::VectorXd>(g.values.data(), g.values.size());
}

inline accdoa::AccdoaGrid from_flat(const Eigen::VectorXd& v, int c, int t) {
    accdoa::AccdoaGrid g = accdoa::AccdoaGrid::zeros(c, t);
    Eigen::Map<Eigen::VectorXd>(g.values.data(), g.values.size()) = v;
    return g;
}

/// Smallest useful model: one conv block on 8 bins x 16 frames, two classes.
inline accdoa::ModelConfig tiny(accdoa::HeadVariant head) {
    accdoa::ModelConfig m;
    m.blocks = {{3, 3, 2, 2}};
    m.hidden = 4;
    m.classes = 2;
    m.head = head;
    m.input_bins = 8;
    m.input_frames = 16; // 8 output frames
    m.amplitude_scale = 1.5;
    m.phase_scale = 0.5;
    return m;
}

inline accdoa::FeatureTensor random_input(const accdoa::ModelConfig& m, accdoa::Rng& rng) {
    accdoa::FeatureTensor x = accdoa::FeatureTensor::zeros(m.input_channels, m.input_bins, m.input_frames);
    for (auto& v : x.data) v = rng.uniform(-1, 1);
    return x;
}

inline accdoa::OutputGradient random_output_gradient(const accdoa::ModelConfig& m, accdoa::Rng& rng) {
    const int t = m.output_frames();
    accdoa::AccdoaGrid g = random_grid(m.classes, t, rng);
    if (m.head == accdoa::HeadVariant::accdoa) return g;
    accdoa::TwoBranchGradient tb;
    tb.sed = Eigen::MatrixXd::NullaryExpr(m.classes, t, [&] { return rng.uniform(-1, 1); });
    tb.doa = g;
    return tb;
}

/// Scalar L = <g, output>, so dL/doutput = g.
inline double contract(const accdoa::ModelOutput& out, const accdoa::OutputGradient& g) {
    if (const auto* a = std::get_if<accdoa::AccdoaGrid>(&out))
        return a->values.cwiseProduct(std::get<accdoa::AccdoaGrid>(g).values).sum();
    const auto& tb = std::get<accdoa::TwoBranchOutput>(out);
    const auto& gg = std::get<accdoa::TwoBranchGradient>(g);
    return tb.sed.cwiseProduct(gg.sed).sum() + tb.doa.values.cwiseProduct(gg.doa.values).sum();
}

/// Uniform integer in [0, n).
inline int pick(accdoa::Rng& rng, int n) { return static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n))); }

/// Random unit vector, uniform on the sphere.
inline Eigen::Vector3d random_direction(accdoa::Rng& rng) {
    for (;;) {
        Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
        const double n = v.norm();
        if (n > 1e-6) return v / n;
    }
}

/// Random proper rotation from a random unit quaternion.
inline Eigen::Matrix3d random_rotation_matrix(accdoa::Rng& rng) {
    Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    return q.toRotationMatrix();
}

/// Random valid label track: each cell active with probability p.
inline accdoa::EventLabelTrack random_track(int classes, int frames, double p, accdoa::Rng& rng) {
    accdoa::EventLabelTrack l = accdoa::EventLabelTrack::empty(classes, frames);
    for (int t = 0; t < frames; ++t)
        for (int c = 0; c < classes; ++c)
            if (rng.bernoulli(p)) l.set(c, t, random_direction(rng));
    return l;
}

/// Rotation by `angle_deg` of `d` about an axis perpendicular to it.
inline Eigen::Vector3d displace(const Eigen::Vector3d& d, double angle_deg, accdoa::Rng& rng) {
    Eigen::Vector3d axis = d.cross(random_direction(rng));
    while (axis.norm() < 1e-3) axis = d.cross(random_direction(rng));
    axis.normalize();
    return Eigen::AngleAxisd(angle_deg * M_PI / 180.0, axis) * d;
}

/// Segment predictor that is exactly equivariant under the FOA catalog.
/// Each dipole contributes its amplitude, signed by whether its phase against
/// W lies within 90 degrees, averaged over bins and the frames of each output
/// step. Amplitudes are untouched by sign flips and permute with the
/// channels, so a catalog transform of the input permutes and flips the
/// output without any rounding. Class c scales the vector by 1 / (c + 1).
inline accdoa::SegmentPredictor equivariant_predictor(int classes, int pool) {
    return [classes, pool](const accdoa::FeatureTensor& x) {
        const int steps = x.frames / pool;
        accdoa::AccdoaGrid g = accdoa::AccdoaGrid::zeros(classes, steps);
        for (int t = 0; t < steps; ++t) {
            Eigen::Vector3d v = Eigen::Vector3d::Zero();
            // Output order (x, y, z) reads feature planes X, Y, Z.
            const int amp_plane[3] = {3, 1, 2};
            for (int axis = 0; axis < 3; ++axis) {
                double s = 0.0;
                for (int f = 0; f < x.bins; ++f)
                    for (int j = t * pool; j < (t + 1) * pool; ++j) {
                        const double ipd = x(amp_plane[axis] + 3, f, j);
                        const double a = x(amp_plane[axis], f, j);
                        s += std::abs(ipd) < M_PI / 2 ? a : -a;
                    }
                v[axis] = s / static_cast<double>(x.bins * pool);
            }
            for (int c = 0; c < classes; ++c) g.vec(c, t) = v / static_cast<double>(c + 1);
        }
        return g;
    };
}

} // namespace oracle
