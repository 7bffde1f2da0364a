#pragma once

#include "accdoa/geometry.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace accdoa {

/// 3 x C x T grid of ACCDOA vectors. Vector (c, t) is column t * C + c of
/// `values`, so one frame is a contiguous 3C block.
struct AccdoaGrid {
    int classes = 0;
    int frames = 0;
    Eigen::Matrix3Xd values;

    static AccdoaGrid zeros(int classes, int frames);

    auto vec(int c, int t) { return values.col(static_cast<Eigen::Index>(t) * classes + c); }
    auto vec(int c, int t) const { return values.col(static_cast<Eigen::Index>(t) * classes + c); }

    bool same_shape(const AccdoaGrid& o) const { return classes == o.classes && frames == o.frames; }
};

/// Frame-wise class activity plus unit DOAs (zero where inactive).
struct EventLabelTrack {
    int classes = 0;
    int frames = 0;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> activity; // C x T
    Eigen::Matrix3Xd doa;                                        // column t * C + c

    static EventLabelTrack empty(int classes, int frames);

    bool active(int c, int t) const { return activity(c, t); }
    auto direction(int c, int t) { return doa.col(static_cast<Eigen::Index>(t) * classes + c); }
    auto direction(int c, int t) const { return doa.col(static_cast<Eigen::Index>(t) * classes + c); }

    void set(int c, int t, const Doa& d);
    void clear(int c, int t);
    int active_count(int t) const;

    /// Throws InvariantError when an active DOA is not unit or an inactive
    /// one is nonzero.
    void validate() const;

    bool operator==(const EventLabelTrack& o) const;
};

/// Output of a two-branch (SELDnet-style) head.
struct TwoBranchOutput {
    Eigen::MatrixXd sed; // C x T probabilities in (0, 1)
    AccdoaGrid doa;
};

/// Default activity threshold on ACCDOA vector length.
constexpr double kDefaultThreshold = 0.5;

/// P_ct = a_ct R_ct.
AccdoaGrid encode(const EventLabelTrack& labels);

/// Active iff |P_ct| > threshold; DOA = P_ct / |P_ct| where active.
EventLabelTrack decode(const AccdoaGrid& grid, double threshold = kDefaultThreshold);

/// Same-length ACCDOA view of a two-branch output: sed * normalize(doa).
/// Thresholding it at tau reproduces the usual "sed > tau" decision.
AccdoaGrid two_branch_to_accdoa(const TwoBranchOutput& out);

// ---- losses ---------------------------------------------------------------

struct AccdoaLoss {
    double loss = 0.0;
    AccdoaGrid gradient;
};

/// Per-element MSE over all 3*C*T coordinates; the gradient is w.r.t. the
/// estimate.
AccdoaLoss accdoa_loss(const AccdoaGrid& estimate, const AccdoaGrid& reference);

struct TwoBranchLoss {
    double loss = 0.0;
    double bce = 0.0;
    double doa_mse = 0.0;
    Eigen::MatrixXd sed_gradient; // w.r.t. the probabilities
    AccdoaGrid doa_gradient;
};

constexpr double kBceEpsilon = 1e-7;
constexpr double kSeldnetLossWeight = 10.0;

/// Mean binary cross-entropy with probabilities clamped to [eps, 1 - eps].
/// Clamped cells get zero gradient.
double bce_loss(const Eigen::MatrixXd& probs, const EventLabelTrack& labels, Eigen::MatrixXd* gradient);

/// Per-element MSE over active (c, t) cells only; 0 with zero gradient when
/// nothing is active.
double masked_mse_loss(const AccdoaGrid& doa, const EventLabelTrack& labels, AccdoaGrid* gradient);

/// BCE(sed) + weight * masked MSE(doa).
TwoBranchLoss seldnet_loss(const TwoBranchOutput& out, const EventLabelTrack& labels,
                           double weight = kSeldnetLossWeight);

// ---- head sizes ---------------------------------------------------------

enum class HeadVariant { accdoa, two_branch };

/// Parameters of the output head alone.
///   accdoa:     one affine layer K -> 3C
///   two_branch: K -> K -> C   and   K -> K -> 3C
std::int64_t head_param_count(std::int64_t embedding_dim, std::int64_t classes, HeadVariant variant);

} // namespace accdoa
