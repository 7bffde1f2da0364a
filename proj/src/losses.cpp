#include "accdoa/codec.hpp"

#include "accdoa/error.hpp"

#include <algorithm>
#include <cmath>

namespace accdoa {

namespace {

void require_shape(const AccdoaGrid& a, const AccdoaGrid& b, const char* what) {
    if (!a.same_shape(b) || a.values.cols() != b.values.cols())
        throw DimensionError(std::string(what) + ": shape mismatch (" + std::to_string(a.classes) + "x" +
                             std::to_string(a.frames) + " vs " + std::to_string(b.classes) + "x" +
                             std::to_string(b.frames) + ")");
}

} // namespace

AccdoaLoss accdoa_loss(const AccdoaGrid& estimate, const AccdoaGrid& reference) {
    require_shape(estimate, reference, "accdoa_loss");
    const double n = 3.0 * estimate.classes * estimate.frames;
    AccdoaLoss out;
    out.gradient = AccdoaGrid::zeros(estimate.classes, estimate.frames);
    if (n == 0.0) return out;
    const Eigen::Matrix3Xd diff = estimate.values - reference.values;
    out.loss = diff.squaredNorm() / n;
    out.gradient.values = (2.0 / n) * diff;
    return out;
}

double bce_loss(const Eigen::MatrixXd& probs, const EventLabelTrack& labels, Eigen::MatrixXd* gradient) {
    if (probs.rows() != labels.classes || probs.cols() != labels.frames)
        throw DimensionError("bce_loss: probability grid does not match labels");
    const double n = static_cast<double>(probs.size());
    if (gradient) gradient->setZero(probs.rows(), probs.cols());
    if (n == 0.0) return 0.0;

    double total = 0.0;
    for (Eigen::Index t = 0; t < probs.cols(); ++t) {
        for (Eigen::Index c = 0; c < probs.rows(); ++c) {
            const double raw = probs(c, t);
            const double p = std::clamp(raw, kBceEpsilon, 1.0 - kBceEpsilon);
            const bool y = labels.activity(c, t);
            total -= y ? std::log(p) : std::log(1.0 - p);
            if (gradient && raw > kBceEpsilon && raw < 1.0 - kBceEpsilon)
                (*gradient)(c, t) = (y ? -1.0 / p : 1.0 / (1.0 - p)) / n;
        }
    }
    return total / n;
}

double masked_mse_loss(const AccdoaGrid& doa, const EventLabelTrack& labels, AccdoaGrid* gradient) {
    if (doa.classes != labels.classes || doa.frames != labels.frames)
        throw DimensionError("masked_mse_loss: DOA grid does not match labels");
    if (gradient) *gradient = AccdoaGrid::zeros(doa.classes, doa.frames);
    const double active = static_cast<double>(labels.activity.count());
    if (active == 0.0) return 0.0;

    const double n = 3.0 * active;
    double total = 0.0;
    for (int t = 0; t < doa.frames; ++t) {
        for (int c = 0; c < doa.classes; ++c) {
            if (!labels.active(c, t)) continue;
            const Eigen::Vector3d diff = doa.vec(c, t) - labels.direction(c, t);
            total += diff.squaredNorm();
            if (gradient) gradient->vec(c, t) = (2.0 / n) * diff;
        }
    }
    return total / n;
}

TwoBranchLoss seldnet_loss(const TwoBranchOutput& out, const EventLabelTrack& labels, double weight) {
    if (!(weight > 0.0)) throw RangeError("seldnet_loss weight must be positive");
    TwoBranchLoss r;
    r.bce = bce_loss(out.sed, labels, &r.sed_gradient);
    r.doa_mse = masked_mse_loss(out.doa, labels, &r.doa_gradient);
    r.doa_gradient.values *= weight;
    r.loss = r.bce + weight * r.doa_mse;
    return r;
}

} // namespace accdoa
