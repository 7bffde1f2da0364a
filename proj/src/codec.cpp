#include "accdoa/codec.hpp"

#include "accdoa/error.hpp"

#include <string>

namespace accdoa {

AccdoaGrid AccdoaGrid::zeros(int classes, int frames) {
    return {classes, frames, Eigen::Matrix3Xd::Zero(3, static_cast<Eigen::Index>(classes) * frames)};
}

EventLabelTrack EventLabelTrack::empty(int classes, int frames) {
    EventLabelTrack l;
    l.classes = classes;
    l.frames = frames;
    l.activity = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(classes, frames, false);
    l.doa = Eigen::Matrix3Xd::Zero(3, static_cast<Eigen::Index>(classes) * frames);
    return l;
}

void EventLabelTrack::set(int c, int t, const Doa& d) {
    activity(c, t) = true;
    direction(c, t) = d;
}

void EventLabelTrack::clear(int c, int t) {
    activity(c, t) = false;
    direction(c, t).setZero();
}

int EventLabelTrack::active_count(int t) const {
    return static_cast<int>(activity.col(t).count());
}

void EventLabelTrack::validate() const {
    if (activity.rows() != classes || activity.cols() != frames ||
        doa.cols() != static_cast<Eigen::Index>(classes) * frames)
        throw DimensionError("label track arrays do not match its C x T shape");
    for (int t = 0; t < frames; ++t) {
        for (int c = 0; c < classes; ++c) {
            const auto d = direction(c, t);
            if (activity(c, t) && !is_unit(d))
                throw InvariantError("active label (class " + std::to_string(c) + ", frame " +
                                     std::to_string(t) + ") has non-unit DOA");
            if (!activity(c, t) && !d.isZero(0.0))
                throw InvariantError("inactive label (class " + std::to_string(c) + ", frame " +
                                     std::to_string(t) + ") has nonzero DOA");
        }
    }
}

bool EventLabelTrack::operator==(const EventLabelTrack& o) const {
    return classes == o.classes && frames == o.frames && (activity == o.activity).all() && doa == o.doa;
}

AccdoaGrid encode(const EventLabelTrack& labels) {
    labels.validate();
    AccdoaGrid grid = AccdoaGrid::zeros(labels.classes, labels.frames);
    for (int t = 0; t < labels.frames; ++t)
        for (int c = 0; c < labels.classes; ++c)
            if (labels.active(c, t)) grid.vec(c, t) = labels.direction(c, t);
    return grid;
}

EventLabelTrack decode(const AccdoaGrid& grid, double threshold) {
    if (!(threshold > 0.0)) throw RangeError("decode threshold must be positive");
    EventLabelTrack labels = EventLabelTrack::empty(grid.classes, grid.frames);
    for (int t = 0; t < grid.frames; ++t) {
        for (int c = 0; c < grid.classes; ++c) {
            const Doa v = grid.vec(c, t);
            const double n = v.norm();
            if (n > threshold) labels.set(c, t, normalized(v));
        }
    }
    return labels;
}

AccdoaGrid two_branch_to_accdoa(const TwoBranchOutput& out) {
    AccdoaGrid grid = AccdoaGrid::zeros(out.doa.classes, out.doa.frames);
    for (int t = 0; t < grid.frames; ++t) {
        for (int c = 0; c < grid.classes; ++c) {
            const Doa v = out.doa.vec(c, t);
            if (v.norm() > 0.0) grid.vec(c, t) = out.sed(c, t) * normalized(v);
        }
    }
    return grid;
}

std::int64_t head_param_count(std::int64_t embedding_dim, std::int64_t classes, HeadVariant variant) {
    if (embedding_dim <= 0 || classes <= 0) throw RangeError("head dimensions must be positive");
    const std::int64_t k = embedding_dim;
    switch (variant) {
    case HeadVariant::accdoa:
        return (k + 1) * 3 * classes;
    case HeadVariant::two_branch:
        return 2 * (k + 1) * k + (k + 1) * classes + (k + 1) * 3 * classes;
    }
    return 0;
}

} // namespace accdoa
