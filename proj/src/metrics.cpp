#include "accdoa/metrics.hpp"

#include "accdoa/error.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

namespace accdoa {

Assignment hungarian(const Eigen::MatrixXd& cost) {
    if (cost.rows() == 0 || cost.cols() == 0) return {};
    if (cost.rows() > cost.cols()) {
        Assignment t = hungarian(cost.transpose());
        for (auto& [r, c] : t) std::swap(r, c);
        std::sort(t.begin(), t.end());
        return t;
    }
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    constexpr double inf = std::numeric_limits<double>::infinity();

    // 1-based potentials; column 0 is a virtual start column.
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> owner(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        owner[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = owner[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (owner[j0] != 0);
        do {
            const int j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    Assignment out;
    for (int j = 1; j <= m; ++j)
        if (owner[j] != 0) out.emplace_back(owner[j] - 1, j - 1);
    std::sort(out.begin(), out.end());
    return out;
}

FrameTable rows_to_table(const std::vector<LabelRow>& rows, int frames) {
    FrameTable table(static_cast<std::size_t>(frames));
    for (const auto& r : rows) {
        if (r.frame >= frames) throw RangeError("label row frame beyond table length");
        table[static_cast<std::size_t>(r.frame)].push_back({r.class_idx, sph_to_cart(r.azimuth_deg, r.elevation_deg)});
    }
    return table;
}

FrameTable track_to_table(const EventLabelTrack& labels) {
    FrameTable table(static_cast<std::size_t>(labels.frames));
    for (int t = 0; t < labels.frames; ++t)
        for (int c = 0; c < labels.classes; ++c)
            if (labels.active(c, t)) table[static_cast<std::size_t>(t)].push_back({c, labels.direction(c, t)});
    return table;
}

FrameMatch match_frame(const std::vector<FrameEntry>& preds, const std::vector<FrameEntry>& refs,
                       const Matcher& matcher) {
    FrameMatch out;
    out.references = static_cast<int>(refs.size());
    out.predictions = static_cast<int>(preds.size());

    std::map<int, std::pair<std::vector<Doa>, std::vector<Doa>>> by_class;
    for (const auto& p : preds) by_class[p.class_idx].first.push_back(p.doa);
    for (const auto& r : refs) by_class[r.class_idx].second.push_back(r.doa);

    for (const auto& [cls, sets] : by_class) {
        const auto& [p, r] = sets;
        if (p.empty() || r.empty()) {
            out.unmatched_predictions += static_cast<int>(p.size());
            out.unmatched_references += static_cast<int>(r.size());
            continue;
        }
        Eigen::MatrixXd cost(static_cast<Eigen::Index>(p.size()), static_cast<Eigen::Index>(r.size()));
        for (std::size_t i = 0; i < p.size(); ++i)
            for (std::size_t j = 0; j < r.size(); ++j)
                cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = angular_distance(p[i], r[j]);
        const Assignment a = matcher(cost);
        for (const auto& [i, j] : a) out.pairs.push_back({cls, cost(i, j)});
        out.unmatched_predictions += static_cast<int>(p.size() - a.size());
        out.unmatched_references += static_cast<int>(r.size() - a.size());
    }
    return out;
}

LocalizationScores compute_le_lr(const std::vector<FrameMatch>& matches) {
    double dist = 0.0;
    long pairs = 0, refs = 0, preds = 0;
    for (const auto& m : matches) {
        for (const auto& p : m.pairs) dist += p.distance_deg;
        pairs += static_cast<long>(m.pairs.size());
        refs += m.references;
        preds += m.predictions;
    }
    LocalizationScores s;
    if (refs == 0 && preds == 0) {
        // Nothing to localise on either side: vacuously perfect.
        s.le_cd = 0.0;
        s.lr_cd = 100.0;
        return s;
    }
    s.le_defined = pairs > 0;
    s.le_cd = pairs > 0 ? dist / static_cast<double>(pairs) : kUndefinedLocalizationError;
    s.lr_cd = refs > 0 ? 100.0 * static_cast<double>(pairs) / static_cast<double>(refs) : 0.0;
    return s;
}

DetectionScores compute_er_f(const std::vector<FrameMatch>& matches, double threshold_deg, int segment_frames,
                             const std::vector<std::size_t>& file_boundaries) {
    if (segment_frames < 1) throw RangeError("segment length must be at least one frame");
    DetectionScores out;
    DetectionCounts& total = out.counts;

    long seg_fp = 0, seg_fn = 0;
    auto close_segment = [&] {
        const long s = std::min(seg_fp, seg_fn);
        total.substitutions += s;
        total.deletions += seg_fn - s;
        total.insertions += seg_fp - s;
        seg_fp = seg_fn = 0;
    };

    std::vector<bool> starts_file(matches.size(), false);
    for (std::size_t b : file_boundaries)
        if (b < matches.size()) starts_file[b] = true;

    std::size_t file_start = 0;
    for (std::size_t i = 0; i < matches.size(); ++i) {
        if (i > 0 && starts_file[i]) {
            close_segment();
            file_start = i;
        } else if (i > file_start && (i - file_start) % static_cast<std::size_t>(segment_frames) == 0) {
            close_segment();
        }

        const FrameMatch& m = matches[i];
        long tp = 0, far = 0;
        for (const auto& p : m.pairs) (p.distance_deg < threshold_deg ? tp : far) += 1;
        const long fp = m.unmatched_predictions + far;
        const long fn = m.unmatched_references + far;
        total.tp += tp;
        total.fp += fp;
        total.fn += fn;
        total.references += m.references;
        seg_fp += fp;
        seg_fn += fn;
    }
    close_segment();

    const long errors = total.substitutions + total.deletions + total.insertions;
    out.er = total.references > 0 ? static_cast<double>(errors) / static_cast<double>(total.references)
                                  : static_cast<double>(total.insertions);
    const long denom = 2 * total.tp + total.fp + total.fn;
    out.f = denom > 0 ? 100.0 * 2.0 * static_cast<double>(total.tp) / static_cast<double>(denom) : 100.0;
    return out;
}

std::string SeldReport::table_line() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.1f %.1f %.2f %.1f", le_cd, lr_cd, er_20, f_20);
    return buf;
}

std::string SeldReport::key_values() const {
    std::ostringstream os;
    char buf[64];
    auto num = [&](double v, const char* fmt) {
        std::snprintf(buf, sizeof buf, fmt, v);
        return std::string(buf);
    };
    os << "le_cd=" << num(le_cd, "%.4f") << '\n'
       << "lr_cd=" << num(lr_cd, "%.4f") << '\n'
       << "er_20=" << num(er_20, "%.4f") << '\n'
       << "f_20=" << num(f_20, "%.4f") << '\n'
       << "tp=" << counts.tp << '\n'
       << "fp=" << counts.fp << '\n'
       << "fn=" << counts.fn << '\n'
       << "substitutions=" << counts.substitutions << '\n'
       << "deletions=" << counts.deletions << '\n'
       << "insertions=" << counts.insertions << '\n'
       << "references=" << counts.references << '\n'
       << "predictions=" << predictions << '\n'
       << "matched_pairs=" << matched_pairs << '\n'
       << "le_defined=" << (le_defined ? 1 : 0) << '\n'
       << "degenerate=" << (degenerate ? 1 : 0) << '\n';
    return os.str();
}

std::string SeldReport::csv_header() {
    return "le_cd,lr_cd,er_20,f_20,tp,fp,fn,substitutions,deletions,insertions,references,predictions,"
           "matched_pairs,le_defined,degenerate";
}

std::string SeldReport::csv_row() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f,%ld,%ld,%ld,%ld,%ld,%ld,%ld,%ld,%ld,%d,%d", le_cd, lr_cd,
                  er_20, f_20, counts.tp, counts.fp, counts.fn, counts.substitutions, counts.deletions,
                  counts.insertions, counts.references, predictions, matched_pairs, le_defined ? 1 : 0,
                  degenerate ? 1 : 0);
    return buf;
}

SeldReport evaluate_tables(const std::vector<std::pair<FrameTable, FrameTable>>& files, const EvalOptions& opts) {
    std::vector<FrameMatch> matches;
    std::vector<std::size_t> boundaries;
    for (const auto& [pred, ref] : files) {
        boundaries.push_back(matches.size());
        const std::size_t frames = std::max(pred.size(), ref.size());
        static const std::vector<FrameEntry> none;
        for (std::size_t t = 0; t < frames; ++t)
            matches.push_back(match_frame(t < pred.size() ? pred[t] : none, t < ref.size() ? ref[t] : none,
                                          opts.matcher));
    }
    const LocalizationScores loc = compute_le_lr(matches);
    const DetectionScores det = compute_er_f(matches, opts.threshold_deg, opts.segment_frames, boundaries);

    SeldReport r;
    r.le_cd = loc.le_cd;
    r.lr_cd = loc.lr_cd;
    r.le_defined = loc.le_defined;
    r.er_20 = det.er;
    r.f_20 = det.f;
    r.counts = det.counts;
    r.degenerate = det.counts.references == 0;
    for (const auto& m : matches) {
        r.matched_pairs += static_cast<long>(m.pairs.size());
        r.predictions += m.predictions;
    }
    return r;
}

SeldReport evaluate(const std::vector<LabelRow>& preds, const std::vector<LabelRow>& refs, const EvalOptions& opts) {
    int frames = 0;
    for (const auto& r : preds) frames = std::max(frames, r.frame + 1);
    for (const auto& r : refs) frames = std::max(frames, r.frame + 1);
    std::vector<std::pair<FrameTable, FrameTable>> files;
    files.emplace_back(rows_to_table(preds, frames), rows_to_table(refs, frames));
    return evaluate_tables(files, opts);
}

SeldReport evaluate_files(const std::filesystem::path& pred_csv, const std::filesystem::path& ref_csv,
                          const EvalOptions& opts) {
    return evaluate(read_label_csv(pred_csv), read_label_csv(ref_csv), opts);
}

} // namespace accdoa
