// Acceptance suite: one PASS/FAIL line per criterion. Every tolerance and
// budget is a named constant below.

#include "accdoa/codec.hpp"
#include "accdoa/compare.hpp"
#include "accdoa/error.hpp"
#include "accdoa/events_io.hpp"
#include "accdoa/geometry.hpp"
#include "accdoa/metrics.hpp"
#include "accdoa/model.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>

using namespace accdoa;
namespace fs = std::filesystem;

namespace {

// Criterion 1
constexpr int kCodecTracks = 1000;
constexpr int kCodecMaxClasses = 14;
constexpr int kCodecMaxFrames = 64;
constexpr double kCodecBudgetS = 5.0;

// Criterion 2
constexpr double kGradRel = 1e-4;
constexpr double kGradAbs = 1e-6;
constexpr int kGradLossInstances = 40; // per loss
constexpr int kGradModelInstances = 15; // per head
constexpr int kGradMinInstances = 100;
constexpr double kGradBudgetS = 120.0;

// Criterion 3
constexpr int kSweepConfigs = 20;

// Criterion 4
constexpr int kEquivDirections = 100;
constexpr double kEquivTol = 1e-9;
constexpr int kInvarianceSets = 50;
constexpr double kInvarianceTol = 1e-9;

// Criterion 5
constexpr int kOracleFrames = 200;
constexpr int kOracleMaxPerClass = 4;
constexpr int kSelfEvalFiles = 20;
constexpr double kDisplacementDeg = 30.0;
constexpr double kDisplacementTol = 0.01;

// Criterion 6
constexpr double kCompareBudgetS = 600.0;
constexpr double kFRatio = 0.95;
constexpr double kLeRatio = 1.2;
constexpr int kTrainingScenes = 500;

// Criterion 7
constexpr double kTtaOracleTol = 1e-9;
constexpr int kTtaOracleScenes = 4;
constexpr double kTtaMaxFDrop = 1.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o, double secs) {
    std::printf("%s criterion %d: %s -- %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

void run(int id, const std::string& title, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    report(id, title, o, seconds_since(t0));
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---- 1 ---------------------------------------------------------------------

Outcome codec_exactness() {
    const auto t0 = Clock::now();
    Rng rng(101);
    int bad = 0;
    for (int i = 0; i < kCodecTracks; ++i) {
        const int c = 1 + oracle::pick(rng, kCodecMaxClasses);
        const int t = 1 + oracle::pick(rng, kCodecMaxFrames);
        const EventLabelTrack l = oracle::random_track(c, t, rng.uniform(0.0, 1.0), rng);
        if (!(decode(encode(l), kDefaultThreshold) == l)) ++bad;
    }
    const double secs = seconds_since(t0);
    return {bad == 0 && secs < kCodecBudgetS,
            std::to_string(kCodecTracks - bad) + "/" + std::to_string(kCodecTracks) + " exact, " + fmt("%.3f", secs) +
                "s of " + fmt("%.0f", kCodecBudgetS) + "s"};
}

// ---- 2 ---------------------------------------------------------------------

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    const oracle::GradTolerance tol{kGradRel, kGradAbs};
    Rng rng(202);
    int instances = 0, bad = 0;
    auto tally = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& n) {
        ++instances;
        if (oracle::first_mismatch(a, n, tol) != -1) ++bad;
    };

    for (int i = 0; i < kGradLossInstances; ++i) {
        const int c = 1 + oracle::pick(rng, 4), t = 1 + oracle::pick(rng, 6);
        const AccdoaGrid est = oracle::random_grid(c, t, rng);
        const AccdoaGrid ref = encode(oracle::random_track(c, t, 0.5, rng));
        const Eigen::VectorXd num = oracle::central_difference(
            [&](const Eigen::VectorXd& v) { return accdoa_loss(oracle::from_flat(v, c, t), ref).loss; },
            oracle::flat(est));
        tally(oracle::flat(accdoa_loss(est, ref).gradient), num);
    }

    for (int i = 0; i < kGradLossInstances; ++i) {
        const int c = 1 + oracle::pick(rng, 4), t = 1 + oracle::pick(rng, 6);
        const EventLabelTrack l = oracle::random_track(c, t, 0.5, rng);
        TwoBranchOutput out;
        // Stay clear of the BCE clamp, where the loss is flat by design.
        out.sed = Eigen::MatrixXd::NullaryExpr(c, t, [&] { return rng.uniform(0.05, 0.95); });
        out.doa = oracle::random_grid(c, t, rng);
        const TwoBranchLoss g = seldnet_loss(out, l);
        Eigen::VectorXd x(out.sed.size() + out.doa.values.size());
        x << Eigen::Map<const Eigen::VectorXd>(out.sed.data(), out.sed.size()), oracle::flat(out.doa);
        Eigen::VectorXd a(x.size());
        a << Eigen::Map<const Eigen::VectorXd>(g.sed_gradient.data(), g.sed_gradient.size()),
            oracle::flat(g.doa_gradient);
        const Eigen::VectorXd num = oracle::central_difference(
            [&](const Eigen::VectorXd& v) {
                TwoBranchOutput o;
                o.sed = Eigen::Map<const Eigen::MatrixXd>(v.data(), c, t);
                o.doa = oracle::from_flat(v.tail(v.size() - c * t), c, t);
                return seldnet_loss(o, l).loss;
            },
            x);
        tally(a, num);
    }

    for (HeadVariant head : {HeadVariant::accdoa, HeadVariant::two_branch}) {
        const ModelConfig m = oracle::tiny(head);
        const Model<double> net(m);
        for (int i = 0; i < kGradModelInstances; ++i) {
            const Parameters<double> p = net.init(1000 + static_cast<std::uint64_t>(i));
            const FeatureTensor x = oracle::random_input(m, rng);
            const OutputGradient g = oracle::random_output_gradient(m, rng);
            const Eigen::VectorXd a = net.backward(p, net.forward(p, x).cache, g);
            const Eigen::VectorXd num = oracle::central_difference(
                [&](const Eigen::VectorXd& v) {
                    Parameters<double> q(net.layout());
                    q.mutable_values() = v;
                    return oracle::contract(net.forward(q, x).output, g);
                },
                p.values());
            tally(a, num);
        }
    }

    const double secs = seconds_since(t0);
    return {bad == 0 && instances >= kGradMinInstances && secs < kGradBudgetS,
            std::to_string(instances - bad) + "/" + std::to_string(instances) + " instances within " +
                fmt("%.0e", kGradRel) + " rel / " + fmt("%.0e", kGradAbs) + " abs, " + fmt("%.1f", secs) + "s"};
}

// ---- 3 ---------------------------------------------------------------------

Outcome parameter_ordering() {
    Rng rng(303);
    int ok = 0;
    for (int i = 0; i < kSweepConfigs; ++i) {
        ModelConfig a;
        a.hidden = 8 + 8 * oracle::pick(rng, 16);
        a.classes = 1 + oracle::pick(rng, 14);
        a.blocks.clear();
        const int nblocks = 1 + oracle::pick(rng, 3);
        for (int b = 0; b < nblocks; ++b) a.blocks.push_back({4 << oracle::pick(rng, 4), 3, 4, 2});
        ModelConfig b = a;
        b.head = HeadVariant::two_branch;
        const ParameterLayout la(a), lb(b);
        const std::int64_t closed =
            head_param_count(a.hidden, a.classes, HeadVariant::two_branch) -
            head_param_count(a.hidden, a.classes, HeadVariant::accdoa);
        const bool fine = count_parameters(a) < count_parameters(b) &&
                          count_parameters(b) - count_parameters(a) == closed &&
                          la.head_offset() == lb.head_offset();
        ok += fine ? 1 : 0;
    }
    return {ok == kSweepConfigs, std::to_string(ok) + "/" + std::to_string(kSweepConfigs) +
                                     " configs with accdoa < two-branch and exact head delta"};
}

// ---- 4 ---------------------------------------------------------------------

Outcome equivariance() {
    Rng rng(404);
    Eigen::VectorXd s(64);
    for (auto& v : s) v = rng.uniform(-1, 1);
    double worst = 0.0;
    for (const auto& e : rotation_catalog()) {
        for (int i = 0; i < kEquivDirections; ++i) {
            const Doa d = oracle::random_direction(rng);
            const DoaTrack track = d.replicate(1, s.size());
            const DoaTrack rotated = e.transform_label(d).replicate(1, s.size());
            const FoaClip a = rotate_foa(foa_encode(s, track), e.rotation);
            const FoaClip b = foa_encode(s, rotated);
            worst = std::max(worst, (a.samples - b.samples).cwiseAbs().maxCoeff());
        }
    }

    double worst_metric = 0.0;
    for (int set = 0; set < kInvarianceSets; ++set) {
        FrameTable p, r;
        for (int t = 0; t < 30; ++t) {
            std::vector<FrameEntry> fp, fr;
            for (int c = 0; c < 3; ++c) {
                const int nr = oracle::pick(rng, 3), np = oracle::pick(rng, 3);
                for (int k = 0; k < nr; ++k) fr.push_back({c, oracle::random_direction(rng)});
                for (int k = 0; k < np; ++k)
                    fp.push_back({c, nr > 0 && rng.bernoulli(0.7)
                                         ? oracle::displace(fr[fr.size() - 1].doa, rng.uniform(0, 40), rng)
                                         : oracle::random_direction(rng)});
            }
            p.push_back(fp);
            r.push_back(fr);
        }
        const Eigen::Matrix3d rot = oracle::random_rotation_matrix(rng);
        FrameTable pr = p, rr = r;
        for (auto* tab : {&pr, &rr})
            for (auto& f : *tab)
                for (auto& en : f) en.doa = rot * en.doa;
        const SeldReport a = evaluate_tables({{p, r}}), b = evaluate_tables({{pr, rr}});
        worst_metric = std::max({worst_metric, std::abs(a.le_cd - b.le_cd), std::abs(a.lr_cd - b.lr_cd),
                                 std::abs(a.er_20 - b.er_20), std::abs(a.f_20 - b.f_20)});
    }
    return {worst <= kEquivTol && worst_metric <= kInvarianceTol,
            "16 x " + std::to_string(kEquivDirections) + " FOA max error " + fmt("%.1e", worst) + ", " +
                std::to_string(kInvarianceSets) + " metric sets max change " + fmt("%.1e", worst_metric)};
}

// ---- 5 ---------------------------------------------------------------------

bool identical(const SeldReport& a, const SeldReport& b) {
    return a.le_cd == b.le_cd && a.lr_cd == b.lr_cd && a.er_20 == b.er_20 && a.f_20 == b.f_20;
}

Outcome metrics_oracle(const fs::path& work) {
    Rng rng(505);
    EvalOptions brute;
    brute.matcher = oracle::brute_force_assignment;
    int same = 0;
    std::vector<std::pair<FrameTable, FrameTable>> all;
    for (int i = 0; i < kOracleFrames; ++i) {
        std::vector<FrameEntry> fp, fr;
        for (int c = 0; c < 3; ++c) {
            const int nr = oracle::pick(rng, kOracleMaxPerClass + 1), np = oracle::pick(rng, kOracleMaxPerClass + 1);
            for (int k = 0; k < nr; ++k) fr.push_back({c, oracle::random_direction(rng)});
            for (int k = 0; k < np; ++k)
                fp.push_back({c, nr > 0 && rng.bernoulli(0.6)
                                     ? oracle::displace(fr[fr.size() - 1 - static_cast<std::size_t>(oracle::pick(rng, nr))].doa,
                                                        rng.uniform(0, 40), rng)
                                     : oracle::random_direction(rng)});
        }
        const std::pair<FrameTable, FrameTable> file{{fp}, {fr}};
        if (identical(evaluate_tables({file}), evaluate_tables({file}, brute))) ++same;
        all.push_back(file);
    }
    const bool aggregate_same = identical(evaluate_tables(all), evaluate_tables(all, brute));

    int exact = 0;
    fs::create_directories(work);
    for (int i = 0; i < kSelfEvalFiles; ++i) {
        const fs::path f = work / ("self_" + std::to_string(i) + ".csv");
        write_label_csv(f, track_to_rows(oracle::random_track(1 + oracle::pick(rng, 14), 100, 0.3, rng)));
        const SeldReport r = evaluate_files(f, f);
        if (r.le_cd == 0.0 && r.lr_cd == 100.0 && r.er_20 == 0.0 && r.f_20 == 100.0) ++exact;
    }

    std::vector<LabelRow> refs, preds;
    for (int t = 0; t < 100; ++t) {
        for (int c = 0; c < 2; ++c) {
            const Doa d = oracle::random_direction(rng);
            const Doa q = oracle::displace(d, kDisplacementDeg, rng);
            const auto [az, el] = cart_to_sph(d);
            const auto [qa, qe] = cart_to_sph(q);
            refs.push_back({t, c, az, el});
            preds.push_back({t, c, qa, qe});
        }
    }
    const SeldReport shifted = evaluate(preds, refs);
    const bool displaced = shifted.f_20 == 0.0 && std::abs(shifted.le_cd - kDisplacementDeg) <= kDisplacementTol;

    return {same == kOracleFrames && aggregate_same && exact == kSelfEvalFiles && displaced,
            std::to_string(same) + "/" + std::to_string(kOracleFrames) + " frames identical to exhaustive matching, " +
                std::to_string(exact) + "/" + std::to_string(kSelfEvalFiles) + " self-evals exact, 30 deg case F " +
                fmt("%.2f", shifted.f_20) + " LE " + fmt("%.4f", shifted.le_cd)};
}

// ---- 6 / 7 / 8 -------------------------------------------------------------

struct CompareRun {
    CompareReport report;
    double seconds = 0.0;
};

CompareRun run_desk_compare(const CompareConfig& cfg, const fs::path& out) {
    fs::remove_all(out);
    const auto t0 = Clock::now();
    CompareRun r{run_compare(cfg, out, &std::cerr), 0.0};
    r.seconds = seconds_since(t0);
    return r;
}

Outcome desk_learning(const CompareConfig& cfg, const CompareRun& run) {
    const VariantResult* acc = run.report.find(LossVariant::accdoa);
    const VariantResult* seld = run.report.find(LossVariant::seldnet);
    if (!acc || !seld) return {false, "missing variant"};
    const bool f_ok = acc->plain.f_20 >= kFRatio * seld->plain.f_20;
    const bool le_ok = acc->plain.le_cd <= kLeRatio * seld->plain.le_cd;
    // A model that never fires satisfies both ratios vacuously; require real detections.
    const bool learned = acc->plain.f_20 > 0.0 && acc->plain.le_defined;
    const bool scale_ok = cfg.run.train.scene_pool == kTrainingScenes && cfg.run.scene.class_count == 3;
    const bool time_ok = run.seconds <= kCompareBudgetS;
    return {f_ok && le_ok && learned && scale_ok && time_ok && run.report.trunks_match(),
            "accdoa F " + fmt("%.2f", acc->plain.f_20) + " LE " + fmt("%.2f", acc->plain.le_cd) + " vs seldnet F " +
                fmt("%.2f", seld->plain.f_20) + " LE " + fmt("%.2f", seld->plain.le_cd) + "; compare took " +
                fmt("%.0f", run.seconds) + "s of " + fmt("%.0f", kCompareBudgetS) + "s" +
                (run.report.trunks_match() ? "" : "; trunks differ")};
}

Outcome tta_consistency(const CompareConfig& cfg, const CompareRun& run) {
    InferConfig plain = cfg.run.infer;
    plain.tta_rotations = {0};
    InferConfig all = plain;
    all.tta_rotations.clear();
    for (int i = 0; i < static_cast<int>(rotation_catalog().size()); ++i) all.tta_rotations.push_back(i);

    double worst = 0.0;
    const SegmentPredictor oracle_model =
        oracle::equivariant_predictor(cfg.run.model.classes, cfg.run.model.temporal_pool());
    for (int i = 0; i < kTtaOracleScenes; ++i) {
        SceneSpec spec = cfg.run.scene;
        spec.duration_s = 3.0;
        spec.seed = 7000 + static_cast<std::uint64_t>(i);
        const SceneInstance s = render_scene(spec);
        const AccdoaGrid a = infer_clip(oracle_model, s.clip, plain);
        const AccdoaGrid b = infer_with_tta(oracle_model, s.clip, all);
        worst = std::max(worst, (a.values - b.values).cwiseAbs().maxCoeff());
    }

    const VariantResult* acc = run.report.find(LossVariant::accdoa);
    if (!acc) return {false, "missing accdoa variant"};
    const double drop = acc->plain.f_20 - acc->tta.f_20;
    return {worst <= kTtaOracleTol && drop <= kTtaMaxFDrop,
            "oracle max deviation " + fmt("%.1e", worst) + "; trained accdoa F " + fmt("%.2f", acc->plain.f_20) +
                " plain vs " + fmt("%.2f", acc->tta.f_20) + " with " + std::to_string(run.report.tta_rotations) +
                " rotations"};
}

std::optional<std::string> slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) return std::nullopt;
    return std::string(std::istreambuf_iterator<char>(is), {});
}

Outcome determinism(const fs::path& a, const fs::path& b) {
    std::vector<fs::path> files{"report.txt", "report.csv"};
    for (const char* v : {"accdoa", "seldnet"})
        for (const char* f : {"checkpoint.bin", "loss_history.csv", "config.json"}) files.push_back(fs::path(v) / f);
    int same = 0;
    std::string first_diff;
    for (const auto& f : files) {
        const auto x = slurp(a / f), y = slurp(b / f);
        if (x && y && *x == *y)
            ++same;
        else if (first_diff.empty())
            first_diff = f.string();
    }
    return {same == static_cast<int>(files.size()),
            std::to_string(same) + "/" + std::to_string(files.size()) + " artifacts byte-identical" +
                (first_diff.empty() ? "" : ", first difference in " + first_diff)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance suite"};
    std::string config_path, work = (fs::temp_directory_path() / "accdoa_acceptance").string();
    bool skip_compare = false;
    app.add_option("--config", config_path, "desk-scale compare config")->required()->check(CLI::ExistingFile);
    app.add_option("--work", work, "scratch directory");
    app.add_flag("--skip-compare", skip_compare, "skip criteria 6-8 (they train two models twice)");
    CLI11_PARSE(app, argc, argv);
    const fs::path dir = work;

    run(1, "codec exactness", codec_exactness);
    run(2, "gradient suite", gradient_suite);
    run(3, "parameter-count ordering", parameter_ordering);
    run(4, "FOA equivariance and metric rotation invariance", equivariance);
    run(5, "metrics oracle", [&] { return metrics_oracle(dir / "labels"); });

    if (skip_compare) {
        for (int id : {6, 7, 8}) std::printf("SKIP criterion %d\n", id);
        return failures == 0 ? 0 : 1;
    }

    CompareConfig cfg;
    std::optional<CompareRun> first, second;
    try {
        merge_json(read_json_file(config_path), cfg);
        cfg.validate();
        const auto t0 = Clock::now();
        first = run_desk_compare(cfg, dir / "run1");
        std::cerr << first->report.table();
        report(6, "desk-scale learning check", desk_learning(cfg, *first), seconds_since(t0));
    } catch (const std::exception& e) {
        report(6, "desk-scale learning check", {false, std::string("exception: ") + e.what()}, 0.0);
    }

    if (first)
        run(7, "TTA consistency", [&] { return tta_consistency(cfg, *first); });
    else
        report(7, "TTA consistency", {false, "compare did not run"}, 0.0);

    run(8, "determinism", [&] {
        if (!first) return Outcome{false, "compare did not run"};
        second = run_desk_compare(cfg, dir / "run2");
        return determinism(dir / "run1", dir / "run2");
    });

    std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "SOME FAILED", failures);
    return failures == 0 ? 0 : 1;
}
