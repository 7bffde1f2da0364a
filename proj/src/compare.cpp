#include "accdoa/compare.hpp"

#include "accdoa/checkpoint.hpp"
#include "accdoa/error.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

namespace accdoa {

namespace {

constexpr std::uint64_t kTestStream = 0x7E57;

} // namespace

std::vector<SceneInstance> make_test_set(const CompareConfig& cfg) {
    SceneSpec spec = cfg.run.scene;
    spec.duration_s = cfg.compare.test_duration_s;
    std::vector<SceneInstance> scenes;
    scenes.reserve(static_cast<std::size_t>(cfg.compare.test_scenes));
    for (int i = 0; i < cfg.compare.test_scenes; ++i) {
        spec.seed = derive_seed(cfg.run.train.seed, kTestStream, static_cast<std::uint64_t>(i));
        scenes.push_back(render_scene(spec));
    }
    return scenes;
}

EventLabelTrack predict_labels(const SegmentPredictor& predictor, const FoaClip& clip, int label_frames,
                               const InferConfig& cfg) {
    const AccdoaGrid fine = infer_with_tta(predictor, clip, cfg);
    return decode(pool_to_label_frames(fine, label_frames), cfg.threshold);
}

SeldReport evaluate_scenes(const SegmentPredictor& predictor, const std::vector<SceneInstance>& scenes,
                           const InferConfig& cfg) {
    std::vector<std::pair<FrameTable, FrameTable>> files;
    files.reserve(scenes.size());
    for (const auto& s : scenes) {
        const EventLabelTrack pred = predict_labels(predictor, s.clip, s.labels.frames, cfg);
        files.emplace_back(track_to_table(pred), track_to_table(s.labels));
    }
    return evaluate_tables(files);
}

const VariantResult* CompareReport::find(LossVariant v) const {
    for (const auto& r : variants)
        if (r.loss == v) return &r;
    return nullptr;
}

bool CompareReport::trunks_match() const {
    for (const auto& r : variants)
        if (r.trunk_hash != variants.front().trunk_hash) return false;
    return true;
}

std::string CompareReport::table() const {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-10s %10s %8s %16s %7s %7s %6s %7s %7s %7s %6s %7s\n", "variant", "params",
                  "head", "trunk", "LE", "LR", "ER", "F", "LE_tta", "LR_tta", "ER_tta", "F_tta");
    os << buf;
    for (const auto& r : variants) {
        std::snprintf(buf, sizeof buf, "%-10s %10lld %8lld %16s %7.2f %7.2f %6.3f %7.2f %7.2f %7.2f %6.3f %7.2f\n",
                      to_string(r.loss).c_str(), static_cast<long long>(r.parameters),
                      static_cast<long long>(r.head_parameters), hex64(r.trunk_hash).c_str(), r.plain.le_cd,
                      r.plain.lr_cd, r.plain.er_20, r.plain.f_20, r.tta.le_cd, r.tta.lr_cd, r.tta.er_20, r.tta.f_20);
        os << buf;
    }
    os << "trunks " << (trunks_match() ? "identical" : "DIFFER") << ", tta rotations " << tta_rotations << '\n';
    return os.str();
}

std::string CompareReport::csv() const {
    std::ostringstream os;
    os << "variant,mode,parameters,head_parameters,trunk_hash,config_hash,final_loss," << SeldReport::csv_header()
       << '\n';
    char buf[128];
    for (const auto& r : variants) {
        for (int mode = 0; mode < 2; ++mode) {
            std::snprintf(buf, sizeof buf, "%.9g", r.final_loss);
            os << to_string(r.loss) << ',' << (mode == 0 ? "plain" : "tta") << ',' << r.parameters << ','
               << r.head_parameters << ',' << hex64(r.trunk_hash) << ',' << hex64(r.config_hash) << ',' << buf << ','
               << (mode == 0 ? r.plain : r.tta).csv_row() << '\n';
        }
    }
    return os.str();
}

RunConfig variant_config(const CompareConfig& cfg, LossVariant v) {
    RunConfig rc = cfg.run;
    rc.train.loss = v;
    rc.model.head = head_for(v);
    return rc;
}

std::string loss_history_csv(const std::vector<LossRecord>& history) {
    std::ostringstream os;
    os << "iteration,loss,lr\n";
    char buf[96];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g\n", r.iteration, r.loss, r.lr);
        os << buf;
    }
    return os.str();
}

CompareReport run_compare(const CompareConfig& cfg, const std::optional<std::filesystem::path>& out_dir,
                          std::ostream* log) {
    cfg.validate();
    std::vector<LossVariant> losses{LossVariant::accdoa, LossVariant::seldnet};
    if (cfg.compare.include_two_stage) losses.push_back(LossVariant::two_stage);

    InferConfig plain = cfg.run.infer;
    plain.tta_rotations = {0};
    InferConfig tta = cfg.run.infer;
    tta.tta_rotations = cfg.compare.tta_rotations;
    if (tta.tta_rotations.empty())
        for (int i = 0; i < static_cast<int>(rotation_catalog().size()); ++i) tta.tta_rotations.push_back(i);

    if (log) *log << "rendering " << cfg.compare.test_scenes << " held-out scenes\n";
    const std::vector<SceneInstance> test = make_test_set(cfg);

    if (out_dir) std::filesystem::create_directories(*out_dir);

    CompareReport report;
    report.tta_rotations = static_cast<int>(tta.tta_rotations.size());
    for (LossVariant v : losses) {
        const RunConfig rc = variant_config(cfg, v);
        rc.validate();
        const Json cj = to_json(rc);

        VariantResult r;
        r.loss = v;
        r.parameters = count_parameters(rc.model);
        r.head_parameters = head_param_count(rc.model.hidden, rc.model.classes, rc.model.head);
        r.trunk_hash = config_hash(to_json(rc.model));
        r.config_hash = config_hash(cj);

        if (log) *log << "training " << to_string(v) << " (" << r.parameters << " parameters)\n";
        const long every = std::max(1L, rc.train.max_iters / 10);
        TrainResult trained = train(rc.model, rc.train, rc.scene, [&](const LossRecord& rec) {
            if (log && (rec.iteration % every == 0 || rec.iteration + 1 == rc.train.max_iters))
                *log << "  iter " << rec.iteration << " loss " << rec.loss << " lr " << rec.lr << '\n';
        });
        r.final_loss = trained.history.empty() ? 0.0 : trained.history.back().loss;

        const Model<float> model(rc.model);
        const SegmentPredictor predictor = make_predictor(model, trained.params);
        if (log) *log << "evaluating " << to_string(v) << '\n';
        r.plain = evaluate_scenes(predictor, test, plain);
        r.tta = evaluate_scenes(predictor, test, tta);

        if (out_dir) {
            const std::filesystem::path dir = *out_dir / to_string(v);
            std::filesystem::create_directories(dir);
            write_text_file(dir / "config.json", serialize(cj));
            write_checkpoint(dir / "checkpoint.bin", trained.params, r.config_hash);
            write_text_file(dir / "loss_history.csv", loss_history_csv(trained.history));
        }
        r.params = std::move(trained.params);
        r.history = std::move(trained.history);
        report.variants.push_back(std::move(r));
    }

    if (out_dir) {
        write_text_file(*out_dir / "report.txt", report.table());
        write_text_file(*out_dir / "report.csv", report.csv());
    }
    return report;
}

} // namespace accdoa
