// accdoa: synth | train | infer | eval | compare
//
// Results go to stdout, progress to stderr. Every failure exits nonzero with
// one line on stderr: "accdoa: error: <kind>: <message>".

#include "accdoa/checkpoint.hpp"
#include "accdoa/compare.hpp"
#include "accdoa/config.hpp"
#include "accdoa/error.hpp"
#include "accdoa/events_io.hpp"
#include "accdoa/metrics.hpp"
#include "accdoa/wav.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace accdoa;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("ACCDOA_SEED");
    if (!s || !*s) return std::nullopt;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (*end != '\0') throw ConfigError("ACCDOA_SEED: expected a non-negative integer, got '" + std::string(s) + "'");
    return v;
}

// Explicit flag wins, then the environment, then whatever the config holds.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
    if (flag) return *flag;
    if (auto e = env_seed()) return *e;
    return fallback;
}

class Manifest {
public:
    Manifest(fs::path dir, std::string command, const Json& config, std::uint64_t seed)
        : path_(std::move(dir) / "manifest.json") {
        doc_["command"] = std::move(command);
        doc_["config_hash"] = hex64(config_hash(config));
        doc_["seed"] = seed;
        doc_["toolkit_version"] = kVersion;
        doc_["started_utc"] = utc_now();
        doc_["outputs"] = Json::array();
    }

    void add_output(const fs::path& p) { doc_["outputs"].push_back(p.string()); }

    // Written before the work starts and again once it finishes.
    void write() const { write_text_file(path_, serialize(doc_)); }
    void finish() {
        doc_["finished_utc"] = utc_now();
        write();
    }

private:
    fs::path path_;
    Json doc_;
};

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory: " + dir.string());
}

int label_frames_for(const FoaClip& clip) {
    const double hop = kLabelHopSeconds * clip.sample_rate;
    return static_cast<int>(std::ceil(static_cast<double>(clip.length()) / hop - 1e-9));
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
    int scenes = 1;
    std::optional<std::uint64_t> seed;
    fs::path out = "scenes";
    std::string config;
    std::optional<double> duration;
    std::optional<int> classes;
    std::optional<int> max_overlap;
    std::vector<double> snr;
};

int cmd_synth(const SynthArgs& a) {
    SceneSpec spec;
    if (!a.config.empty()) {
        const Json j = read_json_file(a.config);
        merge_json(j.contains("scene") ? j["scene"] : j, spec);
    }
    if (a.duration) spec.duration_s = *a.duration;
    if (a.classes) spec.class_count = *a.classes;
    if (a.max_overlap) spec.max_overlap = *a.max_overlap;
    if (!a.snr.empty()) spec.snr_db_range = {a.snr[0], a.snr[1]};
    spec.seed = resolve_seed(a.seed, spec.seed);
    spec.validate();
    if (a.scenes < 1) throw ConfigError("--scenes: must be positive");

    ensure_dir(a.out);
    const Json cj = to_json(spec);
    write_text_file(a.out / "config.json", serialize(cj));
    Manifest manifest(a.out, "synth", cj, spec.seed);
    for (int i = 0; i < a.scenes; ++i) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "scene_%03d", i);
        manifest.add_output(a.out / (std::string(stem) + ".wav"));
        manifest.add_output(a.out / (std::string(stem) + ".csv"));
    }
    manifest.write();

    for (int i = 0; i < a.scenes; ++i) {
        SceneSpec s = spec;
        s.seed = derive_seed(spec.seed, 0x5CE4E, static_cast<std::uint64_t>(i));
        const SceneInstance scene = render_scene(s);
        scene.labels.validate();
        char stem[32];
        std::snprintf(stem, sizeof stem, "scene_%03d", i);
        write_foa_wav(a.out / (std::string(stem) + ".wav"), scene.clip);
        write_label_csv(a.out / (std::string(stem) + ".csv"), track_to_rows(scene.labels));
        int peak = 0;
        for (int t = 0; t < scene.labels.frames; ++t) peak = std::max(peak, scene.labels.active_count(t));
        const double snr = scene.events.empty() ? 0.0 : measured_snr_db(scene);
        std::printf("%s events=%zu max_overlap=%d snr_target=%.2f snr_measured=%.2f\n", stem, scene.events.size(),
                    peak, scene.snr_db, snr);
    }
    manifest.finish();
    return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
    std::string config;
    fs::path out = "run";
    std::optional<std::string> loss;
    std::optional<long> iters;
    std::optional<double> loss_weight;
    std::optional<std::uint64_t> seed;
    std::optional<int> batch;
    std::optional<double> lr;
    std::optional<int> scene_pool;
};

RunConfig load_run_config(const std::string& path) {
    RunConfig rc;
    if (!path.empty()) merge_json(read_json_file(path), rc);
    return rc;
}

int cmd_train(const TrainArgs& a) {
    RunConfig rc = load_run_config(a.config);
    if (a.loss) rc.train.loss = loss_variant_from_string(*a.loss);
    if (a.iters) rc.train.max_iters = *a.iters;
    if (a.loss_weight) rc.train.loss_weight = *a.loss_weight;
    if (a.batch) rc.train.batch_size = *a.batch;
    if (a.lr) rc.train.lr = *a.lr;
    if (a.scene_pool) rc.train.scene_pool = *a.scene_pool;
    rc.train.seed = resolve_seed(a.seed, rc.train.seed);
    rc.model.head = head_for(rc.train.loss);
    rc.validate();

    ensure_dir(a.out);
    const Json cj = to_json(rc);
    const std::uint64_t hash = config_hash(cj);
    write_text_file(a.out / "config.json", serialize(cj));
    Manifest manifest(a.out, "train", cj, rc.train.seed);
    manifest.add_output(a.out / "checkpoint.bin");
    manifest.add_output(a.out / "loss_history.csv");
    manifest.write();

    std::cerr << "training " << to_string(rc.train.loss) << " for " << rc.train.max_iters << " iterations ("
              << count_parameters(rc.model) << " parameters)\n";
    const long every = std::max(1L, rc.train.max_iters / 20);
    const TrainResult result = train(rc.model, rc.train, rc.scene, [&](const LossRecord& r) {
        if (r.iteration % every == 0) std::cerr << "  iter " << r.iteration << " loss " << r.loss << '\n';
    });
    write_checkpoint(a.out / "checkpoint.bin", result.params, hash);
    write_text_file(a.out / "loss_history.csv", loss_history_csv(result.history));

    std::printf("config_hash=%s\n", hex64(hash).c_str());
    std::printf("parameters=%lld\n", static_cast<long long>(count_parameters(rc.model)));
    if (!result.history.empty()) std::printf("final_loss=%.9g\n", result.history.back().loss);
    manifest.finish();
    return 0;
}

// ---- infer ------------------------------------------------------------------

struct InferArgs {
    fs::path run;
    fs::path wav;
    std::string out;
    bool tta = false;
    std::optional<double> threshold;
    std::string dump_features;
};

int cmd_infer(const InferArgs& a) {
    const fs::path config_path = a.run / "config.json";
    RunConfig rc = load_run_config(config_path.string());
    if (a.threshold) rc.infer.threshold = *a.threshold;
    if (a.tta) {
        rc.infer.tta_rotations.clear();
        for (int i = 0; i < static_cast<int>(rotation_catalog().size()); ++i) rc.infer.tta_rotations.push_back(i);
    }
    rc.validate();

    const Model<float> model(rc.model);
    const Checkpoint ckpt = read_checkpoint(a.run / "checkpoint.bin", model.layout());
    const Json stored = read_json_file(config_path);
    if (ckpt.config_hash != fnv1a(serialize(stored)))
        std::cerr << "warning: checkpoint config hash does not match " << config_path << '\n';

    const FoaClip clip = read_foa_wav(a.wav);
    if (clip.sample_rate != kSampleRate)
        throw ConfigError("input WAV must be sampled at " + std::to_string(kSampleRate) + " Hz");
    if (!a.dump_features.empty()) write_feature_dump(a.dump_features, extract_features(clip));

    const SegmentPredictor predictor = make_predictor(model, ckpt.params);
    const AccdoaGrid fine = infer_with_tta(predictor, clip, rc.infer);
    const AccdoaGrid grid = pool_to_label_frames(fine, label_frames_for(clip));
    const std::vector<LabelRow> rows = events_to_rows(grid_to_events(grid, rc.infer.threshold));
    if (a.out.empty() || a.out == "-")
        write_label_csv(std::cout, rows);
    else
        write_label_csv(fs::path(a.out), rows);
    return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
    fs::path pred;
    fs::path ref;
    bool csv = false;
    bool kv = false;
    bool frame_level = false;
    double threshold = kSpatialThresholdDeg;
};

int cmd_eval(const EvalArgs& a) {
    EvalOptions opts;
    opts.threshold_deg = a.threshold;
    if (a.frame_level) opts.segment_frames = 1;
    const SeldReport r = evaluate_files(a.pred, a.ref, opts);
    if (a.csv) {
        std::cout << SeldReport::csv_header() << '\n' << r.csv_row() << '\n';
    } else if (a.kv) {
        std::cout << r.key_values();
    } else {
        std::cout << r.table_line() << '\n';
    }
    if (!r.le_defined) std::cerr << "note: no matched pairs, LE reported as the 180 degree sentinel\n";
    return 0;
}

// ---- compare ----------------------------------------------------------------

struct CompareArgs {
    std::string config;
    fs::path out = "compare";
    std::optional<std::uint64_t> seed;
    std::optional<long> iters;
    bool two_stage = false;
};

int cmd_compare(const CompareArgs& a) {
    CompareConfig cc;
    if (!a.config.empty()) merge_json(read_json_file(a.config), cc);
    if (a.iters) cc.run.train.max_iters = *a.iters;
    if (a.two_stage) cc.compare.include_two_stage = true;
    cc.run.train.seed = resolve_seed(a.seed, cc.run.train.seed);
    cc.validate();

    ensure_dir(a.out);
    const Json cj = to_json(cc);
    write_text_file(a.out / "config.json", serialize(cj));
    Manifest manifest(a.out, "compare", cj, cc.run.train.seed);
    manifest.add_output(a.out / "report.txt");
    manifest.add_output(a.out / "report.csv");
    manifest.write();

    const CompareReport report = run_compare(cc, a.out, &std::cerr);
    std::cout << report.table();
    manifest.finish();
    return 0;
}

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const ParseError*>(&e)) return "parse";
    if (dynamic_cast<const IoError*>(&e)) return "io";
    if (dynamic_cast<const NonFiniteLoss*>(&e)) return "non-finite-loss";
    if (dynamic_cast<const LengthError*>(&e)) return "length";
    if (dynamic_cast<const RangeError*>(&e)) return "range";
    if (dynamic_cast<const Error*>(&e)) return "accdoa";
    return "internal";
}

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ACCDOA sound event localization and detection toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "render synthetic FOA scenes (WAV + label CSV)");
    s->add_option("--scenes", synth.scenes, "number of scenes")->capture_default_str();
    s->add_option("--seed", synth.seed, "base seed (default: ACCDOA_SEED or 0)");
    s->add_option("--out", synth.out, "output directory")->capture_default_str();
    s->add_option("--config", synth.config, "JSON file with a scene section");
    s->add_option("--duration", synth.duration, "scene length in seconds");
    s->add_option("--classes", synth.classes, "class count");
    s->add_option("--max-overlap", synth.max_overlap, "maximum simultaneous classes (1 or 2)");
    s->add_option("--snr", synth.snr, "SNR range in dB: LOW HIGH")->expected(2);

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "train one model variant");
    t->add_option("--config", tr.config, "run config (JSON)");
    t->add_option("--out", tr.out, "run directory")->capture_default_str();
    t->add_option("--loss", tr.loss, "accdoa | seldnet | two-stage");
    t->add_option("--iters", tr.iters, "training iterations");
    t->add_option("--loss-weight", tr.loss_weight, "DOA weight of the SELDnet loss");
    t->add_option("--seed", tr.seed, "seed (default: ACCDOA_SEED or config)");
    t->add_option("--batch", tr.batch, "batch size");
    t->add_option("--lr", tr.lr, "base learning rate");
    t->add_option("--scene-pool", tr.scene_pool, "distinct training scenes (0 = fresh every sample)");

    InferArgs inf;
    auto* i = app.add_subcommand("infer", "run a trained model on a WAV file");
    i->add_option("--run", inf.run, "run directory with config.json and checkpoint.bin")->required();
    i->add_option("wav", inf.wav, "4-channel FOA WAV at 24 kHz")->required();
    i->add_option("--out", inf.out, "events CSV (default: stdout)");
    i->add_flag("--tta", inf.tta, "average over all 16 catalog rotations");
    i->add_option("--threshold", inf.threshold, "activity threshold on vector length");
    i->add_option("--dump-features", inf.dump_features, "also write the feature tensor here");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "score a prediction CSV against a reference CSV");
    e->add_option("pred", ev.pred, "predicted events CSV")->required();
    e->add_option("ref", ev.ref, "reference events CSV")->required();
    e->add_flag("--csv", ev.csv, "print the CSV header and row");
    e->add_flag("--kv", ev.kv, "print key=value lines");
    e->add_flag("--frame-level", ev.frame_level, "aggregate ER/F per frame instead of per 1 s segment");
    e->add_option("--threshold", ev.threshold, "spatial threshold in degrees")->capture_default_str();

    CompareArgs cmp;
    auto* c = app.add_subcommand("compare", "train ACCDOA and two-branch variants side by side");
    c->add_option("--config", cmp.config, "compare config (JSON)");
    c->add_option("--out", cmp.out, "output directory")->capture_default_str();
    c->add_option("--seed", cmp.seed, "seed (default: ACCDOA_SEED or config)");
    c->add_option("--iters", cmp.iters, "training iterations per variant");
    c->add_flag("--two-stage", cmp.two_stage, "also train the two-stage variant");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForVersion& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        std::cerr << "accdoa: error: usage: " << one_line(ex.what()) << '\n';
        return 2;
    }

    try {
        if (*s) return cmd_synth(synth);
        if (*t) return cmd_train(tr);
        if (*i) return cmd_infer(inf);
        if (*e) return cmd_eval(ev);
        if (*c) return cmd_compare(cmp);
    } catch (const std::exception& ex) {
        std::cerr << "accdoa: error: " << error_kind(ex) << ": " << one_line(ex.what()) << '\n';
        return 1;
    }
    return 1;
}
