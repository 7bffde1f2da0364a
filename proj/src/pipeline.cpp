#include "accdoa/pipeline.hpp"

#include "accdoa/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace accdoa {

std::string to_string(LossVariant v) {
    switch (v) {
    case LossVariant::accdoa: return "accdoa";
    case LossVariant::seldnet: return "seldnet";
    case LossVariant::two_stage: return "two-stage";
    }
    return "?";
}

LossVariant loss_variant_from_string(const std::string& s) {
    if (s == "accdoa") return LossVariant::accdoa;
    if (s == "seldnet") return LossVariant::seldnet;
    if (s == "two-stage" || s == "two_stage") return LossVariant::two_stage;
    throw ConfigError("unknown loss variant '" + s + "' (expected accdoa, seldnet or two-stage)");
}

HeadVariant head_for(LossVariant v) {
    return v == LossVariant::accdoa ? HeadVariant::accdoa : HeadVariant::two_branch;
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("train." + field + ": " + why);
    };
    if (batch_size < 1) fail("batch_size", "must be positive");
    if (!(lr >= 0.0)) fail("lr", "must be non-negative");
    if (!(lr_decay > 0.0 && lr_decay < 1.0)) fail("lr_decay", "must be in (0, 1)");
    if (decay_interval < 1) fail("decay_interval", "must be positive");
    if (!(weight_decay >= 0.0)) fail("weight_decay", "must be non-negative");
    if (max_iters < 0) fail("max_iters", "must be non-negative");
    if (!(loss_weight > 0.0)) fail("loss_weight", "must be positive");
    if (scene_pool < 0) fail("scene_pool", "must be non-negative");
    if (!(two_stage_split > 0.0 && two_stage_split < 1.0)) fail("two_stage_split", "must be in (0, 1)");
    augment.validate();
}

void InferConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError("infer." + field + ": " + why);
    };
    if (segment_frames < 1) fail("segment_frames", "must be positive");
    if (shift_frames < 1 || shift_frames > segment_frames) fail("shift_frames", "must be in [1, segment_frames]");
    if (!(threshold > 0.0)) fail("threshold", "must be positive");
    if (tta_rotations.empty()) fail("tta_rotations", "must not be empty");
    for (int r : tta_rotations)
        if (r < 0 || r >= static_cast<int>(rotation_catalog().size())) fail("tta_rotations", "index out of range");
}

Eigen::Index samples_for_frames(int frames) {
    return kWindowLength + static_cast<Eigen::Index>(frames - 1) * kHopLength;
}

SceneSpec training_scene_spec(const ModelConfig& model, const SceneSpec& spec) {
    SceneSpec s = spec;
    s.duration_s = static_cast<double>(samples_for_frames(model.input_frames)) / kSampleRate;
    return s;
}

namespace {

constexpr std::uint64_t kSceneStream = 0x5CE7E;
constexpr std::uint64_t kAugmentStream = 0xA06;
constexpr std::uint64_t kInitStream = 0x1417;

std::shared_ptr<const SceneInstance> training_scene(const SceneSpec& spec, const TrainConfig& train, long iteration,
                                                   int slot, Rng& aug, bool partner, SceneCache* cache) {
    SceneSpec s = spec;
    if (train.scene_pool > 0) {
        const std::uint64_t index =
            partner ? aug.uniform_int(static_cast<std::uint64_t>(train.scene_pool))
                    : static_cast<std::uint64_t>(iteration * train.batch_size + slot) %
                          static_cast<std::uint64_t>(train.scene_pool);
        s.seed = derive_seed(train.seed, kSceneStream, index);
        if (cache) {
            auto& entry = (*cache)[s.seed];
            if (!entry) entry = std::make_shared<const SceneInstance>(render_scene(s));
            return entry;
        }
    } else {
        s.seed = derive_seed(train.seed, kSceneStream + (partner ? 1 : 0),
                             static_cast<std::uint64_t>(iteration) * 65536u + static_cast<std::uint64_t>(slot));
    }
    return std::make_shared<const SceneInstance>(render_scene(s));
}

} // namespace

TrainingSample make_training_sample(const ModelConfig& model, const TrainConfig& train, const SceneSpec& spec,
                                    long iteration, int slot, SceneCache* cache) {
    const SceneSpec s = training_scene_spec(model, spec);
    Rng aug(derive_seed(train.seed, kAugmentStream,
                        static_cast<std::uint64_t>(iteration) * 65536u + static_cast<std::uint64_t>(slot)));
    const AugmentConfig& ac = train.augment;

    std::shared_ptr<const SceneInstance> scene = training_scene(s, train, iteration, slot, aug, false, cache);
    if (ac.emda_enabled && aug.bernoulli(ac.emda_probability)) {
        const auto other = training_scene(s, train, iteration, slot, aug, true, cache);
        scene = std::make_shared<const SceneInstance>(emda(*scene, *other, ac, s.max_overlap, aug));
    }
    if (ac.rotation_enabled) scene = std::make_shared<const SceneInstance>(random_rotation(*scene, aug));

    TrainingSample out;
    out.features = extract_features(scene->clip).slice_frames(0, model.input_frames);
    if (ac.specaug_enabled) out.features = spec_augment(out.features, ac.specaug, aug);
    const double hop = model.temporal_pool() * kFrameHopSeconds;
    out.targets = resample_labels(scene->labels, kLabelHopSeconds, hop, model.output_frames());
    return out;
}

TrainResult train(const ModelConfig& model, const TrainConfig& cfg, const SceneSpec& spec,
                  const TrainObserver& observer) {
    Model<float> net(model);
    return train_from(model, cfg, spec, net.init(derive_seed(cfg.seed, kInitStream)), observer);
}

TrainResult train_from(const ModelConfig& model, const TrainConfig& cfg, const SceneSpec& spec,
                       Parameters<float> init, const TrainObserver& observer) {
    cfg.validate();
    spec.validate();
    if (head_for(cfg.loss) != model.head)
        throw ConfigError("train.loss: " + to_string(cfg.loss) + " does not match the model head");

    Model<float> net(model);
    if (init.size() != net.layout()->total()) throw ConfigError("initial parameters do not match the model");
    TrainResult result;
    result.params = std::move(init);
    Parameters<float>& params = result.params;

    Adam adam({cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay}, params.size());

    // Two-stage: first stage trains trunk + SED branch, second stage only the
    // DOA branch on the frozen trunk.
    using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;
    Mask freeze_doa = Mask::Constant(params.size(), false);
    Mask freeze_all_but_doa = Mask::Constant(params.size(), true);
    for (const auto& e : params.layout().entries()) {
        if (e.name.rfind("doa.", 0) == 0) {
            freeze_doa.segment(e.offset, e.size()).setConstant(true);
            freeze_all_but_doa.segment(e.offset, e.size()).setConstant(false);
        }
    }
    const long stage_switch = static_cast<long>(std::lround(cfg.max_iters * cfg.two_stage_split));

    SceneCache scenes;
    for (long it = 0; it < cfg.max_iters; ++it) {
        const double lr = step_decay_lr(cfg.lr, cfg.lr_decay, cfg.decay_interval, it);
        VectorX<float> grad = VectorX<float>::Zero(params.size());
        double loss_sum = 0.0;
        const bool sed_stage = cfg.loss == LossVariant::two_stage && it < stage_switch;

        for (int slot = 0; slot < cfg.batch_size; ++slot) {
            const TrainingSample sample = make_training_sample(model, cfg, spec, it, slot, &scenes);
            ForwardResult<float> fr = net.forward(params, sample.features);

            double loss = 0.0;
            OutputGradient og;
            if (cfg.loss == LossVariant::accdoa) {
                AccdoaLoss l = accdoa_loss(std::get<AccdoaGrid>(fr.output), encode(sample.targets));
                loss = l.loss;
                og = std::move(l.gradient);
            } else {
                const auto& out = std::get<TwoBranchOutput>(fr.output);
                TwoBranchGradient g;
                if (cfg.loss == LossVariant::seldnet) {
                    TwoBranchLoss l = seldnet_loss(out, sample.targets, cfg.loss_weight);
                    loss = l.loss;
                    g.sed = std::move(l.sed_gradient);
                    g.doa = std::move(l.doa_gradient);
                } else if (sed_stage) {
                    loss = bce_loss(out.sed, sample.targets, &g.sed);
                    g.doa = AccdoaGrid::zeros(out.doa.classes, out.doa.frames);
                } else {
                    loss = masked_mse_loss(out.doa, sample.targets, &g.doa);
                    g.sed = Eigen::MatrixXd::Zero(out.sed.rows(), out.sed.cols());
                }
                og = std::move(g);
            }
            if (!std::isfinite(loss)) {
                std::ostringstream msg;
                msg << "non-finite loss at iteration " << it << ", batch slot " << slot << " (loss=" << loss
                    << ", |params|=" << params.values().norm() << ", lr=" << lr << ")";
                throw NonFiniteLoss(msg.str());
            }
            loss_sum += loss;
            grad += net.backward(params, fr.cache, og);
        }
        grad /= static_cast<float>(cfg.batch_size);

        const Mask* frozen = nullptr;
        if (cfg.loss == LossVariant::two_stage) frozen = sed_stage ? &freeze_doa : &freeze_all_but_doa;
        adam.step(params, grad, lr, frozen);

        LossRecord rec{it, loss_sum / cfg.batch_size, lr};
        result.history.push_back(rec);
        if (observer) observer(rec);
    }
    return result;
}

SegmentPredictor make_predictor(const Model<float>& model, const Parameters<float>& params) {
    // Copies, so the predictor may outlive its arguments.
    return [model, params](const FeatureTensor& x) { return model.predict(params, x); };
}

AccdoaGrid infer_features(const SegmentPredictor& predictor, const FeatureTensor& x, int segment_frames,
                          int shift_frames) {
    if (segment_frames < 1 || shift_frames < 1 || shift_frames > segment_frames)
        throw ConfigError("infer: need 1 <= shift_frames <= segment_frames");
    const int total = x.frames;

    std::vector<int> starts;
    if (total <= segment_frames) {
        starts.push_back(0);
    } else {
        for (int s = 0; s + segment_frames <= total; s += shift_frames) starts.push_back(s);
        if (starts.back() + segment_frames < total) starts.push_back(total - segment_frames);
    }

    AccdoaGrid sum;
    std::vector<int> count(static_cast<std::size_t>(total), 0);
    for (int s : starts) {
        const AccdoaGrid out = predictor(x.slice_frames(s, segment_frames));
        if (out.frames < 1 || segment_frames % out.frames != 0)
            throw DimensionError("predictor frame count must divide the segment length");
        if (sum.classes == 0) sum = AccdoaGrid::zeros(out.classes, total);
        if (out.classes != sum.classes) throw DimensionError("predictor class count changed between windows");
        const int hold = segment_frames / out.frames;
        for (int j = 0; j < segment_frames && s + j < total; ++j) {
            const int t = j / hold;
            for (int c = 0; c < out.classes; ++c) sum.vec(c, s + j) += out.vec(c, t);
            ++count[static_cast<std::size_t>(s + j)];
        }
    }
    for (int t = 0; t < total; ++t) {
        const int n = count[static_cast<std::size_t>(t)];
        if (n > 1)
            for (int c = 0; c < sum.classes; ++c) sum.vec(c, t) /= static_cast<double>(n);
    }
    return sum;
}

AccdoaGrid infer_clip(const SegmentPredictor& predictor, const FoaClip& clip, const InferConfig& cfg) {
    cfg.validate();
    return infer_features(predictor, extract_features(clip), cfg.segment_frames, cfg.shift_frames);
}

AccdoaGrid infer_with_tta(const SegmentPredictor& predictor, const FoaClip& clip, const InferConfig& cfg) {
    cfg.validate();
    const auto& catalog = rotation_catalog();
    AccdoaGrid acc;
    for (int idx : cfg.tta_rotations) {
        const CatalogEntry& e = catalog[static_cast<std::size_t>(idx)];
        AccdoaGrid g = infer_clip(predictor, idx == 0 ? clip : rotate_foa(clip, e.rotation), cfg);
        if (idx != 0) g.values = e.rotation.inverse().matrix * g.values;
        if (acc.classes == 0)
            acc = std::move(g);
        else
            acc.values += g.values;
    }
    if (cfg.tta_rotations.size() > 1) acc.values /= static_cast<double>(cfg.tta_rotations.size());
    return acc;
}

AccdoaGrid pool_to_label_frames(const AccdoaGrid& fine, int label_frames, double label_hop_s) {
    AccdoaGrid out = AccdoaGrid::zeros(fine.classes, label_frames);
    std::vector<int> count(static_cast<std::size_t>(label_frames), 0);
    const double ratio = label_hop_s / kFrameHopSeconds;
    for (int j = 0; j < fine.frames; ++j) {
        // Feature frame j is centred at (j + 1) hops.
        const int k = static_cast<int>(std::floor((j + 1) / ratio + 1e-9));
        if (k < 0 || k >= label_frames) continue;
        for (int c = 0; c < fine.classes; ++c) out.vec(c, k) += fine.vec(c, j);
        ++count[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < label_frames; ++k) {
        const int n = count[static_cast<std::size_t>(k)];
        if (n > 1)
            for (int c = 0; c < fine.classes; ++c) out.vec(c, k) /= static_cast<double>(n);
    }
    return out;
}

} // namespace accdoa
