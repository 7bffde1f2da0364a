#include "accdoa/config.hpp"

#include "accdoa/error.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace accdoa {

namespace {

// Reads keys out of one JSON object, remembering which ones were consumed so
// leftovers can be reported as unknown.
class Reader {
public:
    Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    const Json* find(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string field(const std::string& key) const { return path_ + "." + key; }

    void get(const std::string& key, int& out) {
        if (const Json* v = find(key)) out = as_int(*v, field(key));
    }
    void get(const std::string& key, long& out) {
        if (const Json* v = find(key)) {
            if (!v->is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
            out = v->get<long>();
        }
    }
    void get(const std::string& key, double& out) {
        if (const Json* v = find(key)) out = as_double(*v, field(key));
    }
    void get(const std::string& key, bool& out) {
        if (const Json* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(field(key) + ": expected true or false");
            out = v->get<bool>();
        }
    }
    void get(const std::string& key, std::uint64_t& out) {
        if (const Json* v = find(key)) {
            if (v->is_number_unsigned())
                out = v->get<std::uint64_t>();
            else if (v->is_number_integer() && v->get<std::int64_t>() >= 0)
                out = static_cast<std::uint64_t>(v->get<std::int64_t>());
            else
                throw ConfigError(field(key) + ": expected a non-negative integer");
        }
    }
    void get(const std::string& key, std::vector<double>& out) {
        if (const Json* v = find(key)) {
            if (!v->is_array()) throw ConfigError(field(key) + ": expected an array of numbers");
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i)
                out.push_back(as_double((*v)[i], field(key) + "[" + std::to_string(i) + "]"));
        }
    }
    void get(const std::string& key, std::vector<int>& out) {
        if (const Json* v = find(key)) {
            if (!v->is_array()) throw ConfigError(field(key) + ": expected an array of integers");
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i)
                out.push_back(as_int((*v)[i], field(key) + "[" + std::to_string(i) + "]"));
        }
    }
    void get(const std::string& key, std::array<double, 2>& out) {
        if (const Json* v = find(key)) {
            if (!v->is_array() || v->size() != 2) throw ConfigError(field(key) + ": expected [low, high]");
            out = {as_double((*v)[0], field(key) + "[0]"), as_double((*v)[1], field(key) + "[1]")};
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown key");
    }

private:
    static int as_int(const Json& v, const std::string& where) {
        if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
        const auto x = v.get<std::int64_t>();
        if (x < INT32_MIN || x > INT32_MAX) throw ConfigError(where + ": integer out of range");
        return static_cast<int>(x);
    }
    static double as_double(const Json& v, const std::string& where) {
        if (!v.is_number()) throw ConfigError(where + ": expected a number");
        return v.get<double>();
    }

    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

} // namespace

void RunConfig::validate() const {
    model.validate();
    train.validate();
    scene.validate();
    infer.validate();
    if (model.head != head_for(train.loss))
        throw ConfigError("train.loss: " + to_string(train.loss) + " needs the other head variant");
    if (scene.class_count != model.classes)
        throw ConfigError("scene.class_count: must equal model.classes (" + std::to_string(model.classes) + ")");
    if (infer.segment_frames != model.input_frames)
        throw ConfigError("infer.segment_frames: must equal model.input_frames (" +
                          std::to_string(model.input_frames) + ")");
}

void CompareSettings::validate() const {
    if (test_scenes < 1) throw ConfigError("compare.test_scenes: must be positive");
    if (!(test_duration_s > 0.0)) throw ConfigError("compare.test_duration_s: must be positive");
    for (int r : tta_rotations)
        if (r < 0 || r >= static_cast<int>(rotation_catalog().size()))
            throw ConfigError("compare.tta_rotations: index out of range");
}

void CompareConfig::validate() const {
    RunConfig probe = run;
    probe.model.head = head_for(probe.train.loss);
    probe.validate();
    compare.validate();
}

Json to_json(const ModelConfig& c) {
    Json blocks = Json::array();
    for (const auto& b : c.blocks)
        blocks.push_back(
            {{"channels", b.channels}, {"kernel", b.kernel}, {"pool_freq", b.pool_freq}, {"pool_time", b.pool_time}});
    return {{"blocks", blocks},       {"hidden", c.hidden},         {"classes", c.classes},
            {"input_channels", c.input_channels}, {"input_bins", c.input_bins}, {"input_frames", c.input_frames},
            {"amplitude_scale", c.amplitude_scale}, {"phase_scale", c.phase_scale},
            {"phase_encoding", c.phase_encoding == PhaseEncoding::angle ? "angle" : "cos_sin"}};
}

Json to_json(const AugmentConfig& c) {
    return {{"emda_enabled", c.emda_enabled},
            {"rotation_enabled", c.rotation_enabled},
            {"specaug_enabled", c.specaug_enabled},
            {"emda_probability", c.emda_probability},
            {"emda_min_gain", c.emda_min_gain},
            {"emda_max_gain", c.emda_max_gain},
            {"emda_max_delay_s", c.emda_max_delay_s},
            {"emda_max_eq_db", c.emda_max_eq_db},
            {"emda_retries", c.emda_retries},
            {"specaug",
             {{"time_masks", c.specaug.time_masks},
              {"freq_masks", c.specaug.freq_masks},
              {"channel_masks", c.specaug.channel_masks},
              {"max_time_width", c.specaug.max_time_width},
              {"max_freq_width", c.specaug.max_freq_width}}}};
}

Json to_json(const TrainConfig& c) {
    return {{"batch_size", c.batch_size},
            {"lr", c.lr},
            {"lr_decay", c.lr_decay},
            {"decay_interval", c.decay_interval},
            {"weight_decay", c.weight_decay},
            {"max_iters", c.max_iters},
            {"loss", to_string(c.loss)},
            {"loss_weight", c.loss_weight},
            {"seed", c.seed},
            {"scene_pool", c.scene_pool},
            {"two_stage_split", c.two_stage_split},
            {"augment", to_json(c.augment)}};
}

Json to_json(const SceneSpec& c) {
    return {{"duration_s", c.duration_s},
            {"class_count", c.class_count},
            {"max_overlap", c.max_overlap},
            {"snr_db_range", {c.snr_db_range[0], c.snr_db_range[1]}},
            {"move_speeds_dps", c.move_speeds_dps},
            {"seed", c.seed},
            {"event_rate_hz", c.event_rate_hz},
            {"min_event_s", c.min_event_s},
            {"max_event_s", c.max_event_s},
            {"elevation_limit_deg", c.elevation_limit_deg},
            {"moving_probability", c.moving_probability}};
}

Json to_json(const InferConfig& c) {
    return {{"segment_frames", c.segment_frames},
            {"shift_frames", c.shift_frames},
            {"threshold", c.threshold},
            {"tta_rotations", c.tta_rotations}};
}

Json to_json(const RunConfig& c) {
    return {{"model", to_json(c.model)}, {"train", to_json(c.train)}, {"scene", to_json(c.scene)},
            {"infer", to_json(c.infer)}};
}

Json to_json(const CompareConfig& c) {
    Json j = to_json(c.run);
    j["compare"] = {{"test_scenes", c.compare.test_scenes},
                    {"test_duration_s", c.compare.test_duration_s},
                    {"include_two_stage", c.compare.include_two_stage},
                    {"tta_rotations", c.compare.tta_rotations}};
    return j;
}

void merge_json(const Json& j, ModelConfig& c, const std::string& path) {
    Reader r(j, path);
    if (const Json* blocks = r.find("blocks")) {
        if (!blocks->is_array()) throw ConfigError(path + ".blocks: expected an array");
        c.blocks.clear();
        for (std::size_t i = 0; i < blocks->size(); ++i) {
            Reader b((*blocks)[i], path + ".blocks[" + std::to_string(i) + "]");
            ConvBlockConfig block;
            b.get("channels", block.channels);
            b.get("kernel", block.kernel);
            b.get("pool_freq", block.pool_freq);
            b.get("pool_time", block.pool_time);
            b.finish();
            c.blocks.push_back(block);
        }
    }
    r.get("hidden", c.hidden);
    r.get("classes", c.classes);
    r.get("input_channels", c.input_channels);
    r.get("input_bins", c.input_bins);
    r.get("input_frames", c.input_frames);
    r.get("amplitude_scale", c.amplitude_scale);
    r.get("phase_scale", c.phase_scale);
    if (const Json* v = r.find("phase_encoding")) {
        const std::string e = v->is_string() ? v->get<std::string>() : "";
        if (e == "angle")
            c.phase_encoding = PhaseEncoding::angle;
        else if (e == "cos_sin")
            c.phase_encoding = PhaseEncoding::cos_sin;
        else
            throw ConfigError(r.field("phase_encoding") + ": expected \"angle\" or \"cos_sin\"");
    }
    r.finish();
}

void merge_json(const Json& j, AugmentConfig& c, const std::string& path) {
    Reader r(j, path);
    r.get("emda_enabled", c.emda_enabled);
    r.get("rotation_enabled", c.rotation_enabled);
    r.get("specaug_enabled", c.specaug_enabled);
    r.get("emda_probability", c.emda_probability);
    r.get("emda_min_gain", c.emda_min_gain);
    r.get("emda_max_gain", c.emda_max_gain);
    r.get("emda_max_delay_s", c.emda_max_delay_s);
    r.get("emda_max_eq_db", c.emda_max_eq_db);
    r.get("emda_retries", c.emda_retries);
    if (const Json* s = r.find("specaug")) {
        Reader sr(*s, path + ".specaug");
        sr.get("time_masks", c.specaug.time_masks);
        sr.get("freq_masks", c.specaug.freq_masks);
        sr.get("channel_masks", c.specaug.channel_masks);
        sr.get("max_time_width", c.specaug.max_time_width);
        sr.get("max_freq_width", c.specaug.max_freq_width);
        sr.finish();
    }
    r.finish();
}

void merge_json(const Json& j, TrainConfig& c, const std::string& path) {
    Reader r(j, path);
    r.get("batch_size", c.batch_size);
    r.get("lr", c.lr);
    r.get("lr_decay", c.lr_decay);
    r.get("decay_interval", c.decay_interval);
    r.get("weight_decay", c.weight_decay);
    r.get("max_iters", c.max_iters);
    if (const Json* v = r.find("loss")) {
        if (!v->is_string()) throw ConfigError(path + ".loss: expected a string");
        try {
            c.loss = loss_variant_from_string(v->get<std::string>());
        } catch (const ConfigError& e) {
            throw ConfigError(path + ".loss: " + e.what());
        }
    }
    r.get("loss_weight", c.loss_weight);
    r.get("seed", c.seed);
    r.get("scene_pool", c.scene_pool);
    r.get("two_stage_split", c.two_stage_split);
    if (const Json* a = r.find("augment")) merge_json(*a, c.augment, path + ".augment");
    r.finish();
}

void merge_json(const Json& j, SceneSpec& c, const std::string& path) {
    Reader r(j, path);
    r.get("duration_s", c.duration_s);
    r.get("class_count", c.class_count);
    r.get("max_overlap", c.max_overlap);
    r.get("snr_db_range", c.snr_db_range);
    r.get("move_speeds_dps", c.move_speeds_dps);
    r.get("seed", c.seed);
    r.get("event_rate_hz", c.event_rate_hz);
    r.get("min_event_s", c.min_event_s);
    r.get("max_event_s", c.max_event_s);
    r.get("elevation_limit_deg", c.elevation_limit_deg);
    r.get("moving_probability", c.moving_probability);
    r.finish();
}

void merge_json(const Json& j, InferConfig& c, const std::string& path) {
    Reader r(j, path);
    r.get("segment_frames", c.segment_frames);
    r.get("shift_frames", c.shift_frames);
    r.get("threshold", c.threshold);
    r.get("tta_rotations", c.tta_rotations);
    r.finish();
}

namespace {

void merge_run_sections(Reader& r, RunConfig& c) {
    if (const Json* v = r.find("model")) merge_json(*v, c.model, "model");
    if (const Json* v = r.find("train")) merge_json(*v, c.train, "train");
    if (const Json* v = r.find("scene")) merge_json(*v, c.scene, "scene");
    if (const Json* v = r.find("infer")) merge_json(*v, c.infer, "infer");
    c.model.head = head_for(c.train.loss);
}

} // namespace

void merge_json(const Json& j, RunConfig& c) {
    Reader r(j, "config");
    merge_run_sections(r, c);
    r.finish();
}

void merge_json(const Json& j, CompareConfig& c) {
    Reader r(j, "config");
    merge_run_sections(r, c.run);
    if (const Json* v = r.find("compare")) {
        Reader cr(*v, "compare");
        cr.get("test_scenes", c.compare.test_scenes);
        cr.get("test_duration_s", c.compare.test_duration_s);
        cr.get("include_two_stage", c.compare.include_two_stage);
        cr.get("tta_rotations", c.compare.tta_rotations);
        cr.finish();
    }
    r.finish();
}

std::string serialize(const Json& j) { return j.dump(2) + "\n"; }

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t config_hash(const Json& j) { return fnv1a(serialize(j)); }

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    try {
        return Json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON (" + e.what() + ")");
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << text;
    if (!os) throw IoError("write failed: " + path.string());
}

} // namespace accdoa
