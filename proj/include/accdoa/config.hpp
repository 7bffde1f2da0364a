#pragma once

#include "accdoa/pipeline.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace accdoa {

using Json = nlohmann::ordered_json;

/// Everything a single training/inference run depends on.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    SceneSpec scene;
    InferConfig infer;

    void validate() const;
};

/// Extra knobs for the side-by-side comparison.
struct CompareSettings {
    int test_scenes = 20;
    double test_duration_s = 5.0;
    bool include_two_stage = false;
    /// Catalog indices used for the TTA column; empty means all 16.
    std::vector<int> tta_rotations;

    void validate() const;
};

struct CompareConfig {
    RunConfig run;
    CompareSettings compare;

    void validate() const;
};

// Serialisation. Readers start from defaults, so any subset of keys may be
// given; unknown keys and wrongly typed values throw ConfigError naming the
// field, e.g. "model.hidden: expected an integer".
Json to_json(const ModelConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const SceneSpec& c);
Json to_json(const InferConfig& c);
Json to_json(const AugmentConfig& c);
Json to_json(const RunConfig& c);
Json to_json(const CompareConfig& c);

void merge_json(const Json& j, ModelConfig& c, const std::string& path = "model");
void merge_json(const Json& j, TrainConfig& c, const std::string& path = "train");
void merge_json(const Json& j, SceneSpec& c, const std::string& path = "scene");
void merge_json(const Json& j, InferConfig& c, const std::string& path = "infer");
void merge_json(const Json& j, AugmentConfig& c, const std::string& path = "train.augment");
void merge_json(const Json& j, RunConfig& c);
void merge_json(const Json& j, CompareConfig& c);

/// Canonical text form; the config hash is computed over exactly these bytes.
std::string serialize(const Json& j);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);
std::uint64_t config_hash(const Json& j);
std::string hex64(std::uint64_t v);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace accdoa
