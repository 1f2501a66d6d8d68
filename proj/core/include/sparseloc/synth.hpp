#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sparseloc/types.hpp"

namespace sparseloc {

/// Scene statistics: many dense nodule instances of which only a few get
/// point labels, plus a fixed 6-region station partition per group.
struct SceneSpec {
    int height = 64;
    int width = 64;
    double instances_mean = 12.0;
    int instances_min = 8;
    int instances_max = 16;
    double nodule_radius_min = 2.5;
    double nodule_radius_max = 4.5;
    int sparse_min = 1;
    int sparse_max = 3;
    int texture_seed_groups = 30;
    int stations = 6;

    void validate() const;
};

struct Instance {
    Keypoint center;
    std::vector<uint8_t> mask;  // h*w binary, the rendered support
};

struct Sample {
    int height = 0;
    int width = 0;
    std::vector<double> image;  // 3 x h x w, values in [0,1]
    std::vector<Instance> instances;
    KeypointSet sparse_labels;  // subset of instance centers
    std::vector<uint8_t> station_map;  // labels 1..6, total partition
    std::array<int, 6> station_presence{};  // 1 iff some center lies in the station
    int group_id = 0;
};

struct ManifestEntry {
    std::string image_path;  // relative to the dataset directory
    std::string meta_path;
    std::string split;  // train | val | test
    int group_id = 0;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    SceneSpec spec;
    uint64_t master_seed = 0;
};

struct SplitCounts {
    int train = 240;
    int val = 60;
    int test = 60;
};

/// Deterministic in (spec, seed, group_id). The background texture and the
/// station partition depend only on group_id (the video-level analog); the
/// nodules depend on the per-scene seed.
Sample generate_scene(const SceneSpec& spec, uint64_t seed, int group_id);

/// Fills sample.sparse_labels with a random count in sparse_range (capped by
/// the instance count) of distinct instance centers.
void sparsify_labels(Sample& sample, const SceneSpec& spec, uint64_t seed);

/// Generates and writes the full dataset plus manifest.json under out_dir.
/// Groups are assigned to splits before any sample is generated so each
/// group's samples share one split.
DatasetManifest build_dataset(const SceneSpec& spec, const SplitCounts& counts,
                              uint64_t master_seed, const std::string& out_dir);

void save_sample(const Sample& sample, const std::string& image_path,
                 const std::string& meta_path);
Sample load_sample(const std::string& image_path, const std::string& meta_path);

void save_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

/// Loads every sample of one split, in manifest order.
std::vector<Sample> load_split(const DatasetManifest& manifest, const std::string& dataset_dir,
                               const std::string& split);

}  // namespace sparseloc
