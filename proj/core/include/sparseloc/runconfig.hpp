#pragma once

#include <map>
#include <string>
#include <vector>

#include "sparseloc/codec.hpp"
#include "sparseloc/loss.hpp"
#include "sparseloc/synth.hpp"
#include "sparseloc/trainer.hpp"

namespace sparseloc {

/// Everything a command needs, serialized as one JSON file.
struct RunConfig {
    std::string dataset_dir = "data";
    std::string out_dir = "out";
    SceneSpec scene;
    SplitCounts counts;
    uint64_t data_seed = 1234;
    CodecParams codec;
    int decode_window = 5;
    int decode_k = 30;
    std::map<std::string, double> thresholds;  // per loss variant name
    ModelSpec model;
    LossConfig loss;
    TrainConfig train;
    std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};

    void validate() const;
};

RunConfig default_run_config();
RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

/// Score threshold for decoding a model trained with the given loss.
/// Defaults follow the per-loss inference settings (0.2 for MSE, 0.3 for all
/// other losses).
double threshold_for(const RunConfig& cfg, LossVariant variant);

/// Losses whose raw output is anchored to [0,1] by an MSE-style term are
/// decoded on the raw (clamped) output; the pure sigmoid-space losses are
/// decoded through a sigmoid.
DecodeActivation activation_for(LossVariant variant);

/// Decode a model's logit output under the conventions of the given loss.
KeypointSet decode_model_output(const Heatmap& logits, LossVariant variant, const RunConfig& cfg);

}  // namespace sparseloc
