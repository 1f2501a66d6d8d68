#pragma once

#include <string>
#include <vector>

#include "sparseloc/codec.hpp"
#include "sparseloc/loss.hpp"
#include "sparseloc/model.hpp"
#include "sparseloc/synth.hpp"

namespace sparseloc {

struct TrainConfig {
    LossConfig loss;
    double lr = 0.01;
    double weight_decay = 0.0005;
    int batch_size = 4;
    double lr_decay = 0.9;
    int stagnation_patience = 3;   // epochs without val improvement before an lr decay
    int early_stop_patience = 10;  // epochs without val improvement before stopping
    int max_epochs = 30;
    uint64_t seed = 0;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
    double wall_time_s = 0.0;  // informational; not written to the CSV log
};

struct TrainLog {
    std::vector<EpochRecord> records;
    int best_epoch = -1;
    double best_val_loss = 0.0;
    std::string stop_reason;  // early_stop | max_epochs
};

struct TrainResult {
    ModelState best_state;
    TrainLog log;
};

/// SGD with decoupled L2, per-epoch shuffling keyed by (seed, epoch), lr decay
/// on validation stagnation, early stopping, best-checkpoint tracking.
/// Targets are encoded from each sample's sparse labels with `codec`.
/// Deterministic given the config.
TrainResult train(const std::vector<Sample>& train_samples, const std::vector<Sample>& val_samples,
                  const ModelSpec& model_spec, const TrainConfig& cfg, const CodecParams& codec);

void train_log_to_csv(const TrainLog& log, const std::string& path);

/// Gradient descent directly on a per-image logit grid (no model), isolating
/// the loss landscape. Grids start at zero unless `init` is given. Per-pixel
/// gradients are used unreduced.
std::vector<Heatmap> direct_logit_optimize(const std::vector<Sample>& samples,
                                           const LossConfig& loss, int steps, double step_size,
                                           const CodecParams& codec,
                                           const std::vector<Heatmap>* init = nullptr);

}  // namespace sparseloc
