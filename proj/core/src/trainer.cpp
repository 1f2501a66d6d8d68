#include "sparseloc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace sparseloc {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("TrainConfig: lr must be > 0");
    if (weight_decay < 0.0) throw ConfigError("TrainConfig: weight_decay must be >= 0");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0))
        throw ConfigError("TrainConfig: lr_decay must be in (0,1]");
    if (stagnation_patience < 1 || early_stop_patience < 1 || max_epochs < 1)
        throw ConfigError("TrainConfig: patience and epoch counts must be > 0");
}

namespace {

Heatmap encode_sample_target(const Sample& sample, const CodecParams& codec) {
    return encode_target(sample.sparse_labels, sample.height, sample.width, codec);
}

}  // namespace

TrainResult train(const std::vector<Sample>& train_samples, const std::vector<Sample>& val_samples,
                  const ModelSpec& model_spec, const TrainConfig& cfg, const CodecParams& codec) {
    cfg.validate();
    model_spec.validate();
    if (train_samples.empty() || val_samples.empty())
        throw InputError("train: train and val splits must be nonempty");

    const int H = train_samples.front().height, W = train_samples.front().width;

    std::vector<Heatmap> train_targets, val_targets;
    train_targets.reserve(train_samples.size());
    for (const Sample& s : train_samples) train_targets.push_back(encode_sample_target(s, codec));
    val_targets.reserve(val_samples.size());
    for (const Sample& s : val_samples) val_targets.push_back(encode_sample_target(s, codec));

    ModelState state = init_model(model_spec, cfg.seed);
    TrainResult result;
    result.log.best_val_loss = std::numeric_limits<double>::infinity();

    double lr = cfg.lr;
    int decay_events = 0;
    int epochs_since_improve = 0;
    std::vector<size_t> order(train_samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::string stop_reason = "max_epochs";
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0x65706f63 + static_cast<uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double train_loss_sum = 0.0;
        size_t step = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            ModelGradients acc = zero_gradients(model_spec);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            for (size_t b = start; b < end; ++b) {
                const Sample& sample = train_samples[order[b]];
                ForwardTrace trace;
                Heatmap pred = forward(state, sample.image, H, W, &trace);
                LossEval eval = evaluate_loss(train_targets[order[b]], pred,
                                              sample.sparse_labels.n(), cfg.loss);
                if (!std::isfinite(eval.total))
                    throw TrainingError("train: non-finite loss (epoch " + std::to_string(epoch) +
                                        ", step " + std::to_string(step) + ", variant " +
                                        to_string(cfg.loss.variant) + ")");
                train_loss_sum += eval.total;
                ModelGradients g = backward(state, trace, eval.grad);
                accumulate_gradients(acc, g, inv_batch);
            }
            // theta <- theta*(1 - lr*wd) - lr*grad; the multiplicative form
            // keeps the pure-decay step an exact scaling
            const double keep = 1.0 - lr * cfg.weight_decay;
            for (size_t l = 0; l < state.weights.size(); ++l) {
                for (size_t i = 0; i < state.weights[l].size(); ++i)
                    state.weights[l][i] = state.weights[l][i] * keep - lr * acc.weights[l][i];
                for (size_t i = 0; i < state.biases[l].size(); ++i)
                    state.biases[l][i] = state.biases[l][i] * keep - lr * acc.biases[l][i];
            }
        }

        double val_loss = 0.0;
        for (size_t i = 0; i < val_samples.size(); ++i) {
            Heatmap pred = forward(state, val_samples[i].image, H, W);
            val_loss += evaluate_loss(val_targets[i], pred, val_samples[i].sparse_labels.n(),
                                      cfg.loss)
                            .total;
        }
        val_loss /= static_cast<double>(val_samples.size());
        if (!std::isfinite(val_loss))
            throw TrainingError("train: non-finite validation loss (epoch " +
                                std::to_string(epoch) + ", variant " +
                                to_string(cfg.loss.variant) + ")");

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_loss_sum / static_cast<double>(train_samples.size());
        rec.val_loss = val_loss;
        rec.lr = lr;
        rec.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.records.push_back(rec);

        if (val_loss < result.log.best_val_loss) {
            result.log.best_val_loss = val_loss;
            result.log.best_epoch = epoch;
            result.best_state = state;
            epochs_since_improve = 0;
        } else {
            ++epochs_since_improve;
            if (epochs_since_improve % cfg.stagnation_patience == 0) {
                ++decay_events;
                lr = cfg.lr * std::pow(cfg.lr_decay, decay_events);
            }
            if (epochs_since_improve >= cfg.early_stop_patience) {
                stop_reason = "early_stop";
                break;
            }
        }
    }
    result.log.stop_reason = stop_reason;
    return result;
}

void train_log_to_csv(const TrainLog& log, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "epoch,train_loss,val_loss,lr\n";
    char buf[160];
    for (const EpochRecord& r : log.records) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss,
                      r.val_loss, r.lr);
        f << buf;
    }
    std::snprintf(buf, sizeof(buf), "# best_epoch=%d stop_reason=%s\n", log.best_epoch,
                  log.stop_reason.c_str());
    f << buf;
}

std::vector<Heatmap> direct_logit_optimize(const std::vector<Sample>& samples,
                                           const LossConfig& loss, int steps, double step_size,
                                           const CodecParams& codec,
                                           const std::vector<Heatmap>* init) {
    if (steps < 0) throw ConfigError("direct_logit_optimize: steps must be >= 0");
    if (init && init->size() != samples.size())
        throw DimensionError("direct_logit_optimize: init grids do not match samples");

    LossConfig cfg = loss;
    cfg.reduction = Reduction::sum;  // per-pixel gradients, unreduced

    std::vector<Heatmap> result;
    result.reserve(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        const Sample& sample = samples[i];
        const Heatmap target = encode_target(sample.sparse_labels, sample.height, sample.width,
                                             codec);
        Heatmap logits = init ? (*init)[i]
                              : Heatmap(sample.height, sample.width, HeatmapRole::logit);
        logits.role = HeatmapRole::logit;
        for (int s = 0; s < steps; ++s) {
            LossEval eval = evaluate_loss(target, logits, sample.sparse_labels.n(), cfg);
            if (!std::isfinite(eval.total))
                throw TrainingError("direct_logit_optimize: diverged at step " +
                                    std::to_string(s) + " (variant " +
                                    to_string(cfg.variant) + ")");
            for (size_t p = 0; p < logits.values.size(); ++p)
                logits.values[p] -= step_size * eval.grad[p];
        }
        result.push_back(std::move(logits));
    }
    return result;
}

}  // namespace sparseloc
