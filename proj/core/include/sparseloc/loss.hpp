#pragma once

#include <string>
#include <vector>

#include "sparseloc/types.hpp"

namespace sparseloc {

enum class LossVariant { MSE, Hill, CragAndTail, MaskedMSE, SoftUncertainRegion, HillPlusMSE };
enum class Reduction { sum, mean };
enum class ReinforceScope { all_pixels, positive_only };
enum class FocalWeightMode { standard, off_zero, exponent_override };
enum class NegWeightMode { standard, constant_one, zero };

/// All loss hyperparameters plus the ablation toggles. Every toggle
/// combination is valid; the ablation table rows are named presets over
/// these fields (see make_ablation_config).
struct LossConfig {
    LossVariant variant = LossVariant::CragAndTail;
    double lambda = 1.5;  // false-negative subtraction parameter
    double gamma = 2.0;   // focal parameter for semi-hard positives
    double m = 1.0;       // positive margin
    double a = 0.5;       // down-weight for the masked/soft baselines
    Reduction reduction = Reduction::mean;

    bool pos_log_term_on = true;
    bool reinforce_term_on = true;
    ReinforceScope reinforce_scope = ReinforceScope::all_pixels;
    FocalWeightMode focal_weight_mode = FocalWeightMode::standard;
    double focal_exponent_override = 0.0;
    NegWeightMode neg_weight_mode = NegWeightMode::standard;
};

struct PixelLoss {
    double value = 0.0;
    double grad = 0.0;  // d(loss)/d(logit) at this pixel
};

/// Per-pixel value and analytic gradient for any variant. `target` is the
/// [0,1] heatmap value, `logit` the raw model output, `n_labels` the sparse
/// annotation count for the image (only the masked/soft baselines use it).
PixelLoss pixel_loss(const LossConfig& cfg, double target, double logit, int n_labels);

struct LossEval {
    double total = 0.0;
    std::vector<double> grad;  // same row-major layout as the heatmaps
};

/// Map-level evaluation with the configured reduction applied to both the
/// total and the gradient grid.
LossEval evaluate_loss(const Heatmap& target, const Heatmap& pred_logit, int n_labels,
                       const LossConfig& cfg);

// Named variant entry points mirroring the per-variant contracts. Each
// forwards to evaluate_loss with cfg.variant forced accordingly.
LossEval mse_loss(const Heatmap& target, const Heatmap& pred, const LossConfig& cfg);
LossEval hill_loss(const Heatmap& target, const Heatmap& pred, const LossConfig& cfg);
LossEval crag_and_tail_loss(const Heatmap& target, const Heatmap& pred, const LossConfig& cfg);
LossEval masked_mse_loss(const Heatmap& target, const Heatmap& pred, int n, const LossConfig& cfg);
LossEval soft_uncertain_region_loss(const Heatmap& target, const Heatmap& pred, int n,
                                    const LossConfig& cfg);
LossEval hill_plus_mse_loss(const Heatmap& target, const Heatmap& pred, const LossConfig& cfg);

/// The 14 ablation-table rows as named CragAndTail configurations.
LossConfig make_ablation_config(const std::string& row_name);
const std::vector<std::string>& ablation_row_names();

/// Samples random (target, logit, n) pixels and compares the analytic
/// gradient against central finite differences (step 1e-4). Returns the
/// maximum relative error with an absolute floor of 1e-8 in the denominator.
double finite_difference_gradcheck(const LossConfig& cfg, int trials, uint64_t seed);

std::string to_string(LossVariant v);
LossVariant loss_variant_from_string(const std::string& name);

}  // namespace sparseloc
