#include "sparseloc/loss.hpp"

#include <cmath>
#include <random>

namespace sparseloc {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// softplus(x) = ln(1 + e^x), stable for large |x|
inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Canonical Hill-family pixel: [ -H*ln(s+)*pos_log + rho*(H-z)^2*reinf ] * (1-s+)^g
//   + (1-H) * w_neg * (s-)^2
// with s+ = sigmoid(z - m), s- = sigmoid(z). The Hill loss is the same path
// with the reinforcement disabled, so the two variants agree bitwise.
PixelLoss hill_family_pixel(double H, double z, double lambda, double m, FocalWeightMode fmode,
                            double gamma, double g_override, bool pos_log_on, bool reinforce_on,
                            ReinforceScope scope, NegWeightMode neg_mode) {
    PixelLoss out;
    if (fmode != FocalWeightMode::off_zero) {
        const double g = (fmode == FocalWeightMode::exponent_override) ? g_override : gamma;
        const double sp = sigmoid(z - m);
        const double logsp = -softplus(-(z - m));        // ln s+
        const double focal = std::exp(-g * softplus(z - m));  // (1 - s+)^g
        double base = 0.0, dbase = 0.0;
        if (pos_log_on) {
            base += -H * logsp;
            dbase += -H * (1.0 - sp);
        }
        if (reinforce_on && (scope == ReinforceScope::all_pixels || H > 0.0)) {
            const double d = H - z;  // reinforcement compares target to the raw logit
            base += d * d;
            dbase += -2.0 * d;
        }
        out.value += base * focal;
        out.grad += focal * (dbase - g * sp * base);  // d(focal)/dz = -g * s+ * focal
    }
    if (neg_mode != NegWeightMode::zero) {
        const double sn = sigmoid(z);
        const double dsn = sn * (1.0 - sn);
        if (neg_mode == NegWeightMode::standard) {
            out.value += (1.0 - H) * (lambda - sn) * sn * sn;
            out.grad += (1.0 - H) * dsn * sn * (2.0 * lambda - 3.0 * sn);
        } else {
            out.value += (1.0 - H) * sn * sn;
            out.grad += (1.0 - H) * 2.0 * sn * dsn;
        }
    }
    return out;
}

inline PixelLoss mse_pixel(double H, double z) {
    const double d = z - H;
    return {d * d, 2.0 * d};
}

// Extended-precision value evaluation for the finite-difference oracle.
// f(z+h) - f(z-h) cancels down to ~ulp(f); with tiny gradients under a large
// loss value, double round-off alone would exceed the checker's tolerance.
inline long double softplus_ld(long double x) {
    return x > 0.0L ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

long double hill_family_value_ld(long double H, long double z, long double lambda, long double m,
                                 FocalWeightMode fmode, long double gamma, long double g_override,
                                 bool pos_log_on, bool reinforce_on, ReinforceScope scope,
                                 NegWeightMode neg_mode) {
    long double value = 0.0L;
    if (fmode != FocalWeightMode::off_zero) {
        const long double g = (fmode == FocalWeightMode::exponent_override) ? g_override : gamma;
        const long double logsp = -softplus_ld(-(z - m));
        const long double focal = std::exp(-g * softplus_ld(z - m));
        long double base = 0.0L;
        if (pos_log_on) base += -H * logsp;
        if (reinforce_on && (scope == ReinforceScope::all_pixels || H > 0.0L)) {
            const long double d = H - z;
            base += d * d;
        }
        value += base * focal;
    }
    if (neg_mode != NegWeightMode::zero) {
        const long double sn = 1.0L / (1.0L + std::exp(-z));
        if (neg_mode == NegWeightMode::standard)
            value += (1.0L - H) * (lambda - sn) * sn * sn;
        else
            value += (1.0L - H) * sn * sn;
    }
    return value;
}

long double pixel_value_ld(const LossConfig& cfg, long double H, long double z, int n_labels) {
    const long double mse = (z - H) * (z - H);
    switch (cfg.variant) {
        case LossVariant::MSE:
            return mse;
        case LossVariant::Hill:
            return hill_family_value_ld(H, z, cfg.lambda, cfg.m, cfg.focal_weight_mode, cfg.gamma,
                                        cfg.focal_exponent_override, true, false,
                                        cfg.reinforce_scope, cfg.neg_weight_mode);
        case LossVariant::CragAndTail:
            return hill_family_value_ld(H, z, cfg.lambda, cfg.m, cfg.focal_weight_mode, cfg.gamma,
                                        cfg.focal_exponent_override, cfg.pos_log_term_on,
                                        cfg.reinforce_term_on, cfg.reinforce_scope,
                                        cfg.neg_weight_mode);
        case LossVariant::MaskedMSE:
            return ((n_labels == 0 || H > 0.0L) ? 1.0L : static_cast<long double>(cfg.a)) * mse;
        case LossVariant::SoftUncertainRegion: {
            const long double h = hill_family_value_ld(
                H, z, cfg.lambda, cfg.m, cfg.focal_weight_mode, cfg.gamma,
                cfg.focal_exponent_override, true, false, cfg.reinforce_scope, cfg.neg_weight_mode);
            if (n_labels == 0 || H > 0.0L) return mse + static_cast<long double>(cfg.a) * h;
            return static_cast<long double>(cfg.a) * mse + h;
        }
        case LossVariant::HillPlusMSE:
            return mse + hill_family_value_ld(H, z, cfg.lambda, cfg.m, cfg.focal_weight_mode,
                                              cfg.gamma, cfg.focal_exponent_override, true, false,
                                              cfg.reinforce_scope, cfg.neg_weight_mode);
    }
    throw ConfigError("pixel_value_ld: unknown variant");
}

}  // namespace

PixelLoss pixel_loss(const LossConfig& cfg, double target, double logit, int n_labels) {
    switch (cfg.variant) {
        case LossVariant::MSE:
            return mse_pixel(target, logit);
        case LossVariant::Hill:
            return hill_family_pixel(target, logit, cfg.lambda, cfg.m, cfg.focal_weight_mode,
                                     cfg.gamma, cfg.focal_exponent_override,
                                     /*pos_log_on=*/true, /*reinforce_on=*/false,
                                     cfg.reinforce_scope, cfg.neg_weight_mode);
        case LossVariant::CragAndTail:
            return hill_family_pixel(target, logit, cfg.lambda, cfg.m, cfg.focal_weight_mode,
                                     cfg.gamma, cfg.focal_exponent_override, cfg.pos_log_term_on,
                                     cfg.reinforce_term_on, cfg.reinforce_scope,
                                     cfg.neg_weight_mode);
        case LossVariant::MaskedMSE: {
            const double w = (n_labels == 0 || target > 0.0) ? 1.0 : cfg.a;
            PixelLoss p = mse_pixel(target, logit);
            return {w * p.value, w * p.grad};
        }
        case LossVariant::SoftUncertainRegion: {
            const PixelLoss mse = mse_pixel(target, logit);
            const PixelLoss hill = hill_family_pixel(
                target, logit, cfg.lambda, cfg.m, cfg.focal_weight_mode, cfg.gamma,
                cfg.focal_exponent_override, /*pos_log_on=*/true, /*reinforce_on=*/false,
                cfg.reinforce_scope, cfg.neg_weight_mode);
            if (n_labels == 0 || target > 0.0)
                return {mse.value + cfg.a * hill.value, mse.grad + cfg.a * hill.grad};
            return {cfg.a * mse.value + hill.value, cfg.a * mse.grad + hill.grad};
        }
        case LossVariant::HillPlusMSE: {
            const PixelLoss mse = mse_pixel(target, logit);
            const PixelLoss hill = hill_family_pixel(
                target, logit, cfg.lambda, cfg.m, cfg.focal_weight_mode, cfg.gamma,
                cfg.focal_exponent_override, /*pos_log_on=*/true, /*reinforce_on=*/false,
                cfg.reinforce_scope, cfg.neg_weight_mode);
            return {mse.value + hill.value, mse.grad + hill.grad};
        }
    }
    throw ConfigError("pixel_loss: unknown variant");
}

LossEval evaluate_loss(const Heatmap& target, const Heatmap& pred_logit, int n_labels,
                       const LossConfig& cfg) {
    if (target.height != pred_logit.height || target.width != pred_logit.width)
        throw DimensionError("evaluate_loss: target and prediction shapes differ");
    if (target.role != HeatmapRole::target)
        throw ConfigError("evaluate_loss: first argument must be a target heatmap");
    if (pred_logit.role != HeatmapRole::logit)
        throw ConfigError("evaluate_loss: prediction must be a logit heatmap");

    LossEval out;
    out.grad.resize(target.size());
    double total = 0.0;
    for (size_t i = 0; i < target.size(); ++i) {
        const PixelLoss p = pixel_loss(cfg, target.values[i], pred_logit.values[i], n_labels);
        total += p.value;
        out.grad[i] = p.grad;
    }
    if (cfg.reduction == Reduction::mean) {
        const double inv = 1.0 / static_cast<double>(target.size());
        total *= inv;
        for (double& g : out.grad) g *= inv;
    }
    out.total = total;
    return out;
}

namespace {
LossEval with_variant(const Heatmap& t, const Heatmap& p, int n, LossConfig cfg, LossVariant v) {
    cfg.variant = v;
    return evaluate_loss(t, p, n, cfg);
}
}  // namespace

LossEval mse_loss(const Heatmap& t, const Heatmap& p, const LossConfig& cfg) {
    return with_variant(t, p, 0, cfg, LossVariant::MSE);
}
LossEval hill_loss(const Heatmap& t, const Heatmap& p, const LossConfig& cfg) {
    return with_variant(t, p, 0, cfg, LossVariant::Hill);
}
LossEval crag_and_tail_loss(const Heatmap& t, const Heatmap& p, const LossConfig& cfg) {
    return with_variant(t, p, 0, cfg, LossVariant::CragAndTail);
}
LossEval masked_mse_loss(const Heatmap& t, const Heatmap& p, int n, const LossConfig& cfg) {
    return with_variant(t, p, n, cfg, LossVariant::MaskedMSE);
}
LossEval soft_uncertain_region_loss(const Heatmap& t, const Heatmap& p, int n,
                                    const LossConfig& cfg) {
    return with_variant(t, p, n, cfg, LossVariant::SoftUncertainRegion);
}
LossEval hill_plus_mse_loss(const Heatmap& t, const Heatmap& p, const LossConfig& cfg) {
    return with_variant(t, p, 0, cfg, LossVariant::HillPlusMSE);
}

const std::vector<std::string>& ablation_row_names() {
    static const std::vector<std::string> names = {
        "default",      "m0",           "m05",           "gamma0",        "gamma1",
        "lambda0",      "lambda05",     "lambda1",       "drop_pos_log",  "only_reinforce_pos",
        "only_neg_loss", "neg_weight_one", "no_neg_term", "only_pos_hill"};
    return names;
}

LossConfig make_ablation_config(const std::string& row_name) {
    LossConfig cfg;
    cfg.variant = LossVariant::CragAndTail;
    if (row_name == "default") {
        // defaults as-is
    } else if (row_name == "m0") {
        cfg.m = 0.0;
    } else if (row_name == "m05") {
        cfg.m = 0.5;
    } else if (row_name == "gamma0") {
        cfg.gamma = 0.0;
    } else if (row_name == "gamma1") {
        cfg.gamma = 1.0;
    } else if (row_name == "lambda0") {
        cfg.lambda = 0.0;
    } else if (row_name == "lambda05") {
        cfg.lambda = 0.5;
    } else if (row_name == "lambda1") {
        cfg.lambda = 1.0;
    } else if (row_name == "drop_pos_log") {
        cfg.pos_log_term_on = false;
    } else if (row_name == "only_reinforce_pos") {
        // positive term is the bare reinforcement, no log term, no focal weight
        cfg.pos_log_term_on = false;
        cfg.focal_weight_mode = FocalWeightMode::exponent_override;
        cfg.focal_exponent_override = 0.0;
    } else if (row_name == "only_neg_loss") {
        cfg.focal_weight_mode = FocalWeightMode::off_zero;
    } else if (row_name == "neg_weight_one") {
        cfg.neg_weight_mode = NegWeightMode::constant_one;
    } else if (row_name == "no_neg_term") {
        cfg.neg_weight_mode = NegWeightMode::zero;
    } else if (row_name == "only_pos_hill") {
        cfg.neg_weight_mode = NegWeightMode::zero;
        cfg.reinforce_term_on = false;
    } else {
        std::string valid;
        for (const auto& n : ablation_row_names()) valid += (valid.empty() ? "" : ", ") + n;
        throw ConfigError("make_ablation_config: unknown row '" + row_name + "'; valid rows: " +
                          valid);
    }
    return cfg;
}

double finite_difference_gradcheck(const LossConfig& cfg, int trials, uint64_t seed) {
    if (trials < 1) throw ConfigError("finite_difference_gradcheck: trials must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> h_dist(0.0, 1.0);
    std::uniform_real_distribution<double> z_dist(-10.0, 10.0);
    std::uniform_int_distribution<int> n_pick(0, 2);
    constexpr int n_values[3] = {0, 1, 3};
    constexpr double step = 1e-4;

    double max_rel = 0.0;
    for (int i = 0; i < trials; ++i) {
        const double H = h_dist(rng);
        const double z = z_dist(rng);
        const int n = n_values[n_pick(rng)];
        const double analytic = pixel_loss(cfg, H, z, n).grad;
        const long double fp = pixel_value_ld(cfg, H, z + step, n);
        const long double fm = pixel_value_ld(cfg, H, z - step, n);
        const double numeric = static_cast<double>((fp - fm) / (2.0L * step));
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
    return max_rel;
}

std::string to_string(LossVariant v) {
    switch (v) {
        case LossVariant::MSE: return "MSE";
        case LossVariant::Hill: return "Hill";
        case LossVariant::CragAndTail: return "CragAndTail";
        case LossVariant::MaskedMSE: return "MaskedMSE";
        case LossVariant::SoftUncertainRegion: return "SoftUncertainRegion";
        case LossVariant::HillPlusMSE: return "HillPlusMSE";
    }
    return "?";
}

LossVariant loss_variant_from_string(const std::string& name) {
    if (name == "MSE") return LossVariant::MSE;
    if (name == "Hill") return LossVariant::Hill;
    if (name == "CragAndTail") return LossVariant::CragAndTail;
    if (name == "MaskedMSE") return LossVariant::MaskedMSE;
    if (name == "SoftUncertainRegion") return LossVariant::SoftUncertainRegion;
    if (name == "HillPlusMSE") return LossVariant::HillPlusMSE;
    throw ConfigError("unknown loss variant '" + name +
                      "'; expected MSE, Hill, CragAndTail, MaskedMSE, SoftUncertainRegion, "
                      "or HillPlusMSE");
}

}  // namespace sparseloc
