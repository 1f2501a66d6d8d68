#include <doctest.h>

#include <cmath>
#include <random>

#include "sparseloc/loss.hpp"

using namespace sparseloc;

namespace {

LossConfig variant_cfg(LossVariant v) {
    LossConfig c;
    c.variant = v;
    return c;
}

double sigma(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// independent central difference at a single point
double numeric_grad(const LossConfig& cfg, double H, double z, int n) {
    const double h = 1e-4;
    return (pixel_loss(cfg, H, z + h, n).value - pixel_loss(cfg, H, z - h, n).value) / (2.0 * h);
}

}  // namespace

TEST_CASE("mse pixel values and gradients") {
    const LossConfig cfg = variant_cfg(LossVariant::MSE);
    CHECK(pixel_loss(cfg, 1.0, 1.0, 0).value == 0.0);
    CHECK(pixel_loss(cfg, 1.0, 1.0, 0).grad == 0.0);
    CHECK(pixel_loss(cfg, 1.0, 0.5, 0).value == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(pixel_loss(cfg, 1.0, 0.5, 0).grad == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(pixel_loss(cfg, 0.0, 2.0, 0).value == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(pixel_loss(cfg, 0.0, 2.0, 0).grad == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("hill pixel values") {
    const LossConfig cfg = variant_cfg(LossVariant::Hill);
    // negative branch: (lambda - sigma(0)) * sigma(0)^2 = (1.5-0.5)*0.25
    CHECK(pixel_loss(cfg, 0.0, 0.0, 0).value == doctest::Approx(0.25).epsilon(1e-12));
    // positive branch at z=1, m=1: -(1-sigma(0))^2 * ln(sigma(0)) plus the
    // tiny negative-branch contribution weighted by (1-H)=0
    CHECK(pixel_loss(cfg, 1.0, 1.0, 0).value ==
          doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-12));
    CHECK(pixel_loss(cfg, 0.0, -20.0, 0).value < 1e-15);
}

TEST_CASE("crag-and-tail pixel values") {
    const LossConfig cfg = variant_cfg(LossVariant::CragAndTail);
    // H=1, z=1: reinforcement (H-z)^2 = 0, identical to hill
    CHECK(pixel_loss(cfg, 1.0, 1.0, 0).value ==
          doctest::Approx(0.173287).epsilon(1e-5));
    CHECK(pixel_loss(cfg, 1.0, 1.0, 0).value == pixel_loss(variant_cfg(LossVariant::Hill), 1.0, 1.0, 0).value);
    // H=1, z=0: (softplus(1) + 1) * (1 - sigma(-1))^2
    const double want = (std::log1p(std::exp(1.0)) + 1.0) *
                        std::exp(-2.0 * std::log1p(std::exp(-1.0)));
    CHECK(pixel_loss(cfg, 1.0, 0.0, 0).value == doctest::Approx(want).epsilon(1e-12));
    // H=0, z=0 with all_pixels scope: reinforcement contributes 0, negative 0.25
    CHECK(pixel_loss(cfg, 0.0, 0.0, 0).value == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("masked mse pixel values") {
    const LossConfig cfg = variant_cfg(LossVariant::MaskedMSE);
    CHECK(pixel_loss(cfg, 0.0, 0.4, 0).value == doctest::Approx(0.16).epsilon(1e-12));
    CHECK(pixel_loss(cfg, 0.0, 0.4, 3).value == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(pixel_loss(cfg, 0.8, 0.8, 3).value == 0.0);
}

TEST_CASE("soft uncertain region pixel values") {
    const LossConfig cfg = variant_cfg(LossVariant::SoftUncertainRegion);
    CHECK(pixel_loss(cfg, 0.0, 0.0, 3).value == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(pixel_loss(cfg, 0.0, 0.0, 0).value == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(pixel_loss(cfg, 1.0, 1.0, 3).value == doctest::Approx(0.086643).epsilon(1e-5));
}

TEST_CASE("hill plus mse pixel values") {
    const LossConfig cfg = variant_cfg(LossVariant::HillPlusMSE);
    CHECK(pixel_loss(cfg, 1.0, 1.0, 0).value == doctest::Approx(0.173287).epsilon(1e-5));
    CHECK(pixel_loss(cfg, 0.0, 0.0, 0).value == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(pixel_loss(cfg, 0.0, -20.0, 0).value == doctest::Approx(400.0).epsilon(1e-10));
}

TEST_CASE("gradcheck bounds per variant") {
    CHECK(finite_difference_gradcheck(variant_cfg(LossVariant::MSE), 1000, 99) < 1e-6);
    CHECK(finite_difference_gradcheck(variant_cfg(LossVariant::CragAndTail), 1000, 99) < 1e-5);
    for (LossVariant v : {LossVariant::MSE, LossVariant::Hill, LossVariant::CragAndTail,
                          LossVariant::MaskedMSE, LossVariant::SoftUncertainRegion,
                          LossVariant::HillPlusMSE}) {
        const LossConfig cfg = variant_cfg(v);
        // pinned point: H=0.5, logit 0
        const double a = pixel_loss(cfg, 0.5, 0.0, 1).grad;
        const double n = numeric_grad(cfg, 0.5, 0.0, 1);
        CHECK(std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-8}) < 1e-7);
    }
}

TEST_CASE("gradcheck covers every ablation row") {
    for (const std::string& row : ablation_row_names())
        CHECK(finite_difference_gradcheck(make_ablation_config(row), 1000, 42) < 1e-5);
}

TEST_CASE("crag-and-tail with reinforcement off equals hill bitwise") {
    LossConfig cat = variant_cfg(LossVariant::CragAndTail);
    cat.reinforce_term_on = false;
    const LossConfig hill = variant_cfg(LossVariant::Hill);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uh(0.0, 1.0), uz(-10.0, 10.0);
    for (int i = 0; i < 500; ++i) {
        const double H = uh(rng), z = uz(rng);
        const PixelLoss a = pixel_loss(cat, H, z, 1);
        const PixelLoss b = pixel_loss(hill, H, z, 1);
        CHECK(a.value == b.value);
        CHECK(a.grad == b.grad);
    }
}

TEST_CASE("negative-branch hill shape") {
    // gradient of (lambda - p) p^2 w.r.t. p is g(p) = 2 lambda p - 3 p^2
    auto g = [](double lambda, double p) { return 2.0 * lambda * p - 3.0 * p * p; };
    CHECK(g(1.5, 0.95) < g(1.5, 0.5));
    for (double p = 0.0; p <= 1.0; p += 0.01) CHECK(g(1.5, p) >= 0.0);
    // lambda = 1: sign change at p = 2/3
    CHECK(g(1.0, 2.0 / 3.0 - 1e-9) > 0.0);
    CHECK(g(1.0, 2.0 / 3.0 + 1e-9) < 0.0);
    // the implementation's z-gradient matches g(p) * dp/dz
    const LossConfig hill = variant_cfg(LossVariant::Hill);
    for (double p : {0.3, 0.5, 0.8, 0.95}) {
        const double z = std::log(p / (1.0 - p));
        const double sp = sigma(z) * (1.0 - sigma(z));
        CHECK(pixel_loss(hill, 0.0, z, 0).grad ==
              doctest::Approx(g(1.5, sigma(z)) * sp).epsilon(1e-12));
    }
}

TEST_CASE("mse penalizes confident negatives harder, hill softer") {
    const LossConfig mse = variant_cfg(LossVariant::MSE);
    CHECK(std::fabs(pixel_loss(mse, 0.0, 0.95, 0).grad) >
          std::fabs(pixel_loss(mse, 0.0, 0.5, 0).grad));
}

TEST_CASE("masked mse with n=0 equals mse bitwise") {
    const LossConfig masked = variant_cfg(LossVariant::MaskedMSE);
    const LossConfig mse = variant_cfg(LossVariant::MSE);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> uh(0.0, 1.0), uz(-10.0, 10.0);
    for (int i = 0; i < 200; ++i) {
        const double H = uh(rng), z = uz(rng);
        CHECK(pixel_loss(masked, H, z, 0).value == pixel_loss(mse, H, z, 0).value);
        CHECK(pixel_loss(masked, H, z, 0).grad == pixel_loss(mse, H, z, 0).grad);
    }
}

TEST_CASE("soft uncertain region is independent of n at positive pixels") {
    const LossConfig cfg = variant_cfg(LossVariant::SoftUncertainRegion);
    for (double H : {0.2, 0.7, 1.0})
        for (double z : {-2.0, 0.0, 1.5}) {
            CHECK(pixel_loss(cfg, H, z, 0).value == pixel_loss(cfg, H, z, 3).value);
            CHECK(pixel_loss(cfg, H, z, 0).grad == pixel_loss(cfg, H, z, 3).grad);
        }
}

TEST_CASE("mean reduction equals sum divided by pixel count") {
    Heatmap target(6, 7, HeatmapRole::target);
    Heatmap pred(6, 7, HeatmapRole::logit);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> uh(0.0, 1.0), uz(-4.0, 4.0);
    for (double& v : target.values) v = uh(rng);
    for (double& v : pred.values) v = uz(rng);

    LossConfig cfg = variant_cfg(LossVariant::CragAndTail);
    cfg.reduction = Reduction::sum;
    const LossEval s = evaluate_loss(target, pred, 2, cfg);
    cfg.reduction = Reduction::mean;
    const LossEval m = evaluate_loss(target, pred, 2, cfg);
    const double inv = 1.0 / 42.0;
    CHECK(m.total == doctest::Approx(s.total * inv).epsilon(1e-14));
    for (size_t i = 0; i < s.grad.size(); ++i)
        CHECK(m.grad[i] == doctest::Approx(s.grad[i] * inv).epsilon(1e-14));
}

TEST_CASE("evaluate_loss enforces shape and role contracts") {
    const LossConfig cfg = variant_cfg(LossVariant::MSE);
    Heatmap target(4, 4, HeatmapRole::target);
    Heatmap wrong_shape(4, 5, HeatmapRole::logit);
    Heatmap wrong_role(4, 4, HeatmapRole::probability);
    Heatmap ok(4, 4, HeatmapRole::logit);
    CHECK_THROWS_AS(evaluate_loss(target, wrong_shape, 0, cfg), DimensionError);
    CHECK_THROWS_AS(evaluate_loss(target, wrong_role, 0, cfg), ConfigError);
    CHECK_THROWS_AS(evaluate_loss(ok, ok, 0, cfg), ConfigError);
    CHECK_NOTHROW(evaluate_loss(target, ok, 0, cfg));
}

TEST_CASE("ablation table") {
    CHECK(ablation_row_names().size() == 14);
    const LossConfig l1 = make_ablation_config("lambda1");
    CHECK(l1.lambda == 1.0);
    CHECK(l1.gamma == 2.0);
    CHECK(l1.m == 1.0);
    const LossConfig def = make_ablation_config("default");
    CHECK(def.lambda == 1.5);
    CHECK(def.variant == LossVariant::CragAndTail);

    CHECK_THROWS_AS(make_ablation_config("bogus"), ConfigError);
    try {
        make_ablation_config("bogus");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("lambda1") != std::string::npos);
    }
}

TEST_CASE("no_neg_term row drops the negative branch on all-negative images") {
    Heatmap target(5, 5, HeatmapRole::target);  // all zeros
    Heatmap pred(5, 5, HeatmapRole::logit);
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> uz(-3.0, 3.0);
    for (double& v : pred.values) v = uz(rng);

    const LossEval got = evaluate_loss(target, pred, 1, make_ablation_config("no_neg_term"));
    // reinforcement-only reference: z^2 * (1 - sigma(z-1))^2 at H=0
    double want = 0.0;
    for (double z : pred.values) want += z * z * std::pow(1.0 - sigma(z - 1.0), 2.0);
    CHECK(got.total == doctest::Approx(want / 25.0).epsilon(1e-10));
}

TEST_CASE("loss variant names round trip") {
    for (LossVariant v : {LossVariant::MSE, LossVariant::Hill, LossVariant::CragAndTail,
                          LossVariant::MaskedMSE, LossVariant::SoftUncertainRegion,
                          LossVariant::HillPlusMSE})
        CHECK(loss_variant_from_string(to_string(v)) == v);
    CHECK_THROWS_AS(loss_variant_from_string("nope"), ConfigError);
}

TEST_CASE("named entry points agree with evaluate_loss") {
    Heatmap target(4, 4, HeatmapRole::target);
    Heatmap pred(4, 4, HeatmapRole::logit);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> uh(0.0, 1.0), uz(-3.0, 3.0);
    for (double& v : target.values) v = uh(rng);
    for (double& v : pred.values) v = uz(rng);
    LossConfig cfg;
    CHECK(mse_loss(target, pred, cfg).total ==
          evaluate_loss(target, pred, 0, variant_cfg(LossVariant::MSE)).total);
    CHECK(hill_loss(target, pred, cfg).total ==
          evaluate_loss(target, pred, 0, variant_cfg(LossVariant::Hill)).total);
    CHECK(crag_and_tail_loss(target, pred, cfg).total ==
          evaluate_loss(target, pred, 0, variant_cfg(LossVariant::CragAndTail)).total);
    CHECK(masked_mse_loss(target, pred, 2, cfg).total ==
          evaluate_loss(target, pred, 2, variant_cfg(LossVariant::MaskedMSE)).total);
    CHECK(soft_uncertain_region_loss(target, pred, 2, cfg).total ==
          evaluate_loss(target, pred, 2, variant_cfg(LossVariant::SoftUncertainRegion)).total);
    CHECK(hill_plus_mse_loss(target, pred, cfg).total ==
          evaluate_loss(target, pred, 0, variant_cfg(LossVariant::HillPlusMSE)).total);
}
