#include "sparseloc/runconfig.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

using nlohmann::json;

namespace sparseloc {

namespace {

std::string to_string(Reduction r) { return r == Reduction::sum ? "sum" : "mean"; }
std::string to_string(ReinforceScope s) {
    return s == ReinforceScope::all_pixels ? "all_pixels" : "positive_only";
}
std::string to_string(FocalWeightMode m) {
    switch (m) {
        case FocalWeightMode::standard: return "standard";
        case FocalWeightMode::off_zero: return "off_zero";
        case FocalWeightMode::exponent_override: return "exponent_override";
    }
    return "?";
}
std::string to_string(NegWeightMode m) {
    switch (m) {
        case NegWeightMode::standard: return "standard";
        case NegWeightMode::constant_one: return "constant_one";
        case NegWeightMode::zero: return "zero";
    }
    return "?";
}
std::string to_string(OverlapMode m) { return m == OverlapMode::clamp ? "clamp" : "sum"; }

Reduction reduction_from(const std::string& s) {
    if (s == "sum") return Reduction::sum;
    if (s == "mean") return Reduction::mean;
    throw ConfigError("bad reduction '" + s + "'");
}
ReinforceScope scope_from(const std::string& s) {
    if (s == "all_pixels") return ReinforceScope::all_pixels;
    if (s == "positive_only") return ReinforceScope::positive_only;
    throw ConfigError("bad reinforce_scope '" + s + "'");
}
FocalWeightMode focal_from(const std::string& s) {
    if (s == "standard") return FocalWeightMode::standard;
    if (s == "off_zero") return FocalWeightMode::off_zero;
    if (s == "exponent_override") return FocalWeightMode::exponent_override;
    throw ConfigError("bad focal_weight_mode '" + s + "'");
}
NegWeightMode neg_from(const std::string& s) {
    if (s == "standard") return NegWeightMode::standard;
    if (s == "constant_one") return NegWeightMode::constant_one;
    if (s == "zero") return NegWeightMode::zero;
    throw ConfigError("bad neg_weight_mode '" + s + "'");
}
OverlapMode overlap_from(const std::string& s) {
    if (s == "clamp") return OverlapMode::clamp;
    if (s == "sum") return OverlapMode::sum;
    throw ConfigError("bad overlap_mode '" + s + "'");
}

json loss_to_json(const LossConfig& c) {
    return json{{"variant", sparseloc::to_string(c.variant)},
                {"lambda", c.lambda},
                {"gamma", c.gamma},
                {"m", c.m},
                {"a", c.a},
                {"reduction", to_string(c.reduction)},
                {"pos_log_term_on", c.pos_log_term_on},
                {"reinforce_term_on", c.reinforce_term_on},
                {"reinforce_scope", to_string(c.reinforce_scope)},
                {"focal_weight_mode", to_string(c.focal_weight_mode)},
                {"focal_exponent_override", c.focal_exponent_override},
                {"neg_weight_mode", to_string(c.neg_weight_mode)}};
}

LossConfig loss_from_json(const json& j) {
    LossConfig c;
    c.variant = loss_variant_from_string(j.value("variant", std::string("CragAndTail")));
    c.lambda = j.value("lambda", c.lambda);
    c.gamma = j.value("gamma", c.gamma);
    c.m = j.value("m", c.m);
    c.a = j.value("a", c.a);
    c.reduction = reduction_from(j.value("reduction", std::string("mean")));
    c.pos_log_term_on = j.value("pos_log_term_on", c.pos_log_term_on);
    c.reinforce_term_on = j.value("reinforce_term_on", c.reinforce_term_on);
    c.reinforce_scope = scope_from(j.value("reinforce_scope", to_string(c.reinforce_scope)));
    c.focal_weight_mode = focal_from(j.value("focal_weight_mode", std::string("standard")));
    c.focal_exponent_override = j.value("focal_exponent_override", c.focal_exponent_override);
    c.neg_weight_mode = neg_from(j.value("neg_weight_mode", std::string("standard")));
    return c;
}

json scene_to_json(const SceneSpec& s) {
    return json{{"height", s.height},
                {"width", s.width},
                {"instances_mean", s.instances_mean},
                {"instances_min", s.instances_min},
                {"instances_max", s.instances_max},
                {"nodule_radius_min", s.nodule_radius_min},
                {"nodule_radius_max", s.nodule_radius_max},
                {"sparse_min", s.sparse_min},
                {"sparse_max", s.sparse_max},
                {"texture_seed_groups", s.texture_seed_groups},
                {"stations", s.stations}};
}

SceneSpec scene_from_json(const json& j) {
    SceneSpec s;
    s.height = j.value("height", s.height);
    s.width = j.value("width", s.width);
    s.instances_mean = j.value("instances_mean", s.instances_mean);
    s.instances_min = j.value("instances_min", s.instances_min);
    s.instances_max = j.value("instances_max", s.instances_max);
    s.nodule_radius_min = j.value("nodule_radius_min", s.nodule_radius_min);
    s.nodule_radius_max = j.value("nodule_radius_max", s.nodule_radius_max);
    s.sparse_min = j.value("sparse_min", s.sparse_min);
    s.sparse_max = j.value("sparse_max", s.sparse_max);
    s.texture_seed_groups = j.value("texture_seed_groups", s.texture_seed_groups);
    s.stations = j.value("stations", s.stations);
    return s;
}

}  // namespace

void RunConfig::validate() const {
    scene.validate();
    codec.validate();
    train.validate();
    model.validate();
    if (decode_window < 3 || decode_window % 2 == 0)
        throw ConfigError("RunConfig: decode_window must be odd and >= 3");
    if (decode_k < 1) throw ConfigError("RunConfig: decode_k must be >= 1");
    for (const auto& [name, t] : thresholds) {
        loss_variant_from_string(name);
        if (t < 0.0 || t > 1.0)
            throw ConfigError("RunConfig: threshold for " + name + " must be in [0,1]");
    }
    if (seeds.empty()) throw ConfigError("RunConfig: need at least one seed");
}

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.thresholds = {{"MSE", 0.2},
                      {"Hill", 0.3},
                      {"CragAndTail", 0.3},
                      {"MaskedMSE", 0.3},
                      {"SoftUncertainRegion", 0.3},
                      {"HillPlusMSE", 0.3}};
    return cfg;
}

double threshold_for(const RunConfig& cfg, LossVariant variant) {
    const auto it = cfg.thresholds.find(to_string(variant));
    if (it != cfg.thresholds.end()) return it->second;
    return variant == LossVariant::MSE ? 0.2 : 0.3;
}

DecodeActivation activation_for(LossVariant variant) {
    switch (variant) {
        case LossVariant::Hill:
        case LossVariant::CragAndTail:
            return DecodeActivation::sigmoid;
        default:
            return DecodeActivation::identity;
    }
}

KeypointSet decode_model_output(const Heatmap& logits, LossVariant variant,
                                const RunConfig& cfg) {
    DecodeParams params;
    params.window = cfg.decode_window;
    params.k = cfg.decode_k;
    params.t = threshold_for(cfg, variant);
    params.activation = activation_for(variant);

    if (params.activation == DecodeActivation::identity) {
        // MSE-anchored outputs approximate the [0,1] target directly; clamp
        // the stray out-of-range values and decode as a probability map.
        Heatmap clamped = logits;
        clamped.role = HeatmapRole::probability;
        for (double& v : clamped.values) v = std::clamp(v, 0.0, 1.0);
        return decode_points(clamped, params);
    }
    return decode_points(logits, params);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config: " + path);
    json j = json::parse(f);

    RunConfig cfg = default_run_config();
    cfg.dataset_dir = j.value("dataset_dir", cfg.dataset_dir);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    if (j.contains("scene")) cfg.scene = scene_from_json(j["scene"]);
    if (j.contains("counts")) {
        cfg.counts.train = j["counts"].value("train", cfg.counts.train);
        cfg.counts.val = j["counts"].value("val", cfg.counts.val);
        cfg.counts.test = j["counts"].value("test", cfg.counts.test);
    }
    cfg.data_seed = j.value("data_seed", cfg.data_seed);
    if (j.contains("codec")) {
        const json& c = j["codec"];
        cfg.codec.delta = c.value("delta", cfg.codec.delta);
        cfg.codec.truncation_radius = c.value("truncation_radius", cfg.codec.truncation_radius);
        cfg.codec.overlap_mode = overlap_from(c.value("overlap_mode", std::string("clamp")));
    }
    if (j.contains("decode")) {
        const json& d = j["decode"];
        cfg.decode_window = d.value("window", cfg.decode_window);
        cfg.decode_k = d.value("k", cfg.decode_k);
        if (d.contains("thresholds"))
            for (const auto& [name, t] : d["thresholds"].items())
                cfg.thresholds[name] = t.get<double>();
    }
    if (j.contains("model")) cfg.model.channels = j["model"].value("channels", cfg.model.channels);
    if (j.contains("loss")) cfg.loss = loss_from_json(j["loss"]);
    if (j.contains("train")) {
        const json& t = j["train"];
        cfg.train.lr = t.value("lr", cfg.train.lr);
        cfg.train.weight_decay = t.value("weight_decay", cfg.train.weight_decay);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.lr_decay = t.value("lr_decay", cfg.train.lr_decay);
        cfg.train.stagnation_patience = t.value("stagnation_patience", cfg.train.stagnation_patience);
        cfg.train.early_stop_patience = t.value("early_stop_patience", cfg.train.early_stop_patience);
        cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
        cfg.train.seed = t.value("seed", cfg.train.seed);
    }
    cfg.train.loss = cfg.loss;
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<uint64_t>>();
    cfg.validate();
    return cfg;
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
    json j;
    j["dataset_dir"] = cfg.dataset_dir;
    j["out_dir"] = cfg.out_dir;
    j["scene"] = scene_to_json(cfg.scene);
    j["counts"] = {{"train", cfg.counts.train}, {"val", cfg.counts.val}, {"test", cfg.counts.test}};
    j["data_seed"] = cfg.data_seed;
    j["codec"] = {{"delta", cfg.codec.delta},
                  {"truncation_radius", cfg.codec.truncation_radius},
                  {"overlap_mode", to_string(cfg.codec.overlap_mode)}};
    j["decode"] = {{"window", cfg.decode_window},
                   {"k", cfg.decode_k},
                   {"thresholds", cfg.thresholds}};
    j["model"] = {{"channels", cfg.model.channels}};
    j["loss"] = loss_to_json(cfg.loss);
    j["train"] = {{"lr", cfg.train.lr},
                  {"weight_decay", cfg.train.weight_decay},
                  {"batch_size", cfg.train.batch_size},
                  {"lr_decay", cfg.train.lr_decay},
                  {"stagnation_patience", cfg.train.stagnation_patience},
                  {"early_stop_patience", cfg.train.early_stop_patience},
                  {"max_epochs", cfg.train.max_epochs},
                  {"seed", cfg.train.seed}};
    j["seeds"] = cfg.seeds;
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

}  // namespace sparseloc
