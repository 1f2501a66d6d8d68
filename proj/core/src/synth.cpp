#include "sparseloc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "sparseloc/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sparseloc {

void SceneSpec::validate() const {
    if (height < 16 || width < 16) throw ConfigError("SceneSpec: scene must be at least 16x16");
    if (instances_min > instances_max || instances_min < 1 || instances_max > 64)
        throw ConfigError("SceneSpec: instances range must satisfy 1 <= min <= max <= 64");
    if (nodule_radius_min > nodule_radius_max || nodule_radius_min <= 0)
        throw ConfigError("SceneSpec: bad nodule radius range");
    if (sparse_min > sparse_max || sparse_min < 1)
        throw ConfigError("SceneSpec: bad sparse label range");
    if (texture_seed_groups < 1) throw ConfigError("SceneSpec: need at least one group");
    if (stations != 6) throw ConfigError("SceneSpec: station count is fixed at 6");
}

namespace {

// Smooth value noise: a coarse control grid upsampled bilinearly.
void render_background(std::vector<double>& image, int H, int W, std::mt19937_64& rng) {
    constexpr int G = 9;
    std::uniform_real_distribution<double> base_dist(0.18, 0.42);
    std::uniform_real_distribution<double> jitter(-0.06, 0.06);
    double grid[3][G][G];
    const double base = base_dist(rng);
    for (int gy = 0; gy < G; ++gy)
        for (int gx = 0; gx < G; ++gx) {
            const double v = base + jitter(rng);
            grid[0][gy][gx] = v + 0.10 + jitter(rng) * 0.5;  // slight red tint
            grid[1][gy][gx] = v + jitter(rng) * 0.5;
            grid[2][gy][gx] = v - 0.04 + jitter(rng) * 0.5;
        }
    const size_t plane = static_cast<size_t>(H) * W;
    for (int ch = 0; ch < 3; ++ch) {
        for (int y = 0; y < H; ++y) {
            const double fy = static_cast<double>(y) / (H - 1) * (G - 1);
            const int y0 = std::min(G - 2, static_cast<int>(fy));
            const double ty = fy - y0;
            for (int x = 0; x < W; ++x) {
                const double fx = static_cast<double>(x) / (W - 1) * (G - 1);
                const int x0 = std::min(G - 2, static_cast<int>(fx));
                const double tx = fx - x0;
                const double v =
                    grid[ch][y0][x0] * (1 - ty) * (1 - tx) + grid[ch][y0][x0 + 1] * (1 - ty) * tx +
                    grid[ch][y0 + 1][x0] * ty * (1 - tx) + grid[ch][y0 + 1][x0 + 1] * ty * tx;
                image[ch * plane + static_cast<size_t>(y) * W + x] = std::clamp(v, 0.0, 1.0);
            }
        }
    }
}

// 6-cell Voronoi partition over distinct integer seed pixels; each cell
// contains at least its own seed, so every label 1..6 is present.
std::vector<uint8_t> render_stations(int H, int W, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> ry(0, H - 1), rx(0, W - 1);
    std::vector<std::pair<int, int>> seeds;
    while (static_cast<int>(seeds.size()) < 6) {
        const std::pair<int, int> p{ry(rng), rx(rng)};
        if (std::find(seeds.begin(), seeds.end(), p) == seeds.end()) seeds.push_back(p);
    }
    std::vector<uint8_t> map(static_cast<size_t>(H) * W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            int best = 0;
            long best_d = -1;
            for (int s = 0; s < 6; ++s) {
                const long dy = y - seeds[s].first, dx = x - seeds[s].second;
                const long d = dy * dy + dx * dx;
                if (best_d < 0 || d < best_d) {
                    best_d = d;
                    best = s;
                }
            }
            map[static_cast<size_t>(y) * W + x] = static_cast<uint8_t>(best + 1);
        }
    return map;
}

struct NoduleShape {
    int cy, cx;
    double radius, phase1, phase2;

    double boundary(double theta) const {
        return radius * (1.0 + 0.25 * std::sin(3.0 * theta + phase1) +
                         0.15 * std::sin(5.0 * theta + phase2));
    }
};

std::vector<uint8_t> rasterize(const NoduleShape& s, int H, int W) {
    std::vector<uint8_t> mask(static_cast<size_t>(H) * W, 0);
    const int reach = static_cast<int>(std::ceil(s.radius * 1.45));
    for (int y = std::max(0, s.cy - reach); y <= std::min(H - 1, s.cy + reach); ++y)
        for (int x = std::max(0, s.cx - reach); x <= std::min(W - 1, s.cx + reach); ++x) {
            const double dy = y - s.cy, dx = x - s.cx;
            const double d = std::hypot(dy, dx);
            if (d <= s.boundary(std::atan2(dy, dx)))
                mask[static_cast<size_t>(y) * W + x] = 1;
        }
    return mask;
}

int mask_area(const std::vector<uint8_t>& m) {
    return static_cast<int>(std::count(m.begin(), m.end(), uint8_t{1}));
}

int mask_overlap(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
    int n = 0;
    for (size_t i = 0; i < a.size(); ++i) n += a[i] & b[i];
    return n;
}

}  // namespace

Sample generate_scene(const SceneSpec& spec, uint64_t seed, int group_id) {
    spec.validate();
    const int H = spec.height, W = spec.width;
    const size_t plane = static_cast<size_t>(H) * W;

    Sample sample;
    sample.height = H;
    sample.width = W;
    sample.group_id = group_id;
    sample.image.resize(3 * plane);

    std::mt19937_64 group_rng(mix_seed(0x67726f75, static_cast<uint64_t>(group_id)));
    render_background(sample.image, H, W, group_rng);
    sample.station_map = render_stations(H, W, group_rng);

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> count_dist(spec.instances_min, spec.instances_max);
    const int n_inst = count_dist(rng);

    std::uniform_real_distribution<double> radius_dist(spec.nodule_radius_min,
                                                       spec.nodule_radius_max);
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> amp_dist(0.30, 0.50);

    for (int i = 0; i < n_inst; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            NoduleShape shape;
            shape.radius = radius_dist(rng);
            const int margin = static_cast<int>(std::ceil(shape.radius * 1.45)) + 1;
            if (2 * margin >= H || 2 * margin >= W)
                throw GenerationError("generate_scene: nodule radius too large for the scene");
            std::uniform_int_distribution<int> cy_dist(margin, H - 1 - margin);
            std::uniform_int_distribution<int> cx_dist(margin, W - 1 - margin);
            shape.cy = cy_dist(rng);
            shape.cx = cx_dist(rng);
            shape.phase1 = phase_dist(rng);
            shape.phase2 = phase_dist(rng);

            bool duplicate_center = false;
            for (const Instance& inst : sample.instances)
                if (inst.center.row == shape.cy && inst.center.col == shape.cx)
                    duplicate_center = true;
            if (duplicate_center) continue;

            std::vector<uint8_t> mask = rasterize(shape, H, W);
            const int area = mask_area(mask);
            bool ok = area > 0;
            for (const Instance& inst : sample.instances) {
                if (!ok) break;
                const int inter = mask_overlap(mask, inst.mask);
                const int limit = static_cast<int>(
                    0.2 * std::min(area, mask_area(inst.mask)));
                if (inter > limit) ok = false;
            }
            if (!ok) continue;

            // reddish intensity bump over the perturbed support
            const double amp = amp_dist(rng);
            const double gains[3] = {1.0, 0.55, 0.35};
            const int reach = static_cast<int>(std::ceil(shape.radius * 1.45));
            for (int y = shape.cy - reach; y <= shape.cy + reach; ++y)
                for (int x = shape.cx - reach; x <= shape.cx + reach; ++x) {
                    if (!mask[static_cast<size_t>(y) * W + x]) continue;
                    const double dy = y - shape.cy, dx = x - shape.cx;
                    const double rb = shape.boundary(std::atan2(dy, dx));
                    const double u = std::hypot(dy, dx) / rb;
                    const double profile = std::max(0.0, 1.0 - u * u);
                    for (int ch = 0; ch < 3; ++ch) {
                        double& v = sample.image[ch * plane + static_cast<size_t>(y) * W + x];
                        v = std::clamp(v + gains[ch] * amp * profile, 0.0, 1.0);
                    }
                }

            Instance inst;
            inst.center = Keypoint{shape.cy, shape.cx, 0.0};
            inst.mask = std::move(mask);
            sample.instances.push_back(std::move(inst));
            placed = true;
        }
        if (!placed)
            throw GenerationError("generate_scene: could not place nodule " + std::to_string(i) +
                                  " after bounded retries");
    }

    sample.station_presence.fill(0);
    for (const Instance& inst : sample.instances) {
        const uint8_t s = sample.station_map[static_cast<size_t>(inst.center.row) * W +
                                             inst.center.col];
        sample.station_presence[s - 1] = 1;
    }
    return sample;
}

void sparsify_labels(Sample& sample, const SceneSpec& spec, uint64_t seed) {
    if (sample.instances.empty())
        throw InputError("sparsify_labels: sample has no instances");
    std::mt19937_64 rng(seed);
    const int n = static_cast<int>(sample.instances.size());
    std::uniform_int_distribution<int> count_dist(spec.sparse_min, spec.sparse_max);
    const int count = std::min(count_dist(rng), n);

    std::vector<int> indices(n);
    for (int i = 0; i < n; ++i) indices[i] = i;
    std::shuffle(indices.begin(), indices.end(), rng);
    indices.resize(count);
    std::sort(indices.begin(), indices.end());

    sample.sparse_labels.points.clear();
    for (int idx : indices) sample.sparse_labels.points.push_back(sample.instances[idx].center);
}

namespace {

json rle_encode_binary(const std::vector<uint8_t>& mask) {
    json runs = json::array();
    size_t i = 0;
    while (i < mask.size()) {
        if (mask[i]) {
            size_t start = i;
            while (i < mask.size() && mask[i]) ++i;
            runs.push_back({start, i - start});
        } else {
            ++i;
        }
    }
    return runs;
}

std::vector<uint8_t> rle_decode_binary(const json& runs, size_t size) {
    std::vector<uint8_t> mask(size, 0);
    for (const auto& run : runs) {
        const size_t start = run[0].get<size_t>(), len = run[1].get<size_t>();
        if (start + len > size) throw IoError("corrupt mask run-length data");
        std::fill(mask.begin() + start, mask.begin() + start + len, uint8_t{1});
    }
    return mask;
}

json rle_encode_labels(const std::vector<uint8_t>& map) {
    json runs = json::array();
    size_t i = 0;
    while (i < map.size()) {
        const uint8_t v = map[i];
        size_t start = i;
        while (i < map.size() && map[i] == v) ++i;
        runs.push_back({v, i - start});
    }
    return runs;
}

std::vector<uint8_t> rle_decode_labels(const json& runs, size_t size) {
    std::vector<uint8_t> map;
    map.reserve(size);
    for (const auto& run : runs) {
        const uint8_t v = run[0].get<uint8_t>();
        const size_t len = run[1].get<size_t>();
        map.insert(map.end(), len, v);
    }
    if (map.size() != size) throw IoError("corrupt station map run-length data");
    return map;
}

json spec_to_json(const SceneSpec& s) {
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

SceneSpec spec_from_json(const json& j) {
    SceneSpec s;
    s.height = j.at("height");
    s.width = j.at("width");
    s.instances_mean = j.at("instances_mean");
    s.instances_min = j.at("instances_min");
    s.instances_max = j.at("instances_max");
    s.nodule_radius_min = j.at("nodule_radius_min");
    s.nodule_radius_max = j.at("nodule_radius_max");
    s.sparse_min = j.at("sparse_min");
    s.sparse_max = j.at("sparse_max");
    s.texture_seed_groups = j.at("texture_seed_groups");
    s.stations = j.at("stations");
    return s;
}

}  // namespace

void save_sample(const Sample& sample, const std::string& image_path,
                 const std::string& meta_path) {
    const size_t plane = static_cast<size_t>(sample.height) * sample.width;
    std::vector<uint8_t> rgb(plane * 3);
    for (size_t p = 0; p < plane; ++p)
        for (int ch = 0; ch < 3; ++ch)
            rgb[p * 3 + ch] = static_cast<uint8_t>(
                std::lround(std::clamp(sample.image[ch * plane + p], 0.0, 1.0) * 255.0));
    write_png_rgb8(image_path, rgb, sample.height, sample.width);

    json j;
    j["height"] = sample.height;
    j["width"] = sample.width;
    j["group_id"] = sample.group_id;
    json instances = json::array();
    for (const Instance& inst : sample.instances)
        instances.push_back({{"center", {inst.center.row, inst.center.col}},
                             {"rle", rle_encode_binary(inst.mask)}});
    j["instances"] = std::move(instances);
    json sparse = json::array();
    for (const Keypoint& kp : sample.sparse_labels.points) sparse.push_back({kp.row, kp.col});
    j["sparse_labels"] = std::move(sparse);
    j["station_map_rle"] = rle_encode_labels(sample.station_map);
    j["station_presence"] = sample.station_presence;

    std::ofstream f(meta_path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + meta_path);
    f << j.dump(2) << "\n";
}

Sample load_sample(const std::string& image_path, const std::string& meta_path) {
    std::ifstream f(meta_path);
    if (!f) throw IoError("cannot open: " + meta_path);
    json j = json::parse(f);

    Sample sample;
    sample.height = j.at("height");
    sample.width = j.at("width");
    sample.group_id = j.at("group_id");
    const size_t plane = static_cast<size_t>(sample.height) * sample.width;

    const PngImage png = read_png_rgb8(image_path);
    if (png.height != sample.height || png.width != sample.width)
        throw IoError("image/metadata dimension mismatch: " + image_path);
    sample.image.resize(3 * plane);
    for (size_t p = 0; p < plane; ++p)
        for (int ch = 0; ch < 3; ++ch)
            sample.image[ch * plane + p] = png.rgb[p * 3 + ch] / 255.0;

    for (const auto& inst_j : j.at("instances")) {
        Instance inst;
        inst.center = Keypoint{inst_j.at("center")[0], inst_j.at("center")[1], 0.0};
        inst.mask = rle_decode_binary(inst_j.at("rle"), plane);
        sample.instances.push_back(std::move(inst));
    }
    for (const auto& kp_j : j.at("sparse_labels"))
        sample.sparse_labels.points.push_back(Keypoint{kp_j[0], kp_j[1], 0.0});
    sample.station_map = rle_decode_labels(j.at("station_map_rle"), plane);
    const auto presence = j.at("station_presence");
    for (size_t s = 0; s < 6; ++s) sample.station_presence[s] = presence[s];
    return sample;
}

DatasetManifest build_dataset(const SceneSpec& spec, const SplitCounts& counts,
                              uint64_t master_seed, const std::string& out_dir) {
    spec.validate();
    if (counts.train < 1 || counts.val < 1 || counts.test < 1)
        throw ConfigError("build_dataset: each split needs at least one sample");

    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "samples", ec);
    if (ec) throw IoError("cannot create dataset directory: " + out_dir);

    // Assign whole groups to splits before generating anything.
    const int G = spec.texture_seed_groups;
    std::vector<int> groups(G);
    for (int i = 0; i < G; ++i) groups[i] = i;
    std::mt19937_64 rng(mix_seed(master_seed, 0x73706c69));
    std::shuffle(groups.begin(), groups.end(), rng);

    const int total = counts.train + counts.val + counts.test;
    int g_train = std::max(1, static_cast<int>(std::lround(double(G) * counts.train / total)));
    int g_val = std::max(1, static_cast<int>(std::lround(double(G) * counts.val / total)));
    if (g_train + g_val > G - 1) g_train = std::max(1, G - 1 - g_val);
    const int g_test = G - g_train - g_val;
    if (g_test < 1) throw ConfigError("build_dataset: too few groups for three splits");

    struct SplitPlan {
        std::string name;
        int count;
        std::vector<int> groups;
    };
    std::vector<SplitPlan> plans(3);
    plans[0] = {"train", counts.train, {groups.begin(), groups.begin() + g_train}};
    plans[1] = {"val", counts.val, {groups.begin() + g_train, groups.begin() + g_train + g_val}};
    plans[2] = {"test", counts.test, {groups.begin() + g_train + g_val, groups.end()}};

    DatasetManifest manifest;
    manifest.spec = spec;
    manifest.master_seed = master_seed;

    int global_index = 0;
    for (const SplitPlan& plan : plans) {
        for (int i = 0; i < plan.count; ++i, ++global_index) {
            const int group = plan.groups[i % plan.groups.size()];
            const uint64_t scene_seed = mix_seed(master_seed, static_cast<uint64_t>(global_index));
            Sample sample = generate_scene(spec, scene_seed, group);
            sparsify_labels(sample, spec, mix_seed(scene_seed, 1));

            char name[64];
            std::snprintf(name, sizeof(name), "samples/%s_%05d", plan.name.c_str(), i);
            const std::string image_rel = std::string(name) + ".png";
            const std::string meta_rel = std::string(name) + ".json";
            save_sample(sample, (fs::path(out_dir) / image_rel).string(),
                        (fs::path(out_dir) / meta_rel).string());
            manifest.entries.push_back({image_rel, meta_rel, plan.name, group});
        }
    }

    save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    json j;
    j["master_seed"] = manifest.master_seed;
    j["spec"] = spec_to_json(manifest.spec);
    json samples = json::array();
    for (const ManifestEntry& e : manifest.entries)
        samples.push_back({{"image", e.image_path},
                           {"meta", e.meta_path},
                           {"split", e.split},
                           {"group", e.group_id}});
    j["samples"] = std::move(samples);
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest: " + path);
    json j = json::parse(f);
    DatasetManifest manifest;
    manifest.master_seed = j.at("master_seed");
    manifest.spec = spec_from_json(j.at("spec"));
    for (const auto& e : j.at("samples"))
        manifest.entries.push_back(
            {e.at("image"), e.at("meta"), e.at("split"), e.at("group")});
    return manifest;
}

std::vector<Sample> load_split(const DatasetManifest& manifest, const std::string& dataset_dir,
                               const std::string& split) {
    std::vector<Sample> samples;
    for (const ManifestEntry& e : manifest.entries) {
        if (e.split != split) continue;
        samples.push_back(load_sample((fs::path(dataset_dir) / e.image_path).string(),
                                      (fs::path(dataset_dir) / e.meta_path).string()));
    }
    return samples;
}

}  // namespace sparseloc
