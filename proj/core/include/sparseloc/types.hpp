#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparseloc {

struct BoundsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A single 2D point in pixel coordinates. `score` is the decoded
/// confidence; ground-truth points leave it at zero.
struct Keypoint {
    int row = 0;
    int col = 0;
    double score = 0.0;

    bool same_pixel(const Keypoint& o) const { return row == o.row && col == o.col; }
};

struct KeypointSet {
    std::vector<Keypoint> points;

    int n() const { return static_cast<int>(points.size()); }
    bool empty() const { return points.empty(); }
};

enum class HeatmapRole { target, logit, probability };

/// Row-major 2D grid of 64-bit reals with a declared role.
/// target/probability maps live in [0,1]; logit maps are unbounded.
struct Heatmap {
    int height = 0;
    int width = 0;
    HeatmapRole role = HeatmapRole::target;
    std::vector<double> values;

    Heatmap() = default;
    Heatmap(int h, int w, HeatmapRole r, double fill = 0.0)
        : height(h), width(w), role(r), values(static_cast<size_t>(h) * w, fill) {}

    double& at(int r, int c) { return values[static_cast<size_t>(r) * width + c]; }
    double at(int r, int c) const { return values[static_cast<size_t>(r) * width + c]; }
    size_t size() const { return values.size(); }
};

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    // splitmix64 finalizer over the combined value
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace sparseloc
