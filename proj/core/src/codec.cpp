#include "sparseloc/codec.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

namespace sparseloc {

void CodecParams::validate() const {
    if (!(delta > 0.0)) throw ConfigError("CodecParams: delta must be > 0");
    if (!(truncation_radius > 0.0)) throw ConfigError("CodecParams: truncation_radius must be > 0");
    if (truncation_radius < delta)
        throw ConfigError("CodecParams: truncation_radius must be >= delta");
}

void DecodeParams::validate() const {
    if (window < 3 || window % 2 == 0)
        throw ConfigError("DecodeParams: window must be an odd integer >= 3");
    if (k < 1) throw ConfigError("DecodeParams: k must be >= 1");
    if (t < 0.0 || t > 1.0) throw ConfigError("DecodeParams: t must be in [0,1]");
}

Heatmap encode_target(const KeypointSet& keypoints, int height, int width,
                      const CodecParams& params) {
    params.validate();
    for (const Keypoint& kp : keypoints.points) {
        if (kp.row < 0 || kp.row >= height || kp.col < 0 || kp.col >= width)
            throw BoundsError("encode_target: keypoint (" + std::to_string(kp.row) + "," +
                              std::to_string(kp.col) + ") outside " + std::to_string(height) +
                              "x" + std::to_string(width) + " heatmap");
    }

    Heatmap out(height, width, HeatmapRole::target);
    const double inv_d2 = 1.0 / (params.delta * params.delta);
    const double r = params.truncation_radius;
    const double r2 = r * r;
    const int ri = static_cast<int>(std::floor(r));

    for (const Keypoint& kp : keypoints.points) {
        const int r0 = std::max(0, kp.row - ri);
        const int r1 = std::min(height - 1, kp.row + ri);
        const int c0 = std::max(0, kp.col - ri);
        const int c1 = std::min(width - 1, kp.col + ri);
        for (int y = r0; y <= r1; ++y) {
            const double dy = y - kp.row;
            for (int x = c0; x <= c1; ++x) {
                const double dx = x - kp.col;
                const double d2 = dy * dy + dx * dx;
                if (d2 > r2) continue;
                out.at(y, x) += std::exp(-d2 * inv_d2);
            }
        }
    }
    if (params.overlap_mode == OverlapMode::clamp) {
        for (double& v : out.values) v = std::min(v, 1.0);
    }
    return out;
}

std::vector<std::pair<Keypoint, double>> nms_local_maxima(const Heatmap& h, int window) {
    if (window < 3 || window % 2 == 0)
        throw ConfigError("nms_local_maxima: window must be odd and >= 3");
    const int H = h.height, W = h.width;
    const int rad = window / 2;

    std::vector<uint8_t> candidate(static_cast<size_t>(H) * W, 0);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double v = h.at(y, x);
            const int y0 = std::max(0, y - rad), y1 = std::min(H - 1, y + rad);
            const int x0 = std::max(0, x - rad), x1 = std::min(W - 1, x + rad);
            bool is_max = true;
            for (int yy = y0; yy <= y1 && is_max; ++yy)
                for (int xx = x0; xx <= x1; ++xx)
                    if (h.at(yy, xx) > v) {
                        is_max = false;
                        break;
                    }
            candidate[static_cast<size_t>(y) * W + x] = is_max ? 1 : 0;
        }
    }

    // Collapse 8-connected plateaus of equal-valued candidates to their
    // row-major-first pixel.
    std::vector<std::pair<Keypoint, double>> result;
    std::vector<uint8_t> visited(static_cast<size_t>(H) * W, 0);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const size_t idx = static_cast<size_t>(y) * W + x;
            if (!candidate[idx] || visited[idx]) continue;
            const double v = h.at(y, x);
            result.push_back({Keypoint{y, x, v}, v});
            std::deque<std::pair<int, int>> queue{{y, x}};
            visited[idx] = 1;
            while (!queue.empty()) {
                auto [cy, cx] = queue.front();
                queue.pop_front();
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                        const size_t nidx = static_cast<size_t>(ny) * W + nx;
                        if (visited[nidx] || !candidate[nidx]) continue;
                        if (h.at(ny, nx) != v) continue;
                        visited[nidx] = 1;
                        queue.push_back({ny, nx});
                    }
                }
            }
        }
    }
    return result;
}

KeypointSet decode_points(const Heatmap& h, const DecodeParams& params) {
    params.validate();
    if (h.role == HeatmapRole::logit && params.activation != DecodeActivation::sigmoid)
        throw ConfigError("decode_points: logit heatmaps require sigmoid activation");
    if (h.role != HeatmapRole::logit && params.activation != DecodeActivation::identity)
        throw ConfigError("decode_points: probability/target heatmaps require identity activation");

    Heatmap activated = h;
    if (params.activation == DecodeActivation::sigmoid) {
        for (double& v : activated.values) v = 1.0 / (1.0 + std::exp(-v));
        activated.role = HeatmapRole::probability;
    }

    auto maxima = nms_local_maxima(activated, params.window);
    std::erase_if(maxima, [&](const auto& m) { return m.second < params.t; });
    std::stable_sort(maxima.begin(), maxima.end(), [&](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        if (a.first.row != b.first.row) return a.first.row < b.first.row;
        return a.first.col < b.first.col;
    });
    if (static_cast<int>(maxima.size()) > params.k) maxima.resize(params.k);

    KeypointSet out;
    out.points.reserve(maxima.size());
    for (const auto& [kp, v] : maxima) out.points.push_back(kp);
    return out;
}

}  // namespace sparseloc
