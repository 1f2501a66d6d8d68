#pragma once

#include <utility>
#include <vector>

#include "sparseloc/types.hpp"

namespace sparseloc {

enum class OverlapMode { clamp, sum };
enum class DecodeActivation { identity, sigmoid };

/// Gaussian target parameters. Contributions beyond truncation_radius are
/// exactly zero so that the "H(p)=0" branch of the masked losses is
/// well-defined.
struct CodecParams {
    double delta = 2.0;
    double truncation_radius = 6.0;
    OverlapMode overlap_mode = OverlapMode::clamp;

    void validate() const;
};

struct DecodeParams {
    int window = 5;
    int k = 30;
    double t = 0.3;
    DecodeActivation activation = DecodeActivation::identity;

    void validate() const;
};

/// Renders the sparse keypoints as a sum of truncated Gaussians
/// exp(-||p - x_j||^2 / delta^2). Under OverlapMode::clamp the summed value
/// is clipped to 1 so the result stays a valid probability map.
Heatmap encode_target(const KeypointSet& keypoints, int height, int width,
                      const CodecParams& params);

/// Pixels that are maxima of their window x window neighborhood (clipped at
/// borders). On a connected plateau of equal maxima only the row-major-first
/// pixel is reported.
std::vector<std::pair<Keypoint, double>> nms_local_maxima(const Heatmap& h, int window);

/// activation -> NMS -> threshold t -> sort by score descending -> top-k.
/// Logit heatmaps must be decoded with sigmoid; target/probability maps with
/// identity.
KeypointSet decode_points(const Heatmap& h, const DecodeParams& params);

}  // namespace sparseloc
