#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparseloc/types.hpp"

namespace sparseloc {

/// Stride-1 fully convolutional net: 3x3 same-padding convolutions with a
/// rectifier on hidden layers and a raw logit output. `channels` lists the
/// plan including input and output, e.g. {3,16,32,32,16,1}.
struct ModelSpec {
    std::vector<int> channels = {3, 16, 32, 32, 16, 1};

    int num_layers() const { return static_cast<int>(channels.size()) - 1; }
    void validate() const;
};

int parameter_count(const ModelSpec& spec);

struct ModelState {
    ModelSpec spec;
    uint64_t seed = 0;
    // per layer: weights [out][in][3][3] flattened, biases [out]
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

/// Fan-in-scaled uniform weight init, zero biases; deterministic in (spec, seed).
ModelState init_model(const ModelSpec& spec, uint64_t seed);

/// Post-activation planes retained for backward; index 0 is the input image.
struct ForwardTrace {
    int height = 0;
    int width = 0;
    std::vector<std::vector<double>> activations;
};

/// image is [3][h][w] row-major, values in [0,1]. Returns an h x w logit map.
Heatmap forward(const ModelState& state, const std::vector<double>& image, int height, int width,
                ForwardTrace* trace = nullptr);

struct ModelGradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

ModelGradients backward(const ModelState& state, const ForwardTrace& trace,
                        const std::vector<double>& grad_output);

/// Accumulate `g` into `acc` (same layout), scaled by `scale`.
void accumulate_gradients(ModelGradients& acc, const ModelGradients& g, double scale);
ModelGradients zero_gradients(const ModelSpec& spec);

/// Versioned binary checkpoint: magic, version, channel plan, seed, then the
/// parameters as little-endian 64-bit reals in layer order.
void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

}  // namespace sparseloc
