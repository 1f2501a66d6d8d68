#include "sparseloc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace sparseloc {

void ModelSpec::validate() const {
    if (channels.size() < 2) throw ConfigError("ModelSpec: need at least one layer");
    for (int c : channels)
        if (c < 1) throw ConfigError("ModelSpec: channel counts must be >= 1");
    if (channels.back() != 1) throw ConfigError("ModelSpec: output must have 1 channel");
}

int parameter_count(const ModelSpec& spec) {
    int count = 0;
    for (int l = 0; l < spec.num_layers(); ++l)
        count += spec.channels[l] * spec.channels[l + 1] * 9 + spec.channels[l + 1];
    return count;
}

ModelState init_model(const ModelSpec& spec, uint64_t seed) {
    spec.validate();
    ModelState state;
    state.spec = spec;
    state.seed = seed;
    std::mt19937_64 rng(seed);
    for (int l = 0; l < spec.num_layers(); ++l) {
        const int cin = spec.channels[l], cout = spec.channels[l + 1];
        const double bound = std::sqrt(3.0 / (cin * 9));  // fan-in-scaled uniform
        std::uniform_real_distribution<double> dist(-bound, bound);
        std::vector<double> w(static_cast<size_t>(cout) * cin * 9);
        for (double& v : w) v = dist(rng);
        state.weights.push_back(std::move(w));
        state.biases.emplace_back(cout, 0.0);
    }
    return state;
}

namespace {

// out_plane += 3x3 conv of in_plane with taps w[9], zero padding.
void conv3x3_accum(const double* in, const double* w, double* out, int H, int W) {
    for (int ky = 0; ky < 3; ++ky) {
        const double w0 = w[ky * 3 + 0], w1 = w[ky * 3 + 1], w2 = w[ky * 3 + 2];
        const int y0 = std::max(0, 1 - ky), y1 = std::min(H - 1, H - ky);
        for (int y = y0; y <= y1; ++y) {
            const double* ir = in + static_cast<size_t>(y + ky - 1) * W;
            double* orow = out + static_cast<size_t>(y) * W;
            orow[0] += w1 * ir[0] + w2 * ir[1];
#pragma omp simd
            for (int x = 1; x < W - 1; ++x)
                orow[x] += w0 * ir[x - 1] + w1 * ir[x] + w2 * ir[x + 1];
            orow[W - 1] += w0 * ir[W - 2] + w1 * ir[W - 1];
        }
    }
}

// gw[9] += correlation of gout with in (weight gradient of the same conv).
void conv3x3_weight_grad(const double* in, const double* gout, double* gw, int H, int W) {
    for (int ky = 0; ky < 3; ++ky) {
        double a0 = 0.0, a1 = 0.0, a2 = 0.0;
        const int y0 = std::max(0, 1 - ky), y1 = std::min(H - 1, H - ky);
        for (int y = y0; y <= y1; ++y) {
            const double* ir = in + static_cast<size_t>(y + ky - 1) * W;
            const double* gr = gout + static_cast<size_t>(y) * W;
            double s0 = 0.0, s1 = 0.0, s2 = 0.0;
#pragma omp simd reduction(+ : s0, s1, s2)
            for (int x = 1; x < W - 1; ++x) {
                s0 += gr[x] * ir[x - 1];
                s1 += gr[x] * ir[x];
                s2 += gr[x] * ir[x + 1];
            }
            s1 += gr[0] * ir[0] + gr[W - 1] * ir[W - 1];
            s2 += gr[0] * ir[1];
            s0 += gr[W - 1] * ir[W - 2];
            a0 += s0;
            a1 += s1;
            a2 += s2;
        }
        gw[ky * 3 + 0] += a0;
        gw[ky * 3 + 1] += a1;
        gw[ky * 3 + 2] += a2;
    }
}

}  // namespace

Heatmap forward(const ModelState& state, const std::vector<double>& image, int height, int width,
                ForwardTrace* trace) {
    const ModelSpec& spec = state.spec;
    const size_t plane = static_cast<size_t>(height) * width;
    if (image.size() != 3 * plane || spec.channels[0] != 3)
        throw DimensionError("forward: image must be 3 x h x w");
    for (double v : image)
        if (!std::isfinite(v)) throw InputError("forward: non-finite input image value");

    std::vector<double> cur = image;
    if (trace) {
        trace->height = height;
        trace->width = width;
        trace->activations.clear();
        trace->activations.push_back(cur);
    }

    const int L = spec.num_layers();
    for (int l = 0; l < L; ++l) {
        const int cin = spec.channels[l], cout = spec.channels[l + 1];
        std::vector<double> next(static_cast<size_t>(cout) * plane);
        for (int o = 0; o < cout; ++o) {
            double* out_plane = next.data() + o * plane;
            std::fill(out_plane, out_plane + plane, state.biases[l][o]);
            for (int i = 0; i < cin; ++i)
                conv3x3_accum(cur.data() + i * plane,
                              state.weights[l].data() + (static_cast<size_t>(o) * cin + i) * 9,
                              out_plane, height, width);
        }
        if (l < L - 1) {
            for (double& v : next) v = v > 0.0 ? v : 0.0;  // rectifier on hidden layers
        }
        cur = std::move(next);
        if (trace && l < L - 1) trace->activations.push_back(cur);
    }

    Heatmap out(height, width, HeatmapRole::logit);
    out.values = std::move(cur);
    return out;
}

ModelGradients zero_gradients(const ModelSpec& spec) {
    ModelGradients g;
    for (int l = 0; l < spec.num_layers(); ++l) {
        g.weights.emplace_back(static_cast<size_t>(spec.channels[l]) * spec.channels[l + 1] * 9,
                               0.0);
        g.biases.emplace_back(spec.channels[l + 1], 0.0);
    }
    return g;
}

void accumulate_gradients(ModelGradients& acc, const ModelGradients& g, double scale) {
    for (size_t l = 0; l < acc.weights.size(); ++l) {
        for (size_t i = 0; i < acc.weights[l].size(); ++i)
            acc.weights[l][i] += scale * g.weights[l][i];
        for (size_t i = 0; i < acc.biases[l].size(); ++i)
            acc.biases[l][i] += scale * g.biases[l][i];
    }
}

ModelGradients backward(const ModelState& state, const ForwardTrace& trace,
                        const std::vector<double>& grad_output) {
    const ModelSpec& spec = state.spec;
    const int H = trace.height, W = trace.width;
    const size_t plane = static_cast<size_t>(H) * W;
    const int L = spec.num_layers();
    if (grad_output.size() != plane)
        throw DimensionError("backward: grad_output shape does not match forward");
    if (static_cast<int>(trace.activations.size()) != L)
        throw DimensionError("backward: trace does not match model spec");

    ModelGradients grads = zero_gradients(spec);
    std::vector<double> gout = grad_output;

    for (int l = L - 1; l >= 0; --l) {
        const int cin = spec.channels[l], cout = spec.channels[l + 1];
        const std::vector<double>& in_act = trace.activations[l];

        for (int o = 0; o < cout; ++o) {
            const double* gplane = gout.data() + o * plane;
            double b = 0.0;
            for (size_t i = 0; i < plane; ++i) b += gplane[i];
            grads.biases[l][o] = b;
            for (int i = 0; i < cin; ++i)
                conv3x3_weight_grad(in_act.data() + i * plane, gplane,
                                    grads.weights[l].data() +
                                        (static_cast<size_t>(o) * cin + i) * 9,
                                    H, W);
        }

        if (l == 0) break;

        // grad wrt this layer's input: conv of gout with flipped kernels
        std::vector<double> gin(static_cast<size_t>(cin) * plane, 0.0);
        for (int i = 0; i < cin; ++i) {
            for (int o = 0; o < cout; ++o) {
                const double* w = state.weights[l].data() + (static_cast<size_t>(o) * cin + i) * 9;
                double wf[9];
                for (int t = 0; t < 9; ++t) wf[t] = w[8 - t];
                conv3x3_accum(gout.data() + o * plane, wf, gin.data() + i * plane, H, W);
            }
        }
        // rectifier backward through the stored post-activation
        const std::vector<double>& act = trace.activations[l];
        for (size_t i = 0; i < gin.size(); ++i)
            if (act[i] <= 0.0) gin[i] = 0.0;
        gout = std::move(gin);
    }
    return grads;
}

namespace {
constexpr char kMagic[4] = {'S', 'L', 'C', 'K'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_raw(std::ifstream& f, T& v) {
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw CheckpointError("checkpoint truncated or unreadable");
}
}  // namespace

void save_checkpoint(const ModelState& state, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open checkpoint for writing: " + path);
    f.write(kMagic, 4);
    write_raw(f, kVersion);
    const uint32_t nch = static_cast<uint32_t>(state.spec.channels.size());
    write_raw(f, nch);
    for (int c : state.spec.channels) write_raw(f, static_cast<int32_t>(c));
    write_raw(f, state.seed);
    for (size_t l = 0; l < state.weights.size(); ++l) {
        f.write(reinterpret_cast<const char*>(state.weights[l].data()),
                static_cast<std::streamsize>(state.weights[l].size() * sizeof(double)));
        f.write(reinterpret_cast<const char*>(state.biases[l].data()),
                static_cast<std::streamsize>(state.biases[l].size() * sizeof(double)));
    }
    if (!f) throw IoError("failed writing checkpoint: " + path);
}

ModelState load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("not a model checkpoint: " + path);
    uint32_t version = 0;
    read_raw(f, version);
    if (version != kVersion)
        throw CheckpointError("incompatible checkpoint version " + std::to_string(version) +
                              " (expected " + std::to_string(kVersion) + ")");
    uint32_t nch = 0;
    read_raw(f, nch);
    if (nch < 2 || nch > 64) throw CheckpointError("corrupt checkpoint: bad channel plan");
    ModelSpec spec;
    spec.channels.resize(nch);
    for (uint32_t i = 0; i < nch; ++i) {
        int32_t c = 0;
        read_raw(f, c);
        spec.channels[i] = c;
    }
    spec.validate();

    ModelState state;
    state.spec = spec;
    read_raw(f, state.seed);
    for (int l = 0; l < spec.num_layers(); ++l) {
        std::vector<double> w(static_cast<size_t>(spec.channels[l]) * spec.channels[l + 1] * 9);
        f.read(reinterpret_cast<char*>(w.data()),
               static_cast<std::streamsize>(w.size() * sizeof(double)));
        std::vector<double> b(spec.channels[l + 1]);
        f.read(reinterpret_cast<char*>(b.data()),
               static_cast<std::streamsize>(b.size() * sizeof(double)));
        if (!f) throw CheckpointError("checkpoint truncated: " + path);
        for (double v : w)
            if (!std::isfinite(v)) throw CheckpointError("corrupt checkpoint: non-finite weight");
        state.weights.push_back(std::move(w));
        state.biases.push_back(std::move(b));
    }
    f.peek();
    if (!f.eof()) throw CheckpointError("corrupt checkpoint: trailing data");
    return state;
}

}  // namespace sparseloc
