#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nsv/common.hpp"

namespace nsv::nn {

enum class Activation { sine, relu, none };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct LayerSpec {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation act = Activation::none;
};

/// Shape-compatible stack of dense layers. Weight matrices are (out x in)
/// row-major; the fingerprint pins the architecture so caches and
/// checkpoints can be validated against it.
struct MlpParams {
    std::vector<LayerSpec> specs;
    std::vector<Mat> weights;
    std::vector<Vec> biases;
    std::string fingerprint;

    std::size_t input_dim() const { return specs.front().in; }
    std::size_t output_dim() const { return specs.back().out; }
    std::size_t param_count() const;
};

std::string fingerprint_of(const std::vector<LayerSpec>& specs);

struct InitOptions {
    double omega0 = 30.0;      // first sine layer frequency scale
    double sine_scale = 1.0;   // extra scale on later sine layers
};

/// Deterministic initialization. Sine layers follow the periodic-activation
/// convention with omega0 folded into the weights; relu/linear layers are
/// Kaiming-uniform with zero bias.
MlpParams init_mlp(const std::vector<LayerSpec>& specs, std::uint64_t seed,
                   const InitOptions& opts = {});

/// Activations recorded by forward, sufficient to run backward.
struct ForwardCache {
    Vec input;
    std::vector<Vec> preacts;
    std::vector<Vec> outputs;
    std::string fingerprint;
};

/// Evaluate the net; when cache is non-null it is filled for backward.
Vec forward(const MlpParams& params, std::span<const double> x, ForwardCache* cache = nullptr);

/// Parameter gradients, same shapes as MlpParams.
struct Gradients {
    std::vector<Mat> weights;
    std::vector<Vec> biases;

    static Gradients zeros_like(const MlpParams& params);
    void scale(double s);
    void add_scaled(const Gradients& other, double s);
    double squared_norm() const;
};

/// Reverse-mode pass. Accumulates parameter gradients into `accum` when
/// non-null and returns the gradient with respect to the input. Throws
/// ComputeError if the cache was produced by a different architecture.
Vec backward(const MlpParams& params, const ForwardCache& cache,
             std::span<const double> output_grad, Gradients* accum);

/// Exact Jacobian (output_dim x input_dim), one backward pass per output row.
Mat jacobian_of_net(const MlpParams& params, std::span<const double> x);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    std::vector<Mat> m_w, v_w;
    std::vector<Vec> m_b, v_b;
    long step = 0;

    static AdamState init(const MlpParams& params, const AdamConfig& cfg = {});
};

/// One bias-corrected Adam update, in place. Deterministic: equal
/// (params, grads, state) always produce the same result.
void adam_step(MlpParams& params, const Gradients& grads, AdamState& state);

}  // namespace nsv::nn
