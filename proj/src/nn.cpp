#include "nsv/nn.hpp"

#include <cmath>

#include "nsv/rng.hpp"

namespace nsv::nn {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::sine: return "sine";
        case Activation::relu: return "relu";
        case Activation::none: return "none";
    }
    return "none";
}

Activation activation_from_name(const std::string& name) {
    if (name == "sine") return Activation::sine;
    if (name == "relu") return Activation::relu;
    if (name == "none") return Activation::none;
    throw ValidationError("unknown activation '" + name + "'");
}

std::string fingerprint_of(const std::vector<LayerSpec>& specs) {
    std::string fp;
    for (const LayerSpec& s : specs) {
        fp += std::to_string(s.in) + ">" + std::to_string(s.out);
        fp += activation_name(s.act)[0];
        fp += '|';
    }
    return fp;
}

std::size_t MlpParams::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < specs.size(); ++l) n += weights[l].a.size() + biases[l].size();
    return n;
}

MlpParams init_mlp(const std::vector<LayerSpec>& specs, std::uint64_t seed,
                   const InitOptions& opts) {
    if (specs.empty()) throw ValidationError("layer spec chain is empty");
    for (std::size_t l = 0; l < specs.size(); ++l) {
        if (specs[l].in < 1 || specs[l].out < 1)
            throw ValidationError("layer widths must be >= 1");
        if (l > 0 && specs[l].in != specs[l - 1].out)
            throw ValidationError("layer " + std::to_string(l) + " input width " +
                                  std::to_string(specs[l].in) + " does not chain from previous output " +
                                  std::to_string(specs[l - 1].out));
    }

    MlpParams p;
    p.specs = specs;
    p.fingerprint = fingerprint_of(specs);
    Rng rng(derive_seed(seed, "nn.init"));

    bool first_sine = true;
    for (const LayerSpec& s : specs) {
        const double fan_in = static_cast<double>(s.in);
        double w_bound;
        if (s.act == Activation::sine && first_sine) {
            w_bound = opts.omega0 / fan_in;
            first_sine = false;
        } else if (s.act == Activation::sine) {
            w_bound = std::sqrt(6.0 / fan_in) * opts.sine_scale;
        } else {
            w_bound = std::sqrt(6.0 / fan_in);
        }
        Mat w(s.out, s.in);
        for (double& v : w.a) v = rng.uniform(-w_bound, w_bound);
        Vec b(s.out, 0.0);
        if (s.act == Activation::sine)
            for (double& v : b) v = rng.uniform(-3.14159265358979323846, 3.14159265358979323846);
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    return p;
}

Vec forward(const MlpParams& params, std::span<const double> x, ForwardCache* cache) {
    check_dim(x, params.input_dim(), "net input");
    if (cache) {
        cache->input.assign(x.begin(), x.end());
        cache->preacts.clear();
        cache->outputs.clear();
        cache->fingerprint = params.fingerprint;
    }

    Vec cur(x.begin(), x.end());
    for (std::size_t l = 0; l < params.specs.size(); ++l) {
        const Mat& w = params.weights[l];
        const Vec& b = params.biases[l];
        Vec z(w.rows);
        for (std::size_t i = 0; i < w.rows; ++i) {
            const double* row = &w.a[i * w.cols];
            double acc = b[i];
            for (std::size_t j = 0; j < w.cols; ++j) acc += row[j] * cur[j];
            z[i] = acc;
        }
        Vec out(z.size());
        switch (params.specs[l].act) {
            case Activation::sine:
                for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::sin(z[i]);
                break;
            case Activation::relu:
                for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
                break;
            case Activation::none:
                out = z;
                break;
        }
        if (cache) {
            cache->preacts.push_back(std::move(z));
            cache->outputs.push_back(out);
        }
        cur = std::move(out);
    }
    return cur;
}

Gradients Gradients::zeros_like(const MlpParams& params) {
    Gradients g;
    for (std::size_t l = 0; l < params.specs.size(); ++l) {
        g.weights.emplace_back(params.weights[l].rows, params.weights[l].cols);
        g.biases.emplace_back(params.biases[l].size(), 0.0);
    }
    return g;
}

void Gradients::scale(double s) {
    for (Mat& w : weights)
        for (double& v : w.a) v *= s;
    for (Vec& b : biases)
        for (double& v : b) v *= s;
}

void Gradients::add_scaled(const Gradients& other, double s) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (std::size_t i = 0; i < weights[l].a.size(); ++i)
            weights[l].a[i] += s * other.weights[l].a[i];
        for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += s * other.biases[l][i];
    }
}

double Gradients::squared_norm() const {
    double s = 0.0;
    for (const Mat& w : weights)
        for (double v : w.a) s += v * v;
    for (const Vec& b : biases)
        for (double v : b) s += v * v;
    return s;
}

Vec backward(const MlpParams& params, const ForwardCache& cache,
             std::span<const double> output_grad, Gradients* accum) {
    if (cache.fingerprint != params.fingerprint)
        throw ComputeError("forward cache is stale: architecture fingerprint mismatch");
    check_dim(output_grad, params.output_dim(), "output gradient");

    Vec delta(output_grad.begin(), output_grad.end());
    for (std::size_t li = params.specs.size(); li-- > 0;) {
        const Mat& w = params.weights[li];
        const Vec& z = cache.preacts[li];
        // delta currently holds dL/d(layer output); convert to dL/dz.
        switch (params.specs[li].act) {
            case Activation::sine:
                for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= std::cos(z[i]);
                break;
            case Activation::relu:
                for (std::size_t i = 0; i < delta.size(); ++i)
                    if (z[i] <= 0.0) delta[i] = 0.0;
                break;
            case Activation::none:
                break;
        }
        const Vec& layer_in = li == 0 ? cache.input : cache.outputs[li - 1];
        if (accum) {
            Mat& gw = accum->weights[li];
            Vec& gb = accum->biases[li];
            for (std::size_t i = 0; i < w.rows; ++i) {
                const double d = delta[i];
                if (d != 0.0) {
                    double* grow = &gw.a[i * gw.cols];
                    for (std::size_t j = 0; j < w.cols; ++j) grow[j] += d * layer_in[j];
                }
                gb[i] += d;
            }
        }
        Vec prev(w.cols, 0.0);
        for (std::size_t i = 0; i < w.rows; ++i) {
            const double d = delta[i];
            if (d == 0.0) continue;
            const double* row = &w.a[i * w.cols];
            for (std::size_t j = 0; j < w.cols; ++j) prev[j] += d * row[j];
        }
        delta = std::move(prev);
    }
    return delta;
}

Mat jacobian_of_net(const MlpParams& params, std::span<const double> x) {
    ForwardCache cache;
    forward(params, x, &cache);
    Mat jac(params.output_dim(), params.input_dim());
    Vec unit(params.output_dim(), 0.0);
    for (std::size_t r = 0; r < jac.rows; ++r) {
        unit[r] = 1.0;
        Vec row = backward(params, cache, unit, nullptr);
        unit[r] = 0.0;
        for (std::size_t c = 0; c < jac.cols; ++c) jac(r, c) = row[c];
    }
    return jac;
}

AdamState AdamState::init(const MlpParams& params, const AdamConfig& cfg) {
    AdamState st;
    st.cfg = cfg;
    for (std::size_t l = 0; l < params.specs.size(); ++l) {
        st.m_w.emplace_back(params.weights[l].rows, params.weights[l].cols);
        st.v_w.emplace_back(params.weights[l].rows, params.weights[l].cols);
        st.m_b.emplace_back(params.biases[l].size(), 0.0);
        st.v_b.emplace_back(params.biases[l].size(), 0.0);
    }
    return st;
}

void adam_step(MlpParams& params, const Gradients& grads, AdamState& state) {
    if (grads.weights.size() != params.weights.size())
        throw DimensionError("gradient/parameter layer count mismatch");
    state.step += 1;
    const AdamConfig& c = state.cfg;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));

    auto update = [&](double& p, double g, double& m, double& v) {
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g * g;
        p -= c.lr * (m / bc1) / (std::sqrt(v / bc2) + c.eps);
    };

    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        if (grads.weights[l].a.size() != params.weights[l].a.size() ||
            grads.biases[l].size() != params.biases[l].size())
            throw DimensionError("gradient shape mismatch at layer " + std::to_string(l));
        for (std::size_t i = 0; i < params.weights[l].a.size(); ++i)
            update(params.weights[l].a[i], grads.weights[l].a[i], state.m_w[l].a[i],
                   state.v_w[l].a[i]);
        for (std::size_t i = 0; i < params.biases[l].size(); ++i)
            update(params.biases[l][i], grads.biases[l][i], state.m_b[l][i], state.v_b[l][i]);
    }
}

}  // namespace nsv::nn
