#include "dlmac/neuralkit.hpp"

#include "dlmac/errors.hpp"
#include "dlmac/rng.hpp"

#include <algorithm>
#include <cmath>

namespace dlmac {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// y[0..n) += a * w[0..n)
inline void axpy(double a, const double* __restrict w, double* __restrict y, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) y[k] += a * w[k];
}

/// y = b + x^T W where W is laid out [in][out]. Rows are folded in four at a
/// time; the sum order per output is still row by row.
inline void affine(std::span<const double> x, const double* w, const double* b, double* __restrict y,
                   std::size_t out) {
    std::copy(b, b + out, y);
    std::size_t i = 0;
    for (; i + 4 <= x.size(); i += 4) {
        const double a0 = x[i], a1 = x[i + 1], a2 = x[i + 2], a3 = x[i + 3];
        const double* __restrict w0 = w + i * out;
        const double* __restrict w1 = w0 + out;
        const double* __restrict w2 = w1 + out;
        const double* __restrict w3 = w2 + out;
        for (std::size_t k = 0; k < out; ++k) y[k] = y[k] + a0 * w0[k] + a1 * w1[k] + a2 * w2[k] + a3 * w3[k];
    }
    for (; i < x.size(); ++i) axpy(x[i], w + i * out, y, out);
}

/// y += x^T W, same folding as affine().
inline void affine_accumulate(std::span<const double> x, const double* w, double* __restrict y, std::size_t out) {
    std::size_t i = 0;
    for (; i + 4 <= x.size(); i += 4) {
        const double a0 = x[i], a1 = x[i + 1], a2 = x[i + 2], a3 = x[i + 3];
        const double* __restrict w0 = w + i * out;
        const double* __restrict w1 = w0 + out;
        const double* __restrict w2 = w1 + out;
        const double* __restrict w3 = w2 + out;
        for (std::size_t k = 0; k < out; ++k) y[k] = y[k] + a0 * w0[k] + a1 * w1[k] + a2 * w2[k] + a3 * w3[k];
    }
    for (; i < x.size(); ++i) axpy(x[i], w + i * out, y, out);
}

} // namespace

std::size_t LayerSpec::n_params() const {
    if (kind == LayerKind::dense) return in * out + out;
    return 4 * out * (in + out + 1);
}

std::size_t Architecture::n_classes() const { return layers.empty() ? 0 : layers.back().out; }

std::size_t Architecture::n_params() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.n_params();
    return n;
}

void Architecture::validate() const {
    if (layers.empty()) throw DimensionError("architecture has no layers");
    if (seq_len == 0 || step_dim == 0) throw DimensionError("architecture input shape is empty");
    std::size_t width = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.in == 0 || l.out == 0) throw DimensionError("layer " + std::to_string(i) + " has a zero dimension");
        if (l.kind == LayerKind::lstm) {
            if (i != 0) throw DimensionError("an LSTM layer may only be the first layer");
            if (l.in != step_dim) throw DimensionError("LSTM input size must equal the step dimension");
        } else if (i == 0 && l.in != input_dim()) {
            throw DimensionError("first dense layer must take the flattened input");
        }
        if (i > 0 && l.in != width)
            throw DimensionError("layer " + std::to_string(i) + " input " + std::to_string(l.in) +
                                 " does not match previous output " + std::to_string(width));
        width = l.out;
    }
    if (layers.back().kind != LayerKind::dense || layers.back().activation != Activation::none)
        throw DimensionError("last layer must be a linear dense layer feeding the softmax");
    if (n_classes() < 2) throw DimensionError("classifier needs at least two classes");
}

Architecture Architecture::lstm_classifier(std::size_t seq_len, std::size_t step_dim, std::size_t hidden,
                                           std::size_t dense_hidden, std::size_t classes) {
    Architecture a;
    a.seq_len = seq_len;
    a.step_dim = step_dim;
    a.layers.push_back({LayerKind::lstm, step_dim, hidden, Activation::none});
    a.layers.push_back({LayerKind::dense, hidden, dense_hidden, Activation::relu});
    a.layers.push_back({LayerKind::dense, dense_hidden, classes, Activation::none});
    a.validate();
    return a;
}

Architecture Architecture::mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t classes) {
    Architecture a;
    a.seq_len = 1;
    a.step_dim = input_dim;
    std::size_t width = input_dim;
    for (std::size_t h : hidden) {
        a.layers.push_back({LayerKind::dense, width, h, Activation::relu});
        width = h;
    }
    a.layers.push_back({LayerKind::dense, width, classes, Activation::none});
    a.validate();
    return a;
}

bool Normalization::valid() const noexcept { return std::isfinite(lo) && std::isfinite(hi) && hi > lo; }

// ---------------------------------------------------------------------------

NeuralModel::NeuralModel(Architecture arch, ModelInfo info) : arch_(std::move(arch)), info_(std::move(info)) {
    arch_.validate();
    std::size_t off = 0;
    for (const auto& l : arch_.layers) {
        offsets_.push_back(off);
        off += l.n_params();
    }
    params_.assign(off, 0.0);
}

void NeuralModel::initialize(std::uint64_t seed) {
    Rng rng = Rng::derive(seed, 77);
    auto fill = [&](std::size_t begin, std::size_t count, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t k = begin; k < begin + count; ++k) params_[k] = rng.uniform(-bound, bound);
    };
    for (std::size_t li = 0; li < arch_.layers.size(); ++li) {
        const auto& l = arch_.layers[li];
        const std::size_t off = offsets_[li];
        if (l.kind == LayerKind::dense) {
            fill(off, l.in * l.out + l.out, l.in);
        } else {
            const std::size_t g = 4 * l.out;
            fill(off, l.in * g, l.in);
            fill(off + l.in * g, l.out * g + g, l.out);
        }
    }
}

void softmax(std::span<double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double& x : v) {
        x = std::exp(x - m);
        sum += x;
    }
    for (double& x : v) x /= sum;
}

std::size_t argmax_lowest(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

std::vector<double> NeuralModel::forward(std::span<const double> features) const {
    std::vector<double> probs(arch_.n_classes());
    ForwardScratch scratch;
    forward(features, probs, scratch);
    return probs;
}

void NeuralModel::forward(std::span<const double> features, std::span<double> probs, ForwardScratch& s) const {
    if (features.size() != arch_.input_dim())
        throw DimensionError("expected " + std::to_string(arch_.input_dim()) + " features, got " +
                             std::to_string(features.size()));
    s.input.resize(features.size());
    const auto& norm = info_.normalization;
    for (std::size_t i = 0; i < features.size(); ++i) s.input[i] = norm.apply(features[i]);
    forward_normalized(s.input, probs, s);
}

void NeuralModel::forward_normalized(std::span<const double> x, std::span<double> probs, ForwardScratch& s) const {
    if (x.size() != arch_.input_dim()) throw DimensionError("input size does not match the architecture");
    if (probs.size() != arch_.n_classes()) throw DimensionError("output buffer size does not match class count");
    const double* p = params_.data();
    std::span<const double> cur = x;
    std::size_t first_dense = 0;

    if (arch_.is_recurrent()) {
        const auto& l = arch_.layers[0];
        const std::size_t H = l.out, G = 4 * H;
        const double* wx = p + offsets_[0];
        const double* wh = wx + l.in * G;
        const double* b = wh + H * G;
        s.h.assign(H, 0.0);
        s.c.assign(H, 0.0);
        s.gates.resize(G);
        for (std::size_t t = 0; t < arch_.seq_len; ++t) {
            affine(x.subspan(t * l.in, l.in), wx, b, s.gates.data(), G);
            if (t > 0) affine_accumulate(s.h, wh, s.gates.data(), G);
            for (std::size_t j = 0; j < H; ++j) {
                const double ig = sigmoid(s.gates[j]);
                const double fg = sigmoid(s.gates[H + j]);
                const double gg = std::tanh(s.gates[2 * H + j]);
                const double og = sigmoid(s.gates[3 * H + j]);
                s.c[j] = fg * s.c[j] + ig * gg;
                s.h[j] = og * std::tanh(s.c[j]);
            }
        }
        cur = s.h;
        first_dense = 1;
    }

    std::vector<double>* bufs[2] = {&s.a, &s.b};
    int which = 0;
    for (std::size_t li = first_dense; li < arch_.layers.size(); ++li) {
        const auto& l = arch_.layers[li];
        auto& out = *bufs[which];
        out.resize(l.out);
        affine(cur, p + offsets_[li], p + offsets_[li] + l.in * l.out, out.data(), l.out);
        if (l.activation == Activation::relu)
            for (double& v : out) v = v > 0.0 ? v : 0.0;
        cur = out;
        which ^= 1;
    }
    std::copy(cur.begin(), cur.end(), probs.begin());
    softmax(probs);
}

int NeuralModel::predict(std::span<const double> features, ForwardScratch& scratch) const {
    std::vector<double> probs(arch_.n_classes());
    forward(features, probs, scratch);
    return static_cast<int>(argmax_lowest(probs));
}

double NeuralModel::accumulate_gradient(std::span<const double> x, int label, double weight, std::span<double> grad,
                                        std::span<double> probs) const {
    if (x.size() != arch_.input_dim()) throw DimensionError("input size does not match the architecture");
    if (label < 0 || static_cast<std::size_t>(label) >= arch_.n_classes()) throw DimensionError("label out of range");
    const double* p = params_.data();
    const std::size_t L = arch_.layers.size();

    // Forward with caches.
    std::size_t first_dense = 0;
    std::size_t H = 0, T = arch_.seq_len;
    std::vector<double> hs, cs, gate_act; // hs/cs hold T+1 states, gate_act T*4H
    if (arch_.is_recurrent()) {
        const auto& l = arch_.layers[0];
        H = l.out;
        const std::size_t G = 4 * H;
        const double* wx = p + offsets_[0];
        const double* wh = wx + l.in * G;
        const double* b = wh + H * G;
        hs.assign((T + 1) * H, 0.0);
        cs.assign((T + 1) * H, 0.0);
        gate_act.assign(T * G, 0.0);
        std::vector<double> z(G);
        for (std::size_t t = 0; t < T; ++t) {
            affine(x.subspan(t * l.in, l.in), wx, b, z.data(), G);
            const double* hprev = hs.data() + t * H;
            if (t > 0) affine_accumulate(std::span<const double>(hprev, H), wh, z.data(), G);
            double* ga = gate_act.data() + t * G;
            const double* cprev = cs.data() + t * H;
            double* cnew = cs.data() + (t + 1) * H;
            double* hnew = hs.data() + (t + 1) * H;
            for (std::size_t j = 0; j < H; ++j) {
                ga[j] = sigmoid(z[j]);
                ga[H + j] = sigmoid(z[H + j]);
                ga[2 * H + j] = std::tanh(z[2 * H + j]);
                ga[3 * H + j] = sigmoid(z[3 * H + j]);
                cnew[j] = ga[H + j] * cprev[j] + ga[j] * ga[2 * H + j];
                hnew[j] = ga[3 * H + j] * std::tanh(cnew[j]);
            }
        }
        first_dense = 1;
    }

    // acts[k] is the input to dense layer first_dense + k; acts.back() the logits.
    std::vector<std::vector<double>> acts;
    if (arch_.is_recurrent())
        acts.emplace_back(hs.end() - static_cast<std::ptrdiff_t>(H), hs.end());
    else
        acts.emplace_back(x.begin(), x.end());
    for (std::size_t li = first_dense; li < L; ++li) {
        const auto& l = arch_.layers[li];
        std::vector<double> out(l.out);
        affine(acts.back(), p + offsets_[li], p + offsets_[li] + l.in * l.out, out.data(), l.out);
        if (l.activation == Activation::relu)
            for (double& v : out) v = v > 0.0 ? v : 0.0;
        acts.push_back(std::move(out));
    }
    std::copy(acts.back().begin(), acts.back().end(), probs.begin());
    softmax(probs);
    const double loss = -weight * std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300));

    // Backward through the dense stack.
    std::vector<double> delta(probs.begin(), probs.end());
    delta[static_cast<std::size_t>(label)] -= 1.0;
    for (double& d : delta) d *= weight;
    for (std::size_t li = L; li-- > first_dense;) {
        const auto& l = arch_.layers[li];
        const std::size_t k = li - first_dense;
        const auto& in = acts[k];
        const auto& out = acts[k + 1];
        if (l.activation == Activation::relu)
            for (std::size_t o = 0; o < l.out; ++o)
                if (out[o] <= 0.0) delta[o] = 0.0;
        double* gw = grad.data() + offsets_[li];
        double* gb = gw + l.in * l.out;
        const double* w = p + offsets_[li];
        for (std::size_t o = 0; o < l.out; ++o) gb[o] += delta[o];
        std::vector<double> dprev(l.in, 0.0);
        for (std::size_t i = 0; i < l.in; ++i) {
            if (in[i] != 0.0) axpy(in[i], delta.data(), gw + i * l.out, l.out);
            const double* wr = w + i * l.out;
            double acc = 0.0;
            for (std::size_t o = 0; o < l.out; ++o) acc += wr[o] * delta[o];
            dprev[i] = acc;
        }
        delta = std::move(dprev);
    }

    // Backpropagation through time.
    if (arch_.is_recurrent()) {
        const auto& l = arch_.layers[0];
        const std::size_t G = 4 * H;
        const double* wh = p + offsets_[0] + l.in * G;
        double* gwx = grad.data() + offsets_[0];
        double* gwh = gwx + l.in * G;
        double* gb = gwh + H * G;
        std::vector<double> dh = delta, dc(H, 0.0), da(G);
        for (std::size_t t = T; t-- > 0;) {
            const double* ga = gate_act.data() + t * G;
            const double* cprev = cs.data() + t * H;
            const double* cnew = cs.data() + (t + 1) * H;
            const double* hprev = hs.data() + t * H;
            for (std::size_t j = 0; j < H; ++j) {
                const double ig = ga[j], fg = ga[H + j], gg = ga[2 * H + j], og = ga[3 * H + j];
                const double tc = std::tanh(cnew[j]);
                const double dct = dc[j] + dh[j] * og * (1.0 - tc * tc);
                da[j] = dct * gg * ig * (1.0 - ig);
                da[H + j] = dct * cprev[j] * fg * (1.0 - fg);
                da[2 * H + j] = dct * ig * (1.0 - gg * gg);
                da[3 * H + j] = dh[j] * tc * og * (1.0 - og);
                dc[j] = dct * fg;
            }
            const auto xt = x.subspan(t * l.in, l.in);
            for (std::size_t i = 0; i < l.in; ++i)
                if (xt[i] != 0.0) axpy(xt[i], da.data(), gwx + i * G, G);
            for (std::size_t j = 0; j < H; ++j) {
                if (hprev[j] != 0.0) axpy(hprev[j], da.data(), gwh + j * G, G);
                const double* wr = wh + j * G;
                double acc = 0.0;
                for (std::size_t g = 0; g < G; ++g) acc += wr[g] * da[g];
                dh[j] = acc;
            }
            for (std::size_t g = 0; g < G; ++g) gb[g] += da[g];
        }
    }
    return loss;
}

} // namespace dlmac
