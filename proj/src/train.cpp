#include "dlmac/errors.hpp"
#include "dlmac/neuralkit.hpp"
#include "dlmac/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dlmac {

Adam::Adam(std::size_t n, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    beta1_pow_ *= beta1_;
    beta2_pow_ *= beta2_;
    const double c1 = 1.0 - beta1_pow_;
    const double c2 = 1.0 - beta2_pow_;
    for (std::size_t k = 0; k < params.size(); ++k) {
        m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grad[k];
        v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grad[k] * grad[k];
        params[k] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
    }
}

void TrainConfig::validate() const {
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw ConfigError("validation_fraction must be in (0, 1)");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
}

namespace {

Normalization fit_normalization(const Dataset& data, std::size_t n_train) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < n_train; ++i)
        for (double v : data.features[i]) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(hi > lo)) hi = lo + 1.0;
    return {lo, hi};
}

} // namespace

TrainResult train(const Dataset& data, const Architecture& arch, const TrainConfig& cfg) {
    cfg.validate();
    arch.validate();
    if (data.size() == 0) throw DegenerateDataError("dataset is empty");
    if (arch.input_dim() != data.feature_dim)
        throw DimensionError("architecture takes " + std::to_string(arch.input_dim()) + " features, dataset has " +
                             std::to_string(data.feature_dim));
    if (arch.n_classes() != data.n_classes())
        throw DimensionError("architecture has " + std::to_string(arch.n_classes()) + " classes, task needs " +
                             std::to_string(data.n_classes()));
    const auto classes = data.classes();
    const std::size_t n_classes = arch.n_classes();
    {
        std::vector<int> seen(n_classes, 0);
        for (int c : classes) seen[static_cast<std::size_t>(c)] = 1;
        if (std::accumulate(seen.begin(), seen.end(), 0) < 2)
            throw DegenerateDataError("dataset contains a single class");
    }

    const std::size_t n = data.size();
    std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(n)));
    n_val = std::clamp<std::size_t>(n_val, 1, n > 1 ? n - 1 : 1);
    const std::size_t n_train = n - n_val;
    if (n_train == 0) throw DegenerateDataError("dataset too small to split");

    ModelInfo info;
    info.task = data.task;
    info.channels = data.channels;
    info.txop_slots = data.label_config.txop_slots;
    info.k1 = data.label_config.k1;
    info.k2 = data.label_config.k2;
    info.p_r_dbm = data.label_config.p_r_dbm;
    info.normalization = fit_normalization(data, n_train);
    if (data.task == TaskKind::jcara) {
        info.rssi_min_dbm = info.normalization.lo;
        info.rssi_max_dbm = info.normalization.hi;
    } else {
        info.rssi_min_dbm = data.label_config.p_r_dbm - info.normalization.hi;
        info.rssi_max_dbm = data.label_config.p_r_dbm - info.normalization.lo;
    }

    NeuralModel model(arch, info);
    model.initialize(cfg.seed);

    std::vector<double> weights(n_classes, 1.0);
    if (cfg.class_weights) {
        std::vector<std::size_t> counts(n_classes, 0);
        for (std::size_t i = 0; i < n_train; ++i) ++counts[static_cast<std::size_t>(classes[i])];
        const auto present = static_cast<double>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
        for (std::size_t c = 0; c < n_classes; ++c)
            if (counts[c] > 0) weights[c] = static_cast<double>(n_train) / (present * static_cast<double>(counts[c]));
    }

    // Normalised copies of every sample.
    std::vector<std::vector<double>> xs(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i].resize(data.feature_dim);
        for (std::size_t k = 0; k < data.feature_dim; ++k) xs[i][k] = info.normalization.apply(data.features[i][k]);
    }

    Adam adam(model.params().size(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    std::vector<double> grad(model.params().size());
    std::vector<double> probs(n_classes);
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = Rng::derive(cfg.seed, 5);
    ForwardScratch scratch;

    TrainResult result;
    std::vector<double> best_params(model.params().begin(), model.params().end());
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.uniform_int(i)]);

        double train_loss = 0.0, train_weight = 0.0;
        std::size_t train_correct = 0;
        for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
            const std::size_t end = std::min(n_train, start + cfg.batch_size);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t i = order[b];
                const int c = classes[i];
                const double w = weights[static_cast<std::size_t>(c)];
                train_loss += model.accumulate_gradient(xs[i], c, w, grad, probs);
                train_weight += w;
                if (static_cast<int>(argmax_lowest(probs)) == c) ++train_correct;
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            for (double& g : grad) g *= scale;
            adam.step(model.params(), grad);
        }

        double val_loss = 0.0, val_weight = 0.0;
        std::size_t val_correct = 0;
        for (std::size_t i = n_train; i < n; ++i) {
            model.forward_normalized(xs[i], probs, scratch);
            const int c = classes[i];
            const double w = weights[static_cast<std::size_t>(c)];
            val_loss -= w * std::log(std::max(probs[static_cast<std::size_t>(c)], 1e-300));
            val_weight += w;
            if (static_cast<int>(argmax_lowest(probs)) == c) ++val_correct;
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = train_loss / train_weight;
        log.val_loss = val_loss / val_weight;
        log.train_accuracy = static_cast<double>(train_correct) / static_cast<double>(n_train);
        log.val_accuracy = static_cast<double>(val_correct) / static_cast<double>(n_val);
        result.log.push_back(log);
        if (!std::isfinite(log.train_loss) || !std::isfinite(log.val_loss))
            throw DivergenceError(epoch, "loss became non-finite");

        if (log.val_loss < best_val) {
            best_val = log.val_loss;
            result.best_epoch = epoch;
            std::copy(model.params().begin(), model.params().end(), best_params.begin());
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    std::copy(best_params.begin(), best_params.end(), model.params().begin());
    result.best_val_loss = best_val;
    result.model = std::move(model);
    return result;
}

double evaluate_accuracy(const NeuralModel& model, const Dataset& data) {
    if (data.size() == 0) return 0.0;
    const auto classes = data.classes();
    ForwardScratch scratch;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (model.predict(data.features[i], scratch) == classes[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<double> analytic_gradient(const NeuralModel& model, std::span<const double> features, int label) {
    std::vector<double> x(features.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = model.info().normalization.apply(features[i]);
    std::vector<double> grad(model.params().size(), 0.0);
    std::vector<double> probs(model.architecture().n_classes());
    model.accumulate_gradient(x, label, 1.0, grad, probs);
    return grad;
}

namespace {

/// Cross-entropy of one normalised sample evaluated in extended precision,
/// with parameter `k` shifted by `delta`. Used only for finite differences,
/// where double rounding in the loss would swamp gradients near 1e-6.
long double reference_loss(const NeuralModel& model, std::span<const double> x, int label, std::size_t k,
                           long double delta) {
    using R = long double;
    const auto& arch = model.architecture();
    const auto params = model.params();
    auto w = [&](std::size_t i) -> R { return i == k ? R(params[i]) + delta : R(params[i]); };
    auto sig = [](R v) { return R(1) / (R(1) + std::exp(-v)); };

    std::vector<R> cur(x.begin(), x.end());
    std::size_t off = 0;
    std::size_t li = 0;
    if (arch.is_recurrent()) {
        const auto& l = arch.layers[0];
        const std::size_t H = l.out, G = 4 * H;
        const std::size_t wx = 0, wh = l.in * G, b = wh + H * G;
        std::vector<R> h(H, 0), c(H, 0), g(G);
        for (std::size_t t = 0; t < arch.seq_len; ++t) {
            for (std::size_t q = 0; q < G; ++q) {
                R acc = w(b + q);
                for (std::size_t i = 0; i < l.in; ++i) acc += R(x[t * l.in + i]) * w(wx + i * G + q);
                for (std::size_t i = 0; i < H; ++i) acc += h[i] * w(wh + i * G + q);
                g[q] = acc;
            }
            for (std::size_t j = 0; j < H; ++j) {
                c[j] = sig(g[H + j]) * c[j] + sig(g[j]) * std::tanh(g[2 * H + j]);
                h[j] = sig(g[3 * H + j]) * std::tanh(c[j]);
            }
        }
        cur = h;
        off = l.n_params();
        li = 1;
    }
    for (; li < arch.layers.size(); ++li) {
        const auto& l = arch.layers[li];
        std::vector<R> out(l.out);
        for (std::size_t o = 0; o < l.out; ++o) {
            R acc = w(off + l.in * l.out + o);
            for (std::size_t i = 0; i < l.in; ++i) acc += cur[i] * w(off + i * l.out + o);
            out[o] = l.activation == Activation::relu && acc < 0 ? R(0) : acc;
        }
        cur = std::move(out);
        off += l.n_params();
    }
    const R m = *std::max_element(cur.begin(), cur.end());
    R sum = 0;
    for (R v : cur) sum += std::exp(v - m);
    return m + std::log(sum) - cur[static_cast<std::size_t>(label)];
}

} // namespace

double grad_check(const NeuralModel& model, std::span<const double> features, int label) {
    const auto analytic = analytic_gradient(model, features, label);
    std::vector<double> x(features.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = model.info().normalization.apply(features[i]);
    constexpr long double h = 1e-6L;
    double worst = 0.0;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
        const long double up = reference_loss(model, x, label, k, h);
        const long double down = reference_loss(model, x, label, k, -h);
        const auto numeric = static_cast<double>((up - down) / (2.0L * h));
        const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-7});
        worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
    }
    return worst;
}

} // namespace dlmac
