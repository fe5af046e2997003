#pragma once

#include "dlmac/mcs_ladder.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dlmac {

enum class LayerKind { dense, lstm };
enum class Activation { none, relu };

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t in = 0;
    std::size_t out = 0; ///< units (dense) or hidden size (lstm)
    Activation activation = Activation::none;

    std::size_t n_params() const;
    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Layer stack ending in a softmax over the last layer's outputs.
/// An LSTM may only appear first; it consumes `seq_len` steps of `step_dim`
/// features and passes its final hidden state on. A leading dense layer
/// sees the flattened input.
struct Architecture {
    std::size_t seq_len = 1;
    std::size_t step_dim = 0;
    std::vector<LayerSpec> layers;

    std::size_t input_dim() const noexcept { return seq_len * step_dim; }
    std::size_t n_classes() const;
    std::size_t n_params() const;
    bool is_recurrent() const noexcept { return !layers.empty() && layers.front().kind == LayerKind::lstm; }
    void validate() const;

    static Architecture lstm_classifier(std::size_t seq_len, std::size_t step_dim, std::size_t hidden,
                                        std::size_t dense_hidden, std::size_t classes);
    static Architecture mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t classes);

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Affine map of [lo, hi] onto [-1, 1].
struct Normalization {
    double lo = -1.0;
    double hi = 1.0;

    double apply(double v) const noexcept { return 2.0 * (v - lo) / (hi - lo) - 1.0; }
    bool valid() const noexcept;
};

/// What the model was trained for; checked before a model is put to use.
struct ModelInfo {
    TaskKind task = TaskKind::jcara;
    std::vector<int> channels;
    std::size_t txop_slots = 120;
    std::size_t k1 = 3;
    std::size_t k2 = 5;
    double p_r_dbm = -65.0;
    Normalization normalization;
    /// dBm range of the training trace, used for "anything goes" compensation.
    double rssi_min_dbm = -100.0;
    double rssi_max_dbm = -30.0;
};

/// Per-thread buffers for forward passes.
struct ForwardScratch {
    std::vector<double> input, a, b, gates, h, c;
};

class NeuralModel {
public:
    NeuralModel() = default;
    explicit NeuralModel(Architecture arch, ModelInfo info = {});

    const Architecture& architecture() const noexcept { return arch_; }
    const ModelInfo& info() const noexcept { return info_; }
    ModelInfo& info() noexcept { return info_; }

    std::span<double> params() noexcept { return params_; }
    std::span<const double> params() const noexcept { return params_; }

    /// Uniform(+-1/sqrt(fan_in)) initialisation per weight matrix.
    void initialize(std::uint64_t seed);

    /// Class probabilities for raw (unnormalised) features.
    std::vector<double> forward(std::span<const double> features) const;
    void forward(std::span<const double> features, std::span<double> probs, ForwardScratch& scratch) const;

    /// Same, but the input is already normalised.
    void forward_normalized(std::span<const double> x, std::span<double> probs, ForwardScratch& scratch) const;

    /// Argmax class; ties go to the lowest class index.
    int predict(std::span<const double> features, ForwardScratch& scratch) const;

    /// Adds d(weight * CE)/d(params) for one normalised sample to `grad` and
    /// returns the weighted loss. `probs` receives the forward output.
    double accumulate_gradient(std::span<const double> x, int label, double weight, std::span<double> grad,
                               std::span<double> probs) const;

private:
    Architecture arch_;
    ModelInfo info_;
    std::vector<double> params_;
    std::vector<std::size_t> offsets_;
};

std::size_t argmax_lowest(std::span<const double> values);

/// Numerically stable in-place softmax.
void softmax(std::span<double> v);

// ---------------------------------------------------------------------------
// Training.

class Adam {
public:
    Adam(std::size_t n, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
    void step(std::span<double> params, std::span<const double> grad);
    std::size_t steps() const noexcept { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
    double beta1_pow_ = 1.0;
    double beta2_pow_ = 1.0;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    double validation_fraction = 0.2;
    std::uint64_t seed = 1;
    bool class_weights = true;

    void validate() const;
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    NeuralModel model;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
};

/// Adam + weighted cross-entropy with early stopping on validation loss.
/// The validation split is the chronologically last fraction of the data.
TrainResult train(const Dataset& data, const Architecture& arch, const TrainConfig& cfg);

/// Accuracy of `model` on a dataset.
double evaluate_accuracy(const NeuralModel& model, const Dataset& data);

/// Max relative error between the analytic gradient and central differences
/// (step 1e-6) over every parameter. Relative error is |a - n| / max(|a|, |n|, 1e-7).
/// The differences come from a separate long double forward pass.
double grad_check(const NeuralModel& model, std::span<const double> features, int label);

/// Analytic gradient for one raw sample (for tests).
std::vector<double> analytic_gradient(const NeuralModel& model, std::span<const double> features, int label);

// ---------------------------------------------------------------------------
// Model files: magic, JSON descriptor, little-endian float64 weights, FNV-1a.

void save_model(const NeuralModel& model, const std::filesystem::path& path);
NeuralModel load_model(const std::filesystem::path& path, std::optional<TaskKind> expected_task = std::nullopt);

std::string serialize_model(const NeuralModel& model);
NeuralModel deserialize_model(std::string_view bytes, std::optional<TaskKind> expected_task = std::nullopt);

std::uint64_t fnv1a64(std::string_view bytes);

} // namespace dlmac
