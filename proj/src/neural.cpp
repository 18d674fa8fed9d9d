#include "conflictrag/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "conflictrag/errors.hpp"
#include "conflictrag/util.hpp"

namespace conflictrag {

std::string to_string(HeadKind kind) {
    return kind == HeadKind::Binary ? "binary" : "four_way";
}

HeadKind head_kind_from_string(const std::string& name) {
    if (name == "binary") return HeadKind::Binary;
    if (name == "four_way") return HeadKind::FourWay;
    throw ParseError("unknown head kind: '" + name + "'");
}

namespace {

int output_dim_for(HeadKind kind) {
    return kind == HeadKind::Binary ? 2 : 4;
}

Layer make_layer(int in, int out) {
    Layer layer;
    layer.in = in;
    layer.out = out;
    layer.weights.assign(static_cast<std::size_t>(in) * out, 0.0);
    layer.bias.assign(static_cast<std::size_t>(out), 0.0);
    return layer;
}

void he_uniform_init(Layer& layer, Rng& rng) {
    const double limit = std::sqrt(6.0 / layer.in);
    for (double& w : layer.weights) w = rng.next_range(-limit, limit);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

MlpModel build_head(HeadKind kind, std::uint64_t seed) {
    std::vector<int> dims{kFeatureDim};
    for (int h : MlpModel::canonical_hidden(kind)) dims.push_back(h);
    dims.push_back(output_dim_for(kind));
    Rng rng(seed);
    std::vector<Layer> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Layer layer = make_layer(dims[i], dims[i + 1]);
        he_uniform_init(layer, rng);
        layers.push_back(std::move(layer));
    }
    return MlpModel(kind, std::move(layers));
}

}  // namespace

std::vector<int> MlpModel::canonical_hidden(HeadKind kind) {
    if (kind == HeadKind::Binary) return {256, 128};
    return {256, 128, 64};
}

MlpModel::MlpModel(HeadKind kind, std::vector<Layer> layers)
    : kind_(kind), layers_(std::move(layers)) {
    if (layers_.empty()) {
        throw ValidationError("model has no layers");
    }
    if (layers_.front().in != kFeatureDim) {
        throw ValidationError("first layer input " + std::to_string(layers_.front().in) +
                              " != " + std::to_string(kFeatureDim));
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Layer& layer = layers_[i];
        if (layer.in <= 0 || layer.out <= 0 ||
            layer.weights.size() != static_cast<std::size_t>(layer.in) * layer.out ||
            layer.bias.size() != static_cast<std::size_t>(layer.out)) {
            throw ValidationError("layer " + std::to_string(i) + " has inconsistent shapes");
        }
        if (i > 0 && layers_[i - 1].out != layer.in) {
            throw ValidationError("layer dimensions do not chain at layer " + std::to_string(i));
        }
        for (double w : layer.weights) {
            if (!std::isfinite(w)) throw ValidationError("non-finite weight in layer " + std::to_string(i));
        }
        for (double b : layer.bias) {
            if (!std::isfinite(b)) throw ValidationError("non-finite bias in layer " + std::to_string(i));
        }
    }
    if (layers_.back().out != output_dim_for(kind_)) {
        throw ValidationError("output width " + std::to_string(layers_.back().out) +
                              " does not match head kind " + to_string(kind_));
    }
}

MlpModel MlpModel::binary_head(std::uint64_t seed) { return build_head(HeadKind::Binary, seed); }

MlpModel MlpModel::four_way_head(std::uint64_t seed) { return build_head(HeadKind::FourWay, seed); }

MlpModel MlpModel::zeros(HeadKind kind) {
    std::vector<int> dims{kFeatureDim};
    for (int h : canonical_hidden(kind)) dims.push_back(h);
    dims.push_back(output_dim_for(kind));
    std::vector<Layer> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        layers.push_back(make_layer(dims[i], dims[i + 1]));
    }
    return MlpModel(kind, std::move(layers));
}

std::size_t MlpModel::parameter_count() const {
    std::size_t count = 0;
    for (const Layer& layer : layers_) {
        count += layer.weights.size() + layer.bias.size();
    }
    return count;
}

std::vector<double> MlpModel::forward(std::span<const double> features) const {
    if (features.size() != static_cast<std::size_t>(layers_.front().in)) {
        throw ValidationError("feature length " + std::to_string(features.size()) + " != " +
                              std::to_string(layers_.front().in));
    }
    for (double v : features) {
        if (!std::isfinite(v)) throw ValidationError("non-finite feature value");
    }
    std::vector<double> activation(features.begin(), features.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        next.assign(static_cast<std::size_t>(layer.out), 0.0);
        for (int r = 0; r < layer.out; ++r) {
            const double* row = layer.weights.data() + static_cast<std::size_t>(r) * layer.in;
            double sum = layer.bias[static_cast<std::size_t>(r)];
            for (int c = 0; c < layer.in; ++c) {
                sum += row[c] * activation[static_cast<std::size_t>(c)];
            }
            next[static_cast<std::size_t>(r)] = sum;
        }
        const bool is_output = (l + 1 == layers_.size());
        if (!is_output) {
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        }
        activation.swap(next);
    }
    return activation;
}

std::vector<double> softmax(std::span<const double> logits) {
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    std::vector<double> probs(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - max_logit);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

std::pair<int, double> predict_with_confidence(const MlpModel& model,
                                               std::span<const double> features) {
    const std::vector<double> logits = model.forward(features);
    const std::vector<double> probs = softmax(logits);
    int label = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[static_cast<std::size_t>(label)]) label = static_cast<int>(i);
    }
    return {label, probs[static_cast<std::size_t>(label)]};
}

void TrainConfig::validate() const {
    if (learning_rate <= 0.0 || batch_size <= 0 || max_epochs <= 0 || patience < 0) {
        throw ValidationError("train config values must be positive (patience may be 0)");
    }
}

void LabeledPairExample::validate() const {
    if (features.size() != static_cast<std::size_t>(kFeatureDim)) {
        throw ValidationError("example feature length " + std::to_string(features.size()) +
                              " != " + std::to_string(kFeatureDim));
    }
    const bool conflictive = type_label != ConflictType::NoConflict;
    if ((binary_label == 1) != conflictive) {
        throw ValidationError("binary label inconsistent with type label");
    }
    if (binary_label != 0 && binary_label != 1) {
        throw ValidationError("binary label must be 0 or 1");
    }
}

namespace {

int label_of(const LabeledPairExample& example, HeadKind head) {
    if (head == HeadKind::Binary) return example.binary_label;
    return static_cast<int>(example.type_label);
}

struct ForwardTrace {
    std::vector<std::vector<double>> activations;  // activations[0] = input
    std::vector<std::vector<double>> pre_activations;
};

ForwardTrace traced_forward(const MlpModel& model, std::span<const double> features) {
    ForwardTrace trace;
    trace.activations.emplace_back(features.begin(), features.end());
    const auto& layers = model.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& layer = layers[l];
        std::vector<double> z(static_cast<std::size_t>(layer.out), 0.0);
        const auto& prev = trace.activations.back();
        for (int r = 0; r < layer.out; ++r) {
            const double* row = layer.weights.data() + static_cast<std::size_t>(r) * layer.in;
            double sum = layer.bias[static_cast<std::size_t>(r)];
            for (int c = 0; c < layer.in; ++c) sum += row[c] * prev[static_cast<std::size_t>(c)];
            z[static_cast<std::size_t>(r)] = sum;
        }
        trace.pre_activations.push_back(z);
        if (l + 1 < layers.size()) {
            for (double& v : z) v = v > 0.0 ? v : 0.0;
        }
        trace.activations.push_back(std::move(z));
    }
    return trace;
}

double cross_entropy_from_logits(std::span<const double> logits, int label) {
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - max_logit);
    return std::log(sum) - (logits[static_cast<std::size_t>(label)] - max_logit);
}

struct Gradients {
    std::vector<Layer> layers;  // same shapes as the model, zero-initialized

    explicit Gradients(const MlpModel& model) {
        for (const Layer& layer : model.layers()) {
            layers.push_back(make_layer(layer.in, layer.out));
        }
    }

    void clear() {
        for (Layer& layer : layers) {
            std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
            std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
        }
    }
};

/// Accumulates d(weight * CE)/d(params) for one example into grads.
/// Returns the weighted loss.
double backward(const MlpModel& model, const LabeledPairExample& example, HeadKind head,
                double example_weight, Gradients& grads) {
    const ForwardTrace trace = traced_forward(model, example.features);
    const auto& layers = model.layers();
    const int label = label_of(example, head);
    const std::vector<double>& logits = trace.activations.back();
    const double loss = example_weight * cross_entropy_from_logits(logits, label);

    std::vector<double> delta = softmax(logits);
    delta[static_cast<std::size_t>(label)] -= 1.0;
    for (double& d : delta) d *= example_weight;

    for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
        const Layer& layer = layers[static_cast<std::size_t>(l)];
        Layer& grad = grads.layers[static_cast<std::size_t>(l)];
        const auto& input = trace.activations[static_cast<std::size_t>(l)];
        for (int r = 0; r < layer.out; ++r) {
            const double d = delta[static_cast<std::size_t>(r)];
            grad.bias[static_cast<std::size_t>(r)] += d;
            double* grow = grad.weights.data() + static_cast<std::size_t>(r) * layer.in;
            for (int c = 0; c < layer.in; ++c) {
                grow[c] += d * input[static_cast<std::size_t>(c)];
            }
        }
        if (l > 0) {
            std::vector<double> prev_delta(static_cast<std::size_t>(layer.in), 0.0);
            for (int r = 0; r < layer.out; ++r) {
                const double d = delta[static_cast<std::size_t>(r)];
                const double* row = layer.weights.data() + static_cast<std::size_t>(r) * layer.in;
                for (int c = 0; c < layer.in; ++c) {
                    prev_delta[static_cast<std::size_t>(c)] += d * row[c];
                }
            }
            const auto& pre = trace.pre_activations[static_cast<std::size_t>(l - 1)];
            for (int c = 0; c < layer.in; ++c) {
                if (pre[static_cast<std::size_t>(c)] <= 0.0) prev_delta[static_cast<std::size_t>(c)] = 0.0;
            }
            delta.swap(prev_delta);
        }
    }
    return loss;
}

struct AdamState {
    std::vector<Layer> m;
    std::vector<Layer> v;
    long step = 0;

    explicit AdamState(const MlpModel& model) {
        for (const Layer& layer : model.layers()) {
            m.push_back(make_layer(layer.in, layer.out));
            v.push_back(make_layer(layer.in, layer.out));
        }
    }
};

void adam_step(MlpModel& model, const Gradients& grads, AdamState& state,
               const TrainConfig& config) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.step));
    auto update = [&](double& param, double grad, double& m, double& v) {
        m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * grad;
        v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * grad * grad;
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        param -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
    };
    auto& layers = model.mutable_layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Layer& layer = layers[l];
        const Layer& grad = grads.layers[l];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            update(layer.weights[i], grad.weights[i], state.m[l].weights[i], state.v[l].weights[i]);
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            update(layer.bias[i], grad.bias[i], state.m[l].bias[i], state.v[l].bias[i]);
        }
    }
}

}  // namespace

TrainResult train(const std::vector<LabeledPairExample>& examples, std::pair<int, int> split,
                  const TrainConfig& config, HeadKind head) {
    config.validate();
    const auto [train_count, val_count] = split;
    if (train_count <= 0 || val_count < 0 ||
        static_cast<std::size_t>(train_count) + static_cast<std::size_t>(val_count) >
            examples.size()) {
        throw ValidationError("bad train/val split (" + std::to_string(train_count) + ", " +
                              std::to_string(val_count) + ") for " +
                              std::to_string(examples.size()) + " examples");
    }
    for (const auto& example : examples) example.validate();

    const int num_classes = output_dim_for(head);
    std::vector<long> counts(static_cast<std::size_t>(num_classes), 0);
    for (int i = 0; i < train_count; ++i) {
        ++counts[static_cast<std::size_t>(label_of(examples[static_cast<std::size_t>(i)], head))];
    }
    const int classes_present =
        static_cast<int>(std::count_if(counts.begin(), counts.end(), [](long c) { return c > 0; }));
    if (classes_present < 2) {
        throw TrainError("training split contains a single class; cannot fit the " +
                         to_string(head) + " head");
    }

    // Inverse-frequency class weights; absent classes get weight 0.
    std::vector<double> class_weight(static_cast<std::size_t>(num_classes), 1.0);
    if (config.class_weights) {
        for (int c = 0; c < num_classes; ++c) {
            class_weight[static_cast<std::size_t>(c)] =
                counts[static_cast<std::size_t>(c)] > 0
                    ? static_cast<double>(train_count) /
                          (static_cast<double>(classes_present) *
                           static_cast<double>(counts[static_cast<std::size_t>(c)]))
                    : 0.0;
        }
    }

    MlpModel model = head == HeadKind::Binary ? MlpModel::binary_head(config.seed)
                                              : MlpModel::four_way_head(config.seed);
    AdamState adam(model);
    Gradients grads(model);
    Rng shuffle_rng(config.seed ^ 0xd1b54a32d192ed03ULL);

    auto split_loss = [&](int begin, int count) {
        double total = 0.0;
        for (int i = begin; i < begin + count; ++i) {
            const auto& example = examples[static_cast<std::size_t>(i)];
            const auto logits = model.forward(example.features);
            total += class_weight[static_cast<std::size_t>(label_of(example, head))] *
                     cross_entropy_from_logits(logits, label_of(example, head));
        }
        return count > 0 ? total / count : 0.0;
    };

    TrainResult result{model, {}, 0, 0.0};
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_without_improvement = 0;
    std::vector<int> order(static_cast<std::size_t>(train_count));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (int start = 0; start < train_count; start += config.batch_size) {
            const int batch_end = std::min(train_count, start + config.batch_size);
            grads.clear();
            double batch_loss = 0.0;
            for (int b = start; b < batch_end; ++b) {
                const auto& example = examples[static_cast<std::size_t>(order[static_cast<std::size_t>(b)])];
                batch_loss += backward(model, example, head,
                                       class_weight[static_cast<std::size_t>(label_of(example, head))],
                                       grads);
            }
            const int batch_size = batch_end - start;
            for (Layer& g : grads.layers) {
                for (double& w : g.weights) w /= batch_size;
                for (double& b : g.bias) b /= batch_size;
            }
            if (!std::isfinite(batch_loss)) {
                throw TrainError("non-finite training loss at epoch " + std::to_string(epoch + 1));
            }
            adam_step(model, grads, adam, config);
            epoch_loss += batch_loss;
        }
        EpochStats stats;
        stats.train_loss = epoch_loss / train_count;
        stats.val_loss = val_count > 0 ? split_loss(train_count, val_count) : stats.train_loss;
        if (!std::isfinite(stats.val_loss)) {
            throw TrainError("non-finite validation loss at epoch " + std::to_string(epoch + 1));
        }
        result.log.push_back(stats);

        if (stats.val_loss < best_val) {
            best_val = stats.val_loss;
            result.model = model;
            result.best_epoch = epoch;
            epochs_without_improvement = 0;
        } else {
            ++epochs_without_improvement;
        }
        if (epochs_without_improvement >= config.patience) {
            break;
        }
    }
    result.best_val_loss = best_val;
    return result;
}

double gradient_check(const MlpModel& model, const LabeledPairExample& example, double epsilon) {
    if (epsilon <= 0.0) {
        throw ValidationError("gradient check epsilon must be > 0");
    }
    example.validate();

    Gradients analytic(model);
    backward(model, example, model.kind(), 1.0, analytic);

    // Flattened parameter indexing: per layer, weights then bias.
    const std::size_t total = model.parameter_count();
    std::vector<std::size_t> indices(total);
    std::iota(indices.begin(), indices.end(), 0);
    const std::size_t sample_size = std::min<std::size_t>(total, 128);
    Rng rng(0x9e3779b97f4a7c15ULL);
    rng.shuffle(indices);
    indices.resize(sample_size);

    MlpModel probe = model;
    const int label = label_of(example, model.kind());
    auto param_ref = [](MlpModel& m, std::size_t flat) -> double& {
        for (Layer& layer : m.mutable_layers()) {
            if (flat < layer.weights.size()) return layer.weights[flat];
            flat -= layer.weights.size();
            if (flat < layer.bias.size()) return layer.bias[flat];
            flat -= layer.bias.size();
        }
        throw ValidationError("parameter index out of range");
    };
    auto grad_at = [&](std::size_t flat) -> double {
        for (const Layer& layer : analytic.layers) {
            if (flat < layer.weights.size()) return layer.weights[flat];
            flat -= layer.weights.size();
            if (flat < layer.bias.size()) return layer.bias[flat];
            flat -= layer.bias.size();
        }
        throw ValidationError("parameter index out of range");
    };

    double max_rel_error = 0.0;
    for (std::size_t flat : indices) {
        double& param = param_ref(probe, flat);
        const double original = param;
        param = original + epsilon;
        const double loss_plus =
            cross_entropy_from_logits(probe.forward(example.features), label);
        param = original - epsilon;
        const double loss_minus =
            cross_entropy_from_logits(probe.forward(example.features), label);
        param = original;
        const double numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
        const double analytic_grad = grad_at(flat);
        const double rel = std::abs(analytic_grad - numeric) /
                           (std::abs(analytic_grad) + std::abs(numeric) + 1e-4);
        max_rel_error = std::max(max_rel_error, rel);
    }
    return max_rel_error;
}

void save_model(const MlpModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write model file '" + path + "'");
    }
    out << "conflictrag-mlp 1\n";
    out << "head " << to_string(model.kind()) << "\n";
    out << "layers " << model.layers().size() << "\n";
    char buffer[32];
    for (const Layer& layer : model.layers()) {
        out << "layer " << layer.in << " " << layer.out << "\n";
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", layer.weights[i]);
            out << buffer << (i + 1 == layer.weights.size() ? "\n" : " ");
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", layer.bias[i]);
            out << buffer << (i + 1 == layer.bias.size() ? "\n" : " ");
        }
    }
    if (!out) {
        throw IoError("failed writing model file '" + path + "'");
    }
}

MlpModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open model file '" + path + "'");
    }
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "conflictrag-mlp" || version != 1) {
        throw ParseError("unrecognized model file format in '" + path + "'");
    }
    std::string keyword, head_name;
    in >> keyword >> head_name;
    if (keyword != "head") throw ParseError("model file missing head kind");
    const HeadKind kind = head_kind_from_string(head_name);
    std::size_t layer_count = 0;
    in >> keyword >> layer_count;
    if (keyword != "layers" || layer_count == 0) throw ParseError("model file missing layer count");
    std::vector<Layer> layers;
    for (std::size_t l = 0; l < layer_count; ++l) {
        int in_dim = 0, out_dim = 0;
        in >> keyword >> in_dim >> out_dim;
        if (keyword != "layer" || in_dim <= 0 || out_dim <= 0) {
            throw ParseError("bad layer header in model file");
        }
        Layer layer = make_layer(in_dim, out_dim);
        for (double& w : layer.weights) {
            if (!(in >> w)) throw ParseError("truncated weight data in model file");
        }
        for (double& b : layer.bias) {
            if (!(in >> b)) throw ParseError("truncated bias data in model file");
        }
        layers.push_back(std::move(layer));
    }
    return MlpModel(kind, std::move(layers));  // ctor validates the dimension chain
}

}  // namespace conflictrag
