#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "conflictrag/types.hpp"

namespace conflictrag {

inline constexpr int kFeatureDim = 1536;  // 4 x 384 interaction blocks

enum class HeadKind { Binary, FourWay };

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& name);

/// One dense layer: row-major [out x in] weights plus bias.
struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    double weight(int row, int col) const { return weights[static_cast<std::size_t>(row) * in + col]; }
};

/// Feed-forward classifier head: ReLU on hidden layers, identity on the
/// output. First layer input is always 1536; the output width matches the
/// head kind (2 or 4). Hidden widths are free so tests can use small stacks;
/// the canonical training architectures are 1536-256-128-2 and
/// 1536-256-128-64-4.
class MlpModel {
public:
    MlpModel(HeadKind kind, std::vector<Layer> layers);  // validates the chain

    /// Canonical architectures, He-uniform initialized from the seed.
    static MlpModel binary_head(std::uint64_t seed);
    static MlpModel four_way_head(std::uint64_t seed);
    /// All-zero parameters (forward yields uniform softmax; every pair escalates).
    static MlpModel zeros(HeadKind kind);
    static std::vector<int> canonical_hidden(HeadKind kind);

    HeadKind kind() const { return kind_; }
    int output_dim() const { return layers_.back().out; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& mutable_layers() { return layers_; }
    std::size_t parameter_count() const;

    std::vector<double> forward(std::span<const double> features) const;

private:
    HeadKind kind_;
    std::vector<Layer> layers_;
};

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

/// argmax label plus its softmax probability (in [1/k, 1]).
std::pair<int, double> predict_with_confidence(const MlpModel& model,
                                               std::span<const double> features);

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 64;
    int max_epochs = 100;
    int patience = 5;  // epochs without val-loss improvement before stopping
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    bool class_weights = true;  // inverse-frequency weights from the train split

    void validate() const;
};

struct LabeledPairExample {
    std::vector<double> features;  // length 1536
    int binary_label = 0;          // 1 iff type_label != NoConflict
    ConflictType type_label = ConflictType::NoConflict;

    void validate() const;
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    MlpModel model;
    std::vector<EpochStats> log;
    int best_epoch = 0;  // 0-based, earliest best on ties
    double best_val_loss = 0.0;
};

/// Trains the canonical architecture for `head` with Adam and early stopping
/// on validation loss. The split takes examples[0, train_count) for training
/// and the next val_count for validation. Deterministic for a fixed seed.
TrainResult train(const std::vector<LabeledPairExample>& examples,
                  std::pair<int, int> split, const TrainConfig& config, HeadKind head);

/// Max relative analytic-vs-central-finite-difference gradient error over a
/// random sample of at least 100 parameters (all parameters when the model is
/// smaller). Relative error uses |a - n| / (|a| + |n| + 1e-4) so true-zero
/// gradients compare cleanly.
double gradient_check(const MlpModel& model, const LabeledPairExample& example, double epsilon);

/// Versioned plain-text weight format; round-trips bit-exactly.
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace conflictrag
