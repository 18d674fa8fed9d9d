#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "conflictrag/errors.hpp"
#include "conflictrag/neural.hpp"
#include "conflictrag/util.hpp"

#include "oracles.hpp"

using namespace conflictrag;

namespace {

Layer layer_of(int in, int out, Rng& rng, double scale = 0.3) {
    Layer layer;
    layer.in = in;
    layer.out = out;
    layer.weights.resize(static_cast<std::size_t>(in) * out);
    layer.bias.resize(static_cast<std::size_t>(out));
    for (double& w : layer.weights) w = rng.next_range(-scale, scale);
    for (double& b : layer.bias) b = rng.next_range(-scale, scale);
    return layer;
}

std::vector<double> random_features(Rng& rng) {
    std::vector<double> features(kFeatureDim);
    for (double& f : features) f = rng.next_range(-1.0, 1.0);
    return features;
}

/// Linearly separable synthetic pairs: class means differ on the leading
/// block, plus small uniform noise.
std::vector<LabeledPairExample> separable_examples(int count, int num_classes, Rng& rng) {
    std::vector<LabeledPairExample> examples;
    for (int i = 0; i < count; ++i) {
        const int cls = i % num_classes;
        LabeledPairExample example;
        example.features.assign(kFeatureDim, 0.0);
        for (int d = 0; d < 32; ++d) {
            example.features[static_cast<std::size_t>(d)] =
                (d / 8 == cls ? 0.8 : -0.2) + rng.next_range(-0.05, 0.05);
        }
        example.type_label = static_cast<ConflictType>(cls);
        example.binary_label = cls == 0 ? 0 : 1;
        if (num_classes == 2) {
            example.type_label = cls == 0 ? ConflictType::NoConflict : ConflictType::Factual;
        }
        examples.push_back(std::move(example));
    }
    return examples;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("forward on all-zero parameters yields all-zero logits") {
    const MlpModel model = MlpModel::zeros(HeadKind::Binary);
    Rng rng(1);
    const auto logits = model.forward(random_features(rng));
    REQUIRE(logits.size() == 2);
    CHECK(logits[0] == 0.0);
    CHECK(logits[1] == 0.0);
}

TEST_CASE("identity-like single linear layer selects inputs") {
    Layer layer;
    layer.in = kFeatureDim;
    layer.out = 2;
    layer.weights.assign(static_cast<std::size_t>(kFeatureDim) * 2, 0.0);
    layer.bias.assign(2, 0.0);
    layer.weights[3] = 1.0;                                    // logit 0 <- feature 3
    layer.weights[static_cast<std::size_t>(kFeatureDim) + 7] = 1.0;  // logit 1 <- feature 7
    const MlpModel model(HeadKind::Binary, {layer});

    std::vector<double> features(kFeatureDim, 0.0);
    features[3] = 2.5;
    features[7] = -1.25;
    const auto logits = model.forward(features);
    CHECK(logits[0] == 2.5);
    CHECK(logits[1] == -1.25);
}

TEST_CASE("random 3-layer forward matches the naive matrix oracle") {
    Rng rng(42);
    const Layer l1 = layer_of(kFeatureDim, 16, rng);
    const Layer l2 = layer_of(16, 8, rng);
    const Layer l3 = layer_of(8, 4, rng);
    const MlpModel model(HeadKind::FourWay, {l1, l2, l3});
    const auto features = random_features(rng);

    // Re-shape for the straight-line oracle.
    auto to_oracle = [](const Layer& layer) {
        std::vector<std::vector<double>> rows;
        for (int r = 0; r < layer.out; ++r) {
            rows.emplace_back(layer.weights.begin() + static_cast<std::ptrdiff_t>(r) * layer.in,
                              layer.weights.begin() + static_cast<std::ptrdiff_t>(r + 1) * layer.in);
        }
        return rows;
    };
    const auto expected = oracles::naive_forward(
        {to_oracle(l1), to_oracle(l2), to_oracle(l3)}, {l1.bias, l2.bias, l3.bias}, features);

    const auto logits = model.forward(features);
    REQUIRE(logits.size() == expected.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        CHECK(logits[i] == doctest::Approx(expected[i]).epsilon(1e-6));
    }
}

TEST_CASE("model construction validates the dimension chain") {
    Rng rng(7);
    const Layer l1 = layer_of(kFeatureDim, 16, rng);
    const Layer l_mismatched = layer_of(8, 2, rng);
    CHECK_THROWS_AS(MlpModel(HeadKind::Binary, {l1, l_mismatched}), ValidationError);
    const Layer wrong_out = layer_of(16, 3, rng);
    CHECK_THROWS_AS(MlpModel(HeadKind::Binary, {l1, wrong_out}), ValidationError);
    const Layer not_1536 = layer_of(100, 2, rng);
    CHECK_THROWS_AS(MlpModel(HeadKind::Binary, {not_1536}), ValidationError);
}

TEST_CASE("predict_with_confidence follows the softmax") {
    SUBCASE("uniform logits give confidence 1/k") {
        const MlpModel binary = MlpModel::zeros(HeadKind::Binary);
        const auto [label, confidence] =
            predict_with_confidence(binary, std::vector<double>(kFeatureDim, 0.0));
        CHECK(label == 0);
        CHECK(confidence == doctest::Approx(0.5).epsilon(1e-12));

        const MlpModel four_way = MlpModel::zeros(HeadKind::FourWay);
        const auto [label4, confidence4] =
            predict_with_confidence(four_way, std::vector<double>(kFeatureDim, 0.0));
        CHECK(confidence4 == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("logits (10, 0) give label 0 at ~0.99995") {
        Layer layer;
        layer.in = kFeatureDim;
        layer.out = 2;
        layer.weights.assign(static_cast<std::size_t>(kFeatureDim) * 2, 0.0);
        layer.bias = {10.0, 0.0};
        const MlpModel model(HeadKind::Binary, {layer});
        const auto [label, confidence] =
            predict_with_confidence(model, std::vector<double>(kFeatureDim, 0.0));
        CHECK(label == 0);
        // hand-computed: e^10 / (e^10 + 1)
        CHECK(confidence == doctest::Approx(0.9999546021312976).epsilon(1e-9));
    }
}

TEST_CASE("softmax sums to one with components in (0,1)") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> logits(4);
        for (double& z : logits) z = rng.next_range(-30.0, 30.0);
        const auto probs = softmax(logits);
        double sum = 0.0;
        for (double p : probs) {
            CHECK(p > 0.0);
            CHECK(p < 1.0);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("ReLU layers are positively homogeneous per row") {
    Rng rng(11);
    Layer l1 = layer_of(kFeatureDim, 4, rng);
    std::fill(l1.bias.begin(), l1.bias.end(), 0.0);
    Layer l2;
    l2.in = 4;
    l2.out = 2;
    l2.weights = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};  // logit0 <- hidden0
    l2.bias = {0.0, 0.0};

    const auto features = random_features(rng);
    const MlpModel base(HeadKind::Binary, {l1, l2});
    const double logit_before = base.forward(features)[0];

    Layer scaled = l1;
    for (int c = 0; c < scaled.in; ++c) scaled.weights[static_cast<std::size_t>(c)] *= 3.0;
    const MlpModel scaled_model(HeadKind::Binary, {scaled, l2});
    CHECK(scaled_model.forward(features)[0] ==
          doctest::Approx(3.0 * logit_before).epsilon(1e-9));
}

TEST_CASE("gradient check: analytic matches central finite differences") {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int hidden = 4 + static_cast<int>(rng.next_below(8));
        const Layer l1 = layer_of(kFeatureDim, hidden, rng);
        const Layer l2 = layer_of(hidden, trial % 2 == 0 ? 2 : 4, rng);
        const MlpModel model(trial % 2 == 0 ? HeadKind::Binary : HeadKind::FourWay, {l1, l2});

        LabeledPairExample example;
        example.features = random_features(rng);
        if (trial % 2 == 0) {
            example.binary_label = static_cast<int>(rng.next_below(2));
            example.type_label =
                example.binary_label == 0 ? ConflictType::NoConflict : ConflictType::Factual;
        } else {
            example.type_label = static_cast<ConflictType>(rng.next_below(4));
            example.binary_label = example.type_label == ConflictType::NoConflict ? 0 : 1;
        }
        worst = std::max(worst, gradient_check(model, example, 1e-5));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("gradient check on a zero-input example (bias gradients)") {
    Rng rng(5);
    const Layer l1 = layer_of(kFeatureDim, 6, rng);
    const Layer l2 = layer_of(6, 2, rng);
    const MlpModel model(HeadKind::Binary, {l1, l2});
    LabeledPairExample example;
    example.features.assign(kFeatureDim, 0.0);
    example.binary_label = 1;
    example.type_label = ConflictType::Factual;
    CHECK(gradient_check(model, example, 1e-5) < 1e-6);
}

TEST_CASE("gradient check rejects epsilon <= 0") {
    const MlpModel model = MlpModel::zeros(HeadKind::Binary);
    LabeledPairExample example;
    example.features.assign(kFeatureDim, 0.0);
    CHECK_THROWS_AS(gradient_check(model, example, 0.0), ValidationError);
}

TEST_CASE("training fits linearly separable data") {
    Rng rng(99);
    auto examples = separable_examples(200, 2, rng);
    TrainConfig config;
    config.max_epochs = 12;  // comfortably within the 50-epoch contract
    config.batch_size = 32;
    config.seed = 7;
    const TrainResult result = train(examples, {160, 40}, config, HeadKind::Binary);

    int correct = 0;
    for (int i = 0; i < 160; ++i) {
        const auto [label, confidence] =
            predict_with_confidence(result.model, examples[static_cast<std::size_t>(i)].features);
        if (label == examples[static_cast<std::size_t>(i)].binary_label) ++correct;
    }
    CHECK(static_cast<double>(correct) / 160.0 >= 0.99);
    CHECK(result.log.size() <= 12);
}

TEST_CASE("patience 0 stops after exactly one epoch") {
    Rng rng(1);
    auto examples = separable_examples(60, 2, rng);
    TrainConfig config;
    config.patience = 0;
    config.max_epochs = 50;
    const TrainResult result = train(examples, {48, 12}, config, HeadKind::Binary);
    CHECK(result.log.size() == 1);
    CHECK(result.best_epoch == 0);
}

TEST_CASE("training twice with the same seed is bit-identical") {
    Rng rng(13);
    auto examples = separable_examples(60, 2, rng);
    TrainConfig config;
    config.max_epochs = 3;
    config.patience = 3;
    config.seed = 123;
    const TrainResult a = train(examples, {48, 12}, config, HeadKind::Binary);
    const TrainResult b = train(examples, {48, 12}, config, HeadKind::Binary);
    REQUIRE(a.model.layers().size() == b.model.layers().size());
    for (std::size_t l = 0; l < a.model.layers().size(); ++l) {
        CHECK(a.model.layers()[l].weights == b.model.layers()[l].weights);
        CHECK(a.model.layers()[l].bias == b.model.layers()[l].bias);
    }
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t e = 0; e < a.log.size(); ++e) {
        CHECK(a.log[e].train_loss == b.log[e].train_loss);
        CHECK(a.log[e].val_loss == b.log[e].val_loss);
    }
}

TEST_CASE("full-batch training loss is non-increasing at a small learning rate") {
    Rng rng(21);
    auto examples = separable_examples(64, 2, rng);
    TrainConfig config;
    config.batch_size = 64;  // full dataset
    config.learning_rate = 1e-4;
    config.max_epochs = 10;
    config.patience = 10;
    config.seed = 3;
    const TrainResult result = train(examples, {64, 0}, config, HeadKind::Binary);
    for (std::size_t e = 1; e < result.log.size(); ++e) {
        CHECK(result.log[e].train_loss <= result.log[e - 1].train_loss + 1e-12);
    }
}

TEST_CASE("training rejects a single-class split") {
    Rng rng(4);
    auto examples = separable_examples(40, 2, rng);
    for (auto& example : examples) {
        example.binary_label = 0;
        example.type_label = ConflictType::NoConflict;
    }
    TrainConfig config;
    CHECK_THROWS_AS(train(examples, {32, 8}, config, HeadKind::Binary), TrainError);
}

TEST_CASE("training validates the split bounds") {
    Rng rng(4);
    auto examples = separable_examples(10, 2, rng);
    TrainConfig config;
    CHECK_THROWS_AS(train(examples, {8, 8}, config, HeadKind::Binary), ValidationError);
    CHECK_THROWS_AS(train(examples, {0, 5}, config, HeadKind::Binary), ValidationError);
}

TEST_CASE("four-way training learns the type classes") {
    Rng rng(77);
    auto examples = separable_examples(160, 4, rng);
    TrainConfig config;
    config.max_epochs = 15;
    config.batch_size = 32;
    config.seed = 5;
    const TrainResult result = train(examples, {128, 32}, config, HeadKind::FourWay);
    int correct = 0;
    for (int i = 128; i < 160; ++i) {
        const auto [label, confidence] =
            predict_with_confidence(result.model, examples[static_cast<std::size_t>(i)].features);
        if (label == static_cast<int>(examples[static_cast<std::size_t>(i)].type_label)) ++correct;
    }
    CHECK(static_cast<double>(correct) / 32.0 >= 0.9);
}

TEST_CASE("model save/load round-trips bit-exactly") {
    Rng rng(31);
    const Layer l1 = layer_of(kFeatureDim, 8, rng);
    const Layer l2 = layer_of(8, 2, rng);
    const MlpModel model(HeadKind::Binary, {l1, l2});
    const std::string path = temp_path("cr_model_roundtrip.mlp");
    save_model(model, path);
    const MlpModel loaded = load_model(path);

    REQUIRE(loaded.layers().size() == model.layers().size());
    for (std::size_t l = 0; l < model.layers().size(); ++l) {
        CHECK(loaded.layers()[l].weights == model.layers()[l].weights);
        CHECK(loaded.layers()[l].bias == model.layers()[l].bias);
    }
    const auto features = random_features(rng);
    CHECK(loaded.forward(features) == model.forward(features));
    std::remove(path.c_str());
}

TEST_CASE("model loading rejects tampered and missing files") {
    Rng rng(32);
    const Layer l1 = layer_of(kFeatureDim, 4, rng);
    const Layer l2 = layer_of(4, 2, rng);
    const std::string path = temp_path("cr_model_tampered.mlp");
    save_model(MlpModel(HeadKind::Binary, {l1, l2}), path);

    // Corrupt the dimension chain: 4 -> 5.
    std::ifstream in(path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto pos = content.find("layer 4 2");
    REQUIRE(pos != std::string::npos);
    content.replace(pos, 9, "layer 5 2");
    std::ofstream out(path);
    out << content;
    out.close();
    CHECK_THROWS(load_model(path));

    CHECK_THROWS_AS(load_model(temp_path("cr_model_missing.mlp")), IoError);
    std::remove(path.c_str());
}
