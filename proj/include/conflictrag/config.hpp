#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "conflictrag/detect.hpp"
#include "conflictrag/evaluate.hpp"
#include "conflictrag/generate.hpp"
#include "conflictrag/http_provider.hpp"
#include "conflictrag/resolve.hpp"
#include "conflictrag/retrieval.hpp"

namespace conflictrag {

struct EndpointConfig {
    std::string base_url;
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
};

struct PipelineConfig {
    bool mock_providers = true;  // offline by default; set endpoints to go live
    EndpointConfig generator{"", "mock-generator"};
    EndpointConfig judge{"", "mock-judge"};
    EndpointConfig embedder{"", "mock-embedder"};

    double tau_c = 0.7;
    RetrievalConfig retrieval;
    CarsWeights cars_weights;
    CostTable cost;
    GenerationOptions generation;
    ResolveOptions resolve;
    std::string templates_dir = "templates";
    std::uint64_t seed = 42;
    int workers = 1;
    bool parametric = false;  // run the closed-vs-open book check in `ask`
    bool allow_self_judge = false;
    std::string head1_path;  // empty = zero-initialized head (everything escalates)
    std::string head2_path;

    void validate() const;  // paths exist, tau_c in range, weights valid
};

/// Loads a JSON config file. String values support ${ENV_VAR} interpolation;
/// unknown keys are rejected so typos fail loudly.
PipelineConfig load_config(const std::string& path);

/// Replaces each ${NAME} with the environment variable's value (empty when
/// unset).
std::string interpolate_env(const std::string& value);

}  // namespace conflictrag
