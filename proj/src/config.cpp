#include "conflictrag/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "conflictrag/errors.hpp"

namespace conflictrag {

using nlohmann::json;

std::string interpolate_env(const std::string& value) {
    std::string out;
    std::size_t pos = 0;
    while (pos < value.size()) {
        const auto start = value.find("${", pos);
        if (start == std::string::npos) {
            out += value.substr(pos);
            break;
        }
        const auto end = value.find('}', start + 2);
        if (end == std::string::npos) {
            out += value.substr(pos);
            break;
        }
        out += value.substr(pos, start - pos);
        const std::string name = value.substr(start + 2, end - start - 2);
        if (const char* env = std::getenv(name.c_str())) {
            out += env;
        }
        pos = end + 1;
    }
    return out;
}

void PipelineConfig::validate() const {
    if (tau_c < 0.0 || tau_c > 1.0) {
        throw ConfigError("tau_c must be in [0,1]");
    }
    retrieval.validate();
    cars_weights.validate();
    if (!std::filesystem::is_directory(templates_dir)) {
        throw ConfigError("templates_dir '" + templates_dir + "' does not exist");
    }
    for (const std::string& path : {head1_path, head2_path}) {
        if (!path.empty() && !std::filesystem::is_regular_file(path)) {
            throw ConfigError("model file '" + path + "' does not exist");
        }
    }
    if (workers < 1) {
        throw ConfigError("workers must be >= 1");
    }
    if (!mock_providers) {
        for (const EndpointConfig* endpoint : {&generator, &judge, &embedder}) {
            if (endpoint->base_url.empty()) {
                throw ConfigError("live providers need base_url for generator, judge and embedder");
            }
        }
    }
}

namespace {

std::string get_string(const json& j, const char* key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    return interpolate_env(j.at(key).get<std::string>());
}

EndpointConfig parse_endpoint(const json& j, const EndpointConfig& fallback) {
    EndpointConfig endpoint = fallback;
    endpoint.base_url = get_string(j, "base_url", fallback.base_url);
    endpoint.model = get_string(j, "model", fallback.model);
    endpoint.api_key_env = get_string(j, "api_key_env", fallback.api_key_env);
    static const std::set<std::string> known{"base_url", "model", "api_key_env"};
    for (const auto& [key, value] : j.items()) {
        if (known.count(key) == 0) throw ConfigError("unknown endpoint config key '" + key + "'");
    }
    return endpoint;
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }

    static const std::set<std::string> known{
        "mock_providers", "generator", "judge", "embedder", "tau_c", "retrieval",
        "cars_weights", "cost", "generation", "resolve", "templates_dir", "seed",
        "workers", "parametric", "allow_self_judge", "head1_path", "head2_path"};
    for (const auto& [key, value] : j.items()) {
        if (known.count(key) == 0) throw ConfigError("unknown config key '" + key + "'");
    }

    PipelineConfig config;
    config.mock_providers = j.value("mock_providers", config.mock_providers);
    if (j.contains("generator")) config.generator = parse_endpoint(j["generator"], config.generator);
    if (j.contains("judge")) config.judge = parse_endpoint(j["judge"], config.judge);
    if (j.contains("embedder")) config.embedder = parse_endpoint(j["embedder"], config.embedder);
    config.tau_c = j.value("tau_c", config.tau_c);
    if (j.contains("retrieval")) {
        const json& r = j["retrieval"];
        config.retrieval.k = r.value("k", config.retrieval.k);
        config.retrieval.bm25_k1 = r.value("bm25_k1", config.retrieval.bm25_k1);
        config.retrieval.bm25_b = r.value("bm25_b", config.retrieval.bm25_b);
        config.retrieval.rrf_k0 = r.value("rrf_k0", config.retrieval.rrf_k0);
    }
    if (j.contains("cars_weights")) {
        const json& w = j["cars_weights"];
        config.cars_weights.answer = w.value("answer", config.cars_weights.answer);
        config.cars_weights.detection = w.value("detection", config.cars_weights.detection);
        config.cars_weights.resolution = w.value("resolution", config.cars_weights.resolution);
        config.cars_weights.source = w.value("source", config.cars_weights.source);
    }
    if (j.contains("cost")) {
        const json& c = j["cost"];
        config.cost.usd_per_1k_input_tokens =
            c.value("usd_per_1k_input_tokens", config.cost.usd_per_1k_input_tokens);
        config.cost.usd_per_1k_output_tokens =
            c.value("usd_per_1k_output_tokens", config.cost.usd_per_1k_output_tokens);
    }
    if (j.contains("generation")) {
        const json& g = j["generation"];
        config.generation.temperature = g.value("temperature", config.generation.temperature);
        config.generation.token_budget = g.value("token_budget", config.generation.token_budget);
    }
    if (j.contains("resolve")) {
        const json& r = j["resolve"];
        config.resolve.ignore_consistency =
            r.value("ignore_consistency", config.resolve.ignore_consistency);
        if (r.contains("matrix_dump_path")) {
            config.resolve.matrix_dump_path = interpolate_env(r["matrix_dump_path"].get<std::string>());
        }
    }
    config.templates_dir = get_string(j, "templates_dir", config.templates_dir);
    config.seed = j.value("seed", config.seed);
    config.workers = j.value("workers", config.workers);
    config.parametric = j.value("parametric", config.parametric);
    config.allow_self_judge = j.value("allow_self_judge", config.allow_self_judge);
    config.head1_path = get_string(j, "head1_path", config.head1_path);
    config.head2_path = get_string(j, "head2_path", config.head2_path);
    return config;
}

}  // namespace conflictrag
